#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <png.h>

#include "sslkit/data.hpp"
#include "sslkit/errors.hpp"
#include "sslkit/hash.hpp"

namespace sslkit {

namespace fs = std::filesystem;

LabeledDataset::LabeledDataset(std::vector<std::string> class_names,
                               std::vector<ImageSample> samples)
    : class_names_(std::move(class_names)),
      samples_(std::move(samples)),
      class_counts_(class_names_.size(), 0) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const int label = samples_[i].label;
    if (label == kUnlabeled) continue;
    if (label < 0 || static_cast<std::size_t>(label) >= class_names_.size()) {
      throw std::invalid_argument("sample " + std::to_string(i) + " has label " +
                                  std::to_string(label) + " outside [0, " +
                                  std::to_string(class_names_.size()) + ")");
    }
    ++class_counts_[static_cast<std::size_t>(label)];
  }
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.label);
  return out;
}

std::vector<std::vector<std::size_t>> LabeledDataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(class_names_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].label != kUnlabeled) out[static_cast<std::size_t>(samples_[i].label)].push_back(i);
  }
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<ImageSample> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= samples_.size()) throw std::out_of_range("subset index " + std::to_string(i));
    picked.push_back(samples_[i]);
  }
  return LabeledDataset(class_names_, std::move(picked));
}

std::string LabeledDataset::fingerprint() const {
  Fnv1a h;
  for (const auto& name : class_names_) {
    h.update(name);
    h.update(std::string_view("\0", 1));
  }
  for (const auto& s : samples_) {
    h.update_value(static_cast<std::int32_t>(s.label));
    h.update_value(static_cast<std::uint32_t>(s.image.height));
    h.update_value(static_cast<std::uint32_t>(s.image.width));
    h.update(s.image.pixels);
  }
  return h.hex();
}

// ---------------------------------------------------------------------------
// PNG

RgbImage read_png(const fs::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw DataError("cannot decode image " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  RgbImage out(img.height, img.width);
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode image " + path.string() + ": " + img.message);
  }
  return out;
}

void write_png(const fs::path& path, const RgbImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw DataError("cannot write image " + path.string() + ": " + img.message);
  }
}

// ---------------------------------------------------------------------------
// Manifest directories

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && s[start] == ' ') ++start;
  return s.substr(start);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(trim(line));
  return lines;
}

}  // namespace

LabeledDataset ingest(const fs::path& root, const fs::path& manifest,
                      std::optional<std::vector<std::string>> class_names) {
  const auto lines = read_lines(manifest);
  if (lines.empty() || lines.front() != "path,label") {
    throw DataError("manifest " + manifest.string() + " must start with header 'path,label'");
  }
  std::map<std::string, int> class_index;
  std::vector<std::string> names;
  if (class_names) {
    names = *class_names;
    for (std::size_t i = 0; i < names.size(); ++i) class_index[names[i]] = static_cast<int>(i);
  }
  std::vector<ImageSample> samples;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto& line = lines[n];
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DataError("manifest " + manifest.string() + " line " + std::to_string(n + 1) +
                      ": expected 'path,label'");
    }
    const std::string rel = trim(line.substr(0, comma));
    const std::string label = trim(line.substr(comma + 1));
    const fs::path file = root / rel;
    auto it = class_index.find(label);
    if (it == class_index.end()) {
      if (class_names) {
        throw DataError("unknown label '" + label + "' for " + file.string() +
                        " (not in class list)");
      }
      it = class_index.emplace(label, static_cast<int>(names.size())).first;
      names.push_back(label);
    }
    if (!fs::exists(file)) throw DataError("missing image file " + file.string());
    samples.push_back({read_png(file), it->second});
  }
  return LabeledDataset(std::move(names), std::move(samples));
}

LabeledDataset ingest(const fs::path& dir) {
  std::optional<std::vector<std::string>> names;
  if (fs::exists(dir / "classes.txt")) {
    std::vector<std::string> list;
    for (auto& l : read_lines(dir / "classes.txt"))
      if (!l.empty()) list.push_back(l);
    names = std::move(list);
  }
  return ingest(dir, dir / "manifest.csv", std::move(names));
}

LabeledDataset load_dataset(const fs::path& path) {
  if (fs::is_regular_file(path)) return read_packed(path);
  if (fs::is_directory(path)) {
    if (fs::exists(path / "manifest.csv")) return ingest(path);
    if (fs::exists(path / "dataset.imset")) return read_packed(path / "dataset.imset");
  }
  throw DataError("no dataset at " + path.string() + " (expected manifest.csv or .imset)");
}

void write_dataset_dir(const fs::path& dir, const LabeledDataset& dataset) {
  fs::create_directories(dir / "images");
  std::ofstream classes(dir / "classes.txt");
  for (const auto& n : dataset.class_names()) classes << n << '\n';
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest || !classes) throw DataError("cannot write dataset files in " + dir.string());
  manifest << "path,label\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    const std::string& cls = dataset.class_names()[static_cast<std::size_t>(s.label)];
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", i);
    const fs::path rel = fs::path("images") / cls / name;
    fs::create_directories(dir / "images" / cls);
    write_png(dir / rel, s.image);
    manifest << rel.generic_string() << ',' << cls << '\n';
  }
}

// ---------------------------------------------------------------------------
// Packed container

namespace {

constexpr char kPackedMagic[6] = {'I', 'M', 'S', 'E', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated packed file " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_packed(const fs::path& path, const LabeledDataset& dataset) {
  std::size_t h = 0;
  std::size_t w = 0;
  if (!dataset.empty()) {
    h = dataset[0].image.height;
    w = dataset[0].image.width;
  }
  for (const auto& s : dataset.samples()) {
    if (s.image.height != h || s.image.width != w)
      throw DataError("packed format needs uniform image size");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kPackedMagic, sizeof kPackedMagic);
  put_u32(out, static_cast<std::uint32_t>(dataset.num_classes()));
  put_u32(out, static_cast<std::uint32_t>(dataset.size()));
  put_u32(out, static_cast<std::uint32_t>(h));
  put_u32(out, static_cast<std::uint32_t>(w));
  for (const auto& name : dataset.class_names()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (const auto& s : dataset.samples()) put_u32(out, static_cast<std::uint32_t>(s.label));
  for (const auto& s : dataset.samples())
    out.write(reinterpret_cast<const char*>(s.image.pixels.data()),
              static_cast<std::streamsize>(s.image.pixels.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

LabeledDataset read_packed(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[sizeof kPackedMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kPackedMagic, sizeof magic) != 0) {
    throw DataError("bad magic in packed file " + path.string());
  }
  const std::uint32_t num_classes = get_u32(in, path);
  const std::uint32_t num_samples = get_u32(in, path);
  const std::uint32_t h = get_u32(in, path);
  const std::uint32_t w = get_u32(in, path);
  std::vector<std::string> names(num_classes);
  for (auto& name : names) {
    const std::uint32_t len = get_u32(in, path);
    name.resize(len);
    if (!in.read(name.data(), len)) throw DataError("truncated packed file " + path.string());
  }
  std::vector<ImageSample> samples(num_samples);
  for (auto& s : samples) s.label = static_cast<std::int32_t>(get_u32(in, path));
  for (auto& s : samples) {
    s.image = RgbImage(h, w);
    if (!in.read(reinterpret_cast<char*>(s.image.pixels.data()),
                 static_cast<std::streamsize>(s.image.pixels.size()))) {
      throw DataError("truncated packed file " + path.string());
    }
  }
  try {
    return LabeledDataset(std::move(names), std::move(samples));
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace sslkit

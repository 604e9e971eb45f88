#include "sslkit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sslkit/errors.hpp"
#include "sslkit/hash.hpp"

namespace sslkit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'S', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void read(void* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof(T));
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct TensorList {
  nlohmann::json index = nlohmann::json::array();
  std::string data;

  void add(const std::string& name, std::span<const double> values) {
    index.push_back({{"name", name}, {"count", values.size()}});
    data.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  }
};

std::string regime_or_throw(const nlohmann::json& h) { return h.at("regime").get<std::string>(); }

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const TrainedModel& m = ck.model;
  TensorList tensors;
  std::vector<double> stats;
  for (double v : m.standardization.mean) stats.push_back(v);
  for (double v : m.standardization.std) stats.push_back(v);
  tensors.add("standardization", stats);
  tensors.add("encoder", m.encoder.parameters());

  nlohmann::json header = {
      {"regime", regime_name(m.regime)},
      {"class_names", m.class_names},
      {"encoder", {{"kind", m.encoder.kind()}, {"config", encoder_config_to_json(m.encoder.config())}}},
      {"epoch", ck.epoch},
      {"metric", ck.metric ? nlohmann::json(*ck.metric) : nlohmann::json(nullptr)},
      {"config", ck.config},
      {"classifier", nullptr},
      {"projection", nullptr},
      {"prototypes", nullptr},
  };
  if (m.classifier) {
    const auto& l = m.classifier->linear;
    header["classifier"] = {{"in", l.in_dim()}, {"out", l.out_dim()}};
    tensors.add("classifier.weight", l.weight.data());
    tensors.add("classifier.bias", l.bias);
  }
  if (m.projection) {
    const auto& l = m.projection->linear;
    header["projection"] = {{"in", l.in_dim()},
                            {"out", l.out_dim()},
                            {"kind", m.projection->kind == ProjectionKind::kSwav ? "swav" : "supcon"}};
    tensors.add("projection.weight", l.weight.data());
    tensors.add("projection.bias", l.bias);
  }
  if (m.prototypes) {
    header["prototypes"] = {{"count", m.prototypes->size()},
                            {"dim", m.prototypes->dim()},
                            {"frozen", m.prototypes->frozen()}};
    tensors.add("prototypes", m.prototypes->vectors().data());
  }
  header["tensors"] = tensors.index;

  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  out += tensors.data;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  char magic[8];
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a checkpoint file (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = in.get<std::uint64_t>();
  if (header_len > in.remaining()) throw DataError("checkpoint header truncated");
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);

  Checkpoint ck;
  try {
    const auto h = nlohmann::json::parse(text);
    auto next = [&](std::span<double> dst) { in.read(dst.data(), dst.size_bytes()); };
    // Tensor order and sizes are checked against the header index.
    std::size_t t = 0;
    auto expect = [&](const std::string& name, std::size_t count) {
      const auto& idx = h.at("tensors");
      if (t >= idx.size() || idx[t].at("name") != name || idx[t].at("count").get<std::size_t>() != count) {
        throw DataError("checkpoint tensor '" + name + "' missing or mis-sized");
      }
      ++t;
    };

    TrainedModel& m = ck.model;
    m.regime = parse_regime(regime_or_throw(h));
    m.class_names = h.at("class_names").get<std::vector<std::string>>();
    ck.epoch = h.at("epoch").get<std::size_t>();
    if (!h.at("metric").is_null()) ck.metric = h["metric"].get<double>();
    ck.config = h.at("config");

    std::vector<double> stats(6);
    expect("standardization", 6);
    next(stats);
    for (int c = 0; c < 3; ++c) {
      m.standardization.mean[c] = stats[c];
      m.standardization.std[c] = stats[3 + c];
    }

    const auto& enc = h.at("encoder");
    if (enc.at("kind") != "reference-conv2") {
      throw DataError("unknown encoder kind " + enc.at("kind").dump());
    }
    m.encoder = ReferenceEncoder(encoder_config_from_json(enc.at("config")));
    expect("encoder", m.encoder.parameter_count());
    next(m.encoder.parameters());

    if (!h.at("classifier").is_null()) {
      const auto& c = h["classifier"];
      ClassifierHead head{LinearLayer(c.at("in").get<std::size_t>(), c.at("out").get<std::size_t>())};
      expect("classifier.weight", head.linear.weight.size());
      next(head.linear.weight.data());
      expect("classifier.bias", head.linear.bias.size());
      next(head.linear.bias);
      m.classifier = std::move(head);
    }
    if (!h.at("projection").is_null()) {
      const auto& p = h["projection"];
      ProjectionHead head{LinearLayer(p.at("in").get<std::size_t>(), p.at("out").get<std::size_t>()),
                          p.at("kind") == "supcon" ? ProjectionKind::kSupcon : ProjectionKind::kSwav};
      expect("projection.weight", head.linear.weight.size());
      next(head.linear.weight.data());
      expect("projection.bias", head.linear.bias.size());
      next(head.linear.bias);
      m.projection = std::move(head);
    }
    if (!h.at("prototypes").is_null()) {
      const auto& p = h["prototypes"];
      Matrix v(p.at("count").get<std::size_t>(), p.at("dim").get<std::size_t>());
      expect("prototypes", v.size());
      next(v.data());
      // Stored vectors are already unit-norm; bypass the normalizing
      // constructor so the bytes survive unchanged.
      PrototypeBank bank;
      bank.mutable_vectors() = std::move(v);
      bank.set_frozen(p.at("frozen").get<bool>());
      m.prototypes = std::move(bank);
    }
    if (in.remaining() != 0) throw DataError("checkpoint has " + std::to_string(in.remaining()) + " trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

std::string encoder_fingerprint(const Encoder& encoder) {
  Fnv1a h;
  h.update(encoder.kind());
  h.update(encoder.architecture().dump());
  h.update_values(encoder.parameters());
  return h.hex();
}

}  // namespace sslkit

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "sslkit/model.hpp"

namespace sslkit {

struct Checkpoint {
  TrainedModel model;
  nlohmann::json config;  // resolved TrainConfig, informational
  std::size_t epoch = 0;
  std::optional<double> metric;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Binary layout: "SSLCKPT\0", u32 version, u64 header length, JSON header,
// then every tensor as raw little-endian f64 in header order. Round trips are
// bit-exact.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the encoder kind and raw parameter bytes.
std::string encoder_fingerprint(const Encoder& encoder);

}  // namespace sslkit

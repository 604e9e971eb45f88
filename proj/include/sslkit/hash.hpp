#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace sslkit {

// 64-bit FNV-1a, used for content fingerprints of datasets, parameters and files.
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes) {
    for (std::uint8_t b : bytes) {
      state_ ^= b;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) {
    update({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  }
  template <typename T>
  void update_value(const T& v) {
    update({reinterpret_cast<const std::uint8_t*>(&v), sizeof(T)});
  }
  template <typename T>
  void update_values(std::span<const T> values) {
    update({reinterpret_cast<const std::uint8_t*>(values.data()), values.size_bytes()});
  }

  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_file(const std::string& path);

}  // namespace sslkit

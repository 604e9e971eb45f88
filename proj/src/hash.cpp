#include "sslkit/hash.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <vector>

#include "sslkit/errors.hpp"

namespace sslkit {

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Fnv1a h;
  h.update({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  return h.hex();
}

}  // namespace sslkit

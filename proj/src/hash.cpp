#include "gridhmc/hash.hpp"

#include <fstream>
#include <sstream>

#include "gridhmc/errors.hpp"

namespace gridhmc {

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file for hashing: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hash_hex(buf.str());
}

}  // namespace gridhmc

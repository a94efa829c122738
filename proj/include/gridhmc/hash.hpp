#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gridhmc {

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t state = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 1099511628211ull;
  }
  return state;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

inline std::string hash_hex(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

// Content hash of a file; throws ValidationError if unreadable.
std::string hash_file(const std::string& path);

}  // namespace gridhmc

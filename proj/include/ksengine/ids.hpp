#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "ksengine/error.hpp"

namespace ks {

// Ids are drawn from [A-Za-z0-9_.-] so they never need escaping.
inline bool is_valid_id(std::string_view id) noexcept {
  if (id.empty()) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

inline void require_id(std::string_view id, std::string_view what = "id") {
  if (!is_valid_id(id)) {
    throw Error(Errc::invalid_id, std::string(what) + " '" + std::string(id) + "'");
  }
}

inline bool is_variable(std::string_view term) noexcept {
  return term.size() > 1 && term.front() == '?';
}

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

/// `prefix` followed by a zero-padded serial, e.g. n000042.
inline std::string serial_id(char prefix, std::size_t serial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, serial);
  return buf;
}

}  // namespace ks

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

#include "ksengine/error.hpp"

namespace ks {

struct FileRef {
  std::string path;
  friend auto operator<=>(const FileRef&, const FileRef&) = default;
};

struct ClassRef {
  std::string name;
  friend auto operator<=>(const ClassRef&, const ClassRef&) = default;
};

/// Machine-level value: text | integer | real | file-reference | class-reference.
using Scalar = std::variant<std::string, std::int64_t, double, FileRef, ClassRef>;

using Attributes = std::map<std::string, Scalar>;

/// Shortest decimal form that parses back to the identical double.
inline std::string format_real(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, end);
}

inline bool parse_real(std::string_view text, double& out) {
  if (text.empty()) return false;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && end == text.data() + text.size() && std::isfinite(out);
}

inline bool parse_integer(std::string_view text, std::int64_t& out) {
  if (text.empty()) return false;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && end == text.data() + text.size();
}

// Tagged text form: t:<text> i:<int> r:<real> f:<path> c:<class>.
inline std::string encode_scalar(const Scalar& value) {
  struct Visitor {
    std::string operator()(const std::string& s) const { return "t:" + s; }
    std::string operator()(std::int64_t i) const { return "i:" + std::to_string(i); }
    std::string operator()(double d) const { return "r:" + format_real(d); }
    std::string operator()(const FileRef& f) const { return "f:" + f.path; }
    std::string operator()(const ClassRef& c) const { return "c:" + c.name; }
  };
  return std::visit(Visitor{}, value);
}

inline Scalar decode_scalar(std::string_view text) {
  if (text.size() < 2 || text[1] != ':') {
    throw Error(Errc::malformed_record, "scalar '" + std::string(text) + "' lacks a type tag");
  }
  const std::string_view body = text.substr(2);
  switch (text[0]) {
    case 't': return std::string(body);
    case 'f': return FileRef{std::string(body)};
    case 'c': return ClassRef{std::string(body)};
    case 'i': {
      std::int64_t v = 0;
      if (!parse_integer(body, v)) break;
      return v;
    }
    case 'r': {
      double v = 0;
      if (!parse_real(body, v)) break;
      return v;
    }
    default: break;
  }
  throw Error(Errc::malformed_record, "bad scalar '" + std::string(text) + "'");
}

/// Attribute values are limited to text, integer and real.
inline bool is_attribute_scalar(const Scalar& value) noexcept {
  return std::holds_alternative<std::string>(value) ||
         std::holds_alternative<std::int64_t>(value) || std::holds_alternative<double>(value);
}

/// Machine (rep_c), label (word), human (rep_h) and knowledge (rep_k) levels.
struct RepBundle {
  Scalar rep_c = std::string();
  std::string word;
  std::string rep_h;
  std::set<std::string> rep_k;

  friend bool operator==(const RepBundle&, const RepBundle&) = default;
};

inline RepBundle make_rep(std::string word, std::string rep_h = {},
                          std::set<std::string> rep_k = {}) {
  RepBundle rep;
  rep.rep_c = word;
  rep.word = std::move(word);
  rep.rep_h = std::move(rep_h);
  rep.rep_k = std::move(rep_k);
  return rep;
}

}  // namespace ks

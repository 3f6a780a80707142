#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace convoforge {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts,
                        std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

inline std::size_t word_count(std::string_view s) {
  return split_ws(s).size();
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

inline bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

// Fixed six-fractional-digit decimal, the bit-exact number format of the
// timeline interchange file.
inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Quantize to the fixed6 grid (microseconds) so in-memory values equal their
// serialized form.
inline double quantize6(double v) {
  return std::llround(v * 1e6) / 1e6;
}

// Decode one UTF-8 codepoint starting at i; advances i. Malformed bytes are
// returned verbatim as single-byte codepoints so normalization never throws.
inline std::uint32_t utf8_next(std::string_view s, std::size_t& i) {
  const unsigned char c0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xc0) == 0x80;
  };
  if (c0 < 0x80) {
    ++i;
    return c0;
  }
  if ((c0 & 0xe0) == 0xc0 && cont(1)) {
    std::uint32_t cp = (c0 & 0x1fu) << 6 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3fu);
    i += 2;
    return cp;
  }
  if ((c0 & 0xf0) == 0xe0 && cont(1) && cont(2)) {
    std::uint32_t cp = (c0 & 0x0fu) << 12 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3fu) << 6 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3fu);
    i += 3;
    return cp;
  }
  if ((c0 & 0xf8) == 0xf0 && cont(1) && cont(2) && cont(3)) {
    std::uint32_t cp = (c0 & 0x07u) << 18 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3fu) << 12 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3fu) << 6 |
                       (static_cast<unsigned char>(s[i + 3]) & 0x3fu);
    i += 4;
    return cp;
  }
  ++i;
  return c0;
}

// Minimal {{key}} template substitution for the prompt data files.
// Unknown keys are left in place so template errors are visible in audits.
inline std::string render_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string, std::string>>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
      std::size_t close = tmpl.find("}}", i + 2);
      if (close != std::string_view::npos) {
        std::string key(tmpl.substr(i + 2, close - i - 2));
        bool found = false;
        for (const auto& [k, v] : vars) {
          if (k == key) {
            out += v;
            found = true;
            break;
          }
        }
        if (!found) out += std::string(tmpl.substr(i, close + 2 - i));
        i = close + 2;
        continue;
      }
    }
    out += tmpl[i];
    ++i;
  }
  return out;
}

}  // namespace convoforge

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "convoforge/text.hpp"

// Deterministic text normalization chain used by WER, ROUGE tokenization,
// and quote grounding. Two ordered stages:
//   ascii_fold      curly quotes -> straight, unicode dashes -> hyphen,
//                   ligature + accent fold, unicode spaces -> space,
//                   remaining non-ASCII dropped. Output is pure ASCII.
//   transcript_norm lowercase, spell out a small fixed symbol table,
//                   strip punctuation except intra-word apostrophes,
//                   collapse whitespace.
// Both stages are idempotent, so the chain is too.

namespace convoforge {

namespace detail {

inline const char* fold_codepoint(std::uint32_t cp) {
  switch (cp) {
    case 0x2018: case 0x2019: case 0x201A: case 0x201B:
    case 0x2032: case 0x02BC:
      return "'";
    case 0x201C: case 0x201D: case 0x201E: case 0x201F: case 0x2033:
      return "\"";
    case 0x2010: case 0x2011: case 0x2012: case 0x2013:
    case 0x2014: case 0x2015: case 0x2212:
      return "-";
    case 0x2026:
      return "...";
    case 0x00A0: case 0x2000: case 0x2001: case 0x2002: case 0x2003:
    case 0x2004: case 0x2005: case 0x2006: case 0x2007: case 0x2008:
    case 0x2009: case 0x200A: case 0x202F: case 0x205F: case 0x3000:
      return " ";
    case 0x200B: case 0x200C: case 0x200D: case 0xFEFF:
      return "";
    case 0xFB00: return "ff";
    case 0xFB01: return "fi";
    case 0xFB02: return "fl";
    case 0xFB03: return "ffi";
    case 0xFB04: return "ffl";
    case 0xFB05: return "ft";
    case 0xFB06: return "st";
    default: return nullptr;
  }
}

// Latin-1 supplement + Latin Extended-A accent folding.
inline const char* fold_accent(std::uint32_t cp) {
  if (cp < 0x00C0 || cp > 0x017F) return nullptr;
  static const struct { std::uint32_t lo, hi; const char* s; } table[] = {
      {0x00C0, 0x00C5, "A"}, {0x00C6, 0x00C6, "AE"}, {0x00C7, 0x00C7, "C"},
      {0x00C8, 0x00CB, "E"}, {0x00CC, 0x00CF, "I"},  {0x00D0, 0x00D0, "D"},
      {0x00D1, 0x00D1, "N"}, {0x00D2, 0x00D6, "O"},  {0x00D8, 0x00D8, "O"},
      {0x00D9, 0x00DC, "U"}, {0x00DD, 0x00DD, "Y"},  {0x00DF, 0x00DF, "ss"},
      {0x00E0, 0x00E5, "a"}, {0x00E6, 0x00E6, "ae"}, {0x00E7, 0x00E7, "c"},
      {0x00E8, 0x00EB, "e"}, {0x00EC, 0x00EF, "i"},  {0x00F0, 0x00F0, "d"},
      {0x00F1, 0x00F1, "n"}, {0x00F2, 0x00F6, "o"},  {0x00F8, 0x00F8, "o"},
      {0x00F9, 0x00FC, "u"}, {0x00FD, 0x00FD, "y"},  {0x00FF, 0x00FF, "y"},
      {0x0100, 0x0105, "a"}, {0x0106, 0x010D, "c"},  {0x010E, 0x0111, "d"},
      {0x0112, 0x011B, "e"}, {0x011C, 0x0123, "g"},  {0x0124, 0x0127, "h"},
      {0x0128, 0x0131, "i"}, {0x0132, 0x0133, "ij"}, {0x0134, 0x0135, "j"},
      {0x0136, 0x0138, "k"}, {0x0139, 0x0142, "l"},  {0x0143, 0x0149, "n"},
      {0x014A, 0x014B, "n"}, {0x014C, 0x0151, "o"},  {0x0152, 0x0152, "OE"},
      {0x0153, 0x0153, "oe"},{0x0154, 0x0159, "r"},  {0x015A, 0x0161, "s"},
      {0x0162, 0x0167, "t"}, {0x0168, 0x0173, "u"},  {0x0174, 0x0175, "w"},
      {0x0176, 0x0178, "y"}, {0x0179, 0x017E, "z"},
  };
  for (const auto& row : table)
    if (cp >= row.lo && cp <= row.hi) return row.s;
  return nullptr;
}

}  // namespace detail

inline std::string ascii_fold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      out += static_cast<char>(c);
      ++i;
      continue;
    }
    const std::uint32_t cp = utf8_next(text, i);
    if (const char* rep = detail::fold_codepoint(cp)) {
      out += rep;
    } else if (const char* acc = detail::fold_accent(cp)) {
      out += acc;
    }
    // other non-ASCII codepoints are dropped
  }
  return out;
}

// Symbols spelled out wherever they appear; the padding spaces collapse in
// the final pass, so "50%" -> "50 percent".
inline const std::vector<std::pair<char, std::string>>& symbol_table() {
  static const std::vector<std::pair<char, std::string>> table = {
      {'%', "percent"}, {'&', "and"},     {'+', "plus"},
      {'@', "at"},      {'$', "dollars"}, {'=', "equals"},
  };
  return table;
}

inline std::string transcript_norm(std::string_view text) {
  std::string lowered = to_lower_ascii(text);
  std::string spelled;
  spelled.reserve(lowered.size());
  for (char c : lowered) {
    bool replaced = false;
    for (const auto& [sym, word] : symbol_table()) {
      if (c == sym) {
        spelled += ' ';
        spelled += word;
        spelled += ' ';
        replaced = true;
        break;
      }
    }
    if (!replaced) spelled += c;
  }
  std::string stripped;
  stripped.reserve(spelled.size());
  auto alnum = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
  };
  for (std::size_t i = 0; i < spelled.size(); ++i) {
    const char c = spelled[i];
    if (alnum(c)) {
      stripped += c;
    } else if (c == '\'' && i > 0 && i + 1 < spelled.size() &&
               alnum(spelled[i - 1]) && alnum(spelled[i + 1])) {
      stripped += c;  // intra-word apostrophe
    } else {
      stripped += ' ';
    }
  }
  return join(split_ws(stripped), " ");
}

struct NormalizerChain {
  bool fold = true;
  bool transcript = true;

  std::string apply(std::string_view text) const {
    std::string s = fold ? ascii_fold(text) : std::string(text);
    if (transcript) s = transcript_norm(s);
    return s;
  }

  std::vector<std::string> tokenize(std::string_view text) const {
    return split_ws(apply(text));
  }
};

// Normalized-substring check shared by fact grounding and judge evidence
// verification. Empty quotes never ground.
inline bool normalized_contains(const NormalizerChain& chain,
                                std::string_view haystack,
                                std::string_view needle) {
  const std::string n = chain.apply(needle);
  if (n.empty()) return false;
  const std::string h = " " + chain.apply(haystack) + " ";
  return h.find(" " + n + " ") != std::string::npos;
}

}  // namespace convoforge

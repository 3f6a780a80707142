#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "convoforge/common.hpp"
#include "convoforge/io.hpp"
#include "convoforge/normalize.hpp"
#include "convoforge/text.hpp"

namespace convoforge::metrics {

// ----- WER ---------------------------------------------------------------

struct WerResult {
  double wer = 0.0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_words = 0;
};

// Levenshtein word alignment on normalized token sequences.
// WER = (S + D + I) / N_ref.
inline WerResult wer(std::string_view reference, std::string_view hypothesis,
                     const NormalizerChain& chain = {}) {
  const auto ref = chain.tokenize(reference);
  const auto hyp = chain.tokenize(hypothesis);
  if (ref.empty())
    throw ValidationError("wer: reference empty after normalization");
  const std::size_t n = ref.size(), m = hyp.size();
  // cost matrix plus backtrace over {match, sub, del, ins}
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (ref[i - 1] == hyp[j - 1]) {
        d[i][j] = d[i - 1][j - 1];
      } else {
        d[i][j] = 1 + std::min({d[i - 1][j - 1], d[i - 1][j], d[i][j - 1]});
      }
    }
  }
  WerResult r;
  r.ref_words = static_cast<int>(n);
  // backtrace, preferring substitution on ties (standard convention)
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        d[i][j] == d[i - 1][j - 1]) {
      --i;
      --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  r.wer = static_cast<double>(r.substitutions + r.deletions + r.insertions) /
          static_cast<double>(n);
  return r;
}

// ----- ROUGE -------------------------------------------------------------

enum class RougeVariant { R2, R3, RL };

struct RougeScore {
  double f1 = 0.0;
  bool degenerate = false;  // one side had no tokens / no n-grams
};

namespace detail {

inline std::map<std::string, int> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::string, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1
                                      : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double f1_from(double matched, double hyp_total, double ref_total) {
  if (hyp_total <= 0.0 || ref_total <= 0.0) return 0.0;
  const double p = matched / hyp_total;
  const double r = matched / ref_total;
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

}  // namespace detail

inline RougeScore rouge_f1(std::string_view reference,
                           std::string_view hypothesis, RougeVariant variant,
                           const NormalizerChain& chain = {}) {
  const auto ref = chain.tokenize(reference);
  const auto hyp = chain.tokenize(hypothesis);
  RougeScore score;
  if (ref.empty() || hyp.empty()) {
    score.degenerate = true;
    return score;
  }
  if (variant == RougeVariant::RL) {
    const double lcs = static_cast<double>(detail::lcs_length(ref, hyp));
    score.f1 = detail::f1_from(lcs, static_cast<double>(hyp.size()),
                               static_cast<double>(ref.size()));
    return score;
  }
  const std::size_t n = variant == RougeVariant::R2 ? 2 : 3;
  const auto ref_counts = detail::ngram_counts(ref, n);
  const auto hyp_counts = detail::ngram_counts(hyp, n);
  double ref_total = 0.0, hyp_total = 0.0, matched = 0.0;
  for (const auto& [g, c] : ref_counts) ref_total += c;
  for (const auto& [g, c] : hyp_counts) {
    hyp_total += c;
    auto it = ref_counts.find(g);
    if (it != ref_counts.end()) matched += std::min(c, it->second);
  }
  if (ref_total == 0.0 || hyp_total == 0.0) {
    score.degenerate = true;
    return score;
  }
  score.f1 = detail::f1_from(matched, hyp_total, ref_total);
  return score;
}

// ----- Medical concept F1 --------------------------------------------------

// Lexicon file format: one concept per line, canonical term, tab, then
// tab-separated surface variants. '#' lines are comments.
class ConceptLexicon {
 public:
  static ConceptLexicon load(const std::filesystem::path& path) {
    ConceptLexicon lex;
    lex.source_tag_ = path.filename().string();
    for (const std::string& raw : io::read_lines(path)) {
      const std::string line = trim(raw);
      if (line.empty() || line[0] == '#') continue;
      auto cols = split_on(line, '\t');
      const std::string canonical = trim(cols[0]);
      if (canonical.empty()) continue;
      lex.add(canonical, {cols.begin() + 1, cols.end()});
    }
    return lex;
  }

  void add(const std::string& canonical,
           const std::vector<std::string>& variants) {
    NormalizerChain chain;
    if (!canonical_.insert(canonical).second)
      throw ValidationError("duplicate canonical concept: " + canonical);
    auto add_variant = [&](const std::string& v) {
      const auto tokens = chain.tokenize(v);
      if (tokens.empty()) return;
      const std::string key = join(tokens, " ");
      auto it = variant_to_canonical_.find(key);
      if (it != variant_to_canonical_.end() && it->second != canonical)
        throw ValidationError("variant '" + v + "' maps to both '" +
                              it->second + "' and '" + canonical + "'");
      variant_to_canonical_[key] = canonical;
      max_tokens_ = std::max(max_tokens_, tokens.size());
    };
    add_variant(canonical);
    for (const auto& v : variants) add_variant(trim(v));
  }

  bool empty() const { return variant_to_canonical_.empty(); }
  std::size_t concept_count() const { return canonical_.size(); }
  const std::string& source_tag() const { return source_tag_; }

  // Longest-match scan over the normalized token sequence.
  std::set<std::string> extract(std::string_view text,
                                const NormalizerChain& chain = {}) const {
    std::set<std::string> found;
    const auto tokens = chain.tokenize(text);
    std::size_t i = 0;
    while (i < tokens.size()) {
      bool hit = false;
      const std::size_t max_len =
          std::min(max_tokens_, tokens.size() - i);
      for (std::size_t len = max_len; len >= 1; --len) {
        std::string key = tokens[i];
        for (std::size_t k = 1; k < len; ++k) key += " " + tokens[i + k];
        auto it = variant_to_canonical_.find(key);
        if (it != variant_to_canonical_.end()) {
          found.insert(it->second);
          i += len;
          hit = true;
          break;
        }
      }
      if (!hit) ++i;
    }
    return found;
  }

 private:
  std::set<std::string> canonical_;
  std::map<std::string, std::string> variant_to_canonical_;
  std::size_t max_tokens_ = 1;
  std::string source_tag_ = "inline";
};

struct ConceptF1 {
  double f1 = 0.0;
  bool vacuous = false;  // both sides empty -> 1.0 by convention
  std::set<std::string> reference_concepts;
  std::set<std::string> hypothesis_concepts;
};

using ConceptTagger =
    std::function<std::vector<std::string>(const std::string&)>;

inline ConceptF1 concept_f1(std::string_view reference,
                            std::string_view hypothesis,
                            const ConceptLexicon& lexicon,
                            const ConceptTagger& tagger = nullptr,
                            const NormalizerChain& chain = {}) {
  if (lexicon.empty() && !tagger)
    throw ConfigError("concept_f1: empty lexicon and no tagger configured");
  ConceptF1 out;
  out.reference_concepts = lexicon.extract(reference, chain);
  out.hypothesis_concepts = lexicon.extract(hypothesis, chain);
  if (tagger) {
    for (const auto& c : tagger(std::string(reference)))
      out.reference_concepts.insert(c);
    for (const auto& c : tagger(std::string(hypothesis)))
      out.hypothesis_concepts.insert(c);
  }
  if (out.reference_concepts.empty() && out.hypothesis_concepts.empty()) {
    out.f1 = 1.0;
    out.vacuous = true;
    return out;
  }
  std::size_t common = 0;
  for (const auto& c : out.hypothesis_concepts)
    if (out.reference_concepts.count(c)) ++common;
  out.f1 = detail::f1_from(static_cast<double>(common),
                           static_cast<double>(out.hypothesis_concepts.size()),
                           static_cast<double>(out.reference_concepts.size()));
  return out;
}

// ----- Gunning fog ---------------------------------------------------------

namespace detail {

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

// Vowel-group heuristic with a silent-e rule and a small frozen exception
// list. Exact linguistics is out of scope; golden tests pin the behavior.
inline int syllable_count(std::string_view word_in) {
  std::string word;
  for (char c : word_in)
    if ((c >= 'a' && c <= 'z')) word += c;
  if (word.empty()) return 0;
  static const std::map<std::string, int> exceptions = {
      {"people", 2}, {"does", 1},  {"goes", 1},   {"been", 1},
      {"business", 2}, {"every", 2}, {"different", 3},
  };
  auto ex = exceptions.find(word);
  if (ex != exceptions.end()) return ex->second;
  int groups = 0;
  bool in_group = false;
  for (char c : word) {
    if (is_vowel(c)) {
      if (!in_group) ++groups;
      in_group = true;
    } else {
      in_group = false;
    }
  }
  // silent trailing 'e' ("make"), unless consonant + "le" ("table")
  if (word.size() >= 3 && word.back() == 'e' && !is_vowel(word[word.size() - 2]) &&
      groups > 1) {
    if (!(word[word.size() - 2] == 'l' && !is_vowel(word[word.size() - 3])))
      --groups;
  }
  return std::max(groups, 1);
}

// Complex word: >= 3 syllables after dropping a bare -es/-ed inflation.
// Hyphenated compounds are judged part by part.
inline bool is_complex_word(std::string_view token) {
  std::string word = to_lower_ascii(token);
  std::string part;
  auto complex_part = [](std::string p) {
    if (p.size() > 4 &&
        (p.ends_with("es") || p.ends_with("ed")))
      p = p.substr(0, p.size() - 2);
    return syllable_count(p) >= 3;
  };
  for (char c : word + "-") {
    if (c == '-') {
      if (!part.empty() && complex_part(part)) return true;
      part.clear();
    } else if (c >= 'a' && c <= 'z') {
      part += c;
    }
  }
  return false;
}

}  // namespace detail

struct FogBreakdown {
  double score = 0.0;
  int sentences = 0;
  int words = 0;
  int complex_words = 0;
};

inline FogBreakdown gunning_fog_breakdown(std::string_view text) {
  const std::string folded = ascii_fold(text);
  // sentence segmentation: [.!?]+ boundaries; a sentence needs alnum content
  std::vector<std::string> sentences;
  std::string cur;
  for (std::size_t i = 0; i < folded.size(); ++i) {
    const char c = folded[i];
    cur += c;
    if (c == '.' || c == '!' || c == '?') {
      while (i + 1 < folded.size() &&
             (folded[i + 1] == '.' || folded[i + 1] == '!' ||
              folded[i + 1] == '?'))
        cur += folded[++i];
      sentences.push_back(cur);
      cur.clear();
    }
  }
  if (!trim(cur).empty()) sentences.push_back(cur);
  FogBreakdown fog;
  for (const auto& sentence : sentences) {
    bool has_alnum = false;
    for (char c : sentence)
      if (std::isalnum(static_cast<unsigned char>(c))) has_alnum = true;
    if (!has_alnum) continue;
    ++fog.sentences;
    for (const auto& token : split_ws(sentence)) {
      bool token_alnum = false;
      for (char c : token)
        if (std::isalnum(static_cast<unsigned char>(c))) token_alnum = true;
      if (!token_alnum) continue;
      ++fog.words;
      if (detail::is_complex_word(token)) ++fog.complex_words;
    }
  }
  if (fog.sentences == 0 || fog.words == 0)
    throw ValidationError("gunning_fog: no sentences in text");
  fog.score = 0.4 * (static_cast<double>(fog.words) / fog.sentences +
                     100.0 * static_cast<double>(fog.complex_words) /
                         fog.words);
  return fog;
}

inline double gunning_fog(std::string_view text) {
  return gunning_fog_breakdown(text).score;
}

// ----- Simple aggregates ----------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n-1); 0 when n < 2
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return out;
}

}  // namespace convoforge::metrics

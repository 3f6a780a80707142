#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/common.hpp"
#include "convoforge/dialogue.hpp"
#include "convoforge/gateway.hpp"
#include "convoforge/normalize.hpp"
#include "convoforge/notes.hpp"

namespace convoforge::judge {

using nlohmann::json;
using dialogue::DialogueTranscript;
using dialogue::PromptLibrary;
using notes::SoapNote;

// ----- Claims ----------------------------------------------------------------

struct Claim {
  std::string id;
  std::string statement;
  std::string section;  // source SOAP section key
};

struct ClaimSet {
  std::string note_id;
  std::vector<Claim> claims;
  bool empty_note = false;  // all sections empty; flagged, not an error

  static ClaimSet from_json(const json& j) {
    ClaimSet set;
    std::set<std::string> ids;
    for (const auto& cj : j.at("claims")) {
      Claim c;
      c.id = cj.at("id").get<std::string>();
      c.statement = cj.at("statement").get<std::string>();
      c.section = cj.at("section").get<std::string>();
      if (!ids.insert(c.id).second)
        throw ValidationError("duplicate claim id: " + c.id);
      bool known = false;
      for (const auto& key : notes::section_keys()) known |= (key == c.section);
      if (!known) throw ValidationError("claim cites unknown section: " + c.section);
      set.claims.push_back(std::move(c));
    }
    return set;
  }
};

// ----- Verdicts ----------------------------------------------------------------

enum class SupportLabel { supported, unsupported, contradicted };

inline std::string to_string(SupportLabel l) {
  switch (l) {
    case SupportLabel::supported: return "supported";
    case SupportLabel::unsupported: return "unsupported";
    default: return "contradicted";
  }
}

inline SupportLabel support_label_from(const std::string& s) {
  if (s == "supported") return SupportLabel::supported;
  if (s == "unsupported") return SupportLabel::unsupported;
  if (s == "contradicted") return SupportLabel::contradicted;
  throw ValidationError("unknown support label: " + s);
}

struct Evidence {
  std::string quote;
  int turn_index = 0;
};

struct ClaimVerdict {
  std::string claim_id;
  SupportLabel label = SupportLabel::unsupported;
  std::optional<Evidence> evidence;  // required iff supported/contradicted
  bool downgraded = false;           // evidence failed local verification

  json to_json() const {
    json j{{"claim_id", claim_id},
           {"label", to_string(label)},
           {"downgraded", downgraded}};
    if (evidence) {
      j["quote"] = evidence->quote;
      j["turn"] = evidence->turn_index;
    }
    return j;
  }
};

// ----- Report -------------------------------------------------------------------

inline const std::vector<std::string>& scaled_dimensions() {
  static const std::vector<std::string> dims = {"faithfulness", "structure",
                                                "coverage", "conciseness"};
  return dims;
}

inline const std::vector<std::string>& count_dimensions() {
  static const std::vector<std::string> dims = {
      "over_medicalization",   "under_medicalization", "over_specificity",
      "missed_relevant_facts", "critical_omissions",   "duplicated_content"};
  return dims;
}

inline const std::vector<std::string>& rate_dimensions() {
  static const std::vector<std::string> dims = {"unsupported_claim_rate",
                                                "contradiction_rate"};
  return dims;
}

struct JudgeReport {
  std::string note_id;
  std::map<std::string, double> scaled;  // 1..5
  std::map<std::string, int> counts;     // >= 0
  double unsupported_claim_rate = 0.0;
  double contradiction_rate = 0.0;
  bool zero_claims = false;
  // rates are always recomputed from verdict labels, never model-reported
  std::string rates_provenance = "local_recount";
  std::vector<ClaimVerdict> verdicts;

  double dimension(const std::string& name) const {
    if (auto it = scaled.find(name); it != scaled.end()) return it->second;
    if (auto it = counts.find(name); it != counts.end())
      return static_cast<double>(it->second);
    if (name == "unsupported_claim_rate") return unsupported_claim_rate;
    if (name == "contradiction_rate") return contradiction_rate;
    throw ValidationError("unknown judge dimension: " + name);
  }

  json to_json() const {
    json verdicts_j = json::array();
    for (const auto& v : verdicts) verdicts_j.push_back(v.to_json());
    json j{{"schema_version", 1},
           {"note_id", note_id},
           {"unsupported_claim_rate", unsupported_claim_rate},
           {"contradiction_rate", contradiction_rate},
           {"zero_claims", zero_claims},
           {"rates_provenance", rates_provenance},
           {"verdicts", verdicts_j}};
    for (const auto& [k, v] : scaled) j[k] = v;
    for (const auto& [k, v] : counts) j[k] = v;
    return j;
  }

  static JudgeReport from_json(const json& j) {
    JudgeReport r;
    r.note_id = j.value("note_id", "");
    for (const auto& d : scaled_dimensions()) r.scaled[d] = j.at(d).get<double>();
    for (const auto& d : count_dimensions()) r.counts[d] = j.at(d).get<int>();
    r.unsupported_claim_rate = j.at("unsupported_claim_rate").get<double>();
    r.contradiction_rate = j.at("contradiction_rate").get<double>();
    r.zero_claims = j.value("zero_claims", false);
    r.rates_provenance = j.value("rates_provenance", "local_recount");
    if (j.contains("verdicts")) {
      for (const auto& vj : j.at("verdicts")) {
        ClaimVerdict v;
        v.claim_id = vj.at("claim_id").get<std::string>();
        v.label = support_label_from(vj.at("label").get<std::string>());
        v.downgraded = vj.value("downgraded", false);
        if (vj.contains("quote"))
          v.evidence = Evidence{vj.at("quote").get<std::string>(),
                                vj.at("turn").get<int>()};
        r.verdicts.push_back(std::move(v));
      }
    }
    return r;
  }
};

struct JudgeOptions {
  int content_retries = 3;
  double temperature = 0.2;
};

// ----- Stage 1: claim extraction --------------------------------------------------

inline ClaimSet extract_claims(const SoapNote& note,
                               const gateway::Gateway& gw,
                               const PromptLibrary& prompts,
                               const JudgeOptions& options = {}) {
  note.validate();
  bool all_empty = true;
  for (const auto& [key, statements] : note.sections)
    if (!statements.empty()) all_empty = false;
  if (all_empty) {
    ClaimSet set;
    set.note_id = note.dialogue_id;
    set.empty_note = true;
    log_warn(note.dialogue_id + ": empty note, zero claims");
    return set;
  }
  std::string last_error;
  for (int attempt = 1; attempt <= options.content_retries; ++attempt) {
    gateway::ChatRequest req;
    req.messages.push_back({"system", prompts.get("extract_claims")});
    req.messages.push_back(
        {"user", "SOAP note:\n" + note.render_text() +
                     "\nReturn the claims JSON now."});
    req.temperature = options.temperature;
    req.max_tokens = 4096;
    req.seed = derive_seed(fnv1a64(note.dialogue_id),
                           {"claims", std::to_string(attempt)});
    req.tag = "extract_claims";
    const std::string reply = gw.chat(req);
    try {
      const auto brace = reply.find('{');
      const auto end = reply.rfind('}');
      if (brace == std::string::npos || end < brace)
        throw ValidationError("no JSON object in reply");
      ClaimSet set =
          ClaimSet::from_json(json::parse(reply.substr(brace, end - brace + 1)));
      set.note_id = note.dialogue_id;
      return set;
    } catch (const std::exception& e) {
      last_error = e.what();
      log_warn(note.dialogue_id + ": claim set rejected (attempt " +
               std::to_string(attempt) + "): " + last_error);
    }
  }
  throw StageError(note.dialogue_id + ": claim extraction failed: " +
                   last_error);
}

// ----- Stage 2: support labeling ---------------------------------------------------

// Evidence is verified locally with the normalized-substring check; a
// supported or contradicted verdict whose quote fails is downgraded to
// unsupported and logged.
inline std::vector<ClaimVerdict> label_claims(
    const ClaimSet& claims, const DialogueTranscript& transcript,
    const gateway::Gateway& gw, const PromptLibrary& prompts,
    const JudgeOptions& options = {}) {
  if (claims.claims.empty())
    throw ValidationError(claims.note_id + ": no claims to label");
  NormalizerChain chain;
  std::string last_error;
  for (int attempt = 1; attempt <= options.content_retries; ++attempt) {
    gateway::ChatRequest req;
    req.messages.push_back({"system", prompts.get("label_claims")});
    json claims_j = json::array();
    for (const auto& c : claims.claims)
      claims_j.push_back(
          {{"id", c.id}, {"statement", c.statement}, {"section", c.section}});
    req.messages.push_back(
        {"user", "Claims JSON:\n" + json{{"claims", claims_j}}.dump(2) +
                     "\n\nTranscript:\n" + notes::transcript_block(transcript) +
                     "\nReturn the verdicts JSON now."});
    req.temperature = options.temperature;
    req.max_tokens = 8192;
    req.seed = derive_seed(fnv1a64(claims.note_id),
                           {"verdicts", std::to_string(attempt)});
    req.tag = "label_claims";
    const std::string reply = gw.chat(req);
    try {
      const auto brace = reply.find('{');
      const auto end = reply.rfind('}');
      if (brace == std::string::npos || end < brace)
        throw ValidationError("no JSON object in reply");
      const json j = json::parse(reply.substr(brace, end - brace + 1));
      std::map<std::string, ClaimVerdict> by_id;
      for (const auto& vj : j.at("verdicts")) {
        ClaimVerdict v;
        v.claim_id = vj.at("claim_id").get<std::string>();
        v.label = support_label_from(vj.at("label").get<std::string>());
        if (vj.contains("quote") && !vj.at("quote").is_null())
          v.evidence = Evidence{vj.at("quote").get<std::string>(),
                                vj.value("turn", 0)};
        by_id[v.claim_id] = std::move(v);
      }
      std::vector<std::string> missing;
      for (const auto& c : claims.claims)
        if (!by_id.count(c.id)) missing.push_back(c.id);
      if (!missing.empty())
        throw ValidationError("missing verdicts for: " + join(missing, ", "));

      std::vector<ClaimVerdict> verdicts;
      for (const auto& c : claims.claims) {
        ClaimVerdict v = by_id.at(c.id);
        if (v.label == SupportLabel::unsupported) {
          if (v.evidence) v.evidence.reset();  // evidence absent by contract
        } else {
          bool ok = false;
          if (v.evidence && v.evidence->turn_index >= 0 &&
              v.evidence->turn_index <
                  static_cast<int>(transcript.turns.size())) {
            const std::string turn_text = dialogue::speech_text(
                transcript.turns[static_cast<std::size_t>(
                    v.evidence->turn_index)]);
            ok = normalized_contains(chain, turn_text, v.evidence->quote);
          }
          if (!ok) {
            log_warn(claims.note_id + ": verdict for " + c.id + " (" +
                     to_string(v.label) +
                     ") failed evidence verification, downgraded");
            v.label = SupportLabel::unsupported;
            v.evidence.reset();
            v.downgraded = true;
          }
        }
        verdicts.push_back(std::move(v));
      }
      return verdicts;
    } catch (const std::exception& e) {
      last_error = e.what();
      log_warn(claims.note_id + ": verdicts rejected (attempt " +
               std::to_string(attempt) + "): " + last_error);
    }
  }
  throw StageError(claims.note_id + ": claim labeling failed: " + last_error);
}

// ----- Dimension scoring ------------------------------------------------------------

// Rates come from a local recount of the verdict labels; the model only ever
// reports the scaled scores and the six counts.
inline void recompute_rates(JudgeReport& report) {
  std::size_t unsupported = 0, contradicted = 0;
  for (const auto& v : report.verdicts) {
    if (v.label == SupportLabel::unsupported) ++unsupported;
    if (v.label == SupportLabel::contradicted) ++contradicted;
  }
  const std::size_t n = report.verdicts.size();
  report.zero_claims = n == 0;
  report.unsupported_claim_rate =
      n == 0 ? 0.0
             : static_cast<double>(unsupported) / static_cast<double>(n);
  report.contradiction_rate =
      n == 0 ? 0.0
             : static_cast<double>(contradicted) / static_cast<double>(n);
  report.rates_provenance = "local_recount";
}

inline JudgeReport score_dimensions(const ClaimSet& claims,
                                    const std::vector<ClaimVerdict>& verdicts,
                                    const SoapNote& note,
                                    const DialogueTranscript& transcript,
                                    const gateway::Gateway& gw,
                                    const PromptLibrary& prompts,
                                    const JudgeOptions& options = {}) {
  if (verdicts.size() != claims.claims.size())
    throw ValidationError(claims.note_id + ": verdicts incomplete");
  JudgeReport report;
  report.note_id = note.dialogue_id;
  report.verdicts = verdicts;
  recompute_rates(report);

  std::size_t supported = 0, unsupported = 0, contradicted = 0;
  for (const auto& v : verdicts) {
    if (v.label == SupportLabel::supported) ++supported;
    if (v.label == SupportLabel::unsupported) ++unsupported;
    if (v.label == SupportLabel::contradicted) ++contradicted;
  }
  std::string summary = "supported=" + std::to_string(supported) +
                        " unsupported=" + std::to_string(unsupported) +
                        " contradicted=" + std::to_string(contradicted);

  std::string last_error;
  for (int attempt = 1; attempt <= options.content_retries; ++attempt) {
    gateway::ChatRequest req;
    req.messages.push_back({"system", prompts.get("score_note")});
    req.messages.push_back(
        {"user", "SOAP note:\n" + note.render_text() + "\nVerdict summary: " +
                     summary + "\n\nTranscript:\n" +
                     notes::transcript_block(transcript) +
                     "\nReturn the scores JSON now."});
    req.temperature = options.temperature;
    req.max_tokens = 2048;
    req.seed = derive_seed(fnv1a64(note.dialogue_id),
                           {"scores", std::to_string(attempt)});
    req.tag = "score_note";
    const std::string reply = gw.chat(req);
    try {
      const auto brace = reply.find('{');
      const auto end = reply.rfind('}');
      if (brace == std::string::npos || end < brace)
        throw ValidationError("no JSON object in reply");
      const json j = json::parse(reply.substr(brace, end - brace + 1));
      for (const auto& d : scaled_dimensions()) {
        double v = j.at(d).get<double>();
        if (v < 1.0 || v > 5.0) {
          log_warn(note.dialogue_id + ": " + d + "=" + std::to_string(v) +
                   " out of range, clamped");
          v = std::clamp(v, 1.0, 5.0);
        }
        report.scaled[d] = v;
      }
      for (const auto& d : count_dimensions()) {
        int v = j.at(d).get<int>();
        if (v < 0) {
          log_warn(note.dialogue_id + ": " + d + " negative, clamped to 0");
          v = 0;
        }
        report.counts[d] = v;
      }
      recompute_rates(report);  // model output can never set the rates
      return report;
    } catch (const json::exception& e) {
      last_error = e.what();
    } catch (const ValidationError& e) {
      last_error = e.what();
    }
    log_warn(note.dialogue_id + ": scores rejected (attempt " +
             std::to_string(attempt) + "): " + last_error);
  }
  throw StageError(note.dialogue_id + ": dimension scoring failed: " +
                   last_error);
}

// ----- Corpus aggregation -------------------------------------------------------------

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n-1)
  double ci_low = 0.0;  // mean +/- 1.96 sigma / sqrt(n)
  double ci_high = 0.0;
  std::size_t n = 0;
};

inline std::vector<std::string> all_dimensions() {
  std::vector<std::string> dims = scaled_dimensions();
  for (const auto& d : count_dimensions()) dims.push_back(d);
  for (const auto& d : rate_dimensions()) dims.push_back(d);
  return dims;
}

inline std::map<std::string, Aggregate> aggregate(
    const std::vector<JudgeReport>& reports) {
  if (reports.empty())
    throw ValidationError("aggregate: no judge reports");
  std::map<std::string, Aggregate> out;
  for (const auto& dim : all_dimensions()) {
    std::vector<double> xs;
    xs.reserve(reports.size());
    for (const auto& r : reports) xs.push_back(r.dimension(dim));
    Aggregate agg;
    agg.n = xs.size();
    double sum = 0.0;
    for (double x : xs) sum += x;
    agg.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double acc = 0.0;
      for (double x : xs) acc += (x - agg.mean) * (x - agg.mean);
      agg.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    const double half =
        1.96 * agg.stddev / std::sqrt(static_cast<double>(xs.size()));
    agg.ci_low = agg.mean - half;
    agg.ci_high = agg.mean + half;
    out[dim] = agg;
  }
  return out;
}

// Comparison table in the four-column judged-outcome layout.
inline std::string format_comparison_table(
    const std::vector<std::pair<std::string,
                                std::map<std::string, Aggregate>>>& systems) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %12s %12s %12s %12s\n", "System",
                "Faith.", "Cov.", "Struct.", "Conc.");
  out += line;
  for (const auto& [name, aggs] : systems) {
    auto cell = [&](const std::string& dim) {
      const auto& a = aggs.at(dim);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.1f (±%.1f)", a.mean, a.stddev);
      return std::string(buf);
    };
    std::snprintf(line, sizeof(line), "%-28s %12s %12s %12s %12s\n",
                  name.c_str(), cell("faithfulness").c_str(),
                  cell("coverage").c_str(), cell("structure").c_str(),
                  cell("conciseness").c_str());
    out += line;
  }
  return out;
}

}  // namespace convoforge::judge

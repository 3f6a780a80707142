#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/common.hpp"
#include "convoforge/dialogue.hpp"
#include "convoforge/gateway.hpp"
#include "convoforge/normalize.hpp"

namespace convoforge::notes {

using nlohmann::json;
using dialogue::DialogueTranscript;
using dialogue::PromptLibrary;

// ----- Fact table -----------------------------------------------------------

inline const std::vector<std::string>& fact_categories() {
  static const std::vector<std::string> cats = {"history", "symptom", "exam",
                                                "plan", "admin", "other"};
  return cats;
}

struct Fact {
  std::string id;
  std::string statement;
  std::string quote;  // verbatim from the cited turn's speech text
  int turn_index = 0;
  std::string category;

  bool operator==(const Fact&) const = default;
};

struct FactTable {
  std::string dialogue_id;
  std::vector<Fact> facts;

  json to_json() const {
    json facts_j = json::array();
    for (const auto& f : facts)
      facts_j.push_back({{"id", f.id},
                         {"statement", f.statement},
                         {"quote", f.quote},
                         {"turn", f.turn_index},
                         {"category", f.category}});
    return json{{"schema_version", 1},
                {"dialogue_id", dialogue_id},
                {"facts", facts_j}};
  }

  static FactTable from_json(const json& j) {
    FactTable t;
    t.dialogue_id = j.value("dialogue_id", "");
    std::set<std::string> ids;
    for (const auto& fj : j.at("facts")) {
      Fact f;
      f.id = fj.at("id").get<std::string>();
      f.statement = fj.at("statement").get<std::string>();
      f.quote = fj.at("quote").get<std::string>();
      f.turn_index = fj.at("turn").get<int>();
      f.category = fj.at("category").get<std::string>();
      if (f.quote.empty()) throw ValidationError("fact with empty quote");
      if (f.statement.empty())
        throw ValidationError("fact with empty statement");
      bool known = false;
      for (const auto& c : fact_categories()) known |= (c == f.category);
      if (!known) throw ValidationError("unknown fact category: " + f.category);
      if (!ids.insert(f.id).second)
        throw ValidationError("duplicate fact id: " + f.id);
      t.facts.push_back(std::move(f));
    }
    return t;
  }
};

// ----- Grounding ------------------------------------------------------------

enum class GroundStatus { grounded, quote_missing, bad_turn };

inline std::string to_string(GroundStatus s) {
  switch (s) {
    case GroundStatus::grounded: return "grounded";
    case GroundStatus::quote_missing: return "quote_missing";
    default: return "bad_turn";
  }
}

struct GroundingReport {
  struct Entry {
    std::string fact_id;
    GroundStatus status = GroundStatus::grounded;
  };
  std::vector<Entry> entries;

  bool all_grounded() const {
    for (const auto& e : entries)
      if (e.status != GroundStatus::grounded) return false;
    return true;
  }

  std::size_t flagged() const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (e.status != GroundStatus::grounded) ++n;
    return n;
  }
};

// Quotes are checked against the cited turn's speech text (stage directions
// removed, same view the extraction prompt presents) via the normalizer
// chain's substring test.
inline GroundingReport validate_grounding(const FactTable& table,
                                          const DialogueTranscript& transcript,
                                          const NormalizerChain& chain = {}) {
  GroundingReport report;
  for (const auto& f : table.facts) {
    GroundingReport::Entry e;
    e.fact_id = f.id;
    if (f.turn_index < 0 ||
        f.turn_index >= static_cast<int>(transcript.turns.size())) {
      e.status = GroundStatus::bad_turn;
    } else {
      const std::string turn_text = dialogue::speech_text(
          transcript.turns[static_cast<std::size_t>(f.turn_index)]);
      e.status = normalized_contains(chain, turn_text, f.quote)
                     ? GroundStatus::grounded
                     : GroundStatus::quote_missing;
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

// ----- SOAP note -------------------------------------------------------------

inline const std::vector<std::string>& section_keys() {
  static const std::vector<std::string> keys = {
      "subjective_hpi", "subjective_ros", "objective", "assessment", "plan"};
  return keys;
}

struct SoapNote {
  std::string dialogue_id;
  std::map<std::string, std::vector<std::string>> sections = {
      {"subjective_hpi", {}},
      {"subjective_ros", {}},
      {"objective", {}},
      {"assessment", {}},
      {"plan", {}},
  };

  void validate() const {
    for (const auto& key : section_keys())
      if (!sections.count(key))
        throw ValidationError("note missing section: " + key);
    // HPI and ROS stay separate: no shared statements
    std::set<std::string> hpi(sections.at("subjective_hpi").begin(),
                              sections.at("subjective_hpi").end());
    for (const auto& s : sections.at("subjective_ros"))
      if (hpi.count(s))
        throw ValidationError("statement shared between HPI and ROS: " + s);
  }

  int word_count() const {
    std::size_t words = 0;
    for (const auto& [key, statements] : sections)
      for (const auto& s : statements) words += convoforge::word_count(s);
    return static_cast<int>(words);
  }

  static const std::map<std::string, std::string>& headers() {
    static const std::map<std::string, std::string> h = {
        {"subjective_hpi", "Subjective - HPI:"},
        {"subjective_ros", "Subjective - ROS:"},
        {"objective", "Objective:"},
        {"assessment", "Assessment:"},
        {"plan", "Plan:"},
    };
    return h;
  }

  // Canonical text form; empty sections carry an explicit marker so absence
  // is never mistaken for omission.
  std::string render_text() const {
    std::string out;
    for (const auto& key : section_keys()) {
      out += headers().at(key) + "\n";
      const auto& statements = sections.at(key);
      if (statements.empty()) {
        out += "- Not addressed.\n";
      } else {
        for (const auto& s : statements) out += "- " + s + "\n";
      }
    }
    return out;
  }

  json to_json() const {
    json sec = json::object();
    for (const auto& key : section_keys()) sec[key] = sections.at(key);
    return json{{"schema_version", 1},
                {"dialogue_id", dialogue_id},
                {"sections", sec},
                {"word_count", word_count()}};
  }

  static SoapNote from_json(const json& j) {
    SoapNote note;
    note.dialogue_id = j.value("dialogue_id", "");
    for (const auto& key : section_keys())
      note.sections[key] =
          j.at("sections").at(key).get<std::vector<std::string>>();
    note.validate();
    return note;
  }
};

// Parse the model's plain-text note into sections. Throws on a missing
// section so callers can re-request.
inline SoapNote parse_note_text(const std::string& text) {
  SoapNote note;
  std::map<std::string, std::string> header_to_key;
  for (const auto& [key, header] : SoapNote::headers())
    header_to_key[to_lower_ascii(ascii_fold(header))] = key;
  std::string current;
  std::set<std::string> seen;
  for (const auto& raw : split_on(text, '\n')) {
    const std::string line = trim(ascii_fold(raw));
    if (line.empty()) continue;
    auto h = header_to_key.find(to_lower_ascii(line));
    if (h != header_to_key.end()) {
      current = h->second;
      seen.insert(current);
      continue;
    }
    if (current.empty()) continue;  // preamble before the first header
    std::string statement = line;
    if (starts_with(statement, "- ")) statement = trim(statement.substr(2));
    else if (starts_with(statement, "-")) statement = trim(statement.substr(1));
    if (statement.empty()) continue;
    if (to_lower_ascii(statement) == "not addressed." ||
        to_lower_ascii(statement) == "not addressed")
      continue;
    note.sections[current].push_back(statement);
  }
  if (seen.size() != section_keys().size()) {
    std::string missing;
    for (const auto& key : section_keys())
      if (!seen.count(key)) missing += " " + key;
    throw ValidationError("note text missing sections:" + missing);
  }
  note.validate();
  return note;
}

// ----- Prompt plumbing ---------------------------------------------------------

// Speaker-attributed speech-text view of the transcript, the only form model
// prompts ever see.
inline std::string transcript_block(const DialogueTranscript& transcript) {
  std::string out;
  for (const auto& turn : transcript.turns) {
    out += "Turn " + std::to_string(turn.index) + " (" +
           persona::to_string(turn.speaker) + "): " +
           dialogue::speech_text(turn) + "\n";
  }
  return out;
}

struct NoteOptions {
  int content_retries = 3;
  bool drop_ungrounded_facts = false;  // default: whole-table reject
  double temperature = 0.2;
};

inline gateway::ChatRequest build_fact_request(
    const DialogueTranscript& transcript, const PromptLibrary& prompts,
    const NoteOptions& options, int attempt) {
  gateway::ChatRequest req;
  req.messages.push_back({"system", prompts.get("extract_facts")});
  req.messages.push_back(
      {"user", "Transcript:\n" + transcript_block(transcript) +
                   "\nReturn the fact table JSON now."});
  req.temperature = options.temperature;
  req.max_tokens = 4096;
  req.seed = derive_seed(fnv1a64(transcript.dialogue_id),
                         {"facts", std::to_string(attempt)});
  req.tag = "extract_facts";
  return req;
}

inline FactTable extract_facts(const DialogueTranscript& transcript,
                               const gateway::Gateway& gw,
                               const PromptLibrary& prompts,
                               const NoteOptions& options = {}) {
  if (transcript.turns.empty())
    throw ValidationError(transcript.dialogue_id + ": empty transcript");
  std::string last_error;
  for (int attempt = 1; attempt <= options.content_retries; ++attempt) {
    const std::string reply =
        gw.chat(build_fact_request(transcript, prompts, options, attempt));
    try {
      const auto brace = reply.find('{');
      const auto end = reply.rfind('}');
      if (brace == std::string::npos || end == std::string::npos ||
          end < brace)
        throw ValidationError("no JSON object in reply");
      FactTable table =
          FactTable::from_json(json::parse(reply.substr(brace, end - brace + 1)));
      table.dialogue_id = transcript.dialogue_id;
      for (const auto& f : table.facts) {
        if (f.turn_index < 0 ||
            f.turn_index >= static_cast<int>(transcript.turns.size()))
          throw ValidationError("fact " + f.id + " cites turn " +
                                std::to_string(f.turn_index) + " of " +
                                std::to_string(transcript.turns.size()));
      }
      return table;
    } catch (const std::exception& e) {
      last_error = e.what();
      log_warn(transcript.dialogue_id + ": fact table rejected (attempt " +
               std::to_string(attempt) + "): " + last_error);
    }
  }
  throw StageError(transcript.dialogue_id + ": fact extraction failed after " +
                   std::to_string(options.content_retries) +
                   " attempts: " + last_error);
}

// Apply the grounding policy: reject the whole table (reference-quality bar)
// or drop the offending facts when configured for lossy bulk runs.
inline FactTable enforce_grounding(const FactTable& table,
                                   const DialogueTranscript& transcript,
                                   const NoteOptions& options = {}) {
  const auto report = validate_grounding(table, transcript);
  if (report.all_grounded()) return table;
  if (!options.drop_ungrounded_facts) {
    std::string bad;
    for (const auto& e : report.entries)
      if (e.status != GroundStatus::grounded)
        bad += " " + e.fact_id + "(" + to_string(e.status) + ")";
    throw StageError(table.dialogue_id + ": ungrounded facts:" + bad);
  }
  FactTable kept;
  kept.dialogue_id = table.dialogue_id;
  for (std::size_t i = 0; i < table.facts.size(); ++i) {
    if (report.entries[i].status == GroundStatus::grounded)
      kept.facts.push_back(table.facts[i]);
    else
      log_warn(table.dialogue_id + ": dropped ungrounded fact " +
               table.facts[i].id);
  }
  return kept;
}

// The fact table is the sole input: by construction the prompt carries no
// transcript text beyond the quotes inside the table.
inline gateway::ChatRequest build_note_request(const FactTable& table,
                                               const PromptLibrary& prompts,
                                               const NoteOptions& options,
                                               int attempt) {
  gateway::ChatRequest req;
  req.messages.push_back({"system", prompts.get("generate_note")});
  req.messages.push_back(
      {"user", "Fact table JSON:\n" + table.to_json().dump(2) +
                   "\nWrite the SOAP note now."});
  req.temperature = options.temperature;
  req.max_tokens = 4096;
  req.seed = derive_seed(fnv1a64(table.dialogue_id),
                         {"note", std::to_string(attempt)});
  req.tag = "generate_note";
  return req;
}

inline SoapNote generate_note(const FactTable& table,
                              const gateway::Gateway& gw,
                              const PromptLibrary& prompts,
                              const NoteOptions& options = {}) {
  std::string last_error;
  for (int attempt = 1; attempt <= options.content_retries; ++attempt) {
    const std::string reply =
        gw.chat(build_note_request(table, prompts, options, attempt));
    try {
      SoapNote note = parse_note_text(reply);
      note.dialogue_id = table.dialogue_id;
      return note;
    } catch (const std::exception& e) {
      last_error = e.what();
      log_warn(table.dialogue_id + ": note parse failed (attempt " +
               std::to_string(attempt) + "): " + last_error);
    }
  }
  throw StageError(table.dialogue_id + ": note generation failed after " +
                   std::to_string(options.content_retries) +
                   " attempts: " + last_error);
}

}  // namespace convoforge::notes

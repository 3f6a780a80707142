#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/common.hpp"
#include "convoforge/gateway.hpp"
#include "convoforge/persona.hpp"
#include "convoforge/text.hpp"

namespace convoforge::dialogue {

using nlohmann::json;
using persona::Persona;
using persona::Role;

// ----- Transcript model ------------------------------------------------------

// Non-speech notation embedded in a turn, e.g. "(door knocks)". `offset` is
// the index of the opening delimiter in the raw turn text; the delimited span
// is exactly offset .. offset + text.size() + 2.
struct StageDirection {
  std::string text;
  std::size_t offset = 0;

  bool operator==(const StageDirection&) const = default;
};

struct Turn {
  int index = 0;
  Role speaker = Role::doctor;
  std::string text;  // raw, directions inline
  std::vector<StageDirection> directions;

  bool operator==(const Turn&) const = default;
};

enum class Termination { end_marker, turn_cap };

inline std::string to_string(Termination t) {
  return t == Termination::end_marker ? "end_marker" : "turn_cap";
}

struct DialogueTranscript {
  std::string dialogue_id;
  std::vector<Turn> turns;
  Termination termination = Termination::end_marker;

  void validate() const {
    for (std::size_t i = 0; i < turns.size(); ++i) {
      const Turn& t = turns[i];
      if (t.index != static_cast<int>(i))
        throw ValidationError(dialogue_id + ": turn indices not dense at " +
                              std::to_string(i));
      const Role expected = (i % 2 == 0) ? Role::doctor : Role::patient;
      if (t.speaker != expected)
        throw ValidationError(dialogue_id +
                              ": speakers must alternate, doctor first (turn " +
                              std::to_string(i) + ")");
      for (const auto& d : t.directions) {
        if (d.offset + d.text.size() + 2 > t.text.size())
          throw ValidationError(dialogue_id + ": direction offset outside turn " +
                                std::to_string(i));
      }
    }
  }

  json to_json() const {
    json turns_j = json::array();
    for (const auto& t : turns) {
      json dirs = json::array();
      for (const auto& d : t.directions)
        dirs.push_back({{"text", d.text}, {"offset", d.offset}});
      turns_j.push_back({{"index", t.index},
                         {"speaker", persona::to_string(t.speaker)},
                         {"text", t.text},
                         {"stage_directions", dirs}});
    }
    return json{{"schema_version", 1},
                {"dialogue_id", dialogue_id},
                {"termination", to_string(termination)},
                {"turns", turns_j}};
  }

  static DialogueTranscript from_json(const json& j) {
    DialogueTranscript t;
    t.dialogue_id = j.at("dialogue_id").get<std::string>();
    t.termination = j.at("termination").get<std::string>() == "turn_cap"
                        ? Termination::turn_cap
                        : Termination::end_marker;
    for (const auto& tj : j.at("turns")) {
      Turn turn;
      turn.index = tj.at("index").get<int>();
      turn.speaker = persona::role_from_string(tj.at("speaker").get<std::string>());
      turn.text = tj.at("text").get<std::string>();
      for (const auto& dj : tj.at("stage_directions"))
        turn.directions.push_back({dj.at("text").get<std::string>(),
                                   dj.at("offset").get<std::size_t>()});
      t.turns.push_back(std::move(turn));
    }
    t.validate();
    return t;
  }
};

// ----- Stage-direction parsing -----------------------------------------------

struct ParsedTurnText {
  std::string clean;  // speech only, whitespace normalized
  std::vector<StageDirection> directions;
};

// Grammar: opening ( or [, non-empty text containing no delimiter characters,
// matching closer. Anything else stays literal speech.
inline ParsedTurnText parse_stage_directions(std::string_view raw) {
  ParsedTurnText out;
  std::string clean;
  clean.reserve(raw.size());
  std::size_t i = 0;
  bool warned = false;
  while (i < raw.size()) {
    const char c = raw[i];
    if (c == '(' || c == '[') {
      const char closer = c == '(' ? ')' : ']';
      std::size_t j = i + 1;
      bool bad = false;
      while (j < raw.size() && raw[j] != closer) {
        if (raw[j] == '(' || raw[j] == '[' || raw[j] == ')' || raw[j] == ']') {
          bad = true;
          break;
        }
        ++j;
      }
      if (j < raw.size() && !bad && raw[j] == closer &&
          !trim(raw.substr(i + 1, j - i - 1)).empty()) {
        out.directions.push_back(
            {std::string(raw.substr(i + 1, j - i - 1)), i});
        i = j + 1;
        continue;
      }
      if (!warned) {
        log_warn("unbalanced stage-direction delimiter kept as speech: " +
                 std::string(raw.substr(i, std::min<std::size_t>(
                                               raw.size() - i, 24))));
        warned = true;
      }
    }
    clean += c;
    ++i;
  }
  out.clean = join(split_ws(clean), " ");
  return out;
}

inline std::string speech_text(const Turn& turn) {
  return parse_stage_directions(turn.text).clean;
}

// ----- Prompt construction -----------------------------------------------------

// Templates are versioned data files so prompt iteration needs no rebuild.
struct PromptLibrary {
  std::map<std::string, std::string> templates;

  static PromptLibrary load(const std::filesystem::path& dir) {
    PromptLibrary lib;
    if (!std::filesystem::is_directory(dir))
      throw ConfigError("prompt template dir missing: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".txt")
        lib.templates[entry.path().stem().string()] =
            io::read_file(entry.path());
    }
    return lib;
  }

  const std::string& get(const std::string& id) const {
    auto it = templates.find(id);
    if (it == templates.end())
      throw ConfigError("missing prompt template: " + id);
    return it->second;
  }
};

struct TurnPrompt {
  const Persona* active = nullptr;
  const std::vector<Turn>* history = nullptr;
  std::string template_id;  // turn_doctor | turn_patient
};

inline std::string render_history(const std::vector<Turn>& turns) {
  std::string out;
  for (const auto& t : turns) {
    out += (t.speaker == Role::doctor ? "Doctor: " : "Patient: ");
    out += t.text;
    out += "\n";
  }
  return out;
}

struct DialogueOptions {
  int turn_cap = 60;
  std::string end_marker = "[END]";
  int content_retries = 3;  // re-requests on empty/degenerate replies
  double temperature = 0.8;
  int max_tokens = 1024;
  bool single_shot = false;  // comparison mode, off by default
};

inline gateway::ChatRequest build_turn_request(const TurnPrompt& prompt,
                                               const PromptLibrary& prompts,
                                               const DialogueOptions& options,
                                               std::uint64_t seed) {
  if (!prompt.active || !prompt.history)
    throw ValidationError("turn prompt missing persona or history");
  for (std::size_t i = 0; i < prompt.history->size(); ++i) {
    const Role expected = (i % 2 == 0) ? Role::doctor : Role::patient;
    if ((*prompt.history)[i].speaker != expected)
      throw ValidationError("turn prompt history does not alternate");
  }
  const std::string role_name = persona::to_string(prompt.active->role);
  const std::vector<std::pair<std::string, std::string>> vars = {
      {"role", role_name},
      {"persona", prompt.active->describe()},
      {"history", render_history(*prompt.history)},
      {"turns_so_far", std::to_string(prompt.history->size())},
      {"end_marker", options.end_marker},
  };
  gateway::ChatRequest req;
  req.messages.push_back(
      {"system", render_template(prompts.get(prompt.template_id), vars)});
  req.messages.push_back(
      {"user", render_template(prompts.get("turn_user"), vars)});
  req.temperature = options.temperature;
  req.max_tokens = options.max_tokens;
  req.seed = seed;
  req.tag = "dialogue_turn";
  return req;
}

// ----- Turn generation -----------------------------------------------------------

struct TurnOutcome {
  std::optional<Turn> turn;
  bool ended = false;
};

namespace detail {

// Models sometimes run ahead and emit both sides; keep only the active
// speaker's first turn.
inline std::string truncate_at_speaker_change(const std::string& reply,
                                              bool* truncated) {
  static const char* labels[] = {"\nDoctor:", "\nPatient:", "\nDOCTOR:",
                                 "\nPATIENT:"};
  std::size_t cut = std::string::npos;
  for (const char* label : labels) {
    auto at = reply.find(label);
    if (at != std::string::npos) cut = std::min(cut, at);
  }
  if (cut == std::string::npos) return reply;
  *truncated = true;
  return reply.substr(0, cut);
}

inline std::string strip_leading_label(const std::string& reply, Role role) {
  const std::string label =
      role == Role::doctor ? "Doctor:" : "Patient:";
  std::string s = trim(reply);
  if (starts_with(s, label)) s = trim(s.substr(label.size()));
  return s;
}

}  // namespace detail

inline TurnOutcome generate_turn(const TurnPrompt& prompt,
                                 const gateway::Gateway& gw,
                                 const PromptLibrary& prompts,
                                 const DialogueOptions& options,
                                 std::uint64_t seed) {
  for (int attempt = 1; attempt <= options.content_retries; ++attempt) {
    const auto request = build_turn_request(
        prompt, prompts, options,
        derive_seed(seed, {"attempt", std::to_string(attempt)}));
    std::string reply = gw.chat(request);
    bool truncated = false;
    reply = detail::truncate_at_speaker_change(reply, &truncated);
    if (truncated)
      log_warn("multi-turn reply truncated at first speaker change");
    reply = detail::strip_leading_label(reply, prompt.active->role);
    bool ended = false;
    if (auto at = reply.find(options.end_marker); at != std::string::npos) {
      ended = true;
      reply = trim(reply.substr(0, at));
    }
    if (reply.empty()) {
      if (ended) return {std::nullopt, true};
      log_warn("empty model turn, re-requesting (attempt " +
               std::to_string(attempt) + ")");
      continue;
    }
    Turn turn;
    turn.index = static_cast<int>(prompt.history->size());
    turn.speaker = prompt.active->role;
    turn.text = reply;
    turn.directions = parse_stage_directions(reply).directions;
    return {turn, ended};
  }
  throw StageError("empty model reply after " +
                   std::to_string(options.content_retries) + " attempts");
}

namespace detail {

inline DialogueTranscript run_single_shot(const persona::DialogueSpec& spec,
                                          const Persona& doctor,
                                          const Persona& patient,
                                          const gateway::Gateway& gw,
                                          const PromptLibrary& prompts,
                                          const DialogueOptions& options) {
  const std::vector<std::pair<std::string, std::string>> vars = {
      {"doctor_persona", doctor.describe()},
      {"patient_persona", patient.describe()},
      {"end_marker", options.end_marker},
  };
  gateway::ChatRequest req;
  req.messages.push_back(
      {"system", render_template(prompts.get("dialogue_single_shot"), vars)});
  req.messages.push_back({"user", "Generate the full conversation now."});
  req.temperature = options.temperature;
  req.max_tokens = 8192;
  req.seed = spec.seed;
  req.tag = "dialogue_full";
  DialogueTranscript transcript;
  transcript.dialogue_id = spec.id;
  transcript.termination = Termination::end_marker;
  const std::string reply = gw.chat(req);
  for (const auto& raw_line : split_on(reply, '\n')) {
    std::string line = trim(raw_line);
    if (line.empty() || line == options.end_marker) continue;
    Role speaker;
    if (starts_with(line, "Doctor:")) {
      speaker = Role::doctor;
      line = trim(line.substr(7));
    } else if (starts_with(line, "Patient:")) {
      speaker = Role::patient;
      line = trim(line.substr(8));
    } else {
      continue;
    }
    const Role expected =
        (transcript.turns.size() % 2 == 0) ? Role::doctor : Role::patient;
    if (speaker != expected) continue;  // drop out-of-order lines
    Turn turn;
    turn.index = static_cast<int>(transcript.turns.size());
    turn.speaker = speaker;
    turn.text = line;
    turn.directions = parse_stage_directions(line).directions;
    transcript.turns.push_back(std::move(turn));
    if (static_cast<int>(transcript.turns.size()) >= options.turn_cap) {
      transcript.termination = Termination::turn_cap;
      break;
    }
  }
  transcript.validate();
  return transcript;
}

}  // namespace detail

// Turn-by-turn generation: each request carries only the active persona and
// the history so far; speakers alternate structurally with the doctor
// opening the visit.
inline DialogueTranscript run_dialogue(const persona::DialogueSpec& spec,
                                       const Persona& doctor,
                                       const Persona& patient,
                                       const gateway::Gateway& gw,
                                       const PromptLibrary& prompts,
                                       const DialogueOptions& options = {}) {
  if (doctor.id != spec.doctor_id || patient.id != spec.patient_id)
    throw ValidationError(spec.id + ": persona lookup mismatch");
  if (options.single_shot)
    return detail::run_single_shot(spec, doctor, patient, gw, prompts,
                                   options);
  DialogueTranscript transcript;
  transcript.dialogue_id = spec.id;
  transcript.termination = Termination::turn_cap;
  while (static_cast<int>(transcript.turns.size()) < options.turn_cap) {
    const bool doctor_turn = transcript.turns.size() % 2 == 0;
    TurnPrompt prompt;
    prompt.active = doctor_turn ? &doctor : &patient;
    prompt.history = &transcript.turns;
    prompt.template_id = doctor_turn ? "turn_doctor" : "turn_patient";
    TurnOutcome outcome;
    try {
      outcome = generate_turn(
          prompt, gw, prompts, options,
          derive_seed(spec.seed,
                      {"turn", std::to_string(transcript.turns.size())}));
    } catch (const std::exception& e) {
      throw StageError(spec.id + " turn " +
                       std::to_string(transcript.turns.size()) + ": " +
                       e.what());
    }
    if (outcome.turn) transcript.turns.push_back(*outcome.turn);
    if (outcome.ended) {
      transcript.termination = Termination::end_marker;
      break;
    }
  }
  transcript.validate();
  return transcript;
}

}  // namespace convoforge::dialogue

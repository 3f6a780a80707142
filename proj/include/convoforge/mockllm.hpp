#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/gateway.hpp"
#include "convoforge/notes.hpp"
#include "convoforge/text.hpp"

// Deterministic chat mock for offline pipeline runs. Routes on the request's
// tag and derives every choice from the request content hash, so the whole
// pipeline is a pure function of its seeds: rerunning any stage reproduces
// byte-identical artifacts.

namespace convoforge::gateway {

namespace mock_detail {

using nlohmann::json;

inline std::string find_field(const std::string& text,
                              const std::string& key) {
  const auto at = text.find(key + ": ");
  if (at == std::string::npos) return {};
  const auto end = text.find('\n', at);
  return trim(text.substr(at + key.size() + 2,
                          end == std::string::npos ? std::string::npos
                                                   : end - at - key.size() - 2));
}

struct TranscriptLine {
  int turn = 0;
  std::string role;
  std::string text;
};

// Lines of the form "Turn N (role): text".
inline std::vector<TranscriptLine> parse_transcript_block(
    const std::string& text) {
  std::vector<TranscriptLine> out;
  for (const auto& line : split_on(text, '\n')) {
    if (!starts_with(line, "Turn ")) continue;
    const auto paren = line.find(" (");
    const auto close = line.find("): ", paren);
    if (paren == std::string::npos || close == std::string::npos) continue;
    TranscriptLine tl;
    try {
      tl.turn = std::stoi(line.substr(5, paren - 5));
    } catch (...) {
      continue;
    }
    tl.role = line.substr(paren + 2, close - paren - 2);
    tl.text = line.substr(close + 3);
    out.push_back(std::move(tl));
  }
  return out;
}

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {
      "headache", "shoulder",  "appetite", "morning",  "pressure", "stomach",
      "routine",  "swelling",  "fatigue",  "exercise", "dizziness", "chest",
      "moment",   "follow up", "symptom",  "schedule", "back",      "knee",
      "sleep",    "breathing", "coffee",   "stairs",   "work",      "family"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {
      "started",  "improved", "worsened", "returned", "settled",  "flared",
      "lingered", "changed",  "eased",    "spread",   "happened", "helped"};
  return v;
}

inline const std::vector<std::string>& modifiers() {
  static const std::vector<std::string> v = {
      "a little",     "quite a bit", "most days", "every evening",
      "after meals",  "on and off",  "lately",     "since last week",
      "in the morning", "at night",  "gradually",  "suddenly"};
  return v;
}

inline const std::vector<std::string>& direction_phrases() {
  static const std::vector<std::string> v = {
      "door knocks",     "typing",        "paper rustling", "coughs",
      "sighs",           "chair creaks",  "keyboard clacking",
      "phone buzzing",   "papers shuffling", "clears throat",
      "sniffles",        "pen clicking"};
  return v;
}

inline std::string sentence(Rng& rng) {
  std::string s;
  const auto& n = nouns();
  const auto& vb = verbs();
  const auto& m = modifiers();
  switch (rng.below(6)) {
    case 0:
      s = "The " + rng.pick(n) + " " + rng.pick(vb) + " " + rng.pick(m) + ".";
      break;
    case 1:
      s = "I noticed the " + rng.pick(n) + " " + rng.pick(vb) + " " +
          rng.pick(m) + ".";
      break;
    case 2:
      s = "It seems the " + rng.pick(n) + " has " + rng.pick(vb) + " " +
          rng.pick(m) + ".";
      break;
    case 3:
      s = "Can you tell me how the " + rng.pick(n) + " " + rng.pick(vb) +
          " " + rng.pick(m) + "?";
      break;
    case 4:
      s = "My " + rng.pick(n) + " " + rng.pick(vb) + " " + rng.pick(m) +
          ", especially around the " + rng.pick(n) + ".";
      break;
    default:
      s = "Let's keep an eye on the " + rng.pick(n) + " and see if it has " +
          rng.pick(vb) + " by the next visit.";
      break;
  }
  return s;
}

inline std::string turn_body(Rng& rng, std::size_t word_target) {
  std::string out;
  while (word_count(out) < word_target) {
    if (!out.empty()) out += " ";
    out += sentence(rng);
  }
  return out;
}

}  // namespace mock_detail

class AutoMockChatBackend : public ChatBackend {
 public:
  std::string complete(const ChatRequest& request) override {
    const std::string& tag = request.tag;
    if (tag == "dialogue_turn") return dialogue_turn(request);
    if (tag == "dialogue_full") return dialogue_full(request);
    if (tag == "extract_facts") return extract_facts(request);
    if (tag == "generate_note") return generate_note(request);
    if (tag == "extract_claims") return extract_claims(request);
    if (tag == "label_claims") return label_claims(request);
    if (tag == "score_note") return score_note(request);
    if (tag == "map_trigger") return map_trigger(request);
    return "OK.";
  }

  std::string name() const override { return "mock:auto"; }

 private:
  using json = nlohmann::json;

  static std::string system_of(const ChatRequest& r) {
    return r.messages.empty() ? "" : r.messages.front().content;
  }
  static std::string user_of(const ChatRequest& r) {
    for (const auto& m : r.messages)
      if (m.role == "user") return m.content;
    return {};
  }

  std::string dialogue_turn(const ChatRequest& request) const {
    const std::string sys = system_of(request);
    const std::string user = user_of(request);
    Rng rng(request.content_hash());
    const bool doctor = contains(user, "single doctor turn");
    // turn count from "Dialogue so far (N turns)"
    int turns_so_far = 0;
    if (auto at = user.find("Dialogue so far ("); at != std::string::npos) {
      try {
        turns_so_far = std::stoi(user.substr(at + 17));
      } catch (...) {
      }
    }
    // per-dialogue end target, stable across turns: hash the opening line
    std::string first_line;
    if (auto at = user.find("\nDoctor: "); at != std::string::npos) {
      const auto end = user.find('\n', at + 1);
      first_line = user.substr(at + 1, end - at - 1);
    }
    if (!first_line.empty()) {
      const int target = 21 + static_cast<int>(fnv1a64(first_line) % 14);
      if (turns_so_far >= target) return "[END]";
    }
    std::string text;
    if (turns_so_far == 0) {
      text = "Good morning, I'm Dr. " + mock_detail::find_field(sys, "name") +
             ". What brings you in today? " +
             mock_detail::turn_body(rng, 24 + rng.below(16));
    } else if (turns_so_far == 1 && !doctor) {
      text = "Hi, thanks for seeing me. I'm here because of " +
             mock_detail::find_field(sys, "reason_for_visit") + ". " +
             mock_detail::turn_body(rng, 28 + rng.below(20));
    } else {
      const std::size_t words =
          doctor ? 35 + rng.below(31) : 40 + rng.below(33);
      text = mock_detail::turn_body(rng, words);
    }
    if (rng.chance(0.35)) {
      const auto& phrase = rng.pick(mock_detail::direction_phrases());
      text += " (" + phrase + ")";
    }
    return text;
  }

  std::string dialogue_full(const ChatRequest& request) const {
    Rng rng(request.content_hash());
    const int turns = 8 + static_cast<int>(rng.below(7)) * 2;
    std::string out;
    for (int i = 0; i < turns; ++i) {
      out += (i % 2 == 0 ? "Doctor: " : "Patient: ");
      out += mock_detail::turn_body(rng, 20 + rng.below(20));
      out += "\n";
    }
    out += "[END]\n";
    return out;
  }

  std::string extract_facts(const ChatRequest& request) const {
    const auto turns = mock_detail::parse_transcript_block(user_of(request));
    Rng rng(request.content_hash());
    json facts = json::array();
    if (!turns.empty()) {
      const std::size_t want = 6 + rng.below(5);
      for (std::size_t k = 0; k < want; ++k) {
        const auto& tl = turns[rng.below(turns.size())];
        const auto words = split_ws(tl.text);
        if (words.size() < 4) continue;
        const std::size_t span = 4 + rng.below(std::min<std::size_t>(4, words.size() - 3));
        const std::size_t start = rng.below(words.size() - span + 1);
        std::string quote = words[start];
        for (std::size_t i = 1; i < span; ++i) quote += " " + words[start + i];
        const bool patient = tl.role == "patient";
        static const char* patient_cats[] = {"history", "symptom", "symptom",
                                             "history", "admin"};
        static const char* doctor_cats[] = {"exam", "plan", "other", "plan",
                                            "exam"};
        const std::string category = patient
                                         ? patient_cats[rng.below(5)]
                                         : doctor_cats[rng.below(5)];
        facts.push_back(
            {{"id", "f" + std::to_string(facts.size() + 1)},
             {"statement", std::string(patient ? "Patient reports " :
                                                 "Doctor notes ") + quote},
             {"quote", quote},
             {"turn", tl.turn},
             {"category", category}});
      }
    }
    return json{{"facts", facts}}.dump(2);
  }

  std::string generate_note(const ChatRequest& request) const {
    const std::string user = user_of(request);
    const auto brace = user.find('{');
    const auto end = user.rfind('}');
    notes::SoapNote note;
    if (brace != std::string::npos && end != std::string::npos && end > brace) {
      try {
        const json j = json::parse(user.substr(brace, end - brace + 1));
        for (const auto& fj : j.at("facts")) {
          const std::string category = fj.value("category", "other");
          const std::string statement = fj.value("statement", "");
          if (statement.empty() || category == "admin") continue;
          std::string key = "assessment";
          if (category == "history") key = "subjective_hpi";
          else if (category == "symptom") key = "subjective_ros";
          else if (category == "exam") key = "objective";
          else if (category == "plan") key = "plan";
          note.sections[key].push_back(statement);
        }
      } catch (...) {
      }
    }
    return note.render_text();
  }

  std::string extract_claims(const ChatRequest& request) const {
    const std::string user = user_of(request);
    const auto at = user.find("SOAP note:\n");
    std::string body = at == std::string::npos ? user : user.substr(at + 11);
    const auto stop = body.find("\nReturn the claims");
    if (stop != std::string::npos) body = body.substr(0, stop);
    json claims = json::array();
    try {
      const notes::SoapNote note = notes::parse_note_text(body);
      for (const auto& key : notes::section_keys()) {
        for (const auto& statement : note.sections.at(key)) {
          claims.push_back({{"id", "c" + std::to_string(claims.size() + 1)},
                            {"statement", statement},
                            {"section", key}});
        }
      }
    } catch (...) {
    }
    return json{{"claims", claims}}.dump(2);
  }

  std::string label_claims(const ChatRequest& request) const {
    const std::string user = user_of(request);
    const auto brace = user.find('{');
    const auto end = user.rfind('}');
    const auto turns = mock_detail::parse_transcript_block(user);
    NormalizerChain chain;
    json verdicts = json::array();
    if (brace != std::string::npos && end > brace) {
      try {
        const json j = json::parse(user.substr(brace, end - brace + 1));
        for (const auto& cj : j.at("claims")) {
          const std::string id = cj.at("id").get<std::string>();
          std::string statement = cj.at("statement").get<std::string>();
          for (const char* prefix : {"Patient reports ", "Doctor notes "}) {
            if (starts_with(statement, prefix))
              statement = statement.substr(std::string(prefix).size());
          }
          // longest word span of the claim found verbatim in some turn
          const auto words = split_ws(statement);
          bool placed = false;
          for (std::size_t span = words.size(); span >= 3 && !placed; --span) {
            for (std::size_t start = 0; start + span <= words.size() && !placed;
                 ++start) {
              std::string candidate = words[start];
              for (std::size_t i = 1; i < span; ++i)
                candidate += " " + words[start + i];
              for (const auto& tl : turns) {
                if (normalized_contains(chain, tl.text, candidate)) {
                  verdicts.push_back({{"claim_id", id},
                                      {"label", "supported"},
                                      {"quote", candidate},
                                      {"turn", tl.turn}});
                  placed = true;
                  break;
                }
              }
            }
          }
          if (!placed)
            verdicts.push_back({{"claim_id", id}, {"label", "unsupported"}});
        }
      } catch (...) {
      }
    }
    return json{{"verdicts", verdicts}}.dump(2);
  }

  std::string score_note(const ChatRequest& request) const {
    const std::string user = user_of(request);
    Rng rng(request.content_hash());
    int unsupported = 0;
    if (auto at = user.find("unsupported="); at != std::string::npos) {
      try {
        unsupported = std::stoi(user.substr(at + 12));
      } catch (...) {
      }
    }
    json j{{"faithfulness", unsupported == 0 ? 5 : (unsupported < 3 ? 4 : 3)},
           {"structure", 4 + static_cast<int>(rng.below(2))},
           {"coverage", 3 + static_cast<int>(rng.below(3))},
           {"conciseness", 3 + static_cast<int>(rng.below(3))},
           {"over_medicalization", static_cast<int>(rng.below(2))},
           {"under_medicalization", static_cast<int>(rng.below(2))},
           {"over_specificity", static_cast<int>(rng.below(2))},
           {"missed_relevant_facts", static_cast<int>(rng.below(3))},
           {"critical_omissions", 0},
           {"duplicated_content", static_cast<int>(rng.below(2))}};
    return j.dump(2);
  }

  std::string map_trigger(const ChatRequest& request) const {
    const std::string user = user_of(request);
    NormalizerChain chain;
    const std::string direction =
        chain.apply(mock_detail::find_field(user, "Direction"));
    const std::string classes_line = mock_detail::find_field(user, "Classes");
    std::string best = "none";
    std::size_t best_overlap = 0;
    for (const auto& raw_label : split_on(classes_line, ',')) {
      const std::string label = trim(raw_label);
      std::size_t overlap = 0;
      for (const auto& token : split_ws(chain.apply(label)))
        if (contains(" " + direction + " ", " " + token + " ")) ++overlap;
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = label;
      }
    }
    return best;
  }
};

}  // namespace convoforge::gateway

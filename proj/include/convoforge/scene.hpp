#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/audio.hpp"
#include "convoforge/common.hpp"
#include "convoforge/dialogue.hpp"
#include "convoforge/gateway.hpp"
#include "convoforge/normalize.hpp"
#include "convoforge/persona.hpp"

namespace convoforge::scene {

using nlohmann::json;
using dialogue::DialogueTranscript;
using dialogue::StageDirection;
using persona::Persona;
using persona::Role;

// ----- Voice bank & casting ----------------------------------------------------

struct VoiceBankEntry {
  std::string id;
  std::string gender;
  std::string split;
  std::string wav_path;  // empty -> procedural reference
};

struct VoiceBank {
  std::vector<VoiceBankEntry> entries;

  static VoiceBank load(const std::filesystem::path& path) {
    VoiceBank bank;
    for (const auto& line : io::read_lines(path)) {
      if (trim(line).empty()) continue;
      json j = json::parse(line);
      bank.entries.push_back({j.at("id").get<std::string>(),
                              j.at("gender").get<std::string>(),
                              j.at("split").get<std::string>(),
                              j.value("wav_path", "")});
    }
    std::set<std::string> seen;
    for (const auto& e : bank.entries)
      if (!seen.insert(e.id).second)
        throw ValidationError("duplicate voice bank id: " + e.id);
    return bank;
  }

  // ~30 s normalized clone reference for real engines; the procedural
  // fallback is a short per-voice tone signature, which is all the mock
  // engine needs.
  AudioBuffer reference(const VoiceBankEntry& entry, int sample_rate) const {
    if (!entry.wav_path.empty()) {
      AudioBuffer buf = read_wav_file(entry.wav_path);
      const double peak = peak_abs(buf);
      if (peak > 0.0)
        for (auto& s : buf.samples) s /= peak;
      return buf;
    }
    const std::uint64_t h = fnv1a64(entry.id);
    AudioBuffer sig = tone_burst(100.0 + static_cast<double>(h % 200), 3.0,
                                 sample_rate, 1.0);
    return sig;
  }
};

// persona id -> frozen voice bank entry. Injective per split, gender
// consistent, split disjoint; computed once per corpus and persisted.
struct VoiceAssignment {
  struct Assigned {
    std::string voice_id;
    std::string gender;
    std::string split;
  };
  std::map<std::string, Assigned> by_persona;

  json to_json() const {
    json j = json::object();
    for (const auto& [pid, a] : by_persona)
      j[pid] = {{"voice_id", a.voice_id},
                {"gender", a.gender},
                {"split", a.split}};
    return json{{"schema_version", 1}, {"assignment", j}};
  }

  static VoiceAssignment from_json(const json& j) {
    VoiceAssignment va;
    for (const auto& [pid, a] : j.at("assignment").items())
      va.by_persona[pid] = {a.at("voice_id").get<std::string>(),
                            a.at("gender").get<std::string>(),
                            a.at("split").get<std::string>()};
    return va;
  }
};

// Gender-matched, split-disjoint, seed-deterministic casting. Age is not
// used for matching; the random assignment is retained deliberately.
inline VoiceAssignment cast_voices(const std::vector<Persona>& personas,
                                   const VoiceBank& bank, std::uint64_t seed) {
  VoiceAssignment out;
  // group personas and voices by (split, gender)
  std::map<std::pair<std::string, std::string>, std::vector<const Persona*>>
      need;
  for (const auto& p : personas) need[{p.split, p.gender}].push_back(&p);
  std::map<std::pair<std::string, std::string>, std::vector<const VoiceBankEntry*>>
      have;
  for (const auto& e : bank.entries) have[{e.split, e.gender}].push_back(&e);
  for (auto& [key, group] : need) {
    std::sort(group.begin(), group.end(),
              [](const Persona* a, const Persona* b) { return a->id < b->id; });
    auto it = have.find(key);
    const std::size_t available = it == have.end() ? 0 : it->second.size();
    if (available < group.size())
      throw ValidationError(
          "voice casting shortfall: split '" + key.first + "' gender '" +
          key.second + "' needs " + std::to_string(group.size()) +
          " voices, bank has " + std::to_string(available));
    auto voices = it->second;
    std::sort(voices.begin(), voices.end(),
              [](const VoiceBankEntry* a, const VoiceBankEntry* b) {
                return a->id < b->id;
              });
    Rng rng(derive_seed(seed, {key.first, key.second}));
    rng.shuffle(voices);
    for (std::size_t i = 0; i < group.size(); ++i)
      out.by_persona[group[i]->id] = {voices[i]->id, key.second, key.first};
  }
  return out;
}

// ----- Turn taking ----------------------------------------------------------------

// Gap distribution between consecutive turns: negative = overlap, positive =
// pause. Defaults follow the offline policy: pauses lognormal around a
// 0.4 s median, overlaps with probability 0.15 drawn U(0.1, 0.7) s.
struct GapPolicy {
  double max_overlap_s = 0.7;
  double max_pause_s = 3.0;
  double overlap_probability = 0.15;
  double overlap_min_s = 0.1;
  double overlap_max_s = 0.7;
  double pause_median_s = 0.4;
  double pause_sigma = 0.6;
  std::optional<double> fixed_gap_s;  // set -> degenerate deterministic policy

  double sample(Rng& rng) const {
    double g;
    if (fixed_gap_s) {
      g = *fixed_gap_s;
    } else if (rng.chance(overlap_probability)) {
      g = -rng.uniform(overlap_min_s, overlap_max_s);
    } else {
      g = rng.lognormal_median(pause_median_s, pause_sigma);
    }
    return std::clamp(g, -max_overlap_s, max_pause_s);
  }
};

struct TurnSchedule {
  double onset_s = 0.0;
  double gap_before_s = 0.0;  // negative = overlap with previous turn
};

// Turn k starts at end(k-1) + gap. Overlap magnitude is additionally capped
// by the previous utterance duration so onsets stay monotone.
inline std::vector<TurnSchedule> plan_turn_taking(
    const std::vector<double>& durations, const GapPolicy& policy,
    std::uint64_t seed) {
  std::vector<TurnSchedule> plan;
  plan.reserve(durations.size());
  Rng rng(derive_seed(seed, {"turn-taking"}));
  double prev_end = 0.0;
  for (std::size_t k = 0; k < durations.size(); ++k) {
    TurnSchedule s;
    if (k == 0) {
      s.onset_s = 0.0;
      s.gap_before_s = 0.0;
    } else {
      double g = quantize6(policy.sample(rng));
      const double overlap_cap = std::min(policy.max_overlap_s,
                                          durations[k - 1]);
      g = std::max(g, -quantize6(overlap_cap));
      s.gap_before_s = g;
      s.onset_s = prev_end + g;
    }
    plan.push_back(s);
    prev_end = s.onset_s + durations[k];
  }
  return plan;
}

// ----- Event catalog ---------------------------------------------------------------

// Procedural clip recipe; keeps the bundled asset set free of binary audio
// while every class still has at least one source clip.
struct ClipSpec {
  std::string kind;  // "synth" or "wav"
  std::string wav_path;
  std::string waveform;  // noise_burst | tone | clicks | chirp | crackle
  double duration_s = 0.5;
  double freq_hz = 800.0;
  double decay = 8.0;
  int count = 1;  // for clicks: number of transient hits
};

struct EventClass {
  std::string label;
  std::vector<std::string> triggers;
  std::vector<ClipSpec> clips;
};

struct EventCatalog {
  std::vector<EventClass> classes;

  static EventCatalog load(const std::filesystem::path& path) {
    json j = json::parse(io::read_file(path));
    EventCatalog cat;
    for (const auto& cj : j.at("classes")) {
      EventClass ec;
      ec.label = cj.at("label").get<std::string>();
      ec.triggers = cj.at("triggers").get<std::vector<std::string>>();
      for (const auto& clip : cj.at("clips")) {
        ClipSpec spec;
        spec.kind = clip.value("kind", "synth");
        spec.wav_path = clip.value("wav_path", "");
        spec.waveform = clip.value("waveform", "noise_burst");
        spec.duration_s = clip.value("duration_s", 0.5);
        spec.freq_hz = clip.value("freq_hz", 800.0);
        spec.decay = clip.value("decay", 8.0);
        spec.count = clip.value("count", 1);
        ec.clips.push_back(spec);
      }
      cat.classes.push_back(std::move(ec));
    }
    cat.validate();
    return cat;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& c : classes) {
      if (!seen.insert(c.label).second)
        throw ValidationError("duplicate event class: " + c.label);
      if (c.clips.empty())
        throw ValidationError("event class without source clip: " + c.label);
    }
  }

  const EventClass* find(const std::string& label) const {
    for (const auto& c : classes)
      if (c.label == label) return &c;
    return nullptr;
  }

  std::size_t size() const { return classes.size(); }
};

// Deterministic rendering of a procedural clip variant.
inline AudioBuffer synth_event_clip(const ClipSpec& spec,
                                    const std::string& class_label,
                                    int variant, int sample_rate) {
  if (spec.kind == "wav" && !spec.wav_path.empty())
    return read_wav_file(spec.wav_path);
  const std::uint64_t seed =
      derive_seed(fnv1a64(class_label), {"clip", std::to_string(variant)});
  Rng rng(seed);
  AudioBuffer buf;
  buf.sample_rate = sample_rate;
  const std::size_t n = static_cast<std::size_t>(
      std::llround(spec.duration_s * sample_rate));
  buf.samples.assign(n, 0.0);
  if (spec.waveform == "tone") {
    AudioBuffer t = tone_burst(spec.freq_hz, spec.duration_s, sample_rate, 0.5);
    buf.samples = t.samples;
  } else if (spec.waveform == "chirp") {
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double frac = static_cast<double>(i) / std::max<std::size_t>(n, 1);
      const double f = spec.freq_hz * (0.5 + 1.5 * frac);
      phase += 2.0 * 3.14159265358979323846 * f / sample_rate;
      buf.samples[i] = 0.4 * std::sin(phase) * std::exp(-spec.decay * frac);
    }
  } else if (spec.waveform == "clicks") {
    const int hits = std::max(spec.count, 1);
    for (int h = 0; h < hits; ++h) {
      const std::size_t at = static_cast<std::size_t>(
          rng.uniform(0.0, 0.8) * static_cast<double>(n));
      const std::size_t len = static_cast<std::size_t>(0.02 * sample_rate);
      for (std::size_t i = 0; i < len && at + i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(len);
        buf.samples[at + i] +=
            0.6 * rng.uniform(-1.0, 1.0) * std::exp(-10.0 * frac);
      }
    }
  } else if (spec.waveform == "crackle") {
    for (std::size_t i = 0; i < n; ++i) {
      const double frac = static_cast<double>(i) / std::max<std::size_t>(n, 1);
      const double gate = rng.chance(0.12) ? 1.0 : 0.15;
      buf.samples[i] = 0.35 * gate * rng.uniform(-1.0, 1.0) *
                       (0.4 + 0.6 * std::sin(3.14159 * frac));
    }
  } else {  // noise_burst
    for (std::size_t i = 0; i < n; ++i) {
      const double frac = static_cast<double>(i) / std::max<std::size_t>(n, 1);
      buf.samples[i] = 0.5 * rng.uniform(-1.0, 1.0) * std::exp(-spec.decay * frac);
    }
  }
  return buf;
}

inline double clip_duration_s(const ClipSpec& spec) {
  if (spec.kind == "wav" && !spec.wav_path.empty())
    return read_wav_file(spec.wav_path).duration_s();
  return spec.duration_s;
}

// ----- Trigger mapping ----------------------------------------------------------

struct MappedTrigger {
  std::string event_class;
  int turn_index = 0;
  std::size_t char_offset = 0;
};

struct DirectionRef {
  StageDirection direction;
  int turn_index = 0;
};

inline std::vector<DirectionRef> collect_directions(
    const DialogueTranscript& transcript) {
  std::vector<DirectionRef> out;
  for (const auto& turn : transcript.turns)
    for (const auto& d : turn.directions) out.push_back({d, turn.index});
  return out;
}

// Lexicon first, optional chat fallback for unmatched phrases, best-effort
// drop with a warning otherwise.
inline std::vector<MappedTrigger> map_triggers(
    const std::vector<DirectionRef>& directions, const EventCatalog& catalog,
    const gateway::Gateway* fallback = nullptr,
    const dialogue::PromptLibrary* prompts = nullptr) {
  NormalizerChain chain;
  std::vector<MappedTrigger> out;
  for (const auto& ref : directions) {
    const std::string norm = chain.apply(ref.direction.text);
    const EventClass* match = nullptr;
    for (const auto& ec : catalog.classes) {
      for (const auto& trig : ec.triggers) {
        if (contains(norm, chain.apply(trig))) {
          match = &ec;
          break;
        }
      }
      if (match) break;
    }
    if (!match && fallback && fallback->has_chat() && prompts) {
      std::string labels;
      for (const auto& ec : catalog.classes) {
        if (!labels.empty()) labels += ", ";
        labels += ec.label;
      }
      gateway::ChatRequest req;
      req.messages.push_back(
          {"system", prompts->get("map_trigger")});
      req.messages.push_back(
          {"user", "Direction: " + ref.direction.text + "\nClasses: " +
                       labels + "\nAnswer with one class label or none."});
      req.tag = "map_trigger";
      req.temperature = 0.0;
      const std::string reply = trim(fallback->chat(req));
      match = catalog.find(reply);
    }
    if (match) {
      out.push_back({match->label, ref.turn_index, ref.direction.offset});
    } else {
      log_warn("unmapped stage direction dropped: '" + ref.direction.text +
               "'");
    }
  }
  return out;
}

// ----- Event placement -----------------------------------------------------------

struct SpeechSegment {
  int turn_index = 0;
  Role speaker = Role::doctor;
  double onset_s = 0.0;
  double duration_s = 0.0;
  double gain = 1.0;
  std::string source;  // e.g. dry/turn_0000.wav

  double end_s() const { return onset_s + duration_s; }
};

struct EventPlacement {
  std::string event_class;
  double onset_s = 0.0;
  double duration_s = 0.0;
  double gain = 1.0;
  std::string source;  // synth:<class>:<variant> or wav:<path>

  double end_s() const { return onset_s + duration_s; }
};

// Heuristic estimator: event onset at the character-offset fraction of its
// segment; an alignment service, when configured, supplies token onsets
// instead. Always clipped into the segment span.
inline double place_onset_heuristic(const SpeechSegment& segment,
                                    std::size_t char_offset,
                                    std::size_t turn_text_length) {
  const double frac =
      turn_text_length == 0
          ? 0.0
          : static_cast<double>(char_offset) /
                static_cast<double>(turn_text_length);
  double onset = segment.onset_s + frac * segment.duration_s;
  return std::clamp(onset, segment.onset_s, segment.end_s());
}

inline double place_onset_aligned(const SpeechSegment& segment,
                                  const gateway::AlignmentResult& alignment,
                                  std::size_t char_offset,
                                  const std::string& turn_text) {
  // token covering the offset, located by walking the text
  std::size_t at = 0;
  for (const auto& token : alignment.tokens) {
    const auto found = turn_text.find(token.text, at);
    if (found == std::string::npos) continue;
    at = found + token.text.size();
    if (char_offset <= at) {
      return std::clamp(segment.onset_s + token.onset_s, segment.onset_s,
                        segment.end_s());
    }
  }
  return segment.end_s();
}

// ----- Timeline -----------------------------------------------------------------

struct SceneTimeline {
  std::string dialogue_id;
  std::vector<SpeechSegment> speech;
  std::vector<EventPlacement> events;
  double total_duration_s = 0.0;

  std::size_t overlapping_pairs(double tol = 1e-9) const {
    std::size_t pairs = 0;
    for (std::size_t i = 1; i < speech.size(); ++i)
      if (speech[i].onset_s < speech[i - 1].end_s() - tol) ++pairs;
    return pairs;
  }

  void validate(double max_overlap_s) const {
    constexpr double eps = 2e-6;
    double latest = 0.0;
    for (std::size_t i = 0; i < speech.size(); ++i) {
      const auto& s = speech[i];
      if (s.onset_s < -eps)
        throw ValidationError(dialogue_id + ": negative onset at turn " +
                              std::to_string(s.turn_index));
      if (s.end_s() > total_duration_s + eps)
        throw ValidationError(dialogue_id + ": speech item ends past total");
      if (i > 0) {
        if (s.onset_s + eps < speech[i - 1].onset_s)
          throw ValidationError(dialogue_id + ": onsets not non-decreasing");
        const double overlap = speech[i - 1].end_s() - s.onset_s;
        if (overlap > max_overlap_s + eps)
          throw ValidationError(dialogue_id + ": overlap " +
                                std::to_string(overlap) + " exceeds cap");
      }
      latest = std::max(latest, s.end_s());
    }
    for (const auto& e : events) {
      if (e.onset_s < -eps)
        throw ValidationError(dialogue_id + ": negative event onset");
      if (e.end_s() > total_duration_s + eps)
        throw ValidationError(dialogue_id + ": event ends past total");
      latest = std::max(latest, e.end_s());
    }
    if (!speech.empty() || !events.empty()) {
      if (std::fabs(latest - total_duration_s) > eps)
        throw ValidationError(dialogue_id +
                              ": total duration must equal the latest end");
    }
  }

  // Interchange format: one structured record per scene item, decimal
  // seconds with six fractional digits, bit-exact.
  std::string serialize() const {
    std::string out;
    out += "{\"kind\":\"header\",\"schema_version\":1,\"dialogue_id\":\"" +
           dialogue_id + "\",\"total_duration\":" + fixed6(total_duration_s) +
           "}\n";
    for (const auto& s : speech) {
      out += "{\"kind\":\"speech\",\"turn\":" + std::to_string(s.turn_index) +
             ",\"speaker\":\"" + persona::to_string(s.speaker) +
             "\",\"onset\":" + fixed6(s.onset_s) +
             ",\"duration\":" + fixed6(s.duration_s) +
             ",\"gain\":" + fixed6(s.gain) + ",\"source\":\"" + s.source +
             "\"}\n";
    }
    for (const auto& e : events) {
      out += "{\"kind\":\"event\",\"class\":\"" + e.event_class +
             "\",\"onset\":" + fixed6(e.onset_s) +
             ",\"duration\":" + fixed6(e.duration_s) +
             ",\"gain\":" + fixed6(e.gain) + ",\"source\":\"" + e.source +
             "\"}\n";
    }
    return out;
  }

  static SceneTimeline deserialize(const std::string& data) {
    SceneTimeline tl;
    bool have_header = false;
    for (const auto& line : split_on(data, '\n')) {
      if (trim(line).empty()) continue;
      json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        tl.dialogue_id = j.at("dialogue_id").get<std::string>();
        tl.total_duration_s = j.at("total_duration").get<double>();
        have_header = true;
      } else if (kind == "speech") {
        SpeechSegment s;
        s.turn_index = j.at("turn").get<int>();
        s.speaker = persona::role_from_string(j.at("speaker").get<std::string>());
        s.onset_s = j.at("onset").get<double>();
        s.duration_s = j.at("duration").get<double>();
        s.gain = j.at("gain").get<double>();
        s.source = j.at("source").get<std::string>();
        tl.speech.push_back(std::move(s));
      } else if (kind == "event") {
        EventPlacement e;
        e.event_class = j.at("class").get<std::string>();
        e.onset_s = j.at("onset").get<double>();
        e.duration_s = j.at("duration").get<double>();
        e.gain = j.at("gain").get<double>();
        e.source = j.at("source").get<std::string>();
        tl.events.push_back(std::move(e));
      } else {
        throw ValidationError("unknown timeline record kind: " + kind);
      }
    }
    if (!have_header) throw ValidationError("timeline missing header record");
    return tl;
  }
};

struct ScenePolicy {
  GapPolicy gaps;
  double trigger_event_gain = 0.5;
  double ambient_event_gain = 0.3;
  double target_events_per_dialogue = 37.5;
  double event_density_jitter = 0.15;  // relative stddev of the count draw
};

// Compose speech schedule and event placements into one validated timeline.
// Ambient events top the triggered ones up to the configured density.
// `alignments`, when supplied (turn index -> forced alignment), replaces the
// proportional-offset heuristic for trigger placement.
inline SceneTimeline compose_timeline(
    const DialogueTranscript& transcript, const std::vector<double>& durations,
    const std::vector<std::string>& sources,
    const std::vector<MappedTrigger>& triggers, const EventCatalog& catalog,
    const ScenePolicy& policy, std::uint64_t seed,
    const std::map<int, gateway::AlignmentResult>* alignments = nullptr) {
  if (durations.size() != transcript.turns.size() ||
      sources.size() != transcript.turns.size())
    throw ValidationError(transcript.dialogue_id +
                          ": need one duration and source per turn");
  SceneTimeline tl;
  tl.dialogue_id = transcript.dialogue_id;
  std::vector<double> q_durations;
  q_durations.reserve(durations.size());
  for (double d : durations) {
    if (d <= 0.0)
      throw ValidationError(transcript.dialogue_id +
                            ": non-positive utterance duration");
    q_durations.push_back(quantize6(d));
  }
  const auto plan = plan_turn_taking(q_durations, policy.gaps, seed);
  double latest = 0.0;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    SpeechSegment seg;
    seg.turn_index = transcript.turns[k].index;
    seg.speaker = transcript.turns[k].speaker;
    seg.onset_s = plan[k].onset_s;
    seg.duration_s = q_durations[k];
    seg.gain = 1.0;
    seg.source = sources[k];
    latest = std::max(latest, seg.end_s());
    tl.speech.push_back(std::move(seg));
  }
  tl.total_duration_s = latest;

  Rng rng(derive_seed(seed, {"events"}));
  // triggered events at their heuristic offsets
  for (const auto& trig : triggers) {
    const SpeechSegment* seg = nullptr;
    for (const auto& s : tl.speech)
      if (s.turn_index == trig.turn_index) seg = &s;
    if (!seg) {
      log_warn(transcript.dialogue_id + ": trigger cites unscheduled turn " +
               std::to_string(trig.turn_index));
      continue;
    }
    const EventClass* ec = catalog.find(trig.event_class);
    if (!ec) continue;
    const int variant = static_cast<int>(rng.below(ec->clips.size()));
    const std::string& turn_text =
        transcript.turns[static_cast<std::size_t>(seg->turn_index)].text;
    double onset;
    const gateway::AlignmentResult* alignment = nullptr;
    if (alignments) {
      auto a = alignments->find(trig.turn_index);
      if (a != alignments->end()) alignment = &a->second;
    }
    if (alignment) {
      onset = place_onset_aligned(*seg, *alignment, trig.char_offset, turn_text);
    } else {
      onset = place_onset_heuristic(*seg, trig.char_offset, turn_text.size());
    }
    EventPlacement ev;
    ev.event_class = ec->label;
    ev.onset_s = quantize6(onset);
    ev.duration_s =
        quantize6(std::min(clip_duration_s(ec->clips[static_cast<std::size_t>(variant)]),
                           tl.total_duration_s - ev.onset_s));
    ev.gain = quantize6(policy.trigger_event_gain);
    ev.source = "synth:" + ec->label + ":" + std::to_string(variant);
    if (ev.duration_s > 0.0) tl.events.push_back(std::move(ev));
  }
  // ambient top-up to the target density
  if (!catalog.classes.empty() && tl.total_duration_s > 0.0) {
    const double drawn =
        rng.normal(policy.target_events_per_dialogue,
                   policy.event_density_jitter *
                       policy.target_events_per_dialogue);
    const long long want = std::llround(drawn);
    const long long extra =
        std::max<long long>(0, want - static_cast<long long>(tl.events.size()));
    for (long long i = 0; i < extra; ++i) {
      const auto& ec = catalog.classes[rng.below(catalog.classes.size())];
      const int variant = static_cast<int>(rng.below(ec.clips.size()));
      const double dur = clip_duration_s(ec.clips[static_cast<std::size_t>(variant)]);
      const double max_onset = std::max(0.0, tl.total_duration_s - dur);
      EventPlacement ev;
      ev.event_class = ec.label;
      ev.onset_s = quantize6(rng.uniform(0.0, max_onset));
      ev.duration_s = quantize6(std::min(dur, tl.total_duration_s - ev.onset_s));
      ev.gain = quantize6(policy.ambient_event_gain);
      ev.source = "synth:" + ec.label + ":" + std::to_string(variant);
      if (ev.duration_s > 0.0) tl.events.push_back(std::move(ev));
    }
  }
  tl.validate(policy.gaps.max_overlap_s);
  return tl;
}

}  // namespace convoforge::scene

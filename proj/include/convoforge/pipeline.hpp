#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/acoustics.hpp"
#include "convoforge/audio.hpp"
#include "convoforge/common.hpp"
#include "convoforge/dialogue.hpp"
#include "convoforge/gateway.hpp"
#include "convoforge/judge.hpp"
#include "convoforge/manifest.hpp"
#include "convoforge/metrics.hpp"
#include "convoforge/mockllm.hpp"
#include "convoforge/notes.hpp"
#include "convoforge/persona.hpp"
#include "convoforge/scene.hpp"

namespace convoforge::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;
using corpus::Manifest;
using corpus::ManifestEntry;

// ----- Configuration -----------------------------------------------------------

// Every field has a documented default; the config file overrides them.
struct PipelineConfig {
  std::uint64_t seed = 20250801;
  fs::path corpus_dir = "corpus";
  fs::path assets_dir;

  persona::SplitPlan plan;

  // backends: "mock:auto", "mock:<script.json>", or an http(s) URL
  std::string chat_backend = "mock:auto";
  std::string tts_backend = "mock";
  std::string align_backend = "none";  // none | mock
  std::string chat_model = "chat-default";
  std::string tts_model = "tts-default";
  std::string api_key_env;
  gateway::RetryPolicy retry;
  int backend_concurrency = 4;
  int workers = 1;

  int sample_rate = 16000;
  double mock_tts_wpm = 160.0;

  dialogue::DialogueOptions dialogue_options;
  bool trigger_chat_fallback = true;
  scene::ScenePolicy scene_policy;
  acoustics::RoomSpec room = default_room();
  acoustics::AugmentSpec augment;
  notes::NoteOptions note_options;
  judge::JudgeOptions judge_options;

  fs::path fixtures_dir;
  std::string fixture_mode;  // "", "record", "replay"

  static acoustics::RoomSpec default_room() {
    acoustics::RoomSpec room;
    room.dimensions = {4.0, 2.0, 2.6};
    room.absorption = 0.35;
    room.max_order = 12;
    // desk microphone; doctor at 1.0 m, patient at 1.5 m
    room.microphone = {2.0, 1.0, 1.2};
    room.sources = {{1.0, 1.0, 1.2}, {3.5, 1.0, 1.2}};
    return room;
  }

  PipelineConfig() {
    plan.seed = seed;
    plan.splits["dev"] = {2, 2};
  }

  void validate() const {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
    if (assets_dir.empty()) throw ConfigError("assets_dir not set");
    room.validate();
    if (room.sources.size() < 2)
      throw ConfigError("room needs doctor and patient source positions");
    augment.validate();
    plan.validate();
    if (!fixture_mode.empty() && fixture_mode != "record" &&
        fixture_mode != "replay")
      throw ConfigError("fixture mode must be record or replay");
    if (scene_policy.gaps.max_overlap_s < 0 ||
        scene_policy.gaps.max_pause_s < 0)
      throw ConfigError("gap policy bounds must be non-negative");
  }

  // Identity of the corpus-defining inputs; a changed plan or seed needs a
  // fresh corpus directory.
  std::string corpus_digest() const {
    json splits = json::object();
    for (const auto& [name, c] : plan.splits)
      splits[name] = {c.doctors, c.patients};
    return io::digest_bytes(json{{"seed", seed}, {"splits", splits}}.dump());
  }

  static PipelineConfig load(const fs::path& path) {
    json j;
    try {
      j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
      throw ConfigError("config parse failure: " + std::string(e.what()));
    }
    return from_json(j);
  }

  static PipelineConfig from_json(const json& j) {
    PipelineConfig c;
    static const std::set<std::string> known = {
        "seed",    "corpus_dir", "assets_dir", "splits", "backends",
        "workers", "dialogue",   "scene",      "room",   "augment",
        "notes",   "judge",      "tts",        "fixtures"};
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) throw ConfigError("unknown config key: " + key);

    c.seed = j.value("seed", c.seed);
    if (j.contains("corpus_dir"))
      c.corpus_dir = j.at("corpus_dir").get<std::string>();
    if (j.contains("assets_dir"))
      c.assets_dir = j.at("assets_dir").get<std::string>();
    c.plan.seed = c.seed;
    if (j.contains("splits")) {
      c.plan.splits.clear();
      for (const auto& [name, counts] : j.at("splits").items())
        c.plan.splits[name] = {counts.at("doctors").get<int>(),
                               counts.at("patients").get<int>()};
    }
    if (j.contains("backends")) {
      const auto& b = j.at("backends");
      c.chat_backend = b.value("chat", c.chat_backend);
      c.tts_backend = b.value("tts", c.tts_backend);
      c.align_backend = b.value("align", c.align_backend);
      c.chat_model = b.value("chat_model", c.chat_model);
      c.tts_model = b.value("tts_model", c.tts_model);
      c.api_key_env = b.value("api_key_env", c.api_key_env);
      c.backend_concurrency = b.value("concurrency", c.backend_concurrency);
      if (b.contains("retry")) {
        const auto& r = b.at("retry");
        c.retry.attempts = r.value("attempts", c.retry.attempts);
        if (r.contains("backoff_s"))
          c.retry.backoff_s = r.at("backoff_s").get<std::vector<double>>();
        c.retry.chat_timeout_s = r.value("chat_timeout_s", c.retry.chat_timeout_s);
        c.retry.tts_timeout_s = r.value("tts_timeout_s", c.retry.tts_timeout_s);
      }
    }
    c.workers = j.value("workers", c.workers);
    if (j.contains("dialogue")) {
      const auto& d = j.at("dialogue");
      c.dialogue_options.turn_cap = d.value("turn_cap", 60);
      c.dialogue_options.end_marker = d.value("end_marker", "[END]");
      c.dialogue_options.temperature = d.value("temperature", 0.8);
      c.dialogue_options.single_shot = d.value("single_shot", false);
      c.dialogue_options.content_retries = d.value("retries", 3);
    }
    if (j.contains("scene")) {
      const auto& s = j.at("scene");
      auto& g = c.scene_policy.gaps;
      g.max_overlap_s = s.value("max_overlap_s", g.max_overlap_s);
      g.max_pause_s = s.value("max_pause_s", g.max_pause_s);
      g.overlap_probability = s.value("overlap_probability", g.overlap_probability);
      g.overlap_min_s = s.value("overlap_min_s", g.overlap_min_s);
      g.overlap_max_s = s.value("overlap_max_s", g.overlap_max_s);
      g.pause_median_s = s.value("pause_median_s", g.pause_median_s);
      g.pause_sigma = s.value("pause_sigma", g.pause_sigma);
      if (s.contains("fixed_gap_s"))
        g.fixed_gap_s = s.at("fixed_gap_s").get<double>();
      c.scene_policy.target_events_per_dialogue =
          s.value("target_events_per_dialogue",
                  c.scene_policy.target_events_per_dialogue);
      c.scene_policy.event_density_jitter =
          s.value("event_density_jitter", c.scene_policy.event_density_jitter);
      c.scene_policy.trigger_event_gain =
          s.value("trigger_event_gain", c.scene_policy.trigger_event_gain);
      c.scene_policy.ambient_event_gain =
          s.value("ambient_event_gain", c.scene_policy.ambient_event_gain);
      c.trigger_chat_fallback =
          s.value("trigger_chat_fallback", c.trigger_chat_fallback);
    }
    if (j.contains("room")) {
      const auto& r = j.at("room");
      if (r.contains("dimensions")) {
        auto d = r.at("dimensions").get<std::vector<double>>();
        if (d.size() != 3) throw ConfigError("room.dimensions must be [x,y,z]");
        c.room.dimensions = {d[0], d[1], d[2]};
      }
      c.room.absorption = r.value("absorption", c.room.absorption);
      c.room.max_order = r.value("max_order", c.room.max_order);
      c.room.speed_of_sound = r.value("speed_of_sound", c.room.speed_of_sound);
      auto read_vec = [](const json& v) -> acoustics::Vec3 {
        auto x = v.get<std::vector<double>>();
        if (x.size() != 3) throw ConfigError("positions must be [x,y,z]");
        return {x[0], x[1], x[2]};
      };
      if (r.contains("microphone")) c.room.microphone = read_vec(r.at("microphone"));
      if (r.contains("sources")) {
        c.room.sources.clear();
        for (const auto& s : r.at("sources"))
          c.room.sources.push_back(read_vec(s));
      }
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      const std::string codec = a.value("codec", "none");
      if (codec == "none") c.augment.codec = acoustics::Codec::none;
      else if (codec == "opus") c.augment.codec = acoustics::Codec::opus;
      else throw ConfigError("unknown codec: " + codec);
      c.augment.bitrate_bps = a.value("bitrate_bps", c.augment.bitrate_bps);
      c.augment.speaker_gains[persona::Role::doctor] =
          a.value("doctor_gain", 1.0);
      c.augment.speaker_gains[persona::Role::patient] =
          a.value("patient_gain", 0.25);
      if (a.contains("noise_snr_db")) {
        if (a.at("noise_snr_db").is_null())
          c.augment.noise_snr_db.reset();
        else
          c.augment.noise_snr_db = a.at("noise_snr_db").get<double>();
      }
      c.augment.normalize_peak = a.value("normalize_peak", 0.95);
    }
    if (j.contains("notes")) {
      const auto& n = j.at("notes");
      c.note_options.content_retries = n.value("retries", 3);
      c.note_options.drop_ungrounded_facts =
          n.value("drop_ungrounded_facts", false);
      c.note_options.temperature = n.value("temperature", 0.2);
    }
    if (j.contains("judge")) {
      const auto& n = j.at("judge");
      c.judge_options.content_retries = n.value("retries", 3);
      c.judge_options.temperature = n.value("temperature", 0.2);
    }
    if (j.contains("tts")) {
      const auto& t = j.at("tts");
      c.sample_rate = t.value("sample_rate", c.sample_rate);
      c.mock_tts_wpm = t.value("mock_wpm", c.mock_tts_wpm);
    }
    if (j.contains("fixtures")) {
      const auto& f = j.at("fixtures");
      if (f.contains("dir")) c.fixtures_dir = f.at("dir").get<std::string>();
      c.fixture_mode = f.value("mode", c.fixture_mode);
    }
    return c;
  }
};

// ----- Backend construction --------------------------------------------------------

std::shared_ptr<gateway::ChatBackend> make_chat_backend(
    const PipelineConfig& config);
std::shared_ptr<gateway::TtsBackend> make_tts_backend(
    const PipelineConfig& config);

inline gateway::Gateway make_gateway(const PipelineConfig& config) {
  auto chat = make_chat_backend(config);
  auto tts = make_tts_backend(config);
  if (!config.fixture_mode.empty()) {
    if (config.fixtures_dir.empty())
      throw ConfigError("fixture mode set but fixtures.dir empty");
    fs::create_directories(config.fixtures_dir);
    const auto mode = config.fixture_mode == "record"
                          ? gateway::FixtureMode::record
                          : gateway::FixtureMode::replay;
    chat = std::make_shared<gateway::RecordReplayChat>(chat,
                                                       config.fixtures_dir,
                                                       mode);
    tts = std::make_shared<gateway::RecordReplayTts>(tts, config.fixtures_dir,
                                                     mode);
  }
  gateway::Gateway gw(chat, tts, config.retry, config.backend_concurrency);
  if (config.align_backend == "mock")
    gw.aligner = std::make_shared<gateway::MockAlignBackend>();
  else if (config.align_backend != "none")
    throw ConfigError(
        "align backend must be none or mock (AlignBackend is the extension "
        "point for services)");
  return gw;
}

// ----- Selection ---------------------------------------------------------------------

struct Selection {
  std::optional<std::string> split;
  std::set<std::string> ids;
  std::optional<std::pair<std::string, std::string>> id_range;  // inclusive

  bool matches(const ManifestEntry& e) const {
    if (split && e.split != *split) return false;
    if (!ids.empty() && !ids.count(e.id)) return false;
    if (id_range && (e.id < id_range->first || e.id > id_range->second))
      return false;
    return true;
  }

  static Selection parse(const std::optional<std::string>& split,
                         const std::vector<std::string>& id_args) {
    Selection sel;
    sel.split = split;
    for (const auto& arg : id_args) {
      const auto dots = arg.find("..");
      if (dots != std::string::npos) {
        if (sel.id_range)
          throw ConfigError("only one id range supported per invocation");
        sel.id_range = {arg.substr(0, dots), arg.substr(dots + 2)};
      } else {
        sel.ids.insert(arg);
      }
    }
    return sel;
  }
};

struct RunSummary {
  std::string stage;
  std::size_t selected = 0;
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  std::vector<std::string> errors;
};

// ----- Stage runner ---------------------------------------------------------------------

class StageRunner {
 public:
  explicit StageRunner(PipelineConfig config)
      : config_(std::move(config)),
        manifest_(Manifest::load_or_create(config_.corpus_dir)) {
    config_.validate();
  }

  const PipelineConfig& config() const { return config_; }
  Manifest& manifest() { return manifest_; }

  RunSummary run(const std::string& stage, const Selection& selection = {}) {
    bool known = false;
    for (const auto& s : corpus::all_stages()) known |= (s == stage);
    if (!known) throw ConfigError("unknown stage: " + stage);
    io::LockFile lock(config_.corpus_dir / ".convoforge.lock");
    if (stage == "personas") return run_personas();
    if (stage == "stats") return run_stats();
    return run_dialogue_stage(stage, selection);
  }

  corpus::IntegrityReport verify_corpus() { return corpus::verify(manifest_); }

  // Read roots a stage is allowed to touch; the file-access audit test
  // asserts recorded reads stay inside them.
  std::vector<fs::path> allowed_read_roots(const std::string& stage) const {
    std::vector<fs::path> roots = {config_.assets_dir,
                                   Manifest::snapshot_path(config_.corpus_dir),
                                   Manifest::journal_path(config_.corpus_dir)};
    auto add_entry_files = [&](std::initializer_list<std::string> names) {
      for (const auto& [id, e] : manifest_.entries()) {
        for (const auto& name : names)
          roots.push_back(config_.corpus_dir / e.dir() / name);
        roots.push_back(config_.corpus_dir / e.dir() / "dry");
      }
    };
    const fs::path root = config_.corpus_dir;
    if (stage == "personas") {
      roots.push_back(root / "personas.jsonl");
      roots.push_back(root / "casting.json");
    } else if (stage == "dialogues") {
      roots.push_back(root / "personas.jsonl");
      add_entry_files({"transcript.json"});
    } else if (stage == "synth") {
      roots.push_back(root / "casting.json");
      roots.push_back(root / "personas.jsonl");
      add_entry_files({"transcript.json"});
    } else if (stage == "scene") {
      add_entry_files({"transcript.json", "timeline.jsonl"});
    } else if (stage == "render") {
      add_entry_files({"timeline.jsonl", "wet.wav", "render_meta.json"});
    } else if (stage == "notes") {
      add_entry_files({"transcript.json", "facts.json", "note.json"});
    } else if (stage == "judge") {
      add_entry_files({"transcript.json", "note.json", "judge.json"});
    } else if (stage == "metrics") {
      add_entry_files(
          {"transcript.json", "timeline.jsonl", "note.json", "metrics.json"});
    } else if (stage == "stats") {
      add_entry_files({"metrics.json"});
      roots.push_back(root / "stats.json");
    }
    return roots;
  }

  json export_stats_json(bool allow_partial);
  std::string export_stats_text(bool allow_partial);

 private:
  RunSummary run_personas();
  RunSummary run_stats();
  RunSummary run_dialogue_stage(const std::string& stage,
                                const Selection& selection);

  void execute_entry_stage(const std::string& stage, ManifestEntry& entry);
  void stage_dialogues(ManifestEntry& entry);
  void stage_synth(ManifestEntry& entry);
  void stage_scene(ManifestEntry& entry);
  void stage_render(ManifestEntry& entry);
  void stage_notes(ManifestEntry& entry);
  void stage_judge(ManifestEntry& entry);
  void stage_metrics(ManifestEntry& entry);

  // cached corpus inputs
  const persona::AttributeCatalog& catalog();
  const dialogue::PromptLibrary& prompts();
  const scene::EventCatalog& events();
  const scene::VoiceBank& voicebank();
  const gateway::Gateway& gw();
  const std::map<std::string, persona::Persona>& personas_by_id();
  const scene::VoiceAssignment& casting();
  const std::map<persona::Role, AudioBuffer>& rirs();

  void write_artifact(ManifestEntry& entry, const std::string& stage,
                      const std::string& relpath, std::string_view bytes) {
    io::write_file_atomic(config_.corpus_dir / relpath, bytes);
    entry.files[relpath] = io::digest_bytes(bytes);
    auto& list = entry.stage_files[stage];
    bool present = false;
    for (const auto& p : list) present |= (p == relpath);
    if (!present) list.push_back(relpath);
  }

  void write_corpus_artifact(const std::string& stage,
                             const std::string& relpath,
                             std::string_view bytes) {
    io::write_file_atomic(config_.corpus_dir / relpath, bytes);
    manifest_.corpus().files[relpath] = io::digest_bytes(bytes);
    auto& list = manifest_.corpus().stage_files[stage];
    bool present = false;
    for (const auto& p : list) present |= (p == relpath);
    if (!present) list.push_back(relpath);
  }

  PipelineConfig config_;
  Manifest manifest_;
  std::mutex manifest_mu_;

  std::optional<persona::AttributeCatalog> catalog_;
  std::optional<dialogue::PromptLibrary> prompts_;
  std::optional<scene::EventCatalog> events_;
  std::optional<scene::VoiceBank> voicebank_;
  std::optional<gateway::Gateway> gateway_;
  std::optional<std::map<std::string, persona::Persona>> personas_;
  std::optional<scene::VoiceAssignment> casting_;
  std::optional<std::map<persona::Role, AudioBuffer>> rirs_;
  std::map<std::string, AudioBuffer> voice_ref_cache_;
  std::mutex cache_mu_;
};

// ----- Backend factory impls ---------------------------------------------------------

}  // namespace convoforge::pipeline

#include "convoforge/pipeline_impl.hpp"

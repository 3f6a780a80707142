#pragma once

// Implementation half of pipeline.hpp; included from there.

#include <atomic>
#include <thread>

#include "convoforge/gateway_http.hpp"

namespace convoforge::pipeline {

inline std::shared_ptr<gateway::ChatBackend> make_chat_backend(
    const PipelineConfig& config) {
  const std::string& spec = config.chat_backend;
  if (spec == "mock:auto")
    return std::make_shared<gateway::AutoMockChatBackend>();
  if (starts_with(spec, "mock:"))
    return gateway::ScriptedChatBackend::from_file(spec.substr(5));
  if (starts_with(spec, "http://") || starts_with(spec, "https://")) {
    gateway::HttpEndpoint ep;
    ep.base_url = spec;
    ep.model = config.chat_model;
    ep.api_key_env = config.api_key_env;
    ep.timeout_s = config.retry.chat_timeout_s;
    return std::make_shared<gateway::HttpChatBackend>(ep);
  }
  throw ConfigError("unrecognized chat backend: " + spec);
}

inline std::shared_ptr<gateway::TtsBackend> make_tts_backend(
    const PipelineConfig& config) {
  const std::string& spec = config.tts_backend;
  if (spec == "mock")
    return std::make_shared<gateway::MockTtsBackend>(config.mock_tts_wpm);
  if (starts_with(spec, "http://") || starts_with(spec, "https://")) {
    gateway::HttpEndpoint ep;
    ep.base_url = spec;
    ep.model = config.tts_model;
    ep.api_key_env = config.api_key_env;
    ep.timeout_s = config.retry.tts_timeout_s;
    return std::make_shared<gateway::HttpTtsBackend>(ep);
  }
  throw ConfigError("unrecognized tts backend: " + spec);
}

// ----- cached corpus inputs -----------------------------------------------------

inline const persona::AttributeCatalog& StageRunner::catalog() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!catalog_)
    catalog_ = persona::load_catalog(config_.assets_dir / "persona_catalog.json");
  return *catalog_;
}

inline const dialogue::PromptLibrary& StageRunner::prompts() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!prompts_)
    prompts_ = dialogue::PromptLibrary::load(config_.assets_dir / "prompts");
  return *prompts_;
}

inline const scene::EventCatalog& StageRunner::events() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!events_)
    events_ = scene::EventCatalog::load(config_.assets_dir / "event_catalog.json");
  return *events_;
}

inline const scene::VoiceBank& StageRunner::voicebank() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!voicebank_)
    voicebank_ = scene::VoiceBank::load(config_.assets_dir / "voicebank.jsonl");
  return *voicebank_;
}

inline const gateway::Gateway& StageRunner::gw() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!gateway_) gateway_ = make_gateway(config_);
  return *gateway_;
}

inline const std::map<std::string, persona::Persona>&
StageRunner::personas_by_id() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!personas_) {
    std::map<std::string, persona::Persona> map;
    for (const auto& line :
         io::read_lines(config_.corpus_dir / "personas.jsonl")) {
      if (trim(line).empty()) continue;
      auto p = persona::Persona::from_json(json::parse(line));
      map[p.id] = std::move(p);
    }
    personas_ = std::move(map);
  }
  return *personas_;
}

inline const scene::VoiceAssignment& StageRunner::casting() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!casting_)
    casting_ = scene::VoiceAssignment::from_json(
        json::parse(io::read_file(config_.corpus_dir / "casting.json")));
  return *casting_;
}

inline const std::map<persona::Role, AudioBuffer>& StageRunner::rirs() {
  std::lock_guard<std::mutex> lock(cache_mu_);
  if (!rirs_) {
    std::map<persona::Role, AudioBuffer> map;
    map[persona::Role::doctor] =
        acoustics::compute_rir(config_.room, 0, config_.sample_rate);
    map[persona::Role::patient] =
        acoustics::compute_rir(config_.room, 1, config_.sample_rate);
    rirs_ = std::move(map);
  }
  return *rirs_;
}

// ----- personas stage -------------------------------------------------------------

inline RunSummary StageRunner::run_personas() {
  RunSummary summary;
  summary.stage = "personas";
  summary.selected = 1;
  auto& corpus_rec = manifest_.corpus();
  const std::string digest = config_.corpus_digest();
  if (!corpus_rec.config_digest.empty() && corpus_rec.config_digest != digest)
    throw StageError(
        "corpus was created from a different seed/split plan; use a fresh "
        "corpus_dir");
  if (corpus_rec.stage_done("personas") &&
      manifest_.artifacts_intact(corpus_rec.files,
                                 corpus_rec.stage_files.at("personas"))) {
    summary.skipped = 1;
    return summary;
  }

  const auto sets = persona::sample_personas(catalog(), config_.plan);
  persona::check_split_disjoint(sets);
  std::vector<persona::Persona> all;
  for (const auto& split : persona::split_names()) {
    auto d = sets.doctors.find(split);
    if (d != sets.doctors.end())
      all.insert(all.end(), d->second.begin(), d->second.end());
    auto p = sets.patients.find(split);
    if (p != sets.patients.end())
      all.insert(all.end(), p->second.begin(), p->second.end());
  }
  const auto assignment = scene::cast_voices(
      all, voicebank(), derive_seed(config_.seed, {"casting"}));

  std::string personas_lines;
  for (const auto& p : all) personas_lines += p.to_json().dump() + "\n";
  corpus_rec.stage_files["personas"].clear();
  write_corpus_artifact("personas", "personas.jsonl", personas_lines);
  write_corpus_artifact("personas", "casting.json",
                        assignment.to_json().dump(2));

  for (const auto& split : persona::split_names()) {
    auto d = sets.doctors.find(split);
    auto p = sets.patients.find(split);
    if (d == sets.doctors.end() || p == sets.patients.end()) continue;
    const auto specs = persona::cross_product_specs(d->second, p->second,
                                                    split, config_.seed);
    for (const auto& spec : specs) {
      if (manifest_.has_entry(spec.id)) continue;
      ManifestEntry e;
      e.id = spec.id;
      e.split = spec.split;
      e.doctor_id = spec.doctor_id;
      e.patient_id = spec.patient_id;
      e.seed = spec.seed;
      manifest_.upsert_entry(e);
    }
  }
  corpus_rec.stages["personas"] = true;
  corpus_rec.config_digest = digest;
  manifest_.journal_corpus();
  for (const auto& [id, e] : manifest_.entries()) manifest_.journal_entry(e);
  manifest_.compact();
  summary.executed = 1;
  return summary;
}

// ----- per-dialogue stages -----------------------------------------------------------

inline void StageRunner::stage_dialogues(ManifestEntry& entry) {
  const auto& people = personas_by_id();
  auto doc = people.find(entry.doctor_id);
  auto pat = people.find(entry.patient_id);
  if (doc == people.end() || pat == people.end())
    throw StageError(entry.id + ": personas not found in personas.jsonl");
  persona::DialogueSpec spec{entry.id, entry.doctor_id, entry.patient_id,
                             entry.split, entry.seed};
  const auto transcript = dialogue::run_dialogue(
      spec, doc->second, pat->second, gw(), prompts(),
      config_.dialogue_options);
  write_artifact(entry, "dialogues", entry.dir() + "/transcript.json",
                 transcript.to_json().dump(2));
}

inline void StageRunner::stage_synth(ManifestEntry& entry) {
  const auto transcript = dialogue::DialogueTranscript::from_json(json::parse(
      io::read_file(config_.corpus_dir / entry.dir() / "transcript.json")));
  const auto& cast = casting();
  const auto& bank = voicebank();
  auto voice_for = [&](const std::string& persona_id) -> const scene::VoiceBankEntry& {
    auto a = cast.by_persona.find(persona_id);
    if (a == cast.by_persona.end())
      throw StageError(entry.id + ": no voice cast for " + persona_id);
    for (const auto& e : bank.entries)
      if (e.id == a->second.voice_id) return e;
    throw StageError(entry.id + ": voice " + a->second.voice_id +
                     " missing from bank");
  };
  auto reference_for = [&](const scene::VoiceBankEntry& v) {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = voice_ref_cache_.find(v.id);
    if (it == voice_ref_cache_.end())
      it = voice_ref_cache_
               .emplace(v.id, bank.reference(v, config_.sample_rate))
               .first;
    return it->second;
  };
  entry.stage_files["synth"].clear();
  for (const auto& turn : transcript.turns) {
    const std::string clean = dialogue::speech_text(turn);
    AudioBuffer dry;
    if (clean.empty()) {
      log_warn(entry.id + ": turn " + std::to_string(turn.index) +
               " has no speech text, synthesizing a short silence");
      dry.sample_rate = config_.sample_rate;
      dry.samples.assign(static_cast<std::size_t>(0.2 * config_.sample_rate),
                         0.0);
    } else {
      const auto& voice = voice_for(turn.speaker == persona::Role::doctor
                                        ? entry.doctor_id
                                        : entry.patient_id);
      gateway::TtsRequest req;
      req.text = clean;
      req.voice_reference = reference_for(voice);
      req.voice_id = voice.id;
      req.sample_rate = config_.sample_rate;
      dry = gw().synthesize(req);
    }
    char name[32];
    std::snprintf(name, sizeof(name), "dry/turn_%04d.wav", turn.index);
    write_artifact(entry, "synth", entry.dir() + "/" + name,
                   encode_wav(dry));
  }
}

inline void StageRunner::stage_scene(ManifestEntry& entry) {
  const auto transcript = dialogue::DialogueTranscript::from_json(json::parse(
      io::read_file(config_.corpus_dir / entry.dir() / "transcript.json")));
  std::vector<double> durations;
  std::vector<std::string> sources;
  std::map<int, AudioBuffer> dry;
  for (const auto& turn : transcript.turns) {
    char name[32];
    std::snprintf(name, sizeof(name), "dry/turn_%04d.wav", turn.index);
    AudioBuffer buf =
        read_wav_file(config_.corpus_dir / entry.dir() / name);
    durations.push_back(buf.duration_s());
    sources.emplace_back(name);
    dry[turn.index] = std::move(buf);
  }
  const auto triggers = scene::map_triggers(
      scene::collect_directions(transcript), events(),
      config_.trigger_chat_fallback ? &gw() : nullptr, &prompts());
  std::map<int, gateway::AlignmentResult> alignments;
  if (gw().aligner) {
    std::set<int> turns_with_triggers;
    for (const auto& t : triggers) turns_with_triggers.insert(t.turn_index);
    for (int idx : turns_with_triggers)
      alignments[idx] = gw().aligner->align(
          dialogue::speech_text(transcript.turns[static_cast<std::size_t>(idx)]),
          dry.at(idx));
  }
  const auto timeline = scene::compose_timeline(
      transcript, durations, sources, triggers, events(), config_.scene_policy,
      derive_seed(entry.seed, {"scene"}),
      alignments.empty() ? nullptr : &alignments);
  entry.stage_files["scene"].clear();
  write_artifact(entry, "scene", entry.dir() + "/timeline.jsonl",
                 timeline.serialize());
}

inline void StageRunner::stage_render(ManifestEntry& entry) {
  const auto timeline = scene::SceneTimeline::deserialize(
      io::read_file(config_.corpus_dir / entry.dir() / "timeline.jsonl"));
  std::map<std::string, AudioBuffer> clip_cache;
  auto resolver = [&](const std::string& source) -> AudioBuffer {
    if (starts_with(source, "dry/"))
      return read_wav_file(config_.corpus_dir / entry.dir() / source);
    if (starts_with(source, "synth:")) {
      auto it = clip_cache.find(source);
      if (it != clip_cache.end()) return it->second;
      const auto parts = split_on(source, ':');
      if (parts.size() != 3)
        throw StageError(entry.id + ": bad event source ref " + source);
      const auto* ec = events().find(parts[1]);
      if (!ec) throw StageError(entry.id + ": unknown event class " + parts[1]);
      const int variant = std::stoi(parts[2]);
      AudioBuffer clip = scene::synth_event_clip(
          ec->clips[static_cast<std::size_t>(variant)], ec->label, variant,
          config_.sample_rate);
      clip_cache[source] = clip;
      return clip;
    }
    if (starts_with(source, "wav:"))
      return read_wav_file(source.substr(4));
    throw StageError(entry.id + ": unresolvable source ref " + source);
  };
  AudioBuffer noise;
  const fs::path noise_asset = config_.assets_dir / "noise_hvac.wav";
  if (fs::exists(noise_asset)) {
    noise = read_wav_file(noise_asset);
  } else {
    noise = synth_hvac_noise(15.0, config_.sample_rate,
                             derive_seed(entry.seed, {"noise"}));
  }
  auto result = acoustics::render_scene(timeline, rirs(), resolver, noise,
                                        config_.augment);
  AudioBuffer wet = std::move(result.mix);
  if (config_.augment.normalize_peak > 0.0)
    wet = acoustics::peak_normalize(wet, config_.augment.normalize_peak);
  const auto codec = acoustics::codec_roundtrip(wet, config_.augment);
  wet = codec.buffer;
  entry.stage_files["render"].clear();
  write_artifact(entry, "render", entry.dir() + "/wet.wav", encode_wav(wet));
  json meta{{"schema_version", 1},
            {"codec", codec.codec_name},
            {"encoded_bytes", codec.encoded_bytes},
            {"raw_pcm_bytes", codec.raw_pcm_bytes},
            {"duration_s", wet.duration_s()},
            {"timeline_duration_s", timeline.total_duration_s}};
  entry.meta = meta;
  write_artifact(entry, "render", entry.dir() + "/render_meta.json",
                 meta.dump(2));
}

inline void StageRunner::stage_notes(ManifestEntry& entry) {
  const auto transcript = dialogue::DialogueTranscript::from_json(json::parse(
      io::read_file(config_.corpus_dir / entry.dir() / "transcript.json")));
  auto table =
      notes::extract_facts(transcript, gw(), prompts(), config_.note_options);
  table = notes::enforce_grounding(table, transcript, config_.note_options);
  entry.stage_files["notes"].clear();
  write_artifact(entry, "notes", entry.dir() + "/facts.json",
                 table.to_json().dump(2));
  const auto note =
      notes::generate_note(table, gw(), prompts(), config_.note_options);
  write_artifact(entry, "notes", entry.dir() + "/note.json",
                 note.to_json().dump(2));
}

inline void StageRunner::stage_judge(ManifestEntry& entry) {
  const auto transcript = dialogue::DialogueTranscript::from_json(json::parse(
      io::read_file(config_.corpus_dir / entry.dir() / "transcript.json")));
  const auto note = notes::SoapNote::from_json(json::parse(
      io::read_file(config_.corpus_dir / entry.dir() / "note.json")));
  const auto claims =
      judge::extract_claims(note, gw(), prompts(), config_.judge_options);
  std::vector<judge::ClaimVerdict> verdicts;
  if (!claims.claims.empty())
    verdicts = judge::label_claims(claims, transcript, gw(), prompts(),
                                   config_.judge_options);
  const auto report = judge::score_dimensions(
      claims, verdicts, note, transcript, gw(), prompts(),
      config_.judge_options);
  entry.stage_files["judge"].clear();
  write_artifact(entry, "judge", entry.dir() + "/judge.json",
                 report.to_json().dump(2));
}

inline void StageRunner::stage_metrics(ManifestEntry& entry) {
  const auto transcript = dialogue::DialogueTranscript::from_json(json::parse(
      io::read_file(config_.corpus_dir / entry.dir() / "transcript.json")));
  const auto timeline = scene::SceneTimeline::deserialize(
      io::read_file(config_.corpus_dir / entry.dir() / "timeline.jsonl"));
  const auto note = notes::SoapNote::from_json(json::parse(
      io::read_file(config_.corpus_dir / entry.dir() / "note.json")));
  json doctor_words = json::array(), patient_words = json::array();
  std::string doctor_text, patient_text;
  std::size_t words_total = 0;
  for (const auto& turn : transcript.turns) {
    const std::string clean = dialogue::speech_text(turn);
    const std::size_t words = word_count(clean);
    words_total += words;
    if (turn.speaker == persona::Role::doctor) {
      doctor_words.push_back(words);
      doctor_text += clean + " ";
    } else {
      patient_words.push_back(words);
      patient_text += clean + " ";
    }
  }
  auto fog_or_null = [](const std::string& text) -> json {
    try {
      return metrics::gunning_fog(text);
    } catch (const ValidationError&) {
      return nullptr;
    }
  };
  json row{{"schema_version", 1},
           {"dialogue_id", entry.id},
           {"split", entry.split},
           {"turns", transcript.turns.size()},
           {"doctor_turn_words", doctor_words},
           {"patient_turn_words", patient_words},
           {"doctor_fog", fog_or_null(doctor_text)},
           {"patient_fog", fog_or_null(patient_text)},
           {"words_total", words_total},
           {"duration_s", timeline.total_duration_s},
           {"events", timeline.events.size()},
           {"note_words", note.word_count()}};
  entry.stage_files["metrics"].clear();
  write_artifact(entry, "metrics", entry.dir() + "/metrics.json",
                 row.dump(2));
}

inline void StageRunner::execute_entry_stage(const std::string& stage,
                                             ManifestEntry& entry) {
  if (stage == "dialogues") stage_dialogues(entry);
  else if (stage == "synth") stage_synth(entry);
  else if (stage == "scene") stage_scene(entry);
  else if (stage == "render") stage_render(entry);
  else if (stage == "notes") stage_notes(entry);
  else if (stage == "judge") stage_judge(entry);
  else if (stage == "metrics") stage_metrics(entry);
  else throw ConfigError("unknown dialogue stage: " + stage);
  entry.stages[stage] = true;
}

inline RunSummary StageRunner::run_dialogue_stage(const std::string& stage,
                                                  const Selection& selection) {
  RunSummary summary;
  summary.stage = stage;
  // dependency gate
  const auto deps = corpus::stage_dependencies(stage);
  for (const auto& dep : deps) {
    if (dep == "personas" && !manifest_.corpus().stage_done("personas"))
      throw DependencyError("stage '" + stage +
                            "' requires 'personas'; run it first");
  }
  std::vector<std::string> selected;
  for (const auto& [id, e] : manifest_.entries())
    if (selection.matches(e)) selected.push_back(id);
  summary.selected = selected.size();
  if (selected.empty()) {
    log_warn("selection matches no dialogues");
    return summary;
  }
  std::vector<std::string> missing_deps;
  for (const auto& id : selected) {
    const auto& e = manifest_.entry(id);
    for (const auto& dep : deps)
      if (dep != "personas" && !e.stage_done(dep))
        missing_deps.push_back(id + " needs " + dep);
  }
  if (!missing_deps.empty()) {
    std::string detail;
    for (std::size_t i = 0; i < std::min<std::size_t>(missing_deps.size(), 5); ++i)
      detail += "\n  " + missing_deps[i];
    throw DependencyError("stage '" + stage + "' blocked by " +
                          std::to_string(missing_deps.size()) +
                          " incomplete upstream dialogues (run the listed "
                          "stages first):" +
                          detail);
  }

  // pre-warm shared caches on this thread
  if (stage == "dialogues") { personas_by_id(); prompts(); gw(); }
  if (stage == "synth") { casting(); voicebank(); gw(); }
  if (stage == "scene") { events(); prompts(); gw(); }
  if (stage == "render") { events(); rirs(); }
  if (stage == "notes" || stage == "judge") { prompts(); gw(); }

  std::atomic<std::size_t> cursor{0};
  std::mutex summary_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= selected.size()) break;
      const std::string& id = selected[i];
      ManifestEntry entry;
      {
        std::lock_guard<std::mutex> lock(manifest_mu_);
        entry = manifest_.entry(id);
      }
      try {
        auto sf = entry.stage_files.find(stage);
        if (entry.stage_done(stage) && sf != entry.stage_files.end() &&
            manifest_.artifacts_intact(entry.files, sf->second)) {
          std::lock_guard<std::mutex> lock(summary_mu);
          ++summary.skipped;
          continue;
        }
        // upstream artifacts must be intact before consuming them
        for (const auto& dep : deps) {
          if (dep == "personas") continue;
          auto df = entry.stage_files.find(dep);
          if (df != entry.stage_files.end() &&
              !manifest_.artifacts_intact(entry.files, df->second))
            throw StageError(id + ": upstream '" + dep +
                             "' artifacts corrupted (digest mismatch); rerun " +
                             dep);
        }
        execute_entry_stage(stage, entry);
        {
          std::lock_guard<std::mutex> lock(manifest_mu_);
          manifest_.upsert_entry(entry);
          manifest_.journal_entry(entry);
        }
        std::lock_guard<std::mutex> lock(summary_mu);
        ++summary.executed;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(summary_mu);
        ++summary.failed;
        summary.errors.push_back(e.what());
      }
    }
  };
  const int workers = std::max(1, config_.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  manifest_.compact();
  return summary;
}

// ----- stats stage -----------------------------------------------------------------

namespace detail {

struct SplitAccumulator {
  std::size_t dialogues = 0;
  double hours = 0.0;
  double words = 0.0;
  std::vector<double> turns;
  std::vector<double> durations;
  std::vector<double> events;
  std::vector<double> note_words;
  std::vector<double> doctor_turn_words;
  std::vector<double> patient_turn_words;
  std::vector<double> doctor_fog;
  std::vector<double> patient_fog;
  int doctors = 0;
  int patients = 0;

  void add_row(const json& row) {
    ++dialogues;
    hours += row.at("duration_s").get<double>() / 3600.0;
    words += row.at("words_total").get<double>();
    turns.push_back(row.at("turns").get<double>());
    durations.push_back(row.at("duration_s").get<double>());
    events.push_back(row.at("events").get<double>());
    note_words.push_back(row.at("note_words").get<double>());
    for (const auto& w : row.at("doctor_turn_words"))
      doctor_turn_words.push_back(w.get<double>());
    for (const auto& w : row.at("patient_turn_words"))
      patient_turn_words.push_back(w.get<double>());
    if (!row.at("doctor_fog").is_null())
      doctor_fog.push_back(row.at("doctor_fog").get<double>());
    if (!row.at("patient_fog").is_null())
      patient_fog.push_back(row.at("patient_fog").get<double>());
  }

  json to_json() const {
    auto ms = [](const std::vector<double>& xs) {
      const auto m = metrics::mean_std(xs);
      return json{{"mean", m.mean}, {"std", m.stddev}, {"n", m.n}};
    };
    return json{{"doctors", doctors},
                {"patients", patients},
                {"dialogues", dialogues},
                {"hours", hours},
                {"words", words},
                {"turns_per_dialogue", ms(turns)},
                {"duration_per_dialogue_s", ms(durations)},
                {"events_per_dialogue", ms(events)},
                {"note_words", ms(note_words)},
                {"doctor_turn_words", ms(doctor_turn_words)},
                {"patient_turn_words", ms(patient_turn_words)},
                {"doctor_fog", ms(doctor_fog)},
                {"patient_fog", ms(patient_fog)}};
  }
};

}  // namespace detail

inline json StageRunner::export_stats_json(bool allow_partial) {
  std::map<std::string, detail::SplitAccumulator> by_split;
  detail::SplitAccumulator total;
  std::size_t missing = 0;
  for (const auto& [id, e] : manifest_.entries()) {
    if (!e.stage_done("metrics")) {
      ++missing;
      if (!allow_partial)
        throw DependencyError("stats requires 'metrics' on every dialogue (" +
                              id + " missing); run metrics first");
      continue;
    }
    const json row = json::parse(
        io::read_file(config_.corpus_dir / e.dir() / "metrics.json"));
    by_split[e.split].add_row(row);
    total.add_row(row);
  }
  if (total.dialogues == 0)
    throw StageError("no completed metrics rows; corpus is empty");
  // persona counts per split from the personas artifact
  if (fs::exists(config_.corpus_dir / "personas.jsonl")) {
    for (const auto& line :
         io::read_lines(config_.corpus_dir / "personas.jsonl")) {
      if (trim(line).empty()) continue;
      const auto p = persona::Persona::from_json(json::parse(line));
      auto& acc = by_split[p.split];
      if (p.role == persona::Role::doctor) {
        ++acc.doctors;
        ++total.doctors;
      } else {
        ++acc.patients;
        ++total.patients;
      }
    }
  }
  json splits = json::object();
  for (const auto& [name, acc] : by_split) splits[name] = acc.to_json();
  return json{{"schema_version", 1},
              {"splits", splits},
              {"total", total.to_json()},
              {"dialogues_missing_metrics", missing}};
}

inline RunSummary StageRunner::run_stats() {
  RunSummary summary;
  summary.stage = "stats";
  summary.selected = 1;
  const json stats = export_stats_json(/*allow_partial=*/false);
  manifest_.corpus().stage_files["stats"].clear();
  write_corpus_artifact("stats", "stats.json", stats.dump(2));
  manifest_.corpus().stages["stats"] = true;
  manifest_.journal_corpus();
  manifest_.compact();
  summary.executed = 1;
  return summary;
}

inline std::string StageRunner::export_stats_text(bool allow_partial) {
  const json stats = export_stats_json(allow_partial);
  std::vector<std::string> split_order;
  for (const auto& name : persona::split_names())
    if (stats.at("splits").contains(name)) split_order.push_back(name);
  for (const auto& [name, v] : stats.at("splits").items()) {
    bool known = false;
    for (const auto& s : split_order) known |= (s == name);
    if (!known) split_order.push_back(name);
  }
  std::string out;
  char line[512];
  auto header = [&] {
    std::string s;
    std::snprintf(line, sizeof(line), "%-26s", "");
    s += line;
    for (const auto& name : split_order) {
      std::snprintf(line, sizeof(line), "%12s", name.c_str());
      s += line;
    }
    std::snprintf(line, sizeof(line), "%12s\n", "total");
    s += line;
    return s;
  };
  auto row = [&](const std::string& label,
                 const std::function<std::string(const json&)>& cell) {
    std::snprintf(line, sizeof(line), "%-26s", label.c_str());
    out += line;
    for (const auto& name : split_order) {
      std::snprintf(line, sizeof(line), "%12s",
                    cell(stats.at("splits").at(name)).c_str());
      out += line;
    }
    std::snprintf(line, sizeof(line), "%12s\n",
                  cell(stats.at("total")).c_str());
    out += line;
  };
  auto fmt_count = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return std::string(buf);
  };
  auto fmt1 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return std::string(buf);
  };
  out += "Corpus statistics\n";
  out += header();
  row("Personas (Doc/Pat)", [&](const json& s) {
    return std::to_string(s.at("doctors").get<int>()) + "/" +
           std::to_string(s.at("patients").get<int>());
  });
  row("Dialogues", [&](const json& s) {
    return fmt_count(s.at("dialogues").get<double>());
  });
  row("Hours", [&](const json& s) { return fmt1(s.at("hours").get<double>()); });
  row("Words in dialogues", [&](const json& s) {
    return fmt_count(s.at("words").get<double>());
  });
  row("Turns/dialogue", [&](const json& s) {
    return fmt1(s.at("turns_per_dialogue").at("mean").get<double>());
  });
  row("Duration/dialogue (s)", [&](const json& s) {
    return fmt_count(s.at("duration_per_dialogue_s").at("mean").get<double>());
  });
  row("Audio events/dialogue", [&](const json& s) {
    return fmt1(s.at("events_per_dialogue").at("mean").get<double>());
  });
  row("Words per SOAP note", [&](const json& s) {
    return fmt1(s.at("note_words").at("mean").get<double>());
  });
  out += "\nDialogue style\n";
  auto ms_cell = [&](const json& s, const std::string& key) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.1f±%.1f",
                  s.at(key).at("mean").get<double>(),
                  s.at(key).at("std").get<double>());
    return std::string(buf);
  };
  row("Doctor turn length", [&](const json& s) {
    return ms_cell(s, "doctor_turn_words");
  });
  row("Doctor fog index", [&](const json& s) {
    return fmt1(s.at("doctor_fog").at("mean").get<double>());
  });
  row("Patient turn length", [&](const json& s) {
    return ms_cell(s, "patient_turn_words");
  });
  row("Patient fog index", [&](const json& s) {
    return fmt1(s.at("patient_fog").at("mean").get<double>());
  });
  row("Turns/dialogue ±", [&](const json& s) {
    return ms_cell(s, "turns_per_dialogue");
  });
  const auto missing = stats.at("dialogues_missing_metrics").get<std::size_t>();
  if (missing > 0)
    out += "\n(" + std::to_string(missing) +
           " dialogues missing metrics; partial report)\n";
  return out;
}

// ----- Reference-grounded evaluation of external note sets ---------------------------

struct NoteEvalRow {
  std::string dialogue_id;
  double r2 = 0.0, r3 = 0.0, rl = 0.0;
  double concept_f1 = 0.0;
  bool concept_vacuous = false;
  int words = 0;
};

struct NoteEvalResult {
  std::vector<NoteEvalRow> rows;
  json aggregate;
  std::string table;
  std::string csv;
};

// Scores hypothesis notes (<dialogue_id>.json or .txt in hyp_dir) against the
// corpus reference notes: ROUGE-2/3/L F1, medical-concept F1, word count.
inline NoteEvalResult evaluate_notes(StageRunner& runner,
                                     const fs::path& hyp_dir) {
  const auto& config = runner.config();
  const auto lexicon = metrics::ConceptLexicon::load(
      config.assets_dir / "concept_lexicon.tsv");
  NoteEvalResult result;
  std::vector<double> r2s, r3s, rls, concepts, words;
  for (const auto& [id, e] : runner.manifest().entries()) {
    if (!e.stage_done("notes")) continue;
    fs::path hyp_json = hyp_dir / (id + ".json");
    fs::path hyp_txt = hyp_dir / (id + ".txt");
    std::string hyp_text;
    if (fs::exists(hyp_json)) {
      hyp_text = notes::SoapNote::from_json(
                     json::parse(io::read_file(hyp_json)))
                     .render_text();
    } else if (fs::exists(hyp_txt)) {
      hyp_text = io::read_file(hyp_txt);
    } else {
      continue;
    }
    const auto ref = notes::SoapNote::from_json(json::parse(
        io::read_file(config.corpus_dir / e.dir() / "note.json")));
    const std::string ref_text = ref.render_text();
    NoteEvalRow row;
    row.dialogue_id = id;
    row.r2 = metrics::rouge_f1(ref_text, hyp_text, metrics::RougeVariant::R2).f1;
    row.r3 = metrics::rouge_f1(ref_text, hyp_text, metrics::RougeVariant::R3).f1;
    row.rl = metrics::rouge_f1(ref_text, hyp_text, metrics::RougeVariant::RL).f1;
    const auto cf = metrics::concept_f1(ref_text, hyp_text, lexicon);
    row.concept_f1 = cf.f1;
    row.concept_vacuous = cf.vacuous;
    row.words = static_cast<int>(word_count(hyp_text));
    r2s.push_back(row.r2);
    r3s.push_back(row.r3);
    rls.push_back(row.rl);
    concepts.push_back(row.concept_f1);
    words.push_back(row.words);
    result.rows.push_back(std::move(row));
  }
  if (result.rows.empty())
    throw StageError("no hypothesis notes matched corpus dialogues in " +
                     hyp_dir.string());
  auto agg = [](const std::vector<double>& xs) {
    const auto m = metrics::mean_std(xs);
    return json{{"mean", m.mean}, {"std", m.stddev}, {"n", m.n}};
  };
  result.aggregate = json{{"R-2", agg(r2s)},
                          {"R-3", agg(r3s)},
                          {"R-L", agg(rls)},
                          {"Open", agg(concepts)},
                          {"#Wrd", agg(words)}};
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s %8s %8s\n", "dialogue",
                "R-2", "R-3", "R-L", "Open", "#Wrd");
  result.table += line;
  result.csv = "dialogue_id,r2,r3,rl,concept_f1,concept_vacuous,words\n";
  for (const auto& row : result.rows) {
    std::snprintf(line, sizeof(line), "%-24s %8.1f %8.2f %8.1f %8.1f %8d\n",
                  row.dialogue_id.c_str(), 100.0 * row.r2, 100.0 * row.r3,
                  100.0 * row.rl, 100.0 * row.concept_f1, row.words);
    result.table += line;
    result.csv += row.dialogue_id + "," + std::to_string(row.r2) + "," +
                  std::to_string(row.r3) + "," + std::to_string(row.rl) + "," +
                  std::to_string(row.concept_f1) + "," +
                  (row.concept_vacuous ? "1" : "0") + "," +
                  std::to_string(row.words) + "\n";
  }
  std::snprintf(line, sizeof(line), "%-24s %8.1f %8.2f %8.1f %8.1f %8.0f\n",
                "mean",
                100.0 * result.aggregate.at("R-2").at("mean").get<double>(),
                100.0 * result.aggregate.at("R-3").at("mean").get<double>(),
                100.0 * result.aggregate.at("R-L").at("mean").get<double>(),
                100.0 * result.aggregate.at("Open").at("mean").get<double>(),
                result.aggregate.at("#Wrd").at("mean").get<double>());
  result.table += line;
  return result;
}

// Table-style text statistics over a directory of transcript files; the
// ingest path for externally produced transcripts.
inline json text_stats(const fs::path& transcripts_dir) {
  std::vector<double> doctor_words, patient_words, turns;
  std::vector<double> doctor_fog, patient_fog;
  std::size_t count = 0;
  for (const auto& entry : fs::recursive_directory_iterator(transcripts_dir)) {
    if (entry.path().filename() != "transcript.json" &&
        entry.path().extension() != ".transcript")
      continue;
    const auto transcript = dialogue::DialogueTranscript::from_json(
        json::parse(io::read_file(entry.path())));
    ++count;
    turns.push_back(static_cast<double>(transcript.turns.size()));
    std::string dtext, ptext;
    for (const auto& turn : transcript.turns) {
      const std::string clean = dialogue::speech_text(turn);
      if (turn.speaker == persona::Role::doctor) {
        doctor_words.push_back(static_cast<double>(word_count(clean)));
        dtext += clean + " ";
      } else {
        patient_words.push_back(static_cast<double>(word_count(clean)));
        ptext += clean + " ";
      }
    }
    try {
      doctor_fog.push_back(metrics::gunning_fog(dtext));
    } catch (const ValidationError&) {
    }
    try {
      patient_fog.push_back(metrics::gunning_fog(ptext));
    } catch (const ValidationError&) {
    }
  }
  if (count == 0)
    throw StageError("no transcript.json files under " +
                     transcripts_dir.string());
  auto ms = [](const std::vector<double>& xs) {
    const auto m = metrics::mean_std(xs);
    return json{{"mean", m.mean}, {"std", m.stddev}, {"n", m.n}};
  };
  return json{{"dialogues", count},
              {"doctor_turn_words", ms(doctor_words)},
              {"patient_turn_words", ms(patient_words)},
              {"doctor_fog", ms(doctor_fog)},
              {"patient_fog", ms(patient_fog)},
              {"turns_per_dialogue", ms(turns)}};
}

}  // namespace convoforge::pipeline

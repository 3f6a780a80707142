#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/common.hpp"
#include "convoforge/io.hpp"
#include "convoforge/persona.hpp"

namespace convoforge::corpus {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kManifestSchemaVersion = 1;

inline const std::vector<std::string>& dialogue_stages() {
  static const std::vector<std::string> stages = {
      "dialogues", "synth", "scene", "render", "notes", "judge", "metrics"};
  return stages;
}

inline const std::vector<std::string>& all_stages() {
  static const std::vector<std::string> stages = {
      "personas", "dialogues", "synth",   "scene", "render",
      "notes",    "judge",     "metrics", "stats"};
  return stages;
}

// Upstream stages that must be complete before a stage may run.
inline std::vector<std::string> stage_dependencies(const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"personas", {}},
      {"dialogues", {"personas"}},
      {"synth", {"dialogues"}},
      {"scene", {"synth"}},
      {"render", {"scene"}},
      {"notes", {"dialogues"}},
      {"judge", {"notes"}},
      {"metrics", {"scene", "notes"}},
      {"stats", {"metrics"}},
  };
  auto it = deps.find(stage);
  if (it == deps.end()) throw ConfigError("unknown stage: " + stage);
  return it->second;
}

// One dialogue's stage-completion state plus content digests for every file
// it owns. Paths are relative to the corpus root.
struct ManifestEntry {
  std::string id;
  std::string split;
  std::string doctor_id;
  std::string patient_id;
  std::uint64_t seed = 0;
  std::map<std::string, bool> stages;
  std::map<std::string, std::string> files;  // relpath -> digest
  std::map<std::string, std::vector<std::string>> stage_files;
  json meta = json::object();  // render stats: codec, encoded bytes, duration

  bool stage_done(const std::string& stage) const {
    auto it = stages.find(stage);
    return it != stages.end() && it->second;
  }

  std::string dir() const { return split + "/" + id; }

  json to_json() const {
    return json{{"kind", "dialogue"},
                {"id", id},
                {"split", split},
                {"doctor_id", doctor_id},
                {"patient_id", patient_id},
                {"seed", seed},
                {"stages", stages},
                {"files", files},
                {"stage_files", stage_files},
                {"meta", meta}};
  }

  static ManifestEntry from_json(const json& j) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.split = j.at("split").get<std::string>();
    e.doctor_id = j.at("doctor_id").get<std::string>();
    e.patient_id = j.at("patient_id").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.stages = j.at("stages").get<std::map<std::string, bool>>();
    e.files = j.at("files").get<std::map<std::string, std::string>>();
    e.stage_files =
        j.at("stage_files")
            .get<std::map<std::string, std::vector<std::string>>>();
    e.meta = j.value("meta", json::object());
    return e;
  }
};

// Corpus-level state: the personas/casting artifacts and the stats rollup.
struct CorpusRecord {
  std::map<std::string, bool> stages;  // personas, stats
  std::map<std::string, std::string> files;
  std::map<std::string, std::vector<std::string>> stage_files;
  std::string config_digest;

  bool stage_done(const std::string& stage) const {
    auto it = stages.find(stage);
    return it != stages.end() && it->second;
  }

  json to_json() const {
    return json{{"kind", "corpus"},
                {"stages", stages},
                {"files", files},
                {"stage_files", stage_files},
                {"config_digest", config_digest}};
  }

  static CorpusRecord from_json(const json& j) {
    CorpusRecord c;
    c.stages = j.at("stages").get<std::map<std::string, bool>>();
    c.files = j.at("files").get<std::map<std::string, std::string>>();
    c.stage_files =
        j.at("stage_files")
            .get<std::map<std::string, std::vector<std::string>>>();
    c.config_digest = j.value("config_digest", "");
    return c;
  }
};

// The single source of truth for a corpus directory. Persistence is an
// append-only journal (manifest.journal.jsonl, last-wins per record) plus a
// compacted snapshot (manifest.jsonl) rewritten atomically after each stage.
class Manifest {
 public:
  static fs::path snapshot_path(const fs::path& root) {
    return root / "manifest.jsonl";
  }
  static fs::path journal_path(const fs::path& root) {
    return root / "manifest.journal.jsonl";
  }

  static Manifest load_or_create(const fs::path& root) {
    Manifest m;
    m.root_ = root;
    fs::create_directories(root);
    if (fs::exists(snapshot_path(root)))
      m.apply_lines(io::read_lines(snapshot_path(root)));
    if (fs::exists(journal_path(root)))
      m.apply_lines(io::read_lines(journal_path(root)));
    return m;
  }

  const fs::path& root() const { return root_; }

  CorpusRecord& corpus() { return corpus_; }
  const CorpusRecord& corpus() const { return corpus_; }

  bool has_entry(const std::string& id) const { return entries_.count(id); }
  ManifestEntry& entry(const std::string& id) {
    auto it = entries_.find(id);
    if (it == entries_.end())
      throw ValidationError("no manifest entry for " + id);
    return it->second;
  }
  const std::map<std::string, ManifestEntry>& entries() const {
    return entries_;
  }

  void upsert_entry(const ManifestEntry& e) { entries_[e.id] = e; }

  // Append one record to the journal; survives a crash mid-stage.
  void journal_corpus() const {
    io::append_line(journal_path(root_), corpus_.to_json().dump());
  }
  void journal_entry(const ManifestEntry& e) const {
    io::append_line(journal_path(root_), e.to_json().dump());
  }

  // Compact: rewrite the snapshot (sorted, one line per record) and drop the
  // journal.
  void compact() const {
    std::string out;
    out += json{{"kind", "meta"},
                {"schema_version", kManifestSchemaVersion}}
               .dump() +
           "\n";
    out += corpus_.to_json().dump() + "\n";
    for (const auto& [id, e] : entries_) out += e.to_json().dump() + "\n";
    io::write_file_atomic(snapshot_path(root_), out);
    std::error_code ec;
    fs::remove(journal_path(root_), ec);
  }

  // True when every listed artifact of `stage` exists with a matching digest.
  bool artifacts_intact(const std::map<std::string, std::string>& files,
                        const std::vector<std::string>& relpaths) const {
    for (const auto& rel : relpaths) {
      auto it = files.find(rel);
      if (it == files.end()) return false;
      const fs::path p = root_ / rel;
      if (!fs::exists(p)) return false;
      if (io::digest_file(p) != it->second) return false;
    }
    return true;
  }

 private:
  void apply_lines(const std::vector<std::string>& lines) {
    for (const auto& line : lines) {
      if (trim(line).empty()) continue;
      json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "meta") {
        const int v = j.at("schema_version").get<int>();
        if (v != kManifestSchemaVersion)
          throw ConfigError("manifest schema_version " + std::to_string(v) +
                            " unsupported");
      } else if (kind == "corpus") {
        corpus_ = CorpusRecord::from_json(j);
      } else if (kind == "dialogue") {
        ManifestEntry e = ManifestEntry::from_json(j);
        entries_[e.id] = std::move(e);
      } else {
        throw ConfigError("unknown manifest record kind: " + kind);
      }
    }
  }

  fs::path root_;
  CorpusRecord corpus_;
  std::map<std::string, ManifestEntry> entries_;
};

// ----- Integrity verification -------------------------------------------------

struct IntegrityReport {
  std::size_t checked_files = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

inline IntegrityReport verify(const Manifest& manifest) {
  IntegrityReport report;
  auto check_files = [&](const std::map<std::string, std::string>& files,
                         const std::map<std::string, bool>& stages,
                         const std::map<std::string, std::vector<std::string>>&
                             stage_files) {
    for (const auto& [stage, done] : stages) {
      if (!done) continue;
      auto it = stage_files.find(stage);
      if (it == stage_files.end()) continue;
      for (const auto& rel : it->second) {
        ++report.checked_files;
        const fs::path p = manifest.root() / rel;
        auto f = files.find(rel);
        if (f == files.end()) {
          report.failures.push_back(rel + ": no digest recorded");
          continue;
        }
        if (!fs::exists(p)) {
          report.failures.push_back(rel + ": missing");
          continue;
        }
        if (io::digest_file(p) != f->second)
          report.failures.push_back(rel + ": digest mismatch");
      }
    }
  };
  check_files(manifest.corpus().files, manifest.corpus().stages,
              manifest.corpus().stage_files);
  for (const auto& [id, e] : manifest.entries())
    check_files(e.files, e.stages, e.stage_files);

  // split-disjointness re-verified corpus-wide from the personas artifact
  const fs::path personas_path = manifest.root() / "personas.jsonl";
  if (manifest.corpus().stage_done("personas") && fs::exists(personas_path)) {
    std::map<std::string, std::string> split_of;
    std::set<std::string> seen;
    for (const auto& line : io::read_lines(personas_path)) {
      if (trim(line).empty()) continue;
      const auto p = persona::Persona::from_json(json::parse(line));
      if (!seen.insert(p.id).second)
        report.failures.push_back("persona " + p.id +
                                  ": appears more than once");
      split_of[p.id] = p.split;
    }
    for (const auto& [id, e] : manifest.entries()) {
      auto d = split_of.find(e.doctor_id);
      auto p = split_of.find(e.patient_id);
      if (d == split_of.end())
        report.failures.push_back(id + ": unknown doctor " + e.doctor_id);
      else if (d->second != e.split)
        report.failures.push_back(id + ": doctor " + e.doctor_id +
                                  " belongs to split " + d->second);
      if (p == split_of.end())
        report.failures.push_back(id + ": unknown patient " + e.patient_id);
      else if (p->second != e.split)
        report.failures.push_back(id + ": patient " + e.patient_id +
                                  " belongs to split " + p->second);
    }
  }
  return report;
}

}  // namespace convoforge::corpus

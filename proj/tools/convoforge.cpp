// convoforge: synthetic doctor-patient conversation corpus pipeline.
//
// Stages (each a subcommand):
//   personas dialogues synth scene render notes judge metrics stats
// Utilities:
//   verify export-stats eval-notes text-stats
//
// Exit codes: 0 success, 1 stage errors, 2 config/dependency errors.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "convoforge/pipeline.hpp"

#ifndef CONVOFORGE_DEFAULT_ASSETS
#define CONVOFORGE_DEFAULT_ASSETS "assets"
#endif

using namespace convoforge;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string assets_dir;
  std::string corpus_dir;
  std::string split;
  std::vector<std::string> ids;
  std::string chat_backend;
  std::string tts_backend;
  int workers = 0;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_selection) {
  cmd->add_option("--config", args.config_path, "pipeline config JSON");
  cmd->add_option("--assets", args.assets_dir, "assets directory");
  cmd->add_option("--corpus", args.corpus_dir, "corpus directory");
  cmd->add_option("--backend", args.chat_backend,
                  "chat backend: mock:auto | mock:<script.json> | <url>");
  cmd->add_option("--tts-backend", args.tts_backend,
                  "tts backend: mock | <url>");
  cmd->add_option("--workers", args.workers, "parallel dialogue workers");
  cmd->add_flag("-v,--verbose", args.verbose, "debug logging");
  if (with_selection) {
    cmd->add_option("--split", args.split, "restrict to one split");
    cmd->add_option("--ids", args.ids,
                    "dialogue ids or one lexicographic range a..b");
  }
}

pipeline::PipelineConfig build_config(const CommonArgs& args) {
  pipeline::PipelineConfig config;
  if (!args.config_path.empty())
    config = pipeline::PipelineConfig::load(args.config_path);
  if (config.assets_dir.empty()) {
    const char* env = std::getenv("CONVOFORGE_ASSETS");
    config.assets_dir = env ? env : CONVOFORGE_DEFAULT_ASSETS;
  }
  if (!args.assets_dir.empty()) config.assets_dir = args.assets_dir;
  if (!args.corpus_dir.empty()) config.corpus_dir = args.corpus_dir;
  if (!args.chat_backend.empty()) config.chat_backend = args.chat_backend;
  if (!args.tts_backend.empty()) config.tts_backend = args.tts_backend;
  if (args.workers > 0) config.workers = args.workers;
  if (args.verbose) set_log_level(LogLevel::debug);
  return config;
}

int run_stage_command(const std::string& stage, const CommonArgs& args) {
  try {
    pipeline::StageRunner runner(build_config(args));
    const auto selection = pipeline::Selection::parse(
        args.split.empty() ? std::nullopt
                           : std::optional<std::string>(args.split),
        args.ids);
    const auto summary = runner.run(stage, selection);
    std::printf("%s: selected %zu, executed %zu, skipped %zu, failed %zu\n",
                summary.stage.c_str(), summary.selected, summary.executed,
                summary.skipped, summary.failed);
    for (const auto& e : summary.errors)
      std::fprintf(stderr, "  error: %s\n", e.c_str());
    return summary.failed > 0 ? 1 : 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DependencyError& e) {
    std::fprintf(stderr, "dependency error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convoforge: synthetic clinical conversation corpus pipeline"};
  app.require_subcommand(1);

  static const std::vector<std::pair<std::string, std::string>> stages = {
      {"personas", "sample personas, cast voices, enumerate dialogue specs"},
      {"dialogues", "generate turn-by-turn transcripts"},
      {"synth", "synthesize dry per-turn speech"},
      {"scene", "map triggers and compose scene timelines"},
      {"render", "room simulation, noise, gains, codec; writes wet audio"},
      {"notes", "fact tables and reference SOAP notes"},
      {"judge", "two-stage claim-level judging of reference notes"},
      {"metrics", "per-dialogue statistics rows"},
      {"stats", "corpus-level statistics rollup"},
  };
  std::map<std::string, CommonArgs> stage_args;
  for (const auto& [name, help] : stages) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, stage_args[name], /*with_selection=*/true);
  }

  CommonArgs verify_args;
  auto* verify_cmd =
      app.add_subcommand("verify", "re-check digests and corpus invariants");
  add_common(verify_cmd, verify_args, false);

  CommonArgs export_args;
  bool export_partial = false;
  std::string export_json_path;
  auto* export_cmd = app.add_subcommand(
      "export-stats", "formatted corpus statistics tables");
  add_common(export_cmd, export_args, false);
  export_cmd->add_flag("--partial", export_partial,
                       "report whatever metrics exist, flagging gaps");
  export_cmd->add_option("--json", export_json_path,
                         "also write the stats JSON here");

  CommonArgs eval_args;
  std::string hyp_dir, eval_csv_path;
  auto* eval_cmd = app.add_subcommand(
      "eval-notes",
      "score hypothesis notes against the corpus reference notes");
  add_common(eval_cmd, eval_args, false);
  eval_cmd->add_option("--hyp-dir", hyp_dir,
                       "directory of <dialogue_id>.json|.txt notes")
      ->required();
  eval_cmd->add_option("--csv", eval_csv_path, "write per-dialogue CSV here");

  std::string transcripts_dir;
  auto* text_stats_cmd = app.add_subcommand(
      "text-stats",
      "dialogue statistics over a directory of transcript.json files");
  text_stats_cmd->add_option("--dir", transcripts_dir, "transcripts directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, help] : stages)
    if (app.got_subcommand(name)) return run_stage_command(name, stage_args[name]);

  try {
    if (app.got_subcommand("verify")) {
      pipeline::StageRunner runner(build_config(verify_args));
      const auto report = runner.verify_corpus();
      std::printf("verify: %zu files checked, %zu failures\n",
                  report.checked_files, report.failures.size());
      for (const auto& f : report.failures)
        std::fprintf(stderr, "  fail: %s\n", f.c_str());
      return report.ok() ? 0 : 1;
    }
    if (app.got_subcommand("export-stats")) {
      pipeline::StageRunner runner(build_config(export_args));
      std::printf("%s", runner.export_stats_text(export_partial).c_str());
      if (!export_json_path.empty())
        io::write_file_atomic(export_json_path,
                              runner.export_stats_json(export_partial).dump(2));
      return 0;
    }
    if (app.got_subcommand("eval-notes")) {
      pipeline::StageRunner runner(build_config(eval_args));
      const auto result = pipeline::evaluate_notes(runner, hyp_dir);
      std::printf("%s", result.table.c_str());
      if (!eval_csv_path.empty())
        io::write_file_atomic(eval_csv_path, result.csv);
      return 0;
    }
    if (app.got_subcommand("text-stats")) {
      const auto stats = pipeline::text_stats(transcripts_dir);
      std::printf("%s\n", stats.dump(2).c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DependencyError& e) {
    std::fprintf(stderr, "dependency error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

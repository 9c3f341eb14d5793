#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sqlflow/cli.hpp"

using namespace sqlflow;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string catalog;
  std::string db_root;
  std::string out;
  std::string ablate;
  std::string shots;
  int k = -1;
  std::string profile;
  std::string replay;
  int workers = -1;
  long long seed = -1;
};

cli::AppConfig resolve_config(const CommonFlags& flags) {
  cli::AppConfig config;
  if (!flags.config_path.empty()) config = cli::AppConfig::load(flags.config_path);
  if (!flags.catalog.empty()) config.catalog_path = flags.catalog;
  if (!flags.db_root.empty()) config.db_root = flags.db_root;
  if (!flags.ablate.empty()) {
    config.pipeline.ablations.clear();
    std::stringstream ss(flags.ablate);
    std::string flag;
    while (std::getline(ss, flag, ','))
      if (!flag.empty()) config.pipeline.ablations.insert(ablation_from_string(flag));
  }
  if (!flags.shots.empty()) config.pipeline.shot_mode = shot_mode_from_string(flags.shots);
  if (flags.k >= 0) config.pipeline.shot_count = static_cast<std::size_t>(flags.k);
  if (!flags.profile.empty()) config.pipeline.profile = profile_from_string(flags.profile);
  if (!flags.replay.empty()) config.replay = replay_mode_from_string(flags.replay);
  if (flags.workers > 0) config.workers = flags.workers;
  if (flags.seed >= 0) config.pipeline.seed = static_cast<std::uint64_t>(flags.seed);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"five-stage LLM text-to-SQL pipeline and execution-accuracy evaluator"};
  app.require_subcommand(1);

  // shots-build
  auto* shots_cmd = app.add_subcommand("shots-build", "build the few-shot library");
  std::string train_path, shots_catalog, shots_out;
  shots_cmd->add_option("--train", train_path, "training tasks JSONL")->required();
  shots_cmd->add_option("--catalog", shots_catalog, "Spider tables catalog JSON")->required();
  shots_cmd->add_option("--out", shots_out, "output library JSONL")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "run the pipeline over a dataset");
  CommonFlags run_flags;
  std::string dataset_path;
  run_cmd->add_option("--dataset", dataset_path, "tasks JSONL")->required();
  run_cmd->add_option("--config", run_flags.config_path, "config JSON");
  run_cmd->add_option("--catalog", run_flags.catalog, "Spider tables catalog JSON");
  run_cmd->add_option("--db-root", run_flags.db_root, "database root directory");
  run_cmd->add_option("--out", run_flags.out, "output directory")->required();
  run_cmd->add_option("--ablate", run_flags.ablate, "comma list of ablation flags");
  run_cmd->add_option("--shots", run_flags.shots,
                      "zero_shot|random|ques_sim|tem_sim|tem_sim_wo");
  run_cmd->add_option("--k", run_flags.k, "few-shot count");
  run_cmd->add_option("--profile", run_flags.profile, "spider|bird");
  run_cmd->add_option("--replay", run_flags.replay, "off|record|strict");
  run_cmd->add_option("--workers", run_flags.workers, "worker count");
  run_cmd->add_option("--seed", run_flags.seed, "random seed");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score predictions by execution accuracy");
  std::string predictions_path, eval_dataset, eval_db_root, eval_report;
  double eval_timeout = 30.0;
  eval_cmd->add_option("--predictions", predictions_path, "predictions JSONL")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "gold tasks JSONL")->required();
  eval_cmd->add_option("--db-root", eval_db_root, "database root directory")->required();
  eval_cmd->add_option("--report", eval_report, "machine-readable report JSON path");
  eval_cmd->add_option("--timeout", eval_timeout, "per-query timeout seconds");

  // report-cost
  auto* cost_cmd = app.add_subcommand("report-cost", "token/time summary over traces");
  std::string traces_path;
  cost_cmd->add_option("--traces", traces_path, "traces JSONL")->required();

  // convert-spider
  auto* convert_cmd = app.add_subcommand("convert-spider", "Spider-native JSON to tasks JSONL");
  std::string convert_in, convert_out, convert_diff;
  convert_cmd->add_option("--input", convert_in, "Spider dev/train JSON")->required();
  convert_cmd->add_option("--output", convert_out, "tasks JSONL")->required();
  convert_cmd->add_option("--difficulty", convert_diff, "JSON array of difficulty labels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*shots_cmd)
      return cli::cmd_shots_build(train_path, shots_catalog, shots_out, std::cout, std::cerr);
    if (*run_cmd) {
      auto config = resolve_config(run_flags);
      return cli::cmd_run(dataset_path, config, run_flags.out, std::cout, std::cerr);
    }
    if (*eval_cmd)
      return cli::cmd_eval(predictions_path, eval_dataset, eval_db_root, eval_report, eval_timeout,
                           std::cout, std::cerr);
    if (*cost_cmd) return cli::cmd_report_cost(traces_path, std::cout, std::cerr);
    if (*convert_cmd)
      return cli::cmd_convert_spider(convert_in, convert_out, convert_diff, std::cout, std::cerr);
  } catch (const AuthError& e) {
    std::cerr << "auth error: " << e.what() << "\n";
    return cli::exit_auth;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_config;
  }
  return cli::exit_config;
}

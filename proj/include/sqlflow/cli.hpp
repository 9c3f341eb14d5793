#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sqlflow/exec_eval.hpp"
#include "sqlflow/workflow.hpp"

namespace sqlflow::cli {

// Exit-code contract: 0 completed (even with per-item failures),
// 2 configuration/IO errors, 3 auth/endpoint errors.
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_auth = 3;

struct AppConfig {
  PipelineConfig pipeline;
  std::string catalog_path;
  std::string db_root;
  std::string cache_root = "cache";
  std::string shots_library;
  std::string prompts_dir = "prompts/fixtures";
  std::string base_url;
  std::string api_key_env = "SQLFLOW_API_KEY";
  ReplayMode replay = ReplayMode::off;
  int workers = 4;
  double request_timeout_s = 120.0;
  int max_attempts = 3;
  double exec_timeout_s = 30.0;

  static AppConfig from_json(const nlohmann::json& j);
  static AppConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

std::vector<QuestionTask> load_tasks(const std::string& path);
void save_tasks(const std::vector<QuestionTask>& tasks, const std::string& path);

int cmd_shots_build(const std::string& train_path, const std::string& catalog_path,
                    const std::string& out_path, std::ostream& out, std::ostream& err);

int cmd_run(const std::string& dataset_path, const AppConfig& config, const std::string& out_dir,
            std::ostream& out, std::ostream& err);

int cmd_eval(const std::string& predictions_path, const std::string& dataset_path,
             const std::string& db_root, const std::string& report_path, double exec_timeout_s,
             std::ostream& out, std::ostream& err, MetricsReport* out_report = nullptr);

int cmd_report_cost(const std::string& traces_path, std::ostream& out, std::ostream& err,
                    nlohmann::json* out_summary = nullptr);

/// Convert a Spider-native dev/train JSON array into the task JSONL format.
/// The optional sidecar is a JSON array of difficulty labels aligned by index.
int cmd_convert_spider(const std::string& input_path, const std::string& output_path,
                       const std::string& difficulty_path, std::ostream& out, std::ostream& err);

}  // namespace sqlflow::cli

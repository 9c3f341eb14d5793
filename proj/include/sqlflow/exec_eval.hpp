#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sqlflow/llm.hpp"
#include "sqlflow/task.hpp"

namespace sqlflow {

enum class ExecStatus { ok, sql_error, timeout };
std::string to_string(ExecStatus s);

/// One executed result set, cells normalized for comparison: every numeric
/// becomes a real rounded to 6 places, text stays as-is, NULL is a distinct
/// marker.
struct ExecResult {
  ExecStatus status = ExecStatus::sql_error;
  std::vector<std::vector<std::string>> rows;  // normalized cells
  int column_count = 0;
  std::string error;  // for sql_error
};

/// Run a query read-only against a SQLite file; never throws, all failures
/// land in the status.
ExecResult execute_sql(const std::string& db_path, const std::string& sql,
                       double timeout_s = 30.0);

/// Top-level ORDER BY detection (outside parentheses and quotes).
bool has_top_level_order_by(const std::string& sql);

/// Execution-accuracy match: row sequences when the gold statement orders
/// its result, row multisets otherwise.
bool exec_match(const ExecResult& pred, const ExecResult& gold, const std::string& gold_sql);

enum class FailureKind { pred_error, mismatch, timeout };
std::string to_string(FailureKind k);

struct EvalRecord {
  QuestionTask task;
  std::string predicted_sql;
  std::string gold_sql;
  bool match = false;
  std::optional<FailureKind> failure_kind;
};

struct BucketStats {
  long long total = 0;
  long long matches = 0;
  double ex() const { return total == 0 ? 0.0 : static_cast<double>(matches) / total; }
};

struct MetricsReport {
  std::map<std::string, BucketStats> buckets;  // easy/medium/hard/extra
  BucketStats all;
  std::map<std::string, long long> failure_histogram;
  long long invalid_gold = 0;  // gold-side execution errors, excluded from EX

  double avg_prompt_tokens = 0;
  double avg_completion_tokens = 0;
  double avg_total_tokens = 0;
  double avg_wall_ms = 0;
  bool usage_approximate = false;

  nlohmann::json to_json() const;
  std::string format_table() const;  // Easy / Medium / Hard / Extra / All
};

struct EmptyRecordSet : std::runtime_error {
  EmptyRecordSet() : std::runtime_error("no evaluation records") {}
};

MetricsReport aggregate(const std::vector<EvalRecord>& records, const UsageLedger* ledger = nullptr);

/// Normalize one SQLite cell the way execute_sql does (exposed for oracles).
std::string normalize_real(double v);

}  // namespace sqlflow

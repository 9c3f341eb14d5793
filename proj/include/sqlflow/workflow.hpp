#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sqlflow/llm.hpp"
#include "sqlflow/prompts.hpp"
#include "sqlflow/schema.hpp"
#include "sqlflow/shots.hpp"
#include "sqlflow/task.hpp"

namespace sqlflow {

/// Workflow stages that can be switched off to reproduce the ablation rows.
enum class Ablation {
  information_filter,
  classification,
  self_correct,
  active_learning,
  active_and_correct,  // shorthand for self_correct + active_learning
  hfk,
};
Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);

/// Which schema text a stage sees when a pruned schema is available.
enum class SchemaChoice { pruned, full };

struct PipelineConfig {
  Profile profile = Profile::spider;
  std::string model = "gpt-4";
  double temperature = 0.0;
  int max_output_tokens = 800;
  ShotMode shot_mode = ShotMode::tem_sim;
  std::size_t shot_count = 3;
  std::uint64_t seed = 0;
  std::set<Ablation> ablations;
  SchemaChoice generation_schema = SchemaChoice::pruned;
  SchemaChoice classification_schema = SchemaChoice::pruned;
  SchemaChoice correction_schema = SchemaChoice::pruned;

  bool disabled(Ablation stage_flag) const;
};

struct ElementsResult {
  std::vector<std::string> entities;       // query entities under the bird profile
  std::vector<std::string> hint_entities;  // bird only
  std::string rewritten_query;
};

struct RequiredTable {
  std::string table;
  std::string where_note;
  std::vector<std::string> columns;
};

struct FilterResult {
  std::map<std::string, std::vector<std::string>> element_matching;
  std::string main_metric_method;
  std::vector<RequiredTable> required_tables;
  std::string join_note;
  std::string draft_sql;
  std::vector<std::string> all_fields;
};

struct StageRecord {
  std::string stage;
  std::string prompt;
  std::string response;
  nlohmann::json parsed;
  std::optional<std::string> parse_error;
  bool fallback = false;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double latency_ms = 0.0;
  std::string provenance;
};

struct PipelineTrace {
  QuestionTask task;
  std::string profile;
  std::vector<std::string> ablations;
  std::vector<StageRecord> stages;
  std::string final_sql;
  std::vector<std::string> fallbacks;
  bool failed = false;
  std::string failure;

  nlohmann::json to_json() const;
  static PipelineTrace from_json(const nlohmann::json& j);
};

// Canonical stage names, in execution order.
namespace stages {
inline constexpr const char* elements = "elements";
inline constexpr const char* filter = "filter";
inline constexpr const char* classification = "classification";
inline constexpr const char* generation = "generation";
inline constexpr const char* self_correction = "self_correction";
inline constexpr const char* active_learning = "active_learning";
}  // namespace stages

const std::vector<std::string>& canonical_stage_order();

// --- response parsers ------------------------------------------------------

std::optional<ElementsResult> parse_elements_response(const std::string& response,
                                                      Profile profile);
std::optional<FilterResult> parse_filter_response(const std::string& response);

/// Last "Label: <A>, <B>" line, case- and whitespace-tolerant.
std::optional<QuestionClass> parse_label(const std::string& response);

/// {"sql": ...} object anywhere in the response.
std::optional<std::string> extract_sql_json(const std::string& response);

/// First statement starting with SELECT/WITH (secondary extraction).
std::optional<std::string> extract_bare_sql(const std::string& response);

/// Prefix "SELECT " unless the completion already starts a statement.
std::optional<std::string> apply_select_seed(const std::string& completion);

/// Text after the last "The modified SQL:" marker.
std::optional<std::string> extract_modified_sql(const std::string& response);

// ---------------------------------------------------------------------------

/// Runs the five-stage workflow over one question and records a full trace.
class PipelineEngine {
 public:
  PipelineEngine(const SchemaCatalog& catalog, const TemplateStore& templates, Gateway& gateway,
                 const ShotLibrary* library, PipelineConfig config);

  PipelineTrace run(const QuestionTask& task) const;

  const PipelineConfig& config() const { return config_; }

  // Individual stages, exposed for targeted tests. Each appends its record
  // to the trace and applies the documented fallback on parse failure.
  ElementsResult identify_elements(const QuestionTask& task, PipelineTrace& trace) const;
  DatabaseSchema filter_information(const QuestionTask& task, const ElementsResult& elements,
                                    const DatabaseSchema& schema, PipelineTrace& trace,
                                    FilterResult* result = nullptr) const;
  QuestionClass classify_question(const QuestionTask& task, const DatabaseSchema& pruned,
                                  PipelineTrace& trace) const;
  std::optional<std::string> generate_sql(const QuestionTask& task, QuestionClass question_class,
                                          const DatabaseSchema& full,
                                          const DatabaseSchema& pruned,
                                          const std::string& main_metric,
                                          PipelineTrace& trace) const;
  std::string self_correct(const QuestionTask& task, const std::string& schema_text,
                           const std::string& draft_sql, PipelineTrace& trace) const;
  std::string active_learn(const QuestionTask& task, const std::string& schema_text,
                           const std::string& sql, PipelineTrace& trace) const;

 private:
  StageRecord call_stage(const std::string& stage, const std::string& prompt) const;
  const DatabaseSchema& pick(SchemaChoice choice, const DatabaseSchema& full,
                             const DatabaseSchema& pruned) const;

  const SchemaCatalog& catalog_;
  const TemplateStore& templates_;
  Gateway& gateway_;
  const ShotLibrary* library_;
  PipelineConfig config_;
};

}  // namespace sqlflow

#include "sqlflow/workflow.hpp"

#include <algorithm>
#include <regex>

#include "sqlflow/textutil.hpp"

namespace sqlflow {

using nlohmann::json;

Ablation ablation_from_string(const std::string& s) {
  if (s == "information_filter") return Ablation::information_filter;
  if (s == "classification") return Ablation::classification;
  if (s == "self_correct") return Ablation::self_correct;
  if (s == "active_learning") return Ablation::active_learning;
  if (s == "active_and_correct") return Ablation::active_and_correct;
  if (s == "hfk") return Ablation::hfk;
  throw std::invalid_argument("unknown ablation flag: " + s);
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::information_filter: return "information_filter";
    case Ablation::classification: return "classification";
    case Ablation::self_correct: return "self_correct";
    case Ablation::active_learning: return "active_learning";
    case Ablation::active_and_correct: return "active_and_correct";
    case Ablation::hfk: return "hfk";
  }
  return "";
}

bool PipelineConfig::disabled(Ablation stage_flag) const {
  if (ablations.count(stage_flag)) return true;
  if ((stage_flag == Ablation::self_correct || stage_flag == Ablation::active_learning) &&
      ablations.count(Ablation::active_and_correct))
    return true;
  return false;
}

const std::vector<std::string>& canonical_stage_order() {
  static const std::vector<std::string> order = {stages::elements,   stages::filter,
                                                 stages::classification, stages::generation,
                                                 stages::self_correction, stages::active_learning};
  return order;
}

// --- parsers ----------------------------------------------------------------

namespace {

std::vector<std::string> string_list(const json& j) {
  std::vector<std::string> out;
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
    return out;
  }
  if (!j.is_array()) return out;
  for (const auto& v : j) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  return out;
}

bool keyword_boundary(std::string_view s, std::size_t pos, std::size_t len) {
  auto word = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
  };
  bool before_ok = pos == 0 || !word(s[pos - 1]);
  bool after_ok = pos + len >= s.size() || !word(s[pos + len]);
  return before_ok && after_ok;
}

}  // namespace

std::optional<ElementsResult> parse_elements_response(const std::string& response,
                                                      Profile profile) {
  auto obj = text::extract_first_json_object(response);
  if (!obj) return std::nullopt;
  ElementsResult result;
  if (profile == Profile::bird) {
    if (!obj->contains("query_entities") || !obj->contains("query")) return std::nullopt;
    result.entities = string_list((*obj)["query_entities"]);
    if (obj->contains("hint_entities")) result.hint_entities = string_list((*obj)["hint_entities"]);
  } else {
    if (!obj->contains("entities") || !obj->contains("query")) return std::nullopt;
    result.entities = string_list((*obj)["entities"]);
  }
  if (!(*obj)["query"].is_string()) return std::nullopt;
  result.rewritten_query = (*obj)["query"].get<std::string>();
  if (result.rewritten_query.empty()) return std::nullopt;
  return result;
}

std::optional<FilterResult> parse_filter_response(const std::string& response) {
  auto obj = text::extract_first_json_object(response);
  if (!obj) return std::nullopt;

  FilterResult result;
  if (obj->contains("Element matching") && (*obj)["Element matching"].is_object()) {
    for (const auto& [entity, fields] : (*obj)["Element matching"].items())
      result.element_matching[entity] = string_list(fields);
  }
  for (const auto& [key, value] : obj->items()) {
    if (key.size() > 19 && key.rfind(" calculation method") == key.size() - 19)
      result.main_metric_method = value.is_string() ? value.get<std::string>() : value.dump();
  }
  if (!obj->contains("Required table information")) return std::nullopt;
  const json& tables = (*obj)["Required table information"];
  if (!tables.is_array() || tables.empty()) return std::nullopt;
  for (const auto& entry : tables) {
    if (!entry.is_object() || !entry.contains("Table name")) continue;
    RequiredTable rt;
    rt.table = entry["Table name"].is_string() ? entry["Table name"].get<std::string>()
                                               : entry["Table name"].dump();
    if (entry.contains("where statement condition")) {
      const auto& w = entry["where statement condition"];
      rt.where_note = w.is_string() ? w.get<std::string>() : w.dump();
    }
    if (entry.contains("All field names required by SQL under this table"))
      rt.columns = string_list(entry["All field names required by SQL under this table"]);
    result.required_tables.push_back(std::move(rt));
  }
  if (result.required_tables.empty()) return std::nullopt;
  if (obj->contains("Multiple table joint fields and conditions")) {
    const auto& conditions = (*obj)["Multiple table joint fields and conditions"];
    result.join_note = conditions.is_string() ? conditions.get<std::string>() : conditions.dump();
  }
  if (obj->contains("sql") && (*obj)["sql"].is_string())
    result.draft_sql = (*obj)["sql"].get<std::string>();
  if (obj->contains("All fields")) result.all_fields = string_list((*obj)["All fields"]);
  return result;
}

std::optional<QuestionClass> parse_label(const std::string& response) {
  static const std::regex label_re(
      R"(\blabel\s*:\s*(non\s*-\s*join|join)\s*,?\s*(non\s*-\s*nested|nested))",
      std::regex::icase);
  std::optional<QuestionClass> last;
  for (const auto& line : text::split_lines(response)) {
    std::smatch m;
    std::string probe = line;
    while (std::regex_search(probe, m, label_re)) {
      bool joins = m[1].str().size() == 4;    // "join" vs "non-join"
      bool nested = m[2].str().size() == 6;   // "nested" vs "non-nested"
      last = make_question_class(joins, nested);
      probe = m.suffix();
    }
  }
  return last;
}

std::optional<std::string> extract_sql_json(const std::string& response) {
  auto obj = text::extract_first_json_object(response);
  if (!obj || !obj->contains("sql") || !(*obj)["sql"].is_string()) return std::nullopt;
  std::string sql = (*obj)["sql"].get<std::string>();
  if (text::trim(sql).empty()) return std::nullopt;
  return sql;
}

std::optional<std::string> extract_bare_sql(const std::string& response) {
  std::string body = text::strip_code_fences(response);
  std::size_t best = std::string::npos;
  for (const char* kw : {"select", "with"}) {
    std::string_view needle(kw);
    for (std::size_t pos = 0; pos + needle.size() <= body.size(); ++pos) {
      if (text::iequals(std::string_view(body).substr(pos, needle.size()), needle) &&
          keyword_boundary(body, pos, needle.size())) {
        best = std::min(best, pos);
        break;
      }
    }
  }
  if (best == std::string::npos) return std::nullopt;
  std::string stmt = text::first_sql_statement(body.substr(best));
  if (stmt.empty()) return std::nullopt;
  return stmt;
}

std::optional<std::string> apply_select_seed(const std::string& completion) {
  std::string body = text::trim(text::strip_code_fences(completion));
  if (body.empty()) return std::nullopt;
  bool starts_statement = (text::istarts_with(body, "select") && keyword_boundary(body, 0, 6)) ||
                          (text::istarts_with(body, "with") && keyword_boundary(body, 0, 4));
  std::string stmt = starts_statement ? body : "SELECT " + body;
  stmt = text::first_sql_statement(stmt);
  if (stmt.empty()) return std::nullopt;
  return stmt;
}

std::optional<std::string> extract_modified_sql(const std::string& response) {
  static const std::string marker = "the modified sql:";
  std::size_t pos = text::irfind(response, marker);
  if (pos == std::string::npos) return std::nullopt;
  std::string stmt = text::first_sql_statement(response.substr(pos + marker.size()));
  if (stmt.empty()) return std::nullopt;
  return stmt;
}

// --- trace serialization ----------------------------------------------------

namespace {

json record_to_json(const StageRecord& rec) {
  json j{{"stage", rec.stage},
         {"prompt", rec.prompt},
         {"response", rec.response},
         {"parsed", rec.parsed},
         {"fallback", rec.fallback},
         {"prompt_tokens", rec.prompt_tokens},
         {"completion_tokens", rec.completion_tokens},
         {"latency_ms", rec.latency_ms},
         {"provenance", rec.provenance}};
  if (rec.parse_error) j["parse_error"] = *rec.parse_error;
  return j;
}

StageRecord record_from_json(const json& j) {
  StageRecord rec;
  rec.stage = j.at("stage").get<std::string>();
  rec.prompt = j.at("prompt").get<std::string>();
  rec.response = j.at("response").get<std::string>();
  rec.parsed = j.value("parsed", json());
  if (j.contains("parse_error")) rec.parse_error = j["parse_error"].get<std::string>();
  rec.fallback = j.value("fallback", false);
  rec.prompt_tokens = j.value("prompt_tokens", 0LL);
  rec.completion_tokens = j.value("completion_tokens", 0LL);
  rec.latency_ms = j.value("latency_ms", 0.0);
  rec.provenance = j.value("provenance", "");
  return rec;
}

}  // namespace

json PipelineTrace::to_json() const {
  json stages_json = json::array();
  for (const auto& rec : stages) stages_json.push_back(record_to_json(rec));
  json task_json;
  sqlflow::to_json(task_json, task);
  return json{{"task", task_json},         {"profile", profile}, {"ablations", ablations},
              {"stages", stages_json},     {"final_sql", final_sql},
              {"fallbacks", fallbacks},    {"failed", failed},   {"failure", failure}};
}

PipelineTrace PipelineTrace::from_json(const json& j) {
  PipelineTrace trace;
  sqlflow::from_json(j.at("task"), trace.task);
  trace.profile = j.value("profile", "spider");
  trace.ablations = j.value("ablations", std::vector<std::string>{});
  for (const auto& rec : j.at("stages")) trace.stages.push_back(record_from_json(rec));
  trace.final_sql = j.value("final_sql", "");
  trace.fallbacks = j.value("fallbacks", std::vector<std::string>{});
  trace.failed = j.value("failed", false);
  trace.failure = j.value("failure", "");
  return trace;
}

// --- engine -----------------------------------------------------------------

namespace {

// Raised after the single stage-level retry is spent.
struct StageCallFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

PipelineEngine::PipelineEngine(const SchemaCatalog& catalog, const TemplateStore& templates,
                               Gateway& gateway, const ShotLibrary* library,
                               PipelineConfig config)
    : catalog_(catalog),
      templates_(templates),
      gateway_(gateway),
      library_(library),
      config_(std::move(config)) {}

StageRecord PipelineEngine::call_stage(const std::string& stage, const std::string& prompt) const {
  ChatRequest request;
  request.model = config_.model;
  request.messages = {ChatMessage{"user", prompt}};
  request.temperature = config_.temperature;
  request.max_output_tokens = config_.max_output_tokens;

  StageRecord rec;
  rec.stage = stage;
  rec.prompt = prompt;
  for (int attempt = 1; attempt <= 2; ++attempt) {  // one stage-level retry, transport only
    try {
      ChatResponse response = gateway_.complete(request, stage);
      rec.response = response.content;
      rec.prompt_tokens = response.prompt_tokens;
      rec.completion_tokens = response.completion_tokens;
      rec.latency_ms = response.latency_ms;
      rec.provenance = response.provenance;
      return rec;
    } catch (const AuthError&) {
      throw;  // systemic; surfaces as exit code 3
    } catch (const ReplayMiss&) {
      throw;
    } catch (const std::runtime_error& e) {
      if (attempt == 2) throw StageCallFailed(std::string("stage ") + stage + ": " + e.what());
    }
  }
  throw StageCallFailed("unreachable");
}

const DatabaseSchema& PipelineEngine::pick(SchemaChoice choice, const DatabaseSchema& full,
                                           const DatabaseSchema& pruned) const {
  return choice == SchemaChoice::full ? full : pruned;
}

ElementsResult PipelineEngine::identify_elements(const QuestionTask& task,
                                                 PipelineTrace& trace) const {
  ElementsResult fallback;
  fallback.rewritten_query = task.question;

  Bindings bindings{{"query", task.question}};
  std::string template_id = "elements_spider";
  if (config_.profile == Profile::bird) {
    template_id = "elements_bird";
    bindings["hint"] = task.hint.value_or("");
  }
  std::string prompt = templates_.render_text(template_id, bindings);

  StageRecord rec;
  try {
    rec = call_stage(stages::elements, prompt);
  } catch (const StageCallFailed& e) {
    rec.stage = stages::elements;
    rec.prompt = prompt;
    rec.parse_error = e.what();
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::elements) + ": transport failure");
    trace.stages.push_back(std::move(rec));
    return fallback;
  }

  auto parsed = parse_elements_response(rec.response, config_.profile);
  if (!parsed) {
    rec.parse_error = "no parseable elements JSON in response";
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::elements) + ": parse error");
    trace.stages.push_back(std::move(rec));
    return fallback;
  }
  rec.parsed = json{{"entities", parsed->entities},
                    {"hint_entities", parsed->hint_entities},
                    {"query", parsed->rewritten_query}};
  trace.stages.push_back(std::move(rec));
  return *parsed;
}

DatabaseSchema PipelineEngine::filter_information(const QuestionTask& task,
                                                  const ElementsResult& elements,
                                                  const DatabaseSchema& schema,
                                                  PipelineTrace& trace,
                                                  FilterResult* result) const {
  std::vector<std::string> entities = elements.entities;
  for (const auto& e : elements.hint_entities)
    if (std::find(entities.begin(), entities.end(), e) == entities.end()) entities.push_back(e);

  Bindings bindings{{"table_info", render_ddl(schema)},
                    {"query", task.question},
                    {"limitation", json(entities).dump()},
                    {"main_metric", elements.rewritten_query},
                    {"output_format", render_output_format(entities)}};
  std::string prompt = templates_.render_text("info_filter", bindings);

  StageRecord rec;
  try {
    rec = call_stage(stages::filter, prompt);
  } catch (const StageCallFailed& e) {
    rec.stage = stages::filter;
    rec.prompt = prompt;
    rec.parse_error = e.what();
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::filter) + ": transport failure");
    trace.stages.push_back(std::move(rec));
    return schema;
  }

  auto parsed = parse_filter_response(rec.response);
  if (!parsed) {
    rec.parse_error = "no parseable filter JSON in response";
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::filter) + ": parse error; using full schema");
    trace.stages.push_back(std::move(rec));
    return schema;
  }
  if (result) *result = *parsed;

  // Resolve LLM-proposed names; unknowns are dropped with a warning rather
  // than failing the question.
  std::vector<std::string> warnings;
  std::vector<std::string> table_names;
  for (const auto& t : schema.tables) table_names.push_back(t.name);

  KeepMap keep;
  auto add_column = [&](const TableDef& table, const std::string& column) {
    if (column.empty() || column == "*") return;
    const ColumnDef* def = table.resolve_column(column);
    if (!def) {
      std::vector<std::string> cols;
      for (const auto& c : table.columns) cols.push_back(c.name);
      warnings.push_back(NameIssue{NameIssue::Kind::unknown_column, column, table.name,
                                   suggest_name(column, cols)}
                             .describe());
      return;
    }
    keep[table.name].insert(def->name);
  };

  for (const auto& rt : parsed->required_tables) {
    const TableDef* table = schema.resolve_table(rt.table);
    if (!table) {
      warnings.push_back(NameIssue{NameIssue::Kind::unknown_table, rt.table, "",
                                   suggest_name(rt.table, table_names)}
                             .describe());
      continue;
    }
    keep[table->name];  // keep the table even when no column resolves
    for (const auto& col : rt.columns) add_column(*table, col);
  }
  for (const auto& field : parsed->all_fields) {
    auto dot = field.find('.');
    if (dot != std::string::npos) {
      const TableDef* table = schema.resolve_table(field.substr(0, dot));
      if (table && keep.count(table->name)) add_column(*table, field.substr(dot + 1));
      continue;
    }
    // Bare column name: accept it when it is unique across the kept tables.
    const TableDef* owner = nullptr;
    bool ambiguous = false;
    for (const auto& [table_name, _] : keep) {
      const TableDef* table = schema.table(table_name);
      if (table && table->resolve_column(field)) {
        if (owner) ambiguous = true;
        owner = table;
      }
    }
    if (owner && !ambiguous)
      add_column(*owner, field);
    else if (!field.empty())
      warnings.push_back("dropped unresolvable field '" + field + "'");
  }

  DatabaseSchema pruned = schema;
  if (keep.empty()) {
    rec.fallback = true;
    warnings.push_back("no tables resolved; using full schema");
    trace.fallbacks.push_back(std::string(stages::filter) + ": no tables resolved");
  } else {
    pruned = prune_schema(schema, keep);
  }

  json keep_json = json::object();
  for (const auto& table : pruned.tables) {
    json cols = json::array();
    for (const auto& col : table.columns) cols.push_back(col.name);
    keep_json[table.name] = cols;
  }
  rec.parsed = json{{"keep", keep_json}, {"warnings", warnings}, {"draft_sql", parsed->draft_sql}};
  trace.stages.push_back(std::move(rec));
  return pruned;
}

QuestionClass PipelineEngine::classify_question(const QuestionTask& task,
                                                const DatabaseSchema& pruned,
                                                PipelineTrace& trace) const {
  Bindings bindings{{"table_info", render_ddl(pruned)}, {"query", task.question}};
  std::string prompt = templates_.render_text("classification", bindings);

  StageRecord rec;
  try {
    rec = call_stage(stages::classification, prompt);
  } catch (const StageCallFailed& e) {
    rec.stage = stages::classification;
    rec.prompt = prompt;
    rec.parse_error = e.what();
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::classification) + ": transport failure");
    trace.stages.push_back(std::move(rec));
    return QuestionClass::join;
  }

  auto parsed = parse_label(rec.response);
  if (!parsed) {
    rec.parse_error = "no label line found";
    rec.fallback = true;
    rec.parsed = json{{"class", to_string(QuestionClass::join)}, {"fallback", true}};
    trace.fallbacks.push_back(std::string(stages::classification) +
                              ": label not found; defaulting to join");
    trace.stages.push_back(std::move(rec));
    return QuestionClass::join;
  }
  rec.parsed = json{{"class", to_string(*parsed)}};
  trace.stages.push_back(std::move(rec));
  return *parsed;
}

std::optional<std::string> PipelineEngine::generate_sql(const QuestionTask& task,
                                                        QuestionClass question_class,
                                                        const DatabaseSchema& full,
                                                        const DatabaseSchema& pruned,
                                                        const std::string& main_metric,
                                                        PipelineTrace& trace) const {
  const DatabaseSchema& schema = pick(config_.generation_schema, full, pruned);
  std::vector<std::pair<std::string, std::string>> shot_pairs;
  if (library_) {
    auto shots = retrieve(*library_, config_.shot_mode, question_class, task.question, full,
                          config_.shot_count, config_.seed);
    for (const auto& ex : shots) shot_pairs.emplace_back(ex.question, ex.sql);
  }

  auto messages = assemble_generation_prompt(
      templates_, question_class, render_ddl(schema), render_link_info(schema), main_metric,
      task.question, shot_pairs, config_.profile,
      /*include_link_info=*/!config_.disabled(Ablation::hfk));

  StageRecord rec;
  try {
    rec = call_stage(stages::generation, messages.front().content);
  } catch (const StageCallFailed& e) {
    rec.stage = stages::generation;
    rec.prompt = messages.front().content;
    rec.parse_error = e.what();
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::generation) + ": transport failure");
    trace.stages.push_back(std::move(rec));
    return std::nullopt;
  }

  auto sql = extract_sql_json(rec.response);
  if (!sql) {
    sql = extract_bare_sql(rec.response);
    if (sql) {
      rec.parse_error = "sql JSON missing; used secondary statement extraction";
      rec.fallback = true;
      trace.fallbacks.push_back(std::string(stages::generation) + ": secondary extraction");
    }
  }
  if (!sql) {
    rec.parse_error = "no SQL found in response";
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::generation) + ": no SQL in response");
    trace.stages.push_back(std::move(rec));
    return std::nullopt;
  }
  rec.parsed = json{{"sql", *sql}, {"class", to_string(question_class)}};
  trace.stages.push_back(std::move(rec));
  return sql;
}

std::string PipelineEngine::self_correct(const QuestionTask& task, const std::string& schema_text,
                                         const std::string& draft_sql,
                                         PipelineTrace& trace) const {
  Bindings bindings{{"table_info", schema_text}, {"query", task.question}, {"sql", draft_sql}};
  std::string prompt = templates_.render_text("self_correction", bindings);

  StageRecord rec;
  try {
    rec = call_stage(stages::self_correction, prompt);
  } catch (const StageCallFailed& e) {
    rec.stage = stages::self_correction;
    rec.prompt = prompt;
    rec.parse_error = e.what();
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::self_correction) + ": transport failure");
    trace.stages.push_back(std::move(rec));
    return draft_sql;
  }

  auto corrected = apply_select_seed(rec.response);
  if (!corrected) {
    rec.parse_error = "empty completion";
    rec.fallback = true;
    rec.parsed = json{{"sql", draft_sql}};
    trace.fallbacks.push_back(std::string(stages::self_correction) + ": empty completion");
    trace.stages.push_back(std::move(rec));
    return draft_sql;
  }
  rec.parsed = json{{"sql", *corrected}};
  trace.stages.push_back(std::move(rec));
  return *corrected;
}

std::string PipelineEngine::active_learn(const QuestionTask& task, const std::string& schema_text,
                                         const std::string& sql, PipelineTrace& trace) const {
  Bindings bindings{{"table_info", schema_text}, {"query", task.question}, {"sql", sql}};
  std::string template_id = "active_learning_spider";
  if (config_.profile == Profile::bird) {
    template_id = "active_learning_bird";
    bindings["hint"] = task.hint ? "\nHINT: " + *task.hint : "";
  }
  std::string prompt = templates_.render_text(template_id, bindings);

  StageRecord rec;
  try {
    rec = call_stage(stages::active_learning, prompt);
  } catch (const StageCallFailed& e) {
    rec.stage = stages::active_learning;
    rec.prompt = prompt;
    rec.parse_error = e.what();
    rec.fallback = true;
    trace.fallbacks.push_back(std::string(stages::active_learning) + ": transport failure");
    trace.stages.push_back(std::move(rec));
    return sql;
  }

  auto revised = config_.profile == Profile::bird ? apply_select_seed(rec.response)
                                                  : extract_modified_sql(rec.response);
  if (!revised) {
    rec.parse_error = config_.profile == Profile::bird ? "empty completion" : "marker not found";
    rec.fallback = true;
    rec.parsed = json{{"sql", sql}};
    trace.fallbacks.push_back(std::string(stages::active_learning) + ": kept input SQL");
    trace.stages.push_back(std::move(rec));
    return sql;
  }
  rec.parsed = json{{"sql", *revised}};
  trace.stages.push_back(std::move(rec));
  return *revised;
}

PipelineTrace PipelineEngine::run(const QuestionTask& task) const {
  PipelineTrace trace;
  trace.task = task;
  trace.profile = to_string(config_.profile);
  for (const auto& flag : config_.ablations) trace.ablations.push_back(to_string(flag));

  auto schema_it = catalog_.find(task.db_id);
  if (schema_it == catalog_.end()) {
    trace.failed = true;
    trace.failure = "unknown db_id: " + task.db_id;
    return trace;
  }
  const DatabaseSchema& schema = schema_it->second;

  try {
    ElementsResult elements;
    elements.rewritten_query = task.question;
    DatabaseSchema pruned = schema;
    if (!config_.disabled(Ablation::information_filter)) {
      elements = identify_elements(task, trace);
      pruned = filter_information(task, elements, schema, trace);
    }

    QuestionClass question_class = QuestionClass::join;
    if (!config_.disabled(Ablation::classification))
      question_class =
          classify_question(task, pick(config_.classification_schema, schema, pruned), trace);

    auto sql = generate_sql(task, question_class, schema, pruned, elements.rewritten_query, trace);
    if (!sql) {
      trace.failed = true;
      trace.failure = "generation stage produced no SQL";
      trace.final_sql = "";
      return trace;
    }

    std::string current = *sql;
    const std::string post_schema_text =
        render_ddl(pick(config_.correction_schema, schema, pruned));
    if (!config_.disabled(Ablation::self_correct))
      current = self_correct(task, post_schema_text, current, trace);
    if (!config_.disabled(Ablation::active_learning))
      current = active_learn(task, post_schema_text, current, trace);
    trace.final_sql = current;
  } catch (const ReplayMiss& e) {
    trace.failed = true;
    trace.failure = e.what();
  }
  return trace;
}

}  // namespace sqlflow

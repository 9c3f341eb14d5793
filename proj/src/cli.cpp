#include "sqlflow/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "sqlflow/textutil.hpp"

namespace sqlflow::cli {

using nlohmann::json;
namespace fs = std::filesystem;

AppConfig AppConfig::from_json(const json& j) {
  AppConfig config;
  auto& p = config.pipeline;
  if (j.contains("profile")) p.profile = profile_from_string(j["profile"].get<std::string>());
  if (j.contains("model")) p.model = j["model"].get<std::string>();
  if (j.contains("temperature")) p.temperature = j["temperature"].get<double>();
  if (j.contains("max_output_tokens")) p.max_output_tokens = j["max_output_tokens"].get<int>();
  if (j.contains("shot_mode")) p.shot_mode = shot_mode_from_string(j["shot_mode"].get<std::string>());
  if (j.contains("shot_count")) p.shot_count = j["shot_count"].get<std::size_t>();
  if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("ablations"))
    for (const auto& flag : j["ablations"])
      p.ablations.insert(ablation_from_string(flag.get<std::string>()));
  auto schema_choice = [](const json& v) {
    return v.get<std::string>() == "full" ? SchemaChoice::full : SchemaChoice::pruned;
  };
  if (j.contains("generation_schema")) p.generation_schema = schema_choice(j["generation_schema"]);
  if (j.contains("classification_schema"))
    p.classification_schema = schema_choice(j["classification_schema"]);
  if (j.contains("correction_schema")) p.correction_schema = schema_choice(j["correction_schema"]);

  if (j.contains("catalog")) config.catalog_path = j["catalog"].get<std::string>();
  if (j.contains("db_root")) config.db_root = j["db_root"].get<std::string>();
  if (j.contains("cache_root")) config.cache_root = j["cache_root"].get<std::string>();
  if (j.contains("shots_library")) config.shots_library = j["shots_library"].get<std::string>();
  if (j.contains("prompts_dir")) config.prompts_dir = j["prompts_dir"].get<std::string>();
  if (j.contains("base_url")) config.base_url = j["base_url"].get<std::string>();
  if (j.contains("api_key_env")) config.api_key_env = j["api_key_env"].get<std::string>();
  if (j.contains("replay")) config.replay = replay_mode_from_string(j["replay"].get<std::string>());
  if (j.contains("workers")) config.workers = j["workers"].get<int>();
  if (j.contains("request_timeout_s"))
    config.request_timeout_s = j["request_timeout_s"].get<double>();
  if (j.contains("max_attempts")) config.max_attempts = j["max_attempts"].get<int>();
  if (j.contains("exec_timeout_s")) config.exec_timeout_s = j["exec_timeout_s"].get<double>();
  return config;
}

AppConfig AppConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in);
  return from_json(j);
}

json AppConfig::to_json() const {
  json ablations = json::array();
  for (const auto& flag : pipeline.ablations) ablations.push_back(to_string(flag));
  auto choice = [](SchemaChoice c) { return c == SchemaChoice::full ? "full" : "pruned"; };
  return json{{"profile", to_string(pipeline.profile)},
              {"model", pipeline.model},
              {"temperature", pipeline.temperature},
              {"max_output_tokens", pipeline.max_output_tokens},
              {"shot_mode", to_string(pipeline.shot_mode)},
              {"shot_count", pipeline.shot_count},
              {"seed", pipeline.seed},
              {"ablations", ablations},
              {"generation_schema", choice(pipeline.generation_schema)},
              {"classification_schema", choice(pipeline.classification_schema)},
              {"correction_schema", choice(pipeline.correction_schema)},
              {"catalog", catalog_path},
              {"db_root", db_root},
              {"cache_root", cache_root},
              {"shots_library", shots_library},
              {"prompts_dir", prompts_dir},
              {"base_url", base_url},
              {"api_key_env", api_key_env},
              {"replay", to_string(replay)},
              {"workers", workers},
              {"request_timeout_s", request_timeout_s},
              {"max_attempts", max_attempts},
              {"exec_timeout_s", exec_timeout_s}};
}

std::vector<QuestionTask> load_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<QuestionTask> tasks;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    tasks.push_back(json::parse(line).get<QuestionTask>());
  }
  return tasks;
}

void save_tasks(const std::vector<QuestionTask>& tasks, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& task : tasks) {
    json j;
    to_json(j, task);
    out << j.dump() << '\n';
  }
}

int cmd_shots_build(const std::string& train_path, const std::string& catalog_path,
                    const std::string& out_path, std::ostream& out, std::ostream& err) {
  try {
    SchemaCatalog catalog = load_spider_catalog(catalog_path);
    std::vector<TrainingItem> items;
    for (const auto& task : load_tasks(train_path)) {
      if (!task.gold_sql) continue;
      items.push_back(TrainingItem{task.question, *task.gold_sql, task.db_id});
    }
    ShotLibrary::BuildReport report;
    ShotLibrary library = ShotLibrary::build(items, catalog, &report);
    library.save(out_path);
    out << "library: " << report.total << " examples";
    if (report.duplicates_dropped) out << " (" << report.duplicates_dropped << " duplicates dropped)";
    out << "\n";
    for (QuestionClass c : {QuestionClass::easy, QuestionClass::join, QuestionClass::nested,
                            QuestionClass::join_nested}) {
      auto it = report.per_class.find(c);
      out << "  " << to_string(c) << ": " << (it == report.per_class.end() ? 0 : it->second)
          << "\n";
    }
    for (const auto& warning : report.warnings) err << "warning: " << warning << "\n";
    return exit_ok;
  } catch (const std::exception& e) {
    err << "shots-build failed: " << e.what() << "\n";
    return exit_config;
  }
}

namespace {

using namespace std::string_literals;

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

std::string hash_prompt_fixtures(const std::string& prompts_dir, const std::string& library_path) {
  std::string blob;
  for (const auto& id : TemplateStore::template_ids()) {
    std::ifstream in(prompts_dir + "/" + id + ".txt", std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    blob += id + "\0"s + buf.str() + "\0"s;
  }
  if (!library_path.empty()) {
    std::ifstream in(library_path, std::ios::binary);
    if (in) {
      std::ostringstream buf;
      buf << in.rdbuf();
      blob += "library\0"s + buf.str();
    }
  }
  return content_hash(blob);
}

}  // namespace

int cmd_run(const std::string& dataset_path, const AppConfig& config, const std::string& out_dir,
            std::ostream& out, std::ostream& err) {
  SchemaCatalog catalog;
  TemplateStore templates;
  std::vector<QuestionTask> tasks;
  ShotLibrary library;
  bool have_library = false;
  try {
    catalog = load_spider_catalog(config.catalog_path);
    templates = TemplateStore::load(config.prompts_dir);
    tasks = load_tasks(dataset_path);
    if (config.pipeline.shot_mode != ShotMode::zero_shot && config.pipeline.shot_count > 0) {
      if (config.shots_library.empty())
        throw std::runtime_error("shot mode requires a shots_library path");
      library = ShotLibrary::load(config.shots_library);
      have_library = true;
    }
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    err << "run setup failed: " << e.what() << "\n";
    return exit_config;
  }

  std::shared_ptr<ChatTransport> transport;
  if (config.replay != ReplayMode::strict) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (config.base_url.empty()) {
      err << "run setup failed: no base_url configured (or use --replay=strict)\n";
      return exit_config;
    }
    transport = std::make_shared<HttpTransport>(config.base_url, key ? key : "",
                                                config.request_timeout_s);
  }

  UsageLedger ledger;
  GatewayConfig gw;
  gw.replay = config.replay;
  gw.cache_root = config.cache_root;
  gw.max_attempts = config.max_attempts;
  Gateway gateway(gw, transport, &ledger);
  PipelineEngine engine(catalog, templates, gateway, have_library ? &library : nullptr,
                        config.pipeline);

  const std::string started_at = iso8601_now();
  std::vector<PipelineTrace> traces(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> auth_failed{false};
  std::string auth_message;
  std::mutex auth_mutex;

  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || auth_failed.load()) return;
      try {
        traces[i] = engine.run(tasks[i]);
      } catch (const AuthError& e) {
        std::lock_guard<std::mutex> lock(auth_mutex);
        auth_failed = true;
        auth_message = e.what();
        return;
      } catch (const std::exception& e) {
        traces[i].task = tasks[i];
        traces[i].failed = true;
        traces[i].failure = e.what();
      }
    }
  };

  std::size_t n_workers =
      std::min<std::size_t>(std::max(config.workers, 1), std::max<std::size_t>(tasks.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  if (auth_failed) {
    err << "authentication failure: " << auth_message << "\n";
    return exit_auth;
  }

  // Single writer, input order regardless of worker interleaving.
  const std::string predictions_path = out_dir + "/predictions.jsonl";
  const std::string traces_path = out_dir + "/traces.jsonl";
  {
    std::ofstream pred_out(predictions_path);
    std::ofstream trace_out(traces_path);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      json pred{{"db_id", tasks[i].db_id},
                {"question", tasks[i].question},
                {"predicted_sql", traces[i].final_sql}};
      pred_out << pred.dump() << '\n';
      trace_out << traces[i].to_json().dump() << '\n';
    }
  }

  std::size_t failed = 0;
  for (const auto& trace : traces)
    if (trace.failed) ++failed;

  json manifest{{"config", config.to_json()},
                {"dataset", dataset_path},
                {"fixture_hash", hash_prompt_fixtures(config.prompts_dir, config.shots_library)},
                {"started_at", started_at},
                {"finished_at", iso8601_now()},
                {"outputs", {{"predictions", predictions_path}, {"traces", traces_path}}},
                {"questions", tasks.size()},
                {"failed_questions", failed}};
  {
    std::ofstream manifest_out(out_dir + "/manifest.json");
    manifest_out << manifest.dump(2) << '\n';
  }

  auto total = ledger.total();
  out << "ran " << tasks.size() << " questions (" << failed << " failed), " << total.calls
      << " model calls, " << (total.prompt_tokens + total.completion_tokens) << " tokens\n";
  out << "predictions: " << predictions_path << "\n";
  return exit_ok;
}

int cmd_eval(const std::string& predictions_path, const std::string& dataset_path,
             const std::string& db_root, const std::string& report_path, double exec_timeout_s,
             std::ostream& out, std::ostream& err, MetricsReport* out_report) {
  std::vector<QuestionTask> tasks;
  std::vector<json> predictions;
  try {
    tasks = load_tasks(dataset_path);
    std::ifstream in(predictions_path);
    if (!in) throw std::runtime_error("cannot open predictions file: " + predictions_path);
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      predictions.push_back(json::parse(line));
    }
  } catch (const std::exception& e) {
    err << "eval setup failed: " << e.what() << "\n";
    return exit_config;
  }

  // Predictions from cmd_run are order-aligned with the dataset; fall back to
  // (db_id, question) lookup when they are not.
  auto prediction_for = [&](std::size_t i, const QuestionTask& task) -> std::optional<std::string> {
    if (i < predictions.size() && predictions[i].value("db_id", "") == task.db_id &&
        predictions[i].value("question", "") == task.question)
      return predictions[i].value("predicted_sql", "");
    for (const auto& p : predictions)
      if (p.value("db_id", "") == task.db_id && p.value("question", "") == task.question)
        return p.value("predicted_sql", "");
    return std::nullopt;
  };

  std::vector<EvalRecord> records;
  long long invalid_gold = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    if (!task.gold_sql) {
      ++invalid_gold;
      err << "warning: no gold SQL for question: " << task.question << "\n";
      continue;
    }
    EvalRecord rec;
    rec.task = task;
    rec.gold_sql = *task.gold_sql;
    auto predicted = prediction_for(i, task);
    std::string db_path = database_path(db_root, task.db_id);

    ExecResult gold = execute_sql(db_path, rec.gold_sql, exec_timeout_s);
    if (gold.status != ExecStatus::ok) {
      ++invalid_gold;
      err << "warning: gold SQL failed on " << task.db_id << ": "
          << (gold.error.empty() ? to_string(gold.status) : gold.error) << "\n";
      continue;
    }
    if (!predicted || predicted->empty()) {
      rec.predicted_sql = predicted.value_or("");
      rec.failure_kind = FailureKind::pred_error;
      records.push_back(std::move(rec));
      continue;
    }
    rec.predicted_sql = *predicted;
    ExecResult pred = execute_sql(db_path, rec.predicted_sql, exec_timeout_s);
    if (pred.status == ExecStatus::timeout) {
      rec.failure_kind = FailureKind::timeout;
    } else if (pred.status != ExecStatus::ok) {
      rec.failure_kind = FailureKind::pred_error;
    } else if (exec_match(pred, gold, rec.gold_sql)) {
      rec.match = true;
    } else {
      rec.failure_kind = FailureKind::mismatch;
    }
    records.push_back(std::move(rec));
  }

  if (records.empty()) {
    err << "eval produced no scorable records\n";
    return exit_config;
  }
  MetricsReport report = aggregate(records);
  report.invalid_gold = invalid_gold;
  out << report.format_table();
  if (!report_path.empty()) {
    std::ofstream report_out(report_path);
    report_out << report.to_json().dump(2) << '\n';
  }
  if (out_report) *out_report = report;
  return exit_ok;
}

int cmd_report_cost(const std::string& traces_path, std::ostream& out, std::ostream& err,
                    json* out_summary) {
  std::vector<PipelineTrace> traces;
  try {
    std::ifstream in(traces_path);
    if (!in) throw std::runtime_error("cannot open traces file: " + traces_path);
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      traces.push_back(PipelineTrace::from_json(json::parse(line)));
    }
  } catch (const std::exception& e) {
    err << "report-cost failed: " << e.what() << "\n";
    return exit_config;
  }
  if (traces.empty()) {
    err << "report-cost failed: empty trace set\n";
    return exit_config;
  }

  struct StageCost {
    long long prompt = 0, completion = 0, calls = 0;
    double wall_ms = 0;
  };
  std::map<std::string, StageCost> per_stage;
  StageCost total;
  for (const auto& trace : traces) {
    for (const auto& rec : trace.stages) {
      auto& s = per_stage[rec.stage];
      s.prompt += rec.prompt_tokens;
      s.completion += rec.completion_tokens;
      s.calls += 1;
      s.wall_ms += rec.latency_ms;
      total.prompt += rec.prompt_tokens;
      total.completion += rec.completion_tokens;
      total.calls += 1;
      total.wall_ms += rec.latency_ms;
    }
  }

  double n = static_cast<double>(traces.size());
  json summary{{"questions", traces.size()},
               {"avg_tokens_per_question", (double)(total.prompt + total.completion) / n},
               {"avg_prompt_tokens_per_question", (double)total.prompt / n},
               {"avg_completion_tokens_per_question", (double)total.completion / n},
               {"avg_wall_ms_per_question", total.wall_ms / n},
               {"stages", json::object()}};
  out << "questions: " << traces.size() << "\n";
  char buf[160];
  for (const auto& [stage, s] : per_stage) {
    std::snprintf(buf, sizeof buf, "  %-16s calls/question %.2f  avg tokens %.1f  avg ms %.1f\n",
                  stage.c_str(), s.calls / n, (double)(s.prompt + s.completion) / n, s.wall_ms / n);
    out << buf;
    summary["stages"][stage] = {{"calls", s.calls},
                                {"prompt_tokens", s.prompt},
                                {"completion_tokens", s.completion},
                                {"wall_ms", s.wall_ms}};
  }
  std::snprintf(buf, sizeof buf,
                "total (approximate where the endpoint omitted usage): avg tokens %.1f, avg time "
                "%.2f s per question\n",
                (double)(total.prompt + total.completion) / n, total.wall_ms / n / 1000.0);
  out << buf;
  out << "reference workflow cost at GPT-4 scale: ~5611 avg tokens, ~4.55 s per question\n";
  if (out_summary) *out_summary = summary;
  return exit_ok;
}

int cmd_convert_spider(const std::string& input_path, const std::string& output_path,
                       const std::string& difficulty_path, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(input_path);
    if (!in) throw std::runtime_error("cannot open input file: " + input_path);
    json doc = json::parse(in);
    if (!doc.is_array()) throw std::runtime_error("expected a JSON array: " + input_path);

    std::vector<std::string> difficulties;
    if (!difficulty_path.empty()) {
      std::ifstream diff_in(difficulty_path);
      if (!diff_in) throw std::runtime_error("cannot open difficulty file: " + difficulty_path);
      json labels = json::parse(diff_in);
      for (const auto& label : labels) difficulties.push_back(label.get<std::string>());
    }

    std::vector<QuestionTask> tasks;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto& item = doc[i];
      QuestionTask task;
      task.question = item.at("question").get<std::string>();
      task.db_id = item.at("db_id").get<std::string>();
      if (item.contains("query")) task.gold_sql = item["query"].get<std::string>();
      else if (item.contains("SQL")) task.gold_sql = item["SQL"].get<std::string>();
      if (item.contains("evidence") && item["evidence"].is_string() &&
          !item["evidence"].get<std::string>().empty())
        task.hint = item["evidence"].get<std::string>();
      if (i < difficulties.size()) task.difficulty = difficulties[i];
      else if (item.contains("difficulty")) task.difficulty = item["difficulty"].get<std::string>();
      tasks.push_back(std::move(task));
    }
    save_tasks(tasks, output_path);
    out << "converted " << tasks.size() << " questions -> " << output_path << "\n";
    return exit_ok;
  } catch (const std::exception& e) {
    err << "convert failed: " << e.what() << "\n";
    return exit_config;
  }
}

}  // namespace sqlflow::cli

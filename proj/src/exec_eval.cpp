#include "sqlflow/exec_eval.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "sqlflow/textutil.hpp"

namespace sqlflow {

using nlohmann::json;

std::string to_string(ExecStatus s) {
  switch (s) {
    case ExecStatus::ok: return "ok";
    case ExecStatus::sql_error: return "sql_error";
    case ExecStatus::timeout: return "timeout";
  }
  return "sql_error";
}

std::string to_string(FailureKind k) {
  switch (k) {
    case FailureKind::pred_error: return "pred_error";
    case FailureKind::mismatch: return "mismatch";
    case FailureKind::timeout: return "timeout";
  }
  return "pred_error";
}

std::string normalize_real(double v) {
  double rounded = std::round(v * 1e6) / 1e6;
  if (rounded == 0.0) rounded = 0.0;  // fold -0 into 0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", rounded);
  return std::string("n:") + buf;
}

namespace {

struct TimeoutGuard {
  std::chrono::steady_clock::time_point deadline;
  bool fired = false;
};

int progress_callback(void* opaque) {
  auto* guard = static_cast<TimeoutGuard*>(opaque);
  if (std::chrono::steady_clock::now() >= guard->deadline) {
    guard->fired = true;
    return 1;  // interrupt the statement
  }
  return 0;
}

std::string normalize_cell(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_NULL: return "null";
    case SQLITE_INTEGER: {
      sqlite3_int64 v = sqlite3_column_int64(stmt, col);
      // Exact beyond double precision; such values never equal a real cell.
      if (v > (1ll << 53) || v < -(1ll << 53)) return "i:" + std::to_string(v);
      return normalize_real(static_cast<double>(v));
    }
    case SQLITE_FLOAT: return normalize_real(sqlite3_column_double(stmt, col));
    case SQLITE_BLOB: {
      const auto* data = static_cast<const unsigned char*>(sqlite3_column_blob(stmt, col));
      int n = sqlite3_column_bytes(stmt, col);
      static const char* hex = "0123456789abcdef";
      std::string out = "b:";
      for (int i = 0; i < n; ++i) {
        out += hex[data[i] >> 4];
        out += hex[data[i] & 0xf];
      }
      return out;
    }
    default: {
      const unsigned char* s = sqlite3_column_text(stmt, col);
      return "t:" + std::string(reinterpret_cast<const char*>(s),
                                static_cast<std::size_t>(sqlite3_column_bytes(stmt, col)));
    }
  }
}

}  // namespace

ExecResult execute_sql(const std::string& db_path, const std::string& sql, double timeout_s) {
  ExecResult result;
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(db_path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
    result.error = db ? sqlite3_errmsg(db) : "cannot open database";
    if (db) sqlite3_close(db);
    return result;
  }

  TimeoutGuard guard{std::chrono::steady_clock::now() +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(timeout_s))};
  sqlite3_progress_handler(db, 1000, progress_callback, &guard);

  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK || !stmt) {
    result.error = sqlite3_errmsg(db);
    if (stmt) sqlite3_finalize(stmt);
    sqlite3_close(db);
    return result;
  }

  result.column_count = sqlite3_column_count(stmt);
  int rc;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(result.column_count));
    for (int c = 0; c < result.column_count; ++c) row.push_back(normalize_cell(stmt, c));
    result.rows.push_back(std::move(row));
  }
  if (rc == SQLITE_DONE) {
    result.status = ExecStatus::ok;
  } else if (guard.fired || rc == SQLITE_INTERRUPT) {
    result.status = ExecStatus::timeout;
    result.rows.clear();
    result.column_count = 0;
  } else {
    result.status = ExecStatus::sql_error;
    result.error = sqlite3_errmsg(db);
    result.rows.clear();
    result.column_count = 0;
  }
  sqlite3_finalize(stmt);
  sqlite3_close(db);
  return result;
}

bool has_top_level_order_by(const std::string& sql) {
  int depth = 0;
  bool in_single = false, in_double = false;
  for (std::size_t i = 0; i < sql.size(); ++i) {
    char c = sql[i];
    if (in_single) {
      if (c == '\'') in_single = false;
      continue;
    }
    if (in_double) {
      if (c == '"') in_double = false;
      continue;
    }
    switch (c) {
      case '\'': in_single = true; continue;
      case '"': in_double = true; continue;
      case '(': ++depth; continue;
      case ')': --depth; continue;
      default: break;
    }
    if (depth == 0 && (c == 'o' || c == 'O')) {
      std::string_view rest(sql.data() + i, sql.size() - i);
      if (text::istarts_with(rest, "order")) {
        std::size_t j = i + 5;
        while (j < sql.size() && std::isspace(static_cast<unsigned char>(sql[j]))) ++j;
        if (j + 2 <= sql.size() && text::iequals(std::string_view(sql.data() + j, 2), "by")) {
          bool before_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(sql[i - 1]));
          bool after_ok =
              j + 2 == sql.size() || !std::isalnum(static_cast<unsigned char>(sql[j + 2]));
          if (before_ok && after_ok) return true;
        }
      }
    }
  }
  return false;
}

bool exec_match(const ExecResult& pred, const ExecResult& gold, const std::string& gold_sql) {
  if (gold.status != ExecStatus::ok) return false;
  if (pred.status != ExecStatus::ok) return false;
  if (pred.column_count != gold.column_count) return false;
  if (pred.rows.size() != gold.rows.size()) return false;
  if (has_top_level_order_by(gold_sql)) return pred.rows == gold.rows;
  auto a = pred.rows;
  auto b = gold.rows;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

json MetricsReport::to_json() const {
  json buckets_json = json::object();
  for (const char* name : {"easy", "medium", "hard", "extra"}) {
    auto it = buckets.find(name);
    BucketStats s = it == buckets.end() ? BucketStats{} : it->second;
    buckets_json[name] = {{"total", s.total}, {"matches", s.matches}, {"ex", s.ex()}};
  }
  json failures = json::object();
  for (const auto& [kind, count] : failure_histogram) failures[kind] = count;
  return json{{"buckets", buckets_json},
              {"all", {{"total", all.total}, {"matches", all.matches}, {"ex", all.ex()}}},
              {"failures", failures},
              {"invalid_gold", invalid_gold},
              {"avg_prompt_tokens", avg_prompt_tokens},
              {"avg_completion_tokens", avg_completion_tokens},
              {"avg_total_tokens", avg_total_tokens},
              {"avg_wall_ms", avg_wall_ms},
              {"usage_approximate", usage_approximate}};
}

std::string MetricsReport::format_table() const {
  auto cell = [](const BucketStats& s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", s.ex());
    return std::string(buf) + " (" + std::to_string(s.matches) + "/" + std::to_string(s.total) +
           ")";
  };
  std::string out = "            Easy          Medium        Hard          Extra         All\n";
  out += "EX          ";
  for (const char* name : {"easy", "medium", "hard", "extra"}) {
    auto it = buckets.find(name);
    std::string c = cell(it == buckets.end() ? BucketStats{} : it->second);
    c.resize(14, ' ');
    out += c;
  }
  out += cell(all);
  out += "\n";
  if (!failure_histogram.empty()) {
    out += "failures:";
    for (const auto& [kind, count] : failure_histogram)
      out += " " + kind + "=" + std::to_string(count);
    out += "\n";
  }
  if (invalid_gold > 0)
    out += "invalid gold statements (excluded): " + std::to_string(invalid_gold) + "\n";
  return out;
}

MetricsReport aggregate(const std::vector<EvalRecord>& records, const UsageLedger* ledger) {
  if (records.empty()) throw EmptyRecordSet();
  MetricsReport report;
  for (const auto& rec : records) {
    ++report.all.total;
    if (rec.match) ++report.all.matches;
    if (rec.task.difficulty) {
      auto& bucket = report.buckets[*rec.task.difficulty];
      ++bucket.total;
      if (rec.match) ++bucket.matches;
    }
    if (rec.failure_kind) ++report.failure_histogram[to_string(*rec.failure_kind)];
  }
  if (ledger) {
    auto total = ledger->total();
    double n = static_cast<double>(records.size());
    report.avg_prompt_tokens = static_cast<double>(total.prompt_tokens) / n;
    report.avg_completion_tokens = static_cast<double>(total.completion_tokens) / n;
    report.avg_total_tokens =
        static_cast<double>(total.prompt_tokens + total.completion_tokens) / n;
    report.avg_wall_ms = total.wall_ms / n;
  }
  return report;
}

}  // namespace sqlflow

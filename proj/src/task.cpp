#include "sqlflow/task.hpp"

namespace sqlflow {

Profile profile_from_string(const std::string& s) {
  if (s == "spider") return Profile::spider;
  if (s == "bird") return Profile::bird;
  throw std::invalid_argument("unknown profile: " + s);
}

std::string to_string(Profile p) { return p == Profile::spider ? "spider" : "bird"; }

QuestionClass make_question_class(bool needs_join, bool needs_nested) {
  if (needs_join) return needs_nested ? QuestionClass::join_nested : QuestionClass::join;
  return needs_nested ? QuestionClass::nested : QuestionClass::easy;
}

std::string to_string(QuestionClass c) {
  switch (c) {
    case QuestionClass::easy: return "easy";
    case QuestionClass::join: return "join";
    case QuestionClass::nested: return "nested";
    case QuestionClass::join_nested: return "join_nested";
  }
  return "easy";
}

QuestionClass question_class_from_string(const std::string& s) {
  if (s == "easy") return QuestionClass::easy;
  if (s == "join") return QuestionClass::join;
  if (s == "nested") return QuestionClass::nested;
  if (s == "join_nested") return QuestionClass::join_nested;
  throw std::invalid_argument("unknown question class: " + s);
}

void to_json(nlohmann::json& j, const QuestionTask& task) {
  j = nlohmann::json{{"question", task.question}, {"db_id", task.db_id}};
  if (task.gold_sql) j["gold_sql"] = *task.gold_sql;
  if (task.hint) j["hint"] = *task.hint;
  if (task.difficulty) j["difficulty"] = *task.difficulty;
}

void from_json(const nlohmann::json& j, QuestionTask& task) {
  task.question = j.at("question").get<std::string>();
  task.db_id = j.at("db_id").get<std::string>();
  if (j.contains("gold_sql") && !j["gold_sql"].is_null())
    task.gold_sql = j["gold_sql"].get<std::string>();
  if (j.contains("hint") && !j["hint"].is_null()) task.hint = j["hint"].get<std::string>();
  if (j.contains("difficulty") && !j["difficulty"].is_null())
    task.difficulty = j["difficulty"].get<std::string>();
}

}  // namespace sqlflow

#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace sqlflow {

enum class Profile { spider, bird };

Profile profile_from_string(const std::string& s);
std::string to_string(Profile p);

/// Question category from the (join?, nested?) label pair.
enum class QuestionClass { easy, join, nested, join_nested };

QuestionClass make_question_class(bool needs_join, bool needs_nested);
std::string to_string(QuestionClass c);
QuestionClass question_class_from_string(const std::string& s);

struct QuestionTask {
  std::string question;
  std::string db_id;
  std::optional<std::string> gold_sql;
  std::optional<std::string> hint;        // Bird evidence
  std::optional<std::string> difficulty;  // easy|medium|hard|extra
};

void to_json(nlohmann::json& j, const QuestionTask& task);
void from_json(const nlohmann::json& j, QuestionTask& task);

}  // namespace sqlflow

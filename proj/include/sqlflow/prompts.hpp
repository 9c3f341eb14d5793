#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqlflow/llm.hpp"
#include "sqlflow/task.hpp"

namespace sqlflow {

struct MissingPlaceholder : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownTemplate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PromptTemplate {
  std::string id;
  std::string body;  // placeholders spelled {{name}}
  std::set<std::string> required_placeholders;
};

using Bindings = std::map<std::string, std::string>;

/// The fixed workflow templates, loaded from one plain-text file per id.
class TemplateStore {
 public:
  static const std::vector<std::string>& template_ids();

  /// Load every template id from <dir>/<id>.txt. A file's single trailing
  /// newline is not part of the template body.
  static TemplateStore load(const std::string& dir);

  const PromptTemplate& get(const std::string& id) const;

  /// Substitute bindings into the template. Every required placeholder must
  /// be bound; rendering is pure.
  std::string render_text(const std::string& id, const Bindings& bindings) const;

  /// All prompts ship as a single user message.
  std::vector<ChatMessage> render(const std::string& id, const Bindings& bindings) const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

/// Build the SQL-generation prompt for a question class: picks the class
/// template, prepends few-shot pairs, injects the foreign-key link block for
/// non-easy classes, and swaps the Bird specification in for that profile.
std::vector<ChatMessage> assemble_generation_prompt(
    const TemplateStore& store, QuestionClass question_class, const std::string& schema_text,
    const std::vector<std::string>& link_info, const std::string& main_metric,
    const std::string& query, const std::vector<std::pair<std::string, std::string>>& shots,
    Profile profile, bool include_link_info = true);

/// Template id used for a question class (nested and join-nested share one).
std::string generation_template_id(QuestionClass question_class);

/// Few-shot block: question + SQL pairs separated by blank lines.
std::string render_shots_block(const std::vector<std::pair<std::string, std::string>>& shots);

/// The per-entity element-matching shape for the information-filter prompt.
std::string render_output_format(const std::vector<std::string>& entities);

}  // namespace sqlflow

#include "sqlflow/prompts.hpp"

#include <fstream>
#include <sstream>

#include "sqlflow/textutil.hpp"

namespace sqlflow {

const std::vector<std::string>& TemplateStore::template_ids() {
  static const std::vector<std::string> ids = {
      "elements_spider",    "elements_bird",
      "info_filter",        "classification",
      "gen_easy",           "gen_join",
      "gen_nested_family",  "spec_bird",
      "self_correction",    "active_learning_spider",
      "active_learning_bird"};
  return ids;
}

namespace {

std::set<std::string> scan_placeholders(const std::string& id, const std::string& body) {
  std::set<std::string> names;
  std::size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string::npos) {
    std::size_t end = body.find("}}", pos + 2);
    if (end == std::string::npos)
      throw UnknownTemplate("template '" + id + "': unterminated placeholder");
    std::string name = body.substr(pos + 2, end - pos - 2);
    if (name.empty() || name.find_first_of(" \t\n{}") != std::string::npos)
      throw UnknownTemplate("template '" + id + "': bad placeholder '" + name + "'");
    names.insert(name);
    pos = end + 2;
  }
  return names;
}

}  // namespace

TemplateStore TemplateStore::load(const std::string& dir) {
  TemplateStore store;
  for (const auto& id : template_ids()) {
    std::string path = dir + "/" + id + ".txt";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnknownTemplate("missing template fixture: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string body = buf.str();
    if (!body.empty() && body.back() == '\n') body.pop_back();
    PromptTemplate tpl{id, body, scan_placeholders(id, body)};
    store.templates_.emplace(id, std::move(tpl));
  }
  return store;
}

const PromptTemplate& TemplateStore::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw UnknownTemplate("unknown template id: " + id);
  return it->second;
}

std::string TemplateStore::render_text(const std::string& id, const Bindings& bindings) const {
  const PromptTemplate& tpl = get(id);
  for (const auto& name : tpl.required_placeholders)
    if (!bindings.count(name))
      throw MissingPlaceholder("template '" + id + "': missing binding for '" + name + "'");

  std::string out;
  out.reserve(tpl.body.size());
  std::size_t pos = 0;
  while (pos < tpl.body.size()) {
    std::size_t open = tpl.body.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tpl.body, pos, std::string::npos);
      break;
    }
    out.append(tpl.body, pos, open - pos);
    std::size_t close = tpl.body.find("}}", open + 2);
    std::string name = tpl.body.substr(open + 2, close - open - 2);
    out += bindings.at(name);
    pos = close + 2;
  }
  return out;
}

std::vector<ChatMessage> TemplateStore::render(const std::string& id,
                                               const Bindings& bindings) const {
  return {ChatMessage{"user", render_text(id, bindings)}};
}

std::string generation_template_id(QuestionClass question_class) {
  switch (question_class) {
    case QuestionClass::easy: return "gen_easy";
    case QuestionClass::join: return "gen_join";
    case QuestionClass::nested:
    case QuestionClass::join_nested: return "gen_nested_family";
  }
  return "gen_join";
}

std::string render_shots_block(const std::vector<std::pair<std::string, std::string>>& shots) {
  std::vector<std::string> blocks;
  for (const auto& [question, sql] : shots) blocks.push_back("Q: " + question + "\nSQL: " + sql);
  return text::join(blocks, "\n\n");
}

std::string render_output_format(const std::vector<std::string>& entities) {
  static const std::string sample = "[\"<table.column>\", \"...\"]";
  std::string out = "{";
  bool first = true;
  for (const auto& entity : entities) {
    if (!first) out += ", ";
    out += nlohmann::json(entity).dump() + ": " + sample;
    first = false;
  }
  if (first) out += "\"<entity>\": " + sample;
  out += "}";
  return out;
}

namespace {

// Replace the class-specific rules after "### specification" with the Bird
// block, then restore the output-format rule so the JSON contract survives.
std::string swap_in_bird_specification(const std::string& rendered, const std::string& bird_spec) {
  const std::string marker = "### specification\n";
  std::size_t pos = rendered.rfind(marker);
  if (pos == std::string::npos) return rendered;
  std::string head = rendered.substr(0, pos + marker.size());
  return head + bird_spec +
         "\n6.The output format must strictly meet the given json specification: "
         "{\"sql\": \"ccc\"}";
}

}  // namespace

std::vector<ChatMessage> assemble_generation_prompt(
    const TemplateStore& store, QuestionClass question_class, const std::string& schema_text,
    const std::vector<std::string>& link_info, const std::string& main_metric,
    const std::string& query, const std::vector<std::pair<std::string, std::string>>& shots,
    Profile profile, bool include_link_info) {
  std::string table_info = schema_text;
  if (question_class != QuestionClass::easy && include_link_info && !link_info.empty())
    table_info += "\n### Foreign_key: [" + text::join(link_info, ", ") + "]";

  Bindings bindings{{"few_shot", shots.empty() ? "" : render_shots_block(shots) + "\n"},
                    {"table_info", table_info},
                    {"main_metric", main_metric},
                    {"query", query}};
  std::string body = store.render_text(generation_template_id(question_class), bindings);
  while (!body.empty() && body.front() == '\n') body.erase(body.begin());

  if (profile == Profile::bird)
    body = swap_in_bird_specification(body, store.render_text("spec_bird", {}));
  return {ChatMessage{"user", body}};
}

}  // namespace sqlflow

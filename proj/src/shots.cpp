#include "sqlflow/shots.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "sqlflow/textutil.hpp"

namespace sqlflow {

using nlohmann::json;

ShotMode shot_mode_from_string(const std::string& s) {
  if (s == "zero_shot") return ShotMode::zero_shot;
  if (s == "random") return ShotMode::random_pick;
  if (s == "ques_sim") return ShotMode::ques_sim;
  if (s == "tem_sim") return ShotMode::tem_sim;
  if (s == "tem_sim_wo") return ShotMode::tem_sim_wo;
  throw std::invalid_argument("unknown shot mode: " + s);
}

std::string to_string(ShotMode m) {
  switch (m) {
    case ShotMode::zero_shot: return "zero_shot";
    case ShotMode::random_pick: return "random";
    case ShotMode::ques_sim: return "ques_sim";
    case ShotMode::tem_sim: return "tem_sim";
    case ShotMode::tem_sim_wo: return "tem_sim_wo";
  }
  return "zero_shot";
}

namespace {

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Replace whole-word, case-insensitive occurrences of `phrase` (already
// lowercase, single-space separated) with `marker`.
std::string mask_phrase(const std::string& input, const std::string& phrase,
                        const std::string& marker) {
  if (phrase.empty()) return input;
  std::string out;
  out.reserve(input.size());
  std::size_t i = 0;
  while (i < input.size()) {
    bool boundary_before = i == 0 || !word_char(input[i - 1]);
    if (boundary_before && i + phrase.size() <= input.size() &&
        text::iequals(std::string_view(input).substr(i, phrase.size()), phrase)) {
      std::size_t end = i + phrase.size();
      bool boundary_after = end == input.size() || !word_char(input[end]);
      if (boundary_after) {
        out += marker;
        i = end;
        continue;
      }
    }
    out += input[i++];
  }
  return out;
}

std::string mask_quoted_spans(const std::string& input) {
  std::string out;
  out.reserve(input.size());
  std::size_t i = 0;
  while (i < input.size()) {
    char c = input[i];
    if (c == '\'' || c == '"') {
      std::size_t close = input.find(c, i + 1);
      if (close != std::string::npos) {
        out += "[VAL]";
        i = close + 1;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return out;
}

std::string mask_numbers(const std::string& input) {
  std::string out;
  out.reserve(input.size());
  std::size_t i = 0;
  while (i < input.size()) {
    bool boundary = i == 0 || !word_char(input[i - 1]);
    if (boundary && std::isdigit(static_cast<unsigned char>(input[i]))) {
      std::size_t end = i;
      while (end < input.size() && std::isdigit(static_cast<unsigned char>(input[end]))) ++end;
      if (end < input.size() && input[end] == '.' && end + 1 < input.size() &&
          std::isdigit(static_cast<unsigned char>(input[end + 1]))) {
        ++end;
        while (end < input.size() && std::isdigit(static_cast<unsigned char>(input[end]))) ++end;
      }
      if (end == input.size() || !word_char(input[end])) {
        out += "[VAL]";
        i = end;
        continue;
      }
    }
    out += input[i++];
  }
  return out;
}

std::string underscore_to_phrase(const std::string& name) {
  std::string out;
  for (char c : name) out += c == '_' ? ' ' : static_cast<char>(std::tolower((unsigned char)c));
  return text::collapse_whitespace(out);
}

struct MaskTerm {
  std::string phrase;
  std::string marker;
  std::size_t words;
};

std::vector<MaskTerm> schema_mask_terms(const DatabaseSchema& schema) {
  auto word_count = [](const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), ' ')) + 1;
  };
  std::set<std::string> seen;
  std::vector<MaskTerm> terms;
  auto add = [&](const std::string& name, const char* marker) {
    std::string phrase = underscore_to_phrase(name);
    if (phrase.empty() || !seen.insert(marker + phrase).second) return;
    terms.push_back(MaskTerm{phrase, marker, word_count(phrase)});
  };
  for (const auto& table : schema.tables) add(table.name, "[TAB]");
  for (const auto& table : schema.tables)
    for (const auto& col : table.columns) add(col.name, "[COL]");
  // Longest phrases first so multi-word names win over embedded shorter ones;
  // tables outrank columns at equal length; stable within a kind.
  std::stable_sort(terms.begin(), terms.end(), [](const MaskTerm& a, const MaskTerm& b) {
    if (a.words != b.words) return a.words > b.words;
    return a.marker == "[TAB]" && b.marker == "[COL]";
  });
  return terms;
}

}  // namespace

std::string build_skeleton(const std::string& question, const DatabaseSchema& schema) {
  std::string s = text::lower(question);
  s = mask_quoted_spans(s);
  s = mask_numbers(s);
  for (const auto& term : schema_mask_terms(schema)) s = mask_phrase(s, term.phrase, term.marker);
  s = text::collapse_whitespace(s);
  // Uppercase any marker that went through the lowercasing pass, so masking
  // is idempotent.
  for (const char* m : {"val", "tab", "col"}) {
    std::string needle = std::string("[") + m + "]";
    std::string upper = needle;
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    std::size_t pos = 0;
    while ((pos = s.find(needle, pos)) != std::string::npos) {
      s.replace(pos, needle.size(), upper);
      pos += upper.size();
    }
  }
  return s;
}

namespace {

std::vector<std::string> sql_tokens(const std::string& sql, bool* unterminated) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < sql.size()) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '\'' || c == '"' || c == '`') {
      std::size_t close = sql.find(c, i + 1);
      // Doubled quotes escape themselves inside SQL strings.
      while (close != std::string::npos && close + 1 < sql.size() && sql[close + 1] == c)
        close = sql.find(c, close + 2);
      if (close == std::string::npos) {
        if (unterminated) *unterminated = true;
        return tokens;
      }
      tokens.push_back(sql.substr(i, close - i + 1));
      i = close + 1;
    } else if (word_char(c)) {
      std::size_t end = i;
      while (end < sql.size() && (word_char(sql[end]) || sql[end] == '.')) ++end;
      tokens.push_back(text::lower(sql.substr(i, end - i)));
      i = end;
    } else {
      tokens.push_back(std::string(1, c));
      ++i;
    }
  }
  return tokens;
}

bool is_clause_boundary(const std::string& tok) {
  static const std::set<std::string> kw = {"where",  "group", "having",    "order",
                                           "limit",  "union", "intersect", "except",
                                           "select", ")",     "join",      "on"};
  return kw.count(tok) > 0;
}

}  // namespace

QuestionClass classify_gold_sql(const std::string& sql, bool* unparseable) {
  if (unparseable) *unparseable = false;
  bool unterminated = false;
  auto tokens = sql_tokens(sql, &unterminated);

  std::size_t select_count = 0;
  for (const auto& t : tokens)
    if (t == "select") ++select_count;

  if (unterminated || select_count == 0) {
    if (unparseable) *unparseable = true;
    return QuestionClass::join;  // least-harmful superset, same as the workflow fallback
  }

  bool has_join = false;
  bool multi_relation_from = false;
  int depth = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t == "(") ++depth;
    else if (t == ")") --depth;
    else if (t == "join") has_join = true;
    else if (t == "from") {
      // Scan the relation list of this FROM clause at its own depth.
      int from_depth = depth;
      for (std::size_t j = i + 1; j < tokens.size(); ++j) {
        const auto& u = tokens[j];
        if (u == "(") { ++depth; continue; }
        if (u == ")") {
          if (depth == from_depth) break;  // closes the enclosing subquery
          --depth;
          continue;
        }
        if (depth != from_depth) continue;
        if (is_clause_boundary(u)) break;
        if (u == ",") {
          multi_relation_from = true;
          break;
        }
      }
      depth = from_depth;
    }
  }

  bool needs_join = has_join || multi_relation_from;
  bool needs_nested = select_count >= 2;
  return make_question_class(needs_join, needs_nested);
}

namespace {

std::unordered_map<std::string, int> trigram_counts(const std::string& s) {
  std::unordered_map<std::string, int> grams;
  if (s.empty()) return grams;
  if (s.size() < 3) {
    grams[s] = 1;
    return grams;
  }
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) ++grams[s.substr(i, 3)];
  return grams;
}

}  // namespace

double similarity(const std::string& a, const std::string& b) {
  if (a == b) return 1.0;  // exact, no sqrt round-trip error
  if (a.empty() || b.empty()) return 0.0;
  auto ga = trigram_counts(a);
  auto gb = trigram_counts(b);
  double dot = 0, na = 0, nb = 0;
  for (const auto& [gram, count] : ga) {
    na += static_cast<double>(count) * count;
    auto it = gb.find(gram);
    if (it != gb.end()) dot += static_cast<double>(count) * it->second;
  }
  for (const auto& [_, count] : gb) nb += static_cast<double>(count) * count;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

ShotLibrary ShotLibrary::build(const std::vector<TrainingItem>& items,
                               const SchemaCatalog& catalog, BuildReport* report) {
  ShotLibrary lib;
  std::set<std::pair<std::string, std::string>> seen;
  BuildReport local;
  for (const auto& item : items) {
    auto schema_it = catalog.find(item.db_id);
    if (schema_it == catalog.end()) {
      local.warnings.push_back("skipped item with unknown db_id '" + item.db_id + "'");
      continue;
    }
    if (!seen.insert({item.question, item.sql}).second) {
      ++local.duplicates_dropped;
      continue;
    }
    FewShotExample ex;
    ex.question = item.question;
    ex.sql = item.sql;
    ex.db_id = item.db_id;
    ex.skeleton = build_skeleton(item.question, schema_it->second);
    ex.question_class = classify_gold_sql(item.sql);
    ++local.per_class[ex.question_class];
    lib.examples_.push_back(std::move(ex));
  }
  local.total = lib.examples_.size();
  if (report) *report = std::move(local);
  return lib;
}

ShotLibrary ShotLibrary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open shot library: " + path);
  ShotLibrary lib;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    json j = json::parse(line);
    FewShotExample ex;
    ex.question = j.at("question").get<std::string>();
    ex.skeleton = j.at("skeleton").get<std::string>();
    ex.sql = j.at("sql").get<std::string>();
    ex.question_class = question_class_from_string(j.at("class").get<std::string>());
    ex.db_id = j.at("db_id").get<std::string>();
    lib.examples_.push_back(std::move(ex));
  }
  return lib;
}

void ShotLibrary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write shot library: " + path);
  for (const auto& ex : examples_) {
    json j{{"question", ex.question},
           {"skeleton", ex.skeleton},
           {"sql", ex.sql},
           {"class", to_string(ex.question_class)},
           {"db_id", ex.db_id}};
    out << j.dump() << '\n';
  }
}

std::vector<const FewShotExample*> ShotLibrary::partition(QuestionClass c) const {
  std::vector<const FewShotExample*> out;
  for (const auto& ex : examples_)
    if (ex.question_class == c) out.push_back(&ex);
  return out;
}

namespace {

// splitmix64; deterministic across platforms, unlike the distributions in
// <random>.
struct SeededRng {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::size_t bounded(std::size_t n) { return static_cast<std::size_t>(next() % n); }
};

std::vector<FewShotExample> rank_by(const std::vector<const FewShotExample*>& pool,
                                    std::size_t k,
                                    const std::function<double(const FewShotExample&)>& score) {
  std::vector<std::pair<double, const FewShotExample*>> scored;
  scored.reserve(pool.size());
  for (const auto* ex : pool) scored.emplace_back(score(*ex), ex);
  // Stable sort keeps insertion order for ties.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<FewShotExample> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(*scored[i].second);
  return out;
}

}  // namespace

std::vector<FewShotExample> retrieve(const ShotLibrary& library, ShotMode mode,
                                     QuestionClass question_class, const std::string& question,
                                     const DatabaseSchema& schema, std::size_t k,
                                     std::uint64_t seed) {
  if (mode == ShotMode::zero_shot || k == 0) return {};

  std::vector<const FewShotExample*> pool;
  if (mode == ShotMode::tem_sim_wo) {
    for (const auto& ex : library.all()) pool.push_back(&ex);
  } else {
    pool = library.partition(question_class);
  }
  if (pool.empty()) return {};

  switch (mode) {
    case ShotMode::random_pick: {
      SeededRng rng{seed ^ text::fnv1a(question)};
      std::vector<const FewShotExample*> deck = pool;
      std::vector<FewShotExample> out;
      for (std::size_t i = 0; i < k && !deck.empty(); ++i) {
        std::size_t pick = rng.bounded(deck.size());
        out.push_back(*deck[pick]);
        deck.erase(deck.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      return out;
    }
    case ShotMode::ques_sim:
      return rank_by(pool, k,
                     [&](const FewShotExample& ex) { return similarity(question, ex.question); });
    case ShotMode::tem_sim:
    case ShotMode::tem_sim_wo: {
      std::string skeleton = build_skeleton(question, schema);
      return rank_by(pool, k,
                     [&](const FewShotExample& ex) { return similarity(skeleton, ex.skeleton); });
    }
    default: return {};
  }
}

}  // namespace sqlflow

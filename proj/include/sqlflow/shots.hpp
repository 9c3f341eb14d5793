#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqlflow/schema.hpp"
#include "sqlflow/task.hpp"

namespace sqlflow {

struct FewShotExample {
  std::string question;
  std::string skeleton;
  std::string sql;
  QuestionClass question_class = QuestionClass::easy;
  std::string db_id;
};

enum class ShotMode { zero_shot, random_pick, ques_sim, tem_sim, tem_sim_wo };
ShotMode shot_mode_from_string(const std::string& s);
std::string to_string(ShotMode m);

/// Mask a question into its retrieval skeleton: quoted literals and numbers
/// become [VAL], schema table words [TAB], column words/phrases [COL].
std::string build_skeleton(const std::string& question, const DatabaseSchema& schema);

/// Structural scan of a gold SQL statement onto the four question classes.
/// Unscannable SQL falls back to join (flagged via the optional out-param).
QuestionClass classify_gold_sql(const std::string& sql, bool* unparseable = nullptr);

/// Character 3-gram cosine similarity in [0, 1]. Strings shorter than one
/// gram are compared whole; empty-vs-empty is 1, empty-vs-nonempty 0.
double similarity(const std::string& a, const std::string& b);

struct TrainingItem {
  std::string question;
  std::string sql;
  std::string db_id;
};

class ShotLibrary {
 public:
  struct BuildReport {
    std::map<QuestionClass, std::size_t> per_class;
    std::size_t total = 0;
    std::size_t duplicates_dropped = 0;
    std::vector<std::string> warnings;  // unknown db_id etc.
  };

  static ShotLibrary build(const std::vector<TrainingItem>& items, const SchemaCatalog& catalog,
                           BuildReport* report = nullptr);

  static ShotLibrary load(const std::string& path);
  void save(const std::string& path) const;

  const std::vector<FewShotExample>& all() const { return examples_; }
  std::vector<const FewShotExample*> partition(QuestionClass c) const;
  std::size_t size() const { return examples_.size(); }

 private:
  std::vector<FewShotExample> examples_;  // insertion order preserved
};

/// Retrieve up to k demonstrations for a question under the given mode.
/// Scores are best-first and ties keep library insertion order; random mode
/// draws without replacement from a generator seeded by (seed, question).
std::vector<FewShotExample> retrieve(const ShotLibrary& library, ShotMode mode,
                                     QuestionClass question_class, const std::string& question,
                                     const DatabaseSchema& schema, std::size_t k,
                                     std::uint64_t seed = 0);

}  // namespace sqlflow

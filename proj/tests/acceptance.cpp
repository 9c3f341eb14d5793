// Acceptance suite: runs every gating criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit code is nonzero when any
// gating criterion fails; the live-sample check is informational only.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sqlflow/cli.hpp"
#include "sqlflow/exec_eval.hpp"
#include "sqlflow/textutil.hpp"
#include "test_support.hpp"

using namespace sqlflow;
using namespace sqlflow::testsupport;
using nlohmann::json;

namespace {

struct Criterion {
  std::string name;
  double budget_ms;  // 0 = no runtime budget
  bool informational = false;
  std::function<bool(std::string&)> run;
};

bool expect(bool condition, const std::string& what, std::string& detail) {
  if (!condition && detail.empty()) detail = what;
  return condition;
}

// --- criterion 1: prompt golden suite ---------------------------------------

bool prompt_golden_suite(std::string& detail) {
  auto store = TemplateStore::load(prompts_dir());
  json all = json::parse(read_file(data_dir() + "/golden_bindings.json"));
  bool ok = true;
  for (const auto& id : TemplateStore::template_ids()) {
    Bindings bindings;
    for (const auto& [name, value] : all.at(id).items()) bindings[name] = value.get<std::string>();
    std::string rendered = store.render_text(id, bindings);
    std::string golden = read_file(data_dir() + "/golden/" + id + ".golden.txt");
    ok &= expect(rendered == golden, "template '" + id + "' does not match its golden fixture",
                 detail);
  }
  return ok;
}

// --- criterion 2: parser suite ----------------------------------------------

std::vector<std::string> output_lines(const std::string& fixture) {
  std::vector<std::string> lines;
  for (const auto& line : text::split_lines(read_file(prompts_dir() + "/" + fixture))) {
    if (line.rfind("output: {", 0) == 0) lines.push_back(line.substr(8));
  }
  return lines;
}

bool parser_suite(std::string& detail) {
  bool ok = true;

  struct ElementsCase {
    std::vector<std::string> entities;
    std::string query;
  };
  const std::vector<ElementsCase> spider_expected = {
      {{"staff", "the attraction named 'US museum'"},
       "the name of the staff that is in charge of the attraction named \"US museum\""},
      {{"age older than 56", "number of heads of the departments"},
       "Number of department heads over 56 years old"},
      {{"name of the heads of departments", "born state of the heads of departments",
        "age of the heads of departments", "age"},
       "List the name, born state and age of the heads of departments ordered by age."},
      {{"Chinese", "age of all singers"},
       "The average, minimum, and maximum age of all singers from Chinese"},
      {{"the different descriptions of formulas", "formulas", "used in the textbook"},
       "The different descriptions of formulas that has been used in the textbook"},
      {{"the details of the markets", "can be accessed by walk or busk"},
       "The details of the markets that can be accessed by walk or bus"},
      {{"the name of colleges", "players"}, "The name of colleges that have at least two players"},
      {{"gold medals", "club", "coaches"},
       "The number of gold medals has the club with the most coaches won"},
      {{"nominees", "nominees that have been nominated", "musicals"},
       "The nominees that have been nominated more than two musicals"},
  };
  auto spider_lines = output_lines("elements_spider.txt");
  ok &= expect(spider_lines.size() == 9, "expected 9 spider elements examples", detail);
  for (std::size_t i = 0; i < spider_lines.size() && i < spider_expected.size(); ++i) {
    auto parsed = parse_elements_response(spider_lines[i], Profile::spider);
    ok &= expect(parsed.has_value(), "spider elements example " + std::to_string(i) + " unparsed",
                 detail) &&
          expect(parsed->entities == spider_expected[i].entities &&
                     parsed->rewritten_query == spider_expected[i].query,
                 "spider elements example " + std::to_string(i) + " mismatch", detail);
  }

  struct BirdCase {
    std::vector<std::string> query_entities;
    std::vector<std::string> hint_entities;
    std::string query;
  };
  const std::vector<BirdCase> bird_expected = {
      {{"year", "number of movies that was released", "the title of the movie", "rating score"},
       {"movie_release_year", "movie_id", "rating_score"},
       "The year with the least number of movies released is identified, and the title of the "
       "movie with the highest rating score of 1 in that year is provided."},
      {{"the description of user", "movie list", "followers"},
       {"user_id", "list_followers", "list_descriptions"},
       "The description of user 85981819's movie list with the most followers is requested."},
      {{"player", "the Purple Cap"},
       {"Player_Name", "Season_Year", "DOB"},
       "The name of youngest player to have won the Purple Cap."},
      {{"age", "Ishan Kishan", "2022"}, {"DOB", "Player_Name"}, "The age of Ishan Kishan in 2022"},
      {{"rating score", "movie", "A Way of Life"},
       {"movie_title", "rating_score", "rating_id"},
       "The average rating score of the movie \"A Way of Life\""},
  };
  auto bird_lines = output_lines("elements_bird.txt");
  ok &= expect(bird_lines.size() == 5, "expected 5 bird elements examples", detail);
  for (std::size_t i = 0; i < bird_lines.size() && i < bird_expected.size(); ++i) {
    auto parsed = parse_elements_response(bird_lines[i], Profile::bird);
    ok &= expect(parsed.has_value(), "bird elements example " + std::to_string(i) + " unparsed",
                 detail) &&
          expect(parsed->entities == bird_expected[i].query_entities &&
                     parsed->hint_entities == bird_expected[i].hint_entities &&
                     parsed->rewritten_query == bird_expected[i].query,
                 "bird elements example " + std::to_string(i) + " mismatch", detail);
  }

  // The six classification exemplars, ending lines as printed in the prompt.
  const std::vector<std::pair<std::string, QuestionClass>> label_cases = {
      {"Thus the SQL query can be classified as NON-JOIN, NON-NESTED\nLabel: NON-JOIN, NON-NESTED",
       QuestionClass::easy},
      {"Thus the SQL query can be classified as NON-JOIN, NON-NESTED\nLabel: NON-JOIN, NON-NESTED",
       QuestionClass::easy},
      {"Thus the SQL query can be classified as NON-JOIN, NESTED.\nLabel: NON-JOIN, NESTED",
       QuestionClass::nested},
      {"Thus the SQL query can be classified as JOIN, NESTED.\nLabel: JOIN, NESTED",
       QuestionClass::join_nested},
      {"Thus the SQL query can be classified as JOIN, NON-NESTED.\nLabel: JOIN, NON-NESTED",
       QuestionClass::join},
      {"Thus the SQL query can be classified as JOIN, NESTED.\nLabel: JOIN, NESTED",
       QuestionClass::join_nested},
  };
  int label_count = 0;
  for (const auto& [answer, expected] : label_cases) {
    auto parsed = parse_label(answer);
    ok &= expect(parsed == expected,
                 "classification exemplar " + std::to_string(label_count) + " mislabeled", detail);
    ++label_count;
  }
  // The fixture itself carries exactly these six Label lines.
  std::size_t fixture_labels = 0;
  for (const auto& line : text::split_lines(read_file(prompts_dir() + "/classification.txt")))
    if (line.rfind("Label: ", 0) == 0) ++fixture_labels;
  ok &= expect(fixture_labels == 6, "expected 6 Label lines in the classification fixture",
               detail);

  // {"sql": ...} extraction.
  ok &= expect(extract_sql_json(R"({"sql": "SELECT avg(hours) FROM projects"})") ==
                   "SELECT avg(hours) FROM projects",
               "plain sql json extraction", detail);
  ok &= expect(extract_sql_json("```json\n{\"sql\": \"SELECT avg(hours) FROM projects\"}\n```") ==
                   "SELECT avg(hours) FROM projects",
               "fenced sql json extraction", detail);
  ok &= expect(extract_sql_json("Here is the query you asked for:\n{\"sql\": \"SELECT Name FROM "
                                "stadium\"}\nLet me know!") == "SELECT Name FROM stadium",
               "prose-wrapped sql json extraction", detail);
  ok &= expect(extract_bare_sql("no json at all\nSELECT name FROM stadium") ==
                   "SELECT name FROM stadium",
               "secondary bare-statement extraction", detail);

  // "The modified SQL:" extraction over the three fixed exemplar answers.
  const std::string q1 =
      "A: The question is an extremum problem, so i should modify the SQL. The modified SQL: "
      "SELECT T2.name FROM advisor AS T1 JOIN instructor AS T2 ON T1.i_id = T2.id JOIN student "
      "AS T3 ON T1.s_id = T3.id ORDER BY T3.tot_cred DESC LIMIT 1";
  ok &= expect(extract_modified_sql(q1) ==
                   "SELECT T2.name FROM advisor AS T1 JOIN instructor AS T2 ON T1.i_id = T2.id "
                   "JOIN student AS T3 ON T1.s_id = T3.id ORDER BY T3.tot_cred DESC LIMIT 1",
               "extremum exemplar marker extraction", detail);
  const std::string q2 =
      "A: The question is an extremum problem, so i should modify the SQL. The modified SQL: "
      "SELECT T1.customer_id, T2.customer_first_name, T2.customer_last_name FROM Customers_cards "
      "AS T1 JOIN Customers AS T2 ON T1.customer_id = T2.customer_id GROUP BY T1.customer_id "
      "ORDER BY count(*) ASC LIMIT 1";
  ok &= expect(extract_modified_sql(q2).value_or("").rfind("SELECT T1.customer_id", 0) == 0,
               "fewest-accounts exemplar marker extraction", detail);
  const std::string q3 =
      "A: The question is not an extremum problem, so i should use the original SQL as the "
      "modified SQL.\nThe modified SQL: SELECT avg(hours) FROM projects";
  ok &= expect(extract_modified_sql(q3) == "SELECT avg(hours) FROM projects",
               "non-extremum exemplar keeps the original", detail);

  // Seed-"SELECT" completion extraction.
  ok &= expect(apply_select_seed(" T2.name FROM instructor AS T2 JOIN advisor AS T1 ON T1.i_id = "
                                 "T2.id") ==
                   "SELECT T2.name FROM instructor AS T2 JOIN advisor AS T1 ON T1.i_id = T2.id",
               "seed prefixing", detail);
  ok &= expect(apply_select_seed("SELECT movie_title FROM movies ORDER BY movie_popularity DESC "
                                 "LIMIT 1") ==
                   "SELECT movie_title FROM movies ORDER BY movie_popularity DESC LIMIT 1",
               "seed idempotence", detail);
  return ok;
}

// --- criterion 3: classification mapping ------------------------------------

bool classification_mapping(std::string& detail) {
  bool ok = true;
  // Totality over the 4-element label-pair domain.
  std::set<QuestionClass> image;
  for (bool joins : {false, true})
    for (bool nested : {false, true}) image.insert(make_question_class(joins, nested));
  ok &= expect(image.size() == 4, "label-pair mapping is not a bijection", detail);
  ok &= expect(make_question_class(false, false) == QuestionClass::easy &&
                   make_question_class(true, false) == QuestionClass::join &&
                   make_question_class(false, true) == QuestionClass::nested &&
                   make_question_class(true, true) == QuestionClass::join_nested,
               "label-pair mapping misassigns a class", detail);

  using QC = QuestionClass;
  const std::vector<std::pair<std::string, QC>> curated = {
      // easy
      {"SELECT avg(hours) FROM projects", QC::easy},
      {"SELECT count(*) FROM singer", QC::easy},
      {"SELECT name FROM stadium", QC::easy},
      {"SELECT DISTINCT Country FROM singer", QC::easy},
      {"SELECT max(capacity), min(capacity) FROM stadium", QC::easy},
      {"SELECT name, capacity FROM stadium ORDER BY capacity DESC LIMIT 1", QC::easy},
      {"SELECT studio FROM film WHERE gross_in_dollar > 4500000", QC::easy},
      {"SELECT studio, avg(gross_in_dollar) FROM film GROUP BY studio HAVING "
       "avg(gross_in_dollar) > 4500000",
       QC::easy},
      {"SELECT name FROM head WHERE age > 56 AND born_state = 'California'", QC::easy},
      {"SELECT Year FROM concert WHERE Theme = 'Free choice' OR Theme = 'Wide Awake'", QC::easy},
      // join
      {"SELECT count(*) FROM songs AS T1 JOIN vocals AS T2 ON T1.SongId = T2.SongId", QC::join},
      {"SELECT T2.name FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_ID = T2.stadium_ID",
       QC::join},
      {"SELECT T1.Name, T2.name FROM department AS T1 JOIN management AS T3 ON T1.Department_ID "
       "= T3.department_ID JOIN head AS T2 ON T3.head_ID = T2.head_ID",
       QC::join},
      {"SELECT a.x FROM ta AS a, tb AS b WHERE a.id = b.id", QC::join},
      {"SELECT T2.Name, count(*) FROM concert AS T1 JOIN stadium AS T2 ON T1.Stadium_ID = "
       "T2.Stadium_ID GROUP BY T1.Stadium_ID",
       QC::join},
      {"SELECT T1.Name FROM department AS T1 JOIN management AS T2 ON T1.Department_ID = "
       "T2.department_ID GROUP BY T1.Department_ID ORDER BY count(*) DESC LIMIT 1",
       QC::join},
      {"SELECT T2.name FROM instructor AS T2 JOIN advisor AS T1 ON T2.id = T1.i_id ORDER BY "
       "T1.s_id",
       QC::join},
      {"SELECT s.Name, c.concert_Name FROM singer s, singer_in_concert sic, concert c WHERE "
       "s.Singer_ID = sic.Singer_ID AND sic.concert_ID = c.concert_ID",
       QC::join},
      {"SELECT count(DISTINCT T1.Singer_ID) FROM singer_in_concert AS T1 INNER JOIN concert AS "
       "T2 ON T1.concert_ID = T2.concert_ID WHERE T2.Year = '2014'",
       QC::join},
      {"SELECT T1.Location FROM stadium AS T1 LEFT JOIN concert AS T2 ON T1.Stadium_ID = "
       "T2.Stadium_ID",
       QC::join},
      // nested
      {"SELECT a FROM t WHERE x IN (SELECT x FROM u)", QC::nested},
      {"SELECT Name FROM singer WHERE Age > (SELECT avg(Age) FROM singer)", QC::nested},
      {"SELECT product FROM product WHERE max_page_size = (SELECT max_page_size FROM product "
       "WHERE product_id = 1)",
       QC::nested},
      {"SELECT name FROM stadium WHERE Stadium_ID NOT IN (SELECT Stadium_ID FROM concert)",
       QC::nested},
      {"SELECT studio FROM film GROUP BY studio HAVING avg(gross_in_dollar) > (SELECT "
       "avg(gross_in_dollar) FROM film)",
       QC::nested},
      {"SELECT name FROM head WHERE age = (SELECT max(age) FROM head)", QC::nested},
      {"SELECT Country FROM singer EXCEPT SELECT Country FROM singer WHERE Age > 50", QC::nested},
      {"SELECT Name FROM stadium INTERSECT SELECT Name FROM stadium WHERE Capacity > 10000",
       QC::nested},
      {"SELECT name FROM projects WHERE hours > (SELECT avg(hours) FROM projects)", QC::nested},
      {"SELECT Location FROM stadium UNION SELECT Country FROM singer", QC::nested},
      // join-nested
      {"SELECT name FROM stadium EXCEPT SELECT T2.name FROM concert AS T1 JOIN stadium AS T2 ON "
       "T1.stadium_ID = T2.stadium_ID WHERE T1.year = 2014",
       QC::join_nested},
      {"SELECT T2.name FROM instructor T2 JOIN advisor T1 ON T2.id = T1.i_id JOIN student s ON "
       "T1.s_id = T3.id WHERE T3.tot_cred = (SELECT MAX(tot_cred) FROM student)",
       QC::join_nested},
      {"SELECT c.customer_id FROM CUSTOMERS c JOIN ACCOUNTS a ON c.customer_id = a.customer_id "
       "GROUP BY c.customer_id HAVING COUNT(a.account_id) = (SELECT COUNT(account_id) FROM "
       "ACCOUNTS GROUP BY customer_id ORDER BY COUNT(account_id) ASC LIMIT 1)",
       QC::join_nested},
      {"SELECT T1.name FROM useracct AS T1 JOIN review AS T2 ON T1.u_id = T2.u_id WHERE T2.i_id "
       "IN (SELECT i_id FROM item)",
       QC::join_nested},
      {"SELECT T3.Name FROM singer_in_concert AS T1 JOIN concert AS T2 ON T1.concert_ID = "
       "T2.concert_ID JOIN singer AS T3 ON T1.Singer_ID = T3.Singer_ID WHERE T2.concert_ID IN "
       "(SELECT concert_ID FROM concert WHERE Year = '2014')",
       QC::join_nested},
      {"SELECT T2.name FROM management AS T1 JOIN head AS T2 ON T1.head_ID = T2.head_ID WHERE "
       "T1.department_ID IN (SELECT Department_ID FROM department WHERE Budget_in_Billions < 15)",
       QC::join_nested},
      {"SELECT Name FROM stadium WHERE Stadium_ID IN (SELECT T1.Stadium_ID FROM concert AS T1 "
       "JOIN stadium AS T2 ON T1.Stadium_ID = T2.Stadium_ID)",
       QC::join_nested},
      {"SELECT a.x FROM ta a, tb b WHERE a.id = b.id AND a.y IN (SELECT y FROM tc)",
       QC::join_nested},
      {"SELECT T2.Name FROM concert AS T1 JOIN stadium AS T2 ON T1.Stadium_ID = T2.Stadium_ID "
       "WHERE T1.Year = 2014 UNION SELECT Name FROM stadium WHERE Capacity > 50000",
       QC::join_nested},
      {"SELECT name FROM stadium EXCEPT SELECT T2.name FROM concert AS T1 JOIN stadium AS T2 ON "
       "T1.stadium_ID = T2.stadium_ID",
       QC::join_nested},
  };
  ok &= expect(curated.size() == 40, "curated set must hold 40 statements", detail);
  int agree = 0;
  for (const auto& [sql, expected] : curated) {
    if (classify_gold_sql(sql) == expected)
      ++agree;
    else
      expect(false, "classify_gold_sql disagrees on: " + sql, detail);
  }
  ok &= expect(agree == static_cast<int>(curated.size()),
               "agreement " + std::to_string(agree) + "/40", detail);
  return ok;
}

// --- criterion 4: execution-match oracle ------------------------------------

struct OraclePair {
  std::string gold;
  std::string pred;
  bool gold_ordered;  // generator knowledge, independent of the textual scan
};

bool oracle_matches(const ExecResult& pred, const ExecResult& gold, bool gold_ordered) {
  if (gold.status != ExecStatus::ok || pred.status != ExecStatus::ok) return false;
  if (pred.column_count != gold.column_count) return false;
  if (gold_ordered) {
    if (pred.rows.size() != gold.rows.size()) return false;
    for (std::size_t i = 0; i < gold.rows.size(); ++i)
      if (pred.rows[i] != gold.rows[i]) return false;
    return true;
  }
  std::multiset<std::vector<std::string>> a(pred.rows.begin(), pred.rows.end());
  std::multiset<std::vector<std::string>> b(gold.rows.begin(), gold.rows.end());
  return a == b;
}

bool exec_match_oracle(std::string& detail) {
  TempDir dir("acc-oracle");
  std::uint64_t rng_state = 20240611;
  auto next = [&rng_state] {
    std::uint64_t z = (rng_state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };

  const std::vector<std::string> texts = {"'x'", "'y'", "'z'", "NULL"};
  std::size_t total = 0, agreements = 0;
  for (int table_round = 0; table_round < 12; ++table_round) {
    std::string db_path = dir.path() + "/t" + std::to_string(table_round) + ".sqlite";
    std::string seed = "CREATE TABLE t (a INTEGER, b REAL, c TEXT);";
    std::size_t rows = 1 + next() % 5;
    for (std::size_t r = 0; r < rows; ++r) {
      std::string a = next() % 5 == 0 ? "NULL" : std::to_string(next() % 4);
      std::string b = next() % 5 == 0 ? "NULL"
                                      : std::to_string(next() % 7) + "." +
                                            std::to_string(next() % 100);
      std::string c = texts[next() % texts.size()];
      seed += "INSERT INTO t VALUES (" + a + ", " + b + ", " + c + ");";
      if (next() % 3 == 0)  // force duplicates
        seed += "INSERT INTO t VALUES (" + a + ", " + b + ", " + c + ");";
    }
    seed_database(db_path, seed);

    const std::vector<std::pair<std::string, bool>> golds = {
        {"SELECT a FROM t", false},
        {"SELECT a, b FROM t", false},
        {"SELECT c FROM t", false},
        {"SELECT a FROM t ORDER BY a", true},
        {"SELECT a, b FROM t ORDER BY b, a", true},
        {"SELECT count(*) FROM t", false},
        {"SELECT sum(b) FROM t", false},
        {"SELECT avg(b) FROM t", false},
        {"SELECT DISTINCT c FROM t", false},
        {"SELECT a FROM t WHERE a > 1", false},
        {"SELECT a FROM (SELECT a FROM t ORDER BY a DESC)", false},
    };
    for (const auto& [gold_sql, ordered] : golds) {
      std::vector<std::string> preds = {
          gold_sql,                                   // identity
          gold_sql + " ORDER BY 1 DESC",              // permuted order
          "SELECT a, c FROM t",                       // extra/wrong columns
          "SELECT a FROM t WHERE a > 2",              // different filter
          "SELECT nope FROM t",                       // execution error
          "SELECT DISTINCT a FROM t",                 // duplicate collapse
      };
      ExecResult gold = execute_sql(db_path, gold_sql, 10.0);
      if (gold.status != ExecStatus::ok) {
        detail = "gold statement failed to execute: " + gold_sql;
        return false;
      }
      for (const auto& pred_sql : preds) {
        ExecResult pred = execute_sql(db_path, pred_sql, 10.0);
        bool got = exec_match(pred, gold, gold_sql);
        bool want = oracle_matches(pred, gold, ordered);
        ++total;
        if (got == want)
          ++agreements;
        else
          expect(false,
                 "disagreement on gold='" + gold_sql + "' pred='" + pred_sql + "' (exec_match=" +
                     (got ? "true" : "false") + ", oracle=" + (want ? "true" : "false") + ")",
                 detail);
      }
    }
  }
  if (total < 500) {
    detail = "only " + std::to_string(total) + " pairs generated";
    return false;
  }
  if (agreements != total) {
    detail += " — agreement " + std::to_string(agreements) + "/" + std::to_string(total);
    return false;
  }
  return true;
}

// --- criterion 5: retrieval properties --------------------------------------

bool retrieval_properties(std::string& detail) {
  auto schema = stadium_concert_schema();
  SchemaCatalog catalog;
  catalog.emplace(schema.db_id, schema);

  std::uint64_t rng_state = 7;
  auto next = [&rng_state] {
    std::uint64_t z = (rng_state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  const std::vector<std::string> verbs = {"show", "list", "count", "find", "return"};
  const std::vector<std::string> nouns = {"name",    "capacity", "year",  "theme",
                                          "country", "age",      "location"};
  auto random_question = [&] {
    std::string q = verbs[next() % verbs.size()] + " the " + nouns[next() % nouns.size()] +
                    " of the " + (next() % 2 ? "stadium" : "singer") + " named '" +
                    std::string(1, static_cast<char>('a' + next() % 26)) + "'";
    if (next() % 3 == 0) q += " in " + std::to_string(1990 + next() % 40);
    return q + "?";
  };

  int rank_one = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    std::string query = random_question();
    std::vector<TrainingItem> items;
    std::size_t n = 10 + next() % 40;
    for (std::size_t i = 0; i < n; ++i)
      items.push_back({random_question() + " v" + std::to_string(next() % 1000),
                       "SELECT count(*) FROM stadium", "concert_singer"});
    // One entry whose skeleton equals the query's (different quoted literal).
    std::string twin = query;
    auto open = twin.find('\'');
    auto close = twin.find('\'', open + 1);
    twin.replace(open + 1, close - open - 1, "other entity");
    items.insert(items.begin() + static_cast<std::ptrdiff_t>(next() % items.size()),
                 {twin, "SELECT count(*) FROM stadium", "concert_singer"});

    auto lib = ShotLibrary::build(items, catalog, nullptr);
    auto got = retrieve(lib, ShotMode::tem_sim, QuestionClass::easy, query, schema, 5);
    if (got.empty()) {
      detail = "empty retrieval on trial " + std::to_string(trial);
      return false;
    }
    std::string query_skeleton = build_skeleton(query, schema);
    if (got[0].skeleton == query_skeleton &&
        similarity(query_skeleton, got[0].skeleton) == 1.0)
      ++rank_one;
    // (b) scores non-increasing down the returned list.
    for (std::size_t i = 1; i < got.size(); ++i) {
      if (similarity(query_skeleton, got[i - 1].skeleton) <
          similarity(query_skeleton, got[i].skeleton) - 1e-12) {
        detail = "retrieval scores increase at position " + std::to_string(i);
        return false;
      }
    }
  }
  if (rank_one != trials) {
    detail = "skeleton-identical entry ranked first in " + std::to_string(rank_one) + "/" +
             std::to_string(trials) + " libraries";
    return false;
  }

  // (c) seeded random reproducibility.
  std::vector<TrainingItem> items;
  for (int i = 0; i < 25; ++i)
    items.push_back({"question number " + std::to_string(i), "SELECT count(*) FROM stadium",
                     "concert_singer"});
  auto lib = ShotLibrary::build(items, catalog, nullptr);
  for (std::uint64_t seed : {1ull, 7ull, 99ull}) {
    auto a = retrieve(lib, ShotMode::random_pick, QuestionClass::easy, "q?", schema, 5, seed);
    auto b = retrieve(lib, ShotMode::random_pick, QuestionClass::easy, "q?", schema, 5, seed);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].question != b[i].question) {
        detail = "seeded random retrieval not reproducible";
        return false;
      }
    }
  }
  return true;
}

// --- criterion 6: end-to-end replay -----------------------------------------

bool end_to_end_replay(std::string& detail) {
  TempDir out("acc-replay");
  auto config = replay_fixture_config();  // strict replay: no transport is ever built
  std::ostringstream sink_out, sink_err;
  int rc = cli::cmd_run(mini_spider_dir() + "/dev.jsonl", config, out.path(), sink_out, sink_err);
  if (!expect(rc == cli::exit_ok, "cmd_run failed: " + sink_err.str(), detail)) return false;

  bool ok = true;
  ok &= expect(read_file(out.path() + "/predictions.jsonl") ==
                   read_file(replay_expected_dir() + "/run/predictions.jsonl"),
               "predictions differ from the committed fixture", detail);
  ok &= expect(read_file(out.path() + "/traces.jsonl") ==
                   read_file(replay_expected_dir() + "/run/traces.jsonl"),
               "traces differ from the committed fixture", detail);

  // Every call served from the cache; zero live calls.
  std::istringstream traces(read_file(out.path() + "/traces.jsonl"));
  std::string line;
  while (std::getline(traces, line)) {
    auto trace = PipelineTrace::from_json(json::parse(line));
    ok &= expect(!trace.failed, "a replayed question failed", detail);
    for (const auto& rec : trace.stages)
      ok &= expect(rec.provenance == "replay", "non-replay provenance in trace", detail);
  }

  TempDir dbs("acc-replay-dbs");
  seed_mini_spider_dbs(dbs.path());
  MetricsReport report;
  rc = cli::cmd_eval(out.path() + "/predictions.jsonl", mini_spider_dir() + "/dev.jsonl",
                     dbs.path(), "", 30.0, sink_out, sink_err, &report);
  if (!expect(rc == cli::exit_ok, "cmd_eval failed", detail)) return false;

  json expected = json::parse(read_file(replay_expected_dir() + "/summary.json"));
  ok &= expect(report.to_json()["all"] == expected["eval"]["all"],
               "overall EX differs from the recorded fixture", detail);
  ok &= expect(report.to_json()["buckets"] == expected["eval"]["buckets"],
               "per-bucket EX differs from the recorded fixture", detail);
  return ok;
}

// --- criterion 7: ablation plumbing -----------------------------------------

bool ablation_plumbing(std::string& detail) {
  auto schema = stadium_concert_schema();
  SchemaCatalog catalog;
  catalog.emplace(schema.db_id, schema);
  auto templates = TemplateStore::load(prompts_dir());
  QuestionTask task;
  task.question = "How many singers do we have?";
  task.db_id = "concert_singer";

  auto run_with = [&](std::set<Ablation> flags) {
    UsageLedger ledger;
    Gateway gateway({}, make_identity_mock(schema, "SELECT count(*) FROM singer"), &ledger);
    PipelineConfig config;
    config.ablations = std::move(flags);
    PipelineEngine engine(catalog, templates, gateway, nullptr, config);
    return engine.run(task);
  };

  auto baseline = run_with({});
  if (!expect(baseline.stages.size() == 6 && !baseline.failed, "baseline run incomplete", detail))
    return false;

  // Expected diff footprint per flag: stages removed, stages prompt-altered.
  struct Footprint {
    Ablation flag;
    std::set<std::string> removed;
    std::set<std::string> altered;
  };
  const std::vector<Footprint> footprints = {
      {Ablation::information_filter, {stages::elements, stages::filter}, {}},
      {Ablation::classification, {stages::classification}, {}},
      {Ablation::self_correct, {stages::self_correction}, {}},
      {Ablation::active_learning, {stages::active_learning}, {}},
      {Ablation::active_and_correct, {stages::self_correction, stages::active_learning}, {}},
      {Ablation::hfk, {}, {stages::generation}},
  };

  bool ok = true;
  std::map<Ablation, std::set<std::string>> touched;
  for (const auto& fp : footprints) {
    auto ablated = run_with({fp.flag});
    ok &= expect(!ablated.failed, "ablated run failed: " + to_string(fp.flag), detail);
    ok &= expect(ablated.final_sql == baseline.final_sql,
                 "final SQL drifted under " + to_string(fp.flag), detail);

    std::map<std::string, const StageRecord*> ablated_by_stage;
    for (const auto& rec : ablated.stages) ablated_by_stage[rec.stage] = &rec;

    std::set<std::string> diff;
    for (const auto& rec : baseline.stages) {
      auto it = ablated_by_stage.find(rec.stage);
      if (it == ablated_by_stage.end()) {
        diff.insert(rec.stage);  // removed
        ok &= expect(fp.removed.count(rec.stage) == 1,
                     to_string(fp.flag) + " unexpectedly removed stage " + rec.stage, detail);
      } else if (it->second->prompt != rec.prompt || it->second->response != rec.response) {
        diff.insert(rec.stage);  // altered
        ok &= expect(fp.altered.count(rec.stage) == 1,
                     to_string(fp.flag) + " unexpectedly altered stage " + rec.stage, detail);
      }
    }
    ok &= expect(ablated.stages.size() == baseline.stages.size() - fp.removed.size(),
                 to_string(fp.flag) + " produced an extra stage", detail);
    std::set<std::string> expected_diff = fp.removed;
    expected_diff.insert(fp.altered.begin(), fp.altered.end());
    ok &= expect(diff == expected_diff, to_string(fp.flag) + " footprint mismatch", detail);
    touched[fp.flag] = diff;
  }

  // Pairwise isolation: distinct single-stage flags govern disjoint stages
  // (the active_and_correct shorthand intentionally overlaps its two parts).
  const std::vector<Ablation> exclusive = {Ablation::information_filter, Ablation::classification,
                                           Ablation::self_correct, Ablation::active_learning,
                                           Ablation::hfk};
  for (std::size_t i = 0; i < exclusive.size(); ++i) {
    for (std::size_t j = i + 1; j < exclusive.size(); ++j) {
      std::vector<std::string> overlap;
      std::set_intersection(touched[exclusive[i]].begin(), touched[exclusive[i]].end(),
                            touched[exclusive[j]].begin(), touched[exclusive[j]].end(),
                            std::back_inserter(overlap));
      ok &= expect(overlap.empty(),
                   "flags " + to_string(exclusive[i]) + " and " + to_string(exclusive[j]) +
                       " both touch a stage",
                   detail);
    }
  }
  return ok;
}

// --- criterion 8: token accounting ------------------------------------------

bool token_accounting(std::string& detail) {
  bool ok = true;

  // Ledger additivity on a fresh mock run.
  auto schema = stadium_concert_schema();
  SchemaCatalog catalog;
  catalog.emplace(schema.db_id, schema);
  auto templates = TemplateStore::load(prompts_dir());
  UsageLedger ledger;
  Gateway gateway({}, make_identity_mock(schema, "SELECT count(*) FROM singer"), &ledger);
  PipelineEngine engine(catalog, templates, gateway, nullptr, {});
  QuestionTask task;
  task.question = "How many singers do we have?";
  task.db_id = "concert_singer";
  auto trace = engine.run(task);

  auto total = ledger.total();
  long long stage_prompt = 0, stage_completion = 0, stage_calls = 0;
  for (const auto& [_, usage] : ledger.snapshot()) {
    stage_prompt += usage.prompt_tokens;
    stage_completion += usage.completion_tokens;
    stage_calls += usage.calls;
  }
  ok &= expect(total.prompt_tokens == stage_prompt &&
                   total.completion_tokens == stage_completion && total.calls == stage_calls,
               "ledger totals do not equal the per-stage sums", detail);

  // Every metered call maps to exactly one stage record with the same tokens.
  long long trace_prompt = 0, trace_completion = 0;
  for (const auto& rec : trace.stages) {
    trace_prompt += rec.prompt_tokens;
    trace_completion += rec.completion_tokens;
  }
  ok &= expect(trace_prompt == total.prompt_tokens &&
                   trace_completion == total.completion_tokens &&
                   static_cast<long long>(trace.stages.size()) == total.calls,
               "trace records do not cover the ledger", detail);

  // cmd_report_cost over the committed fixtures reproduces the recorded sums.
  std::ostringstream sink_out, sink_err;
  json cost;
  int rc = cli::cmd_report_cost(replay_expected_dir() + "/run/traces.jsonl", sink_out, sink_err,
                                &cost);
  ok &= expect(rc == cli::exit_ok, "cmd_report_cost failed on the fixture traces", detail);
  json expected = json::parse(read_file(replay_expected_dir() + "/summary.json"));
  ok &= expect(cost == expected["cost"],
               "cost summary differs from the recorded fixture sums", detail);
  return ok;
}

// --- criterion 9: live sample (informational) --------------------------------

bool live_sample(std::string& detail) {
  const char* base_url = std::getenv("SQLFLOW_LIVE_BASE_URL");
  const char* dataset = std::getenv("SQLFLOW_LIVE_DATASET");
  const char* catalog = std::getenv("SQLFLOW_LIVE_CATALOG");
  const char* db_root = std::getenv("SQLFLOW_LIVE_DB_ROOT");
  const char* shots = std::getenv("SQLFLOW_LIVE_SHOTS");
  if (!base_url || !dataset || !catalog || !db_root) {
    detail =
        "skipped: set SQLFLOW_LIVE_BASE_URL, SQLFLOW_LIVE_DATASET, SQLFLOW_LIVE_CATALOG, "
        "SQLFLOW_LIVE_DB_ROOT (and SQLFLOW_API_KEY) to run the seeded 50-question sample";
    return true;
  }

  // Seeded 50-question sample of the provided dev split.
  auto tasks = cli::load_tasks(dataset);
  std::uint64_t rng_state = 50;
  auto next = [&rng_state] {
    std::uint64_t z = (rng_state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  for (std::size_t i = tasks.size(); i > 1; --i)
    std::swap(tasks[i - 1], tasks[next() % i]);
  if (tasks.size() > 50) tasks.resize(50);

  TempDir out("acc-live");
  cli::save_tasks(tasks, out.path() + "/sample.jsonl");
  auto config = replay_fixture_config();
  config.replay = ReplayMode::record;
  config.cache_root = out.path() + "/cache";
  config.base_url = base_url;
  config.catalog_path = catalog;
  config.shots_library = shots ? shots : "";
  if (config.shots_library.empty()) config.pipeline.shot_mode = ShotMode::zero_shot;

  std::ostringstream sink_out, sink_err;
  int rc = cli::cmd_run(out.path() + "/sample.jsonl", config, out.path() + "/run", sink_out,
                        sink_err);
  if (rc != cli::exit_ok) {
    detail = "live run did not complete (exit " + std::to_string(rc) + "); logged, not gating";
    return true;
  }
  MetricsReport report;
  rc = cli::cmd_eval(out.path() + "/run/predictions.jsonl", out.path() + "/sample.jsonl", db_root,
                     "", 30.0, sink_out, sink_err, &report);
  if (rc != cli::exit_ok) {
    detail = "live eval did not complete; logged, not gating";
    return true;
  }
  double ex = report.all.ex();
  double reference = 0.854;
  detail = "sample EX " + std::to_string(ex) + " vs reference 0.854: " +
           (std::abs(ex - reference) <= 0.10 ? "consistent" : "divergent");
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"prompt golden suite (11 templates byte-match)", 1000, false, prompt_golden_suite},
      {"parser suite (fixed template exemplar outputs parse exactly)", 0, false, parser_suite},
      {"classification mapping (4-pair totality + 40-statement agreement)", 0, false,
       classification_mapping},
      {"execution-match oracle (>=500 generated pairs)", 30000, false, exec_match_oracle},
      {"retrieval properties (rank-1 x1000, monotone scores, seeded random)", 10000, false,
       retrieval_properties},
      {"end-to-end strict replay (byte-identical outputs, fixture EX)", 5000, false,
       end_to_end_replay},
      {"ablation plumbing (six flags, isolated trace diffs)", 0, false, ablation_plumbing},
      {"token accounting (ledger additivity, fixture cost sums)", 0, false, token_accounting},
      {"live sample (informational, never gating)", 0, true, live_sample},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto& criterion = criteria[i];
    std::string detail;
    auto start = std::chrono::steady_clock::now();
    bool passed = false;
    try {
      passed = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    if (criterion.budget_ms > 0 && ms > criterion.budget_ms && passed) {
      passed = false;
      detail = "runtime " + std::to_string(ms) + " ms exceeds budget";
    }
    bool gating_failure = !passed && !criterion.informational;
    if (gating_failure) ++failures;
    std::printf("%s criterion %zu: %s (%.0f ms)%s%s\n",
                passed ? "PASS" : (criterion.informational ? "NOTE" : "FAIL"), i + 1,
                criterion.name.c_str(), ms, detail.empty() ? "" : " — ", detail.c_str());
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sqlflow {

struct ColumnDef {
  std::string name;
  std::string sql_type;
  bool is_primary_key = false;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;

  const ColumnDef* column(std::string_view col_name) const;          // exact match
  const ColumnDef* resolve_column(std::string_view col_name) const;  // exact, then unique ci
};

struct ForeignKey {
  std::string from_table;
  std::string from_column;
  std::string to_table;
  std::string to_column;
};

struct DatabaseSchema {
  std::string db_id;
  std::vector<TableDef> tables;
  std::vector<ForeignKey> foreign_keys;
  std::optional<std::string> sqlite_path;

  const TableDef* table(std::string_view name) const;
  const TableDef* resolve_table(std::string_view name) const;
};

// Case-insensitive name ordering so a keep-set can be built from LLM output
// without worrying about duplicate casings.
struct CiLess {
  bool operator()(const std::string& a, const std::string& b) const;
};
using ColumnSet = std::set<std::string, CiLess>;
using KeepMap = std::map<std::string, ColumnSet, CiLess>;

struct CatalogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedCatalog : CatalogError {
  using CatalogError::CatalogError;
};
struct DuplicateDbId : CatalogError {
  using CatalogError::CatalogError;
};

struct NameIssue {
  enum class Kind { unknown_table, unknown_column };
  Kind kind;
  std::string name;
  std::string table;       // owning table for unknown_column
  std::string suggestion;  // nearest existing name, possibly empty
  std::string describe() const;
};

struct SelectionError : std::runtime_error {
  std::vector<NameIssue> issues;
  explicit SelectionError(std::vector<NameIssue> found);
};
struct EmptySelection : std::runtime_error {
  EmptySelection() : std::runtime_error("empty selection") {}
};

using SchemaCatalog = std::map<std::string, DatabaseSchema>;

/// Load a Spider-format tables catalog (JSON array of database entries).
SchemaCatalog load_spider_catalog(const std::string& catalog_file);

/// Render CREATE TABLE blocks for the schema, optionally restricted to a
/// selection of tables/columns. FK lines appear only when both endpoints
/// are selected.
std::string render_ddl(const DatabaseSchema& schema,
                       const std::optional<KeepMap>& selection = std::nullopt);

/// "from_table.from_column = to_table.to_column" per FK, catalog order,
/// restricted to FKs whose endpoint tables are both selected.
std::vector<std::string> render_link_info(
    const DatabaseSchema& schema,
    const std::optional<std::set<std::string, CiLess>>& tables = std::nullopt);

/// Keep only the named tables/columns, then close over primary keys and the
/// endpoints of surviving foreign keys so joins stay expressible.
DatabaseSchema prune_schema(const DatabaseSchema& schema, const KeepMap& keep);

/// Nearest candidate by edit distance, or empty when nothing is close.
std::string suggest_name(std::string_view given, const std::vector<std::string>& candidates);

/// Conventional on-disk location of a benchmark database.
std::string database_path(const std::string& db_root, const std::string& db_id);

}  // namespace sqlflow

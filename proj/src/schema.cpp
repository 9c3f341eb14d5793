#include "sqlflow/schema.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "sqlflow/textutil.hpp"

namespace sqlflow {

using nlohmann::json;

bool CiLess::operator()(const std::string& a, const std::string& b) const {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
        return std::tolower(static_cast<unsigned char>(x)) <
               std::tolower(static_cast<unsigned char>(y));
      });
}

const ColumnDef* TableDef::column(std::string_view col_name) const {
  for (const auto& c : columns)
    if (c.name == col_name) return &c;
  return nullptr;
}

const ColumnDef* TableDef::resolve_column(std::string_view col_name) const {
  if (const auto* exact = column(col_name)) return exact;
  const ColumnDef* found = nullptr;
  for (const auto& c : columns) {
    if (text::iequals(c.name, col_name)) {
      if (found) return nullptr;  // ambiguous
      found = &c;
    }
  }
  return found;
}

const TableDef* DatabaseSchema::table(std::string_view name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

const TableDef* DatabaseSchema::resolve_table(std::string_view name) const {
  if (const auto* exact = table(name)) return exact;
  const TableDef* found = nullptr;
  for (const auto& t : tables) {
    if (text::iequals(t.name, name)) {
      if (found) return nullptr;
      found = &t;
    }
  }
  return found;
}

std::string NameIssue::describe() const {
  std::string msg = kind == Kind::unknown_table
                        ? "unknown table '" + name + "'"
                        : "unknown column '" + name + "' in table '" + table + "'";
  if (!suggestion.empty()) msg += " (did you mean '" + suggestion + "'?)";
  return msg;
}

SelectionError::SelectionError(std::vector<NameIssue> found)
    : std::runtime_error([&] {
        std::vector<std::string> parts;
        for (const auto& i : found) parts.push_back(i.describe());
        return text::join(parts, "; ");
      }()),
      issues(std::move(found)) {}

std::string suggest_name(std::string_view given, const std::vector<std::string>& candidates) {
  std::string best;
  int best_dist = 4;  // suggestions beyond edit distance 3 are noise
  for (const auto& c : candidates) {
    int d = text::levenshtein(given, c);
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  return best;
}

std::string database_path(const std::string& db_root, const std::string& db_id) {
  return db_root + "/" + db_id + "/" + db_id + ".sqlite";
}

namespace {

struct ColumnRef {
  int table_index;
  std::string name;
};

const json& require_key(const json& entry, const char* key, const std::string& db_id) {
  auto it = entry.find(key);
  if (it == entry.end())
    throw MalformedCatalog("catalog entry '" + db_id + "': missing key '" + key + "'");
  return *it;
}

DatabaseSchema parse_catalog_entry(const json& entry) {
  std::string db_id = entry.value("db_id", "");
  if (db_id.empty()) throw MalformedCatalog("catalog entry without db_id");

  const json& table_names = require_key(entry, "table_names_original", db_id);
  const json& column_names = require_key(entry, "column_names_original", db_id);
  const json& column_types = require_key(entry, "column_types", db_id);
  const json& primary_keys = require_key(entry, "primary_keys", db_id);
  const json& foreign_keys = require_key(entry, "foreign_keys", db_id);

  DatabaseSchema schema;
  schema.db_id = db_id;
  for (const auto& name : table_names) {
    if (!name.is_string()) throw MalformedCatalog(db_id + ": non-string table name");
    schema.tables.push_back(TableDef{name.get<std::string>(), {}});
  }

  // Index 0 is the "*" pseudo-column; types align with the full column list.
  std::vector<ColumnRef> refs;
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    const auto& pair = column_names[i];
    if (!pair.is_array() || pair.size() != 2)
      throw MalformedCatalog(db_id + ": bad column_names_original entry");
    int t = pair[0].get<int>();
    std::string col = pair[1].get<std::string>();
    refs.push_back(ColumnRef{t, col});
    if (t < 0) continue;
    if (t >= static_cast<int>(schema.tables.size()))
      throw MalformedCatalog(db_id + ": column '" + col + "' references table index " +
                             std::to_string(t) + " out of range");
    std::string type = i < column_types.size() ? column_types[i].get<std::string>() : "text";
    schema.tables[static_cast<std::size_t>(t)].columns.push_back(ColumnDef{col, type, false});
  }

  auto column_ref_at = [&](int idx) -> const ColumnRef& {
    if (idx <= 0 || idx >= static_cast<int>(refs.size()))
      throw MalformedCatalog(db_id + ": column index " + std::to_string(idx) + " out of range");
    const ColumnRef& r = refs[static_cast<std::size_t>(idx)];
    if (r.table_index < 0)
      throw MalformedCatalog(db_id + ": column index " + std::to_string(idx) +
                             " refers to the '*' pseudo-column");
    return r;
  };

  auto mark_primary = [&](int idx) {
    const ColumnRef& r = column_ref_at(idx);
    auto& tbl = schema.tables[static_cast<std::size_t>(r.table_index)];
    if (auto* col = const_cast<ColumnDef*>(tbl.column(r.name))) col->is_primary_key = true;
  };
  for (const auto& pk : primary_keys) {
    if (pk.is_array()) {  // composite key spelled as a nested list
      for (const auto& idx : pk) mark_primary(idx.get<int>());
    } else {
      mark_primary(pk.get<int>());
    }
  }

  for (const auto& fk : foreign_keys) {
    if (!fk.is_array() || fk.size() != 2)
      throw MalformedCatalog(db_id + ": bad foreign_keys entry");
    const ColumnRef& from = column_ref_at(fk[0].get<int>());
    const ColumnRef& to = column_ref_at(fk[1].get<int>());
    schema.foreign_keys.push_back(
        ForeignKey{schema.tables[static_cast<std::size_t>(from.table_index)].name, from.name,
                   schema.tables[static_cast<std::size_t>(to.table_index)].name, to.name});
  }
  return schema;
}

}  // namespace

SchemaCatalog load_spider_catalog(const std::string& catalog_file) {
  std::ifstream in(catalog_file);
  if (!in) throw MalformedCatalog("cannot open catalog file: " + catalog_file);
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_array())
    throw MalformedCatalog("catalog file is not a JSON array: " + catalog_file);

  SchemaCatalog catalog;
  for (const auto& entry : doc) {
    DatabaseSchema schema = parse_catalog_entry(entry);
    if (catalog.count(schema.db_id))
      throw DuplicateDbId("duplicate db_id '" + schema.db_id + "' in " + catalog_file);
    catalog.emplace(schema.db_id, std::move(schema));
  }
  return catalog;
}

namespace {

// Resolve a selection against the schema, collecting unknown-name issues.
// Output maps exact table name -> exact column names.
std::map<std::string, std::set<std::string>> resolve_selection(const DatabaseSchema& schema,
                                                               const KeepMap& selection) {
  std::vector<NameIssue> issues;
  std::vector<std::string> table_names;
  for (const auto& t : schema.tables) table_names.push_back(t.name);

  std::map<std::string, std::set<std::string>> resolved;
  for (const auto& [table_name, cols] : selection) {
    const TableDef* table = schema.resolve_table(table_name);
    if (!table) {
      issues.push_back(NameIssue{NameIssue::Kind::unknown_table, table_name, "",
                                 suggest_name(table_name, table_names)});
      continue;
    }
    auto& out_cols = resolved[table->name];
    std::vector<std::string> col_names;
    for (const auto& c : table->columns) col_names.push_back(c.name);
    for (const auto& col : cols) {
      const ColumnDef* def = table->resolve_column(col);
      if (!def) {
        issues.push_back(NameIssue{NameIssue::Kind::unknown_column, col, table->name,
                                   suggest_name(col, col_names)});
        continue;
      }
      out_cols.insert(def->name);
    }
  }
  if (!issues.empty()) throw SelectionError(std::move(issues));
  return resolved;
}

}  // namespace

std::string render_ddl(const DatabaseSchema& schema, const std::optional<KeepMap>& selection) {
  std::map<std::string, std::set<std::string>> resolved;
  if (selection) resolved = resolve_selection(schema, *selection);

  auto table_selected = [&](const std::string& name) {
    return !selection || resolved.count(name) > 0;
  };
  auto column_selected = [&](const std::string& table, const std::string& col) {
    if (!selection) return true;
    auto it = resolved.find(table);
    return it != resolved.end() && it->second.count(col) > 0;
  };

  std::vector<std::string> blocks;
  for (const auto& table : schema.tables) {
    if (!table_selected(table.name)) continue;
    std::string block = "CREATE TABLE " + table.name + " (\n";
    std::vector<std::string> pk_cols;
    for (const auto& col : table.columns) {
      if (!column_selected(table.name, col.name)) continue;
      block += col.name + " " + col.sql_type + "\n";
      if (col.is_primary_key) pk_cols.push_back(col.name);
    }
    std::vector<std::string> fk_lines;
    for (const auto& fk : schema.foreign_keys) {
      if (fk.from_table != table.name) continue;
      if (!table_selected(fk.to_table)) continue;
      if (!column_selected(fk.from_table, fk.from_column) ||
          !column_selected(fk.to_table, fk.to_column))
        continue;
      fk_lines.push_back("FOREIGN KEY (" + fk.from_column + ") REFERENCES " + fk.to_table + "(" +
                         fk.to_column + ")");
    }
    if (!pk_cols.empty())
      block += "PRIMARY KEY (" + text::join(pk_cols, ", ") + ")" + (fk_lines.empty() ? "" : ",") +
               "\n";
    for (const auto& line : fk_lines) block += line + "\n";
    block += ");";
    blocks.push_back(std::move(block));
  }
  return text::join(blocks, "\n\n");
}

std::vector<std::string> render_link_info(
    const DatabaseSchema& schema, const std::optional<std::set<std::string, CiLess>>& tables) {
  std::optional<std::set<std::string>> resolved;
  if (tables) {
    std::vector<NameIssue> issues;
    std::vector<std::string> table_names;
    for (const auto& t : schema.tables) table_names.push_back(t.name);
    resolved.emplace();
    for (const auto& name : *tables) {
      const TableDef* t = schema.resolve_table(name);
      if (!t) {
        issues.push_back(NameIssue{NameIssue::Kind::unknown_table, name, "",
                                   suggest_name(name, table_names)});
        continue;
      }
      resolved->insert(t->name);
    }
    if (!issues.empty()) throw SelectionError(std::move(issues));
  }

  std::vector<std::string> links;
  for (const auto& fk : schema.foreign_keys) {
    if (resolved && (!resolved->count(fk.from_table) || !resolved->count(fk.to_table))) continue;
    links.push_back(fk.from_table + "." + fk.from_column + " = " + fk.to_table + "." +
                    fk.to_column);
  }
  return links;
}

DatabaseSchema prune_schema(const DatabaseSchema& schema, const KeepMap& keep) {
  if (keep.empty()) throw EmptySelection();
  auto resolved = resolve_selection(schema, keep);

  DatabaseSchema out;
  out.db_id = schema.db_id;
  out.sqlite_path = schema.sqlite_path;

  for (const auto& fk : schema.foreign_keys) {
    if (resolved.count(fk.from_table) && resolved.count(fk.to_table))
      out.foreign_keys.push_back(fk);
    // Join columns survive even when the FK's other endpoint was pruned away.
    if (resolved.count(fk.from_table)) resolved[fk.from_table].insert(fk.from_column);
    if (resolved.count(fk.to_table)) resolved[fk.to_table].insert(fk.to_column);
  }

  for (const auto& table : schema.tables) {
    auto it = resolved.find(table.name);
    if (it == resolved.end()) continue;
    TableDef kept{table.name, {}};
    for (const auto& col : table.columns) {
      if (col.is_primary_key || it->second.count(col.name)) kept.columns.push_back(col);
    }
    // A keep-set that resolved to nothing for a PK-less table would leave it
    // empty; fall back to all of its columns rather than emit an invalid table.
    if (kept.columns.empty()) kept.columns = table.columns;
    out.tables.push_back(std::move(kept));
  }
  return out;
}

}  // namespace sqlflow

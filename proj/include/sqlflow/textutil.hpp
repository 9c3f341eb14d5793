#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sqlflow::text {

std::string lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

std::string trim(std::string_view s);
std::string trim_right(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split_lines(std::string_view s);

/// Replace runs of whitespace with a single space and trim the ends.
std::string collapse_whitespace(std::string_view s);

/// Case-insensitive search. Returns npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle);
std::size_t irfind(std::string_view haystack, std::string_view needle);

/// Drop ``` fence lines, keeping the fenced content.
std::string strip_code_fences(std::string_view s);

/// First parseable JSON object found by balanced-brace scanning. Tolerates
/// surrounding prose and code fences; nested objects stay inside the
/// outermost span.
std::optional<nlohmann::json> extract_first_json_object(std::string_view s);

/// Cut at the first semicolon outside of quotes; fences stripped first.
std::string first_sql_statement(std::string_view s);

int levenshtein(std::string_view a, std::string_view b);

std::uint64_t fnv1a(std::string_view s);

}  // namespace sqlflow::text

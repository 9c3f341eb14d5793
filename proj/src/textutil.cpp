#include "sqlflow/textutil.hpp"

#include <algorithm>
#include <cctype>

namespace sqlflow::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char to_lower_ch(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

}  // namespace

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), to_lower_ch);
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (to_lower_ch(a[i]) != to_lower_ch(b[i])) return false;
  return true;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string trim_right(std::string_view s) {
  std::size_t e = s.size();
  while (e > 0 && is_space(s[e - 1])) --e;
  return std::string(s.substr(0, e));
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      std::string_view line = s.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.emplace_back(line);
      start = i + 1;
    }
  }
  return lines;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = true;  // swallow leading whitespace
  for (char c : s) {
    if (is_space(c)) {
      in_ws = true;
    } else {
      if (in_ws && !out.empty()) out += ' ';
      out += c;
      in_ws = false;
    }
  }
  return out;
}

std::size_t ifind(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  if (needle.size() > haystack.size()) return std::string_view::npos;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i)
    if (iequals(haystack.substr(i, needle.size()), needle)) return i;
  return std::string_view::npos;
}

std::size_t irfind(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return haystack.size();
  if (needle.size() > haystack.size()) return std::string_view::npos;
  for (std::size_t i = haystack.size() - needle.size() + 1; i-- > 0;)
    if (iequals(haystack.substr(i, needle.size()), needle)) return i;
  return std::string_view::npos;
}

std::string strip_code_fences(std::string_view s) {
  if (s.find("```") == std::string_view::npos) return std::string(s);
  std::vector<std::string> kept;
  for (auto& line : split_lines(s)) {
    std::string t = trim(line);
    if (t.rfind("```", 0) == 0) continue;
    kept.push_back(line);
  }
  return join(kept, "\n");
}

std::optional<nlohmann::json> extract_first_json_object(std::string_view s) {
  for (std::size_t start = s.find('{'); start != std::string_view::npos;
       start = s.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
      char c = s[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          auto span = s.substr(start, i - start + 1);
          auto parsed = nlohmann::json::parse(span, nullptr, /*allow_exceptions=*/false);
          if (!parsed.is_discarded() && parsed.is_object()) return parsed;
          break;  // balanced but unparseable; try the next '{'
        }
      }
    }
  }
  return std::nullopt;
}

std::string first_sql_statement(std::string_view s) {
  std::string body = strip_code_fences(s);
  bool in_single = false, in_double = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (in_single) {
      if (c == '\'') in_single = false;
    } else if (in_double) {
      if (c == '"') in_double = false;
    } else if (c == '\'') {
      in_single = true;
    } else if (c == '"') {
      in_double = true;
    } else if (c == ';') {
      body.resize(i);
      break;
    }
  }
  return trim(body);
}

int levenshtein(std::string_view a, std::string_view b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int cost = to_lower_ch(a[i - 1]) == to_lower_ch(b[j - 1]) ? 0 : 1;
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sqlflow::text

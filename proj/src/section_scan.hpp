#pragma once

// Shared line-oriented section scanner for the text formats: '#' comments,
// [section] headers, 'key = value' entries, and '->' table rows. Internal
// to the library sources.

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cfrl/errors.hpp"
#include "cfrl/text.hpp"

namespace cfrl::detail {

struct Entry {
  int line;
  std::string key;
  std::string value;
};

struct RawSection {
  std::string kind;
  int line = 0;
  std::vector<Entry> entries;
  std::vector<std::pair<int, std::string>> rows;  // table rows
};

inline std::vector<RawSection> scan_sections(const std::string& text) {
  std::vector<RawSection> sections;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("unterminated section header", lineno);
      RawSection s;
      s.kind = trim(t.substr(1, t.size() - 2));
      s.line = lineno;
      sections.push_back(std::move(s));
      continue;
    }
    if (sections.empty())
      throw ConfigError("content before first section header", lineno);
    if (t.find("->") != std::string::npos) {
      sections.back().rows.emplace_back(lineno, t);
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value'", lineno);
    sections.back().entries.push_back(
        {lineno, trim(t.substr(0, eq)), trim(t.substr(eq + 1))});
  }
  return sections;
}

inline std::string take(RawSection& s, const std::string& key) {
  for (auto it = s.entries.begin(); it != s.entries.end(); ++it) {
    if (it->key == key) {
      std::string v = it->value;
      s.entries.erase(it);
      return v;
    }
  }
  throw ConfigError("section [" + s.kind + "] is missing key '" + key + "'", s.line);
}

inline std::string take_or(RawSection& s, const std::string& key, const std::string& fallback) {
  for (auto it = s.entries.begin(); it != s.entries.end(); ++it) {
    if (it->key == key) {
      std::string v = it->value;
      s.entries.erase(it);
      return v;
    }
  }
  return fallback;
}

inline void expect_drained(const RawSection& s) {
  if (!s.entries.empty())
    throw ConfigError("unknown key '" + s.entries.front().key + "' in section [" +
                          s.kind + "]",
                      s.entries.front().line);
}

}  // namespace cfrl::detail

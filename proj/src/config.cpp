#include "cfrl/config.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfrl/offpolicy.hpp"
#include "cfrl/text.hpp"

namespace cfrl {

namespace {

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  cfg.raw_ = text;
  std::string section;
  int line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] == '[') {
      if (t.back() != ']')
        throw ConfigError("section header must look like [name]", line_no);
      section = trim(t.substr(1, t.size() - 2));
      if (!valid_name(section))
        throw ConfigError("bad section name '" + section + "'", line_no);
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected `key = value`", line_no);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!valid_name(key)) throw ConfigError("bad key '" + key + "'", line_no);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", line_no);
    if (section.empty())
      throw ConfigError("entry before any [section] header", line_no);
    const std::string full = section + "." + key;
    if (!cfg.entries_.emplace(full, Entry{value, line_no}).second)
      throw ConfigError("duplicate key '" + full + "'", line_no);
  }
  return cfg;
}

Config Config::load(const std::string& path) { return parse(read_file(path)); }

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

int Config::line_of(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? -1 : it->second.line;
}

std::string Config::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second.value;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.value;
}

int64_t Config::get_int(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
  try {
    return parse_long(it->second.value, key);
  } catch (const Error& e) {
    throw ConfigError(e.what(), it->second.line);
  }
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

uint64_t Config::get_u64(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
  const std::string& v = it->second.value;
  uint64_t out = 0;
  size_t pos = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'",
                      it->second.line);
  }
  if (pos != v.size() || v[0] == '-')
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'",
                      it->second.line);
  return out;
}

double Config::get_double(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
  try {
    return parse_double(it->second.value, key);
  } catch (const Error& e) {
    throw ConfigError(e.what(), it->second.line);
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'",
                    it->second.line);
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
  std::vector<int> out;
  for (const std::string& piece : split_list(it->second.value)) {
    try {
      out.push_back(static_cast<int>(parse_long(piece, key)));
    } catch (const Error& e) {
      throw ConfigError(e.what(), it->second.line);
    }
  }
  if (out.empty())
    throw ConfigError(key + ": expected a comma-separated integer list",
                      it->second.line);
  return out;
}

void Config::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, entry] : entries_)
    if (allowed.count(key) == 0)
      throw ConfigError("unknown key '" + key + "'", entry.line);
}

void RunManifest::validate() const {
  if (command.empty()) throw InputError("manifest: command is empty");
  if (config_hash.size() != 16)
    throw InputError("manifest: config hash must be 16 hex digits");
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  m.validate();
  nlohmann::ordered_json j;
  j["schema"] = "cfrl.manifest.v1";
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["outputs"] = m.outputs;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.code_version = j.at("code_version").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace cfrl

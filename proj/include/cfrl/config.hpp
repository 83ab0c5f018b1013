#pragma once

// Line-oriented experiment configuration: UTF-8 `key = value` entries under
// `[section]` headers, addressed as "section.key". Misconfiguration must
// never silently alter an experiment, so unknown keys are hard errors and
// every diagnostic carries its 1-based line number. Also the run manifest
// written before and finalized after every command.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cfrl/errors.hpp"

namespace cfrl {

inline constexpr const char* kCodeVersion = "cfrl 0.1.0";

class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const;  // key is "section.key"
  int line_of(const std::string& key) const;  // -1 when absent

  // No-fallback forms throw ConfigError when the key is absent; all typed
  // getters throw ConfigError at the key's line on a malformed value.
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key) const;

  // Every present key must appear in `allowed`; the first violation throws
  // ConfigError naming the key and its line.
  void require_known(const std::set<std::string>& allowed) const;

  // Exact bytes the config was parsed from; hashed into manifests.
  const std::string& raw_text() const { return raw_; }

 private:
  struct Entry {
    std::string value;
    int line = -1;
  };

  std::map<std::string, Entry> entries_;
  std::string raw_;
};

// Provenance record for one command run. Timestamps are informational and
// sit outside the byte-determinism contract; everything else is a pure
// function of (config, seed).
struct RunManifest {
  std::string command;
  std::string config_hash;  // fnv1a64 of the raw config bytes, 16 hex digits
  std::string code_version = kCodeVersion;
  uint64_t seed = 0;
  std::string started_at;   // UTC, e.g. 2026-08-16T12:34:56Z
  std::string finished_at;  // empty until the run completes
  std::vector<std::string> outputs;  // paths relative to the output directory

  void validate() const;
};

std::string utc_timestamp();
std::string hash_hex(const std::string& bytes);

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest load_manifest(const std::string& path);

}  // namespace cfrl

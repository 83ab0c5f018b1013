#include "cfrl/pomdp_text.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cfrl/text.hpp"
#include "section_scan.hpp"

namespace cfrl {

using detail::RawSection;
using detail::expect_drained;
using detail::scan_sections;
using detail::take;
using detail::take_or;

namespace {

// `parents=(v1, v2) -> value` with an optional `noise=u` between.
struct Row {
  std::vector<std::string> parents;
  std::string noise;  // empty when absent
  std::string value;
};

Row parse_pomdp_row(const std::string& row, int lineno, bool wants_noise) {
  const size_t arrow = row.find("->");
  Row out;
  out.value = trim(row.substr(arrow + 2));
  if (out.value.empty()) throw ConfigError("table row missing value", lineno);
  std::string left = trim(row.substr(0, arrow));
  if (left.rfind("parents=(", 0) != 0)
    throw ConfigError("table row must start with 'parents=('", lineno);
  const size_t close = left.find(')');
  if (close == std::string::npos) throw ConfigError("table row missing ')'", lineno);
  out.parents = split_list(left.substr(9, close - 9));
  std::string rest = trim(left.substr(close + 1));
  if (wants_noise) {
    if (rest.rfind("noise=", 0) != 0)
      throw ConfigError("table row missing 'noise='", lineno);
    out.noise = trim(rest.substr(6));
    if (out.noise.empty()) throw ConfigError("table row missing noise value", lineno);
  } else if (!rest.empty()) {
    throw ConfigError("unexpected text after parent list", lineno);
  }
  return out;
}

std::vector<double> parse_prob_list(const std::string& s, int line) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      out.push_back(parse_double(tok, "probability"));
    } catch (const Error&) {
      throw ConfigError("bad probability '" + tok + "'", line);
    }
  }
  return out;
}

int index_in(const std::vector<std::string>& labels, const std::string& v,
             const char* what, int line) {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == v) return static_cast<int>(i);
  throw ConfigError(std::string("unknown ") + what + " '" + v + "'", line);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

std::string join_probs(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

PomdpSpec parse_pomdp(const std::string& text) {
  PomdpSpec p;
  TabularObs obs;
  bool saw_pomdp = false, saw_init = false, saw_tn = false, saw_trans = false;
  bool saw_on = false, saw_obs = false, saw_rewards = false;
  std::string reward_min_s, reward_max_s;
  std::vector<std::pair<int, std::string>> trans_rows, obs_rows, reward_rows;
  int trans_line = 0, obs_line = 0, reward_line = 0;

  for (RawSection& s : scan_sections(text)) {
    if (s.kind == "pomdp") {
      saw_pomdp = true;
      p.state_labels = split_list(take(s, "states"));
      p.action_labels = split_list(take(s, "actions"));
      const std::string h = take(s, "horizon");
      try {
        p.horizon = static_cast<int>(parse_long(h, "horizon"));
      } catch (const Error&) {
        throw ConfigError("bad horizon '" + h + "'", s.line);
      }
    } else if (s.kind == "init") {
      saw_init = true;
      p.init.id = "u_s";
      p.init.probs = parse_prob_list(take(s, "probs"), s.line);
    } else if (s.kind == "transition_noise") {
      saw_tn = true;
      p.trans_noise.id = "u_t";
      p.trans_noise.support = split_list(take(s, "support"));
      p.trans_noise.probs = parse_prob_list(take(s, "probs"), s.line);
    } else if (s.kind == "transitions") {
      saw_trans = true;
      trans_rows = std::move(s.rows);
      trans_line = s.line;
    } else if (s.kind == "observation_noise") {
      saw_on = true;
      obs.noise.id = "u_o";
      obs.noise.support = split_list(take(s, "support"));
      obs.noise.probs = parse_prob_list(take(s, "probs"), s.line);
    } else if (s.kind == "observations") {
      saw_obs = true;
      obs.obs_labels = split_list(take(s, "labels"));
      obs_rows = std::move(s.rows);
      obs_line = s.line;
    } else if (s.kind == "rewards") {
      saw_rewards = true;
      reward_min_s = take_or(s, "min", "");
      reward_max_s = take_or(s, "max", "");
      reward_rows = std::move(s.rows);
      reward_line = s.line;
    } else {
      throw ConfigError("unknown section [" + s.kind + "]", s.line);
    }
    if (!s.rows.empty() && s.kind != "transitions" && s.kind != "observations" &&
        s.kind != "rewards")
      throw ConfigError("section [" + s.kind + "] does not take table rows",
                        s.rows.front().first);
    expect_drained(s);
  }
  if (!saw_pomdp) throw ConfigError("missing [pomdp] section");
  if (!saw_init) throw ConfigError("missing [init] section");
  if (!saw_tn) throw ConfigError("missing [transition_noise] section");
  if (!saw_trans) throw ConfigError("missing [transitions] section");
  if (!saw_on) throw ConfigError("missing [observation_noise] section");
  if (!saw_obs) throw ConfigError("missing [observations] section");
  if (!saw_rewards) throw ConfigError("missing [rewards] section");

  p.init.support = p.state_labels;
  const size_t ns = p.state_labels.size(), na = p.action_labels.size();
  const size_t ntu = p.trans_noise.support.size();
  const size_t nou = obs.noise.support.size();

  p.trans.assign(ns * na * ntu, -1);
  for (const auto& [line, text_row] : trans_rows) {
    const Row r = parse_pomdp_row(text_row, line, true);
    if (r.parents.size() != 2)
      throw ConfigError("transition rows take (state, action)", line);
    const int s = index_in(p.state_labels, r.parents[0], "state", line);
    const int a = index_in(p.action_labels, r.parents[1], "action", line);
    const int u = index_in(p.trans_noise.support, r.noise, "noise value", line);
    const int v = index_in(p.state_labels, r.value, "state", line);
    auto& cell = p.trans[(s * na + a) * ntu + u];
    if (cell != -1) throw ConfigError("duplicate transition row", line);
    cell = v;
  }
  for (int32_t v : p.trans)
    if (v == -1) throw ConfigError("transition table is not total", trans_line);

  obs.table.assign(ns * nou, -1);
  for (const auto& [line, text_row] : obs_rows) {
    const Row r = parse_pomdp_row(text_row, line, true);
    if (r.parents.size() != 1)
      throw ConfigError("observation rows take (state)", line);
    const int s = index_in(p.state_labels, r.parents[0], "state", line);
    const int u = index_in(obs.noise.support, r.noise, "noise value", line);
    const int v = index_in(obs.obs_labels, r.value, "observation", line);
    auto& cell = obs.table[s * nou + u];
    if (cell != -1) throw ConfigError("duplicate observation row", line);
    cell = v;
  }
  for (int32_t v : obs.table)
    if (v == -1) throw ConfigError("observation table is not total", obs_line);

  p.reward.assign(ns * na, 0.0);
  std::vector<bool> seen(ns * na, false);
  for (const auto& [line, text_row] : reward_rows) {
    const Row r = parse_pomdp_row(text_row, line, false);
    if (r.parents.size() != 2)
      throw ConfigError("reward rows take (state, action)", line);
    const int s = index_in(p.state_labels, r.parents[0], "state", line);
    const int a = index_in(p.action_labels, r.parents[1], "action", line);
    double v;
    try {
      v = parse_double(r.value, "reward");
    } catch (const Error&) {
      throw ConfigError("bad reward '" + r.value + "'", line);
    }
    if (seen[s * na + a]) throw ConfigError("duplicate reward row", line);
    seen[s * na + a] = true;
    p.reward[s * na + a] = v;
  }
  for (bool b : seen)
    if (!b) throw ConfigError("reward table is not total", reward_line);

  double lo = p.reward.empty() ? 0.0 : p.reward.front();
  double hi = lo;
  for (double v : p.reward) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  try {
    p.reward_min = reward_min_s.empty() ? lo : parse_double(reward_min_s, "min");
    p.reward_max = reward_max_s.empty() ? hi : parse_double(reward_max_s, "max");
  } catch (const Error&) {
    throw ConfigError("bad reward bound", reward_line);
  }

  try {
    p.obs = std::make_shared<TabularObsModel>(std::move(obs));
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return p;
}

std::string print_pomdp(const PomdpSpec& p) {
  p.validate();
  const TabularObs* tab = p.obs->tabular();
  if (!tab)
    throw InputError("only tabular observation models have a text form");
  std::ostringstream out;
  out << "[pomdp]\n";
  out << "states = " << join(p.state_labels) << "\n";
  out << "actions = " << join(p.action_labels) << "\n";
  out << "horizon = " << p.horizon << "\n";
  out << "\n[init]\n";
  out << "probs = " << join_probs(p.init.probs) << "\n";
  out << "\n[transition_noise]\n";
  out << "support = " << join(p.trans_noise.support) << "\n";
  out << "probs = " << join_probs(p.trans_noise.probs) << "\n";
  out << "\n[transitions]\n";
  const size_t na = p.action_labels.size(), ntu = p.trans_noise.support.size();
  for (size_t s = 0; s < p.state_labels.size(); ++s)
    for (size_t a = 0; a < na; ++a)
      for (size_t u = 0; u < ntu; ++u)
        out << "parents=(" << p.state_labels[s] << ", " << p.action_labels[a]
            << ") noise=" << p.trans_noise.support[u] << " -> "
            << p.state_labels[p.next_state(static_cast<int32_t>(s),
                                           static_cast<int32_t>(a),
                                           static_cast<int32_t>(u))]
            << "\n";
  out << "\n[observation_noise]\n";
  out << "support = " << join(tab->noise.support) << "\n";
  out << "probs = " << join_probs(tab->noise.probs) << "\n";
  out << "\n[observations]\n";
  out << "labels = " << join(tab->obs_labels) << "\n";
  for (size_t s = 0; s < p.state_labels.size(); ++s)
    for (size_t u = 0; u < tab->noise.support.size(); ++u)
      out << "parents=(" << p.state_labels[s] << ") noise="
          << tab->noise.support[u] << " -> "
          << tab->obs_labels[tab->apply(static_cast<int32_t>(s),
                                        static_cast<int32_t>(u))]
          << "\n";
  out << "\n[rewards]\n";
  out << "min = " << format_double(p.reward_min) << "\n";
  out << "max = " << format_double(p.reward_max) << "\n";
  for (size_t s = 0; s < p.state_labels.size(); ++s)
    for (size_t a = 0; a < na; ++a)
      out << "parents=(" << p.state_labels[s] << ", " << p.action_labels[a]
          << ") -> "
          << format_double(p.r(static_cast<int32_t>(s), static_cast<int32_t>(a)))
          << "\n";
  return out.str();
}

PomdpSpec load_pomdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pomdp(buf.str());
}

void save_pomdp(const PomdpSpec& pomdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << print_pomdp(pomdp);
  if (!out) throw InputError("failed writing '" + path + "'");
}

TabularPolicy parse_policy(const std::string& text) {
  TabularPolicy p;
  bool saw_actions = false;
  std::map<std::string, std::map<int, double>> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq != std::string::npos) {
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      try {
        if (key == "actions") {
          p.num_actions = static_cast<int>(parse_long(value, key));
          saw_actions = true;
        } else if (key == "k") {
          p.feat.k = static_cast<int>(parse_long(value, key));
        } else if (key == "include_rewards") {
          const long v = parse_long(value, key);
          if (v != 0 && v != 1) throw InputError("not a flag");
          p.feat.include_rewards = v == 1;
        } else {
          throw ConfigError("unknown policy header '" + key + "'", lineno);
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const Error&) {
        throw ConfigError("bad value for '" + key + "'", lineno);
      }
      continue;
    }
    const auto tokens = split_ws(t);
    if (tokens.size() != 3)
      throw ConfigError("expected 'key action logit'", lineno);
    long action;
    double logit;
    try {
      action = parse_long(tokens[1], "action index");
      logit = parse_double(tokens[2], "logit");
    } catch (const Error&) {
      throw ConfigError("bad policy row", lineno);
    }
    if (!saw_actions) throw ConfigError("'actions = N' must precede rows", lineno);
    if (action < 0 || action >= p.num_actions)
      throw ConfigError("action index out of range", lineno);
    if (!rows[tokens[0]].emplace(static_cast<int>(action), logit).second)
      throw ConfigError("duplicate row for key '" + tokens[0] + "'", lineno);
  }
  if (!saw_actions) throw ConfigError("missing 'actions = N' header");
  try {
    for (auto& [key, by_action] : rows) {
      if (static_cast<int>(by_action.size()) != p.num_actions)
        throw InputError("key '" + key + "' does not cover every action");
      std::vector<double> row(p.num_actions);
      for (const auto& [a, l] : by_action) row[a] = l;
      p.set_logits(key, std::move(row));
    }
    p.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return p;
}

std::string print_policy(const TabularPolicy& p) {
  p.validate();
  std::ostringstream out;
  out << "actions = " << p.num_actions << "\n";
  out << "k = " << p.feat.k << "\n";
  out << "include_rewards = " << (p.feat.include_rewards ? 1 : 0) << "\n";
  for (const auto& [key, row] : p.logits)
    for (size_t a = 0; a < row.size(); ++a)
      out << key << " " << a << " " << format_double(row[a]) << "\n";
  return out.str();
}

TabularPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_policy(buf.str());
}

void save_policy(const TabularPolicy& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << print_policy(policy);
  if (!out) throw InputError("failed writing '" + path + "'");
}

}  // namespace cfrl

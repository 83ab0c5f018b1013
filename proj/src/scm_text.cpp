#include "cfrl/scm_text.hpp"

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

namespace {

// `parents=(v1,v2) noise=u -> value`
struct TableRow {
  std::vector<std::string> parent_values;
  std::string noise_value;
  std::string value;
};

TableRow parse_row(const std::string& row, int lineno) {
  const size_t arrow = row.find("->");
  TableRow out;
  out.value = trim(row.substr(arrow + 2));
  if (out.value.empty()) throw ConfigError("table row missing value", lineno);

  std::string left = trim(row.substr(0, arrow));
  if (left.rfind("parents=(", 0) != 0)
    throw ConfigError("table row must start with 'parents=('", lineno);
  const size_t close = left.find(')');
  if (close == std::string::npos)
    throw ConfigError("table row missing ')'", lineno);
  out.parent_values = split_list(left.substr(9, close - 9));

  std::string rest = trim(left.substr(close + 1));
  if (rest.rfind("noise=", 0) != 0)
    throw ConfigError("table row missing 'noise='", lineno);
  out.noise_value = trim(rest.substr(6));
  if (out.noise_value.empty()) throw ConfigError("table row missing noise value", lineno);
  return out;
}

}  // namespace

Scm parse_scm(const std::string& text) {
  std::vector<NodeDef> nodes;
  std::vector<NoiseSpec> noise;
  struct PendingMechanism {
    Mechanism mech;
    std::vector<std::pair<int, std::string>> rows;
    int line;
  };
  std::vector<PendingMechanism> mechs;

  for (RawSection& s : scan_sections(text)) {
    if (s.kind == "node") {
      if (!s.rows.empty())
        throw ConfigError("table row outside [mechanism]", s.rows.front().first);
      NodeDef nd;
      nd.id = take(s, "id");
      nd.domain = split_list(take(s, "domain"));
      expect_drained(s);
      nodes.push_back(std::move(nd));
    } else if (s.kind == "noise") {
      if (!s.rows.empty())
        throw ConfigError("table row outside [mechanism]", s.rows.front().first);
      NoiseSpec ns;
      ns.id = take(s, "id");
      ns.support = split_list(take(s, "support"));
      for (const std::string& p : split_list(take(s, "probs")))
        ns.probs.push_back(parse_double(p, "noise " + ns.id + " probs"));
      expect_drained(s);
      noise.push_back(std::move(ns));
    } else if (s.kind == "mechanism") {
      PendingMechanism pm;
      pm.line = s.line;
      pm.mech.node = take(s, "node");
      std::string parents = take(s, "parents");
      if (parents.size() < 2 || parents.front() != '(' || parents.back() != ')')
        throw ConfigError("mechanism parents must be parenthesized", s.line);
      pm.mech.parents = split_list(parents.substr(1, parents.size() - 2));
      pm.mech.noise = take(s, "noise");
      expect_drained(s);
      pm.rows = std::move(s.rows);
      mechs.push_back(std::move(pm));
    } else {
      throw ConfigError("unknown section [" + s.kind + "]", s.line);
    }
  }

  // Resolve tables: every (parent combo, noise value) must appear exactly once.
  std::map<std::string, const NodeDef*> node_by_id;
  for (const NodeDef& nd : nodes) node_by_id[nd.id] = &nd;
  std::map<std::string, const NoiseSpec*> noise_by_id;
  for (const NoiseSpec& ns : noise) noise_by_id[ns.id] = &ns;

  std::vector<Mechanism> resolved;
  for (PendingMechanism& pm : mechs) {
    auto node_it = node_by_id.find(pm.mech.node);
    if (node_it == node_by_id.end())
      throw ConfigError("mechanism for unknown node " + pm.mech.node, pm.line);
    auto noise_it = noise_by_id.find(pm.mech.noise);
    if (noise_it == noise_by_id.end())
      throw ConfigError("mechanism references unknown noise " + pm.mech.noise, pm.line);
    const NoiseSpec& ns = *noise_it->second;

    std::vector<const NodeDef*> parents;
    uint64_t rows = 1;
    for (const std::string& p : pm.mech.parents) {
      auto it = node_by_id.find(p);
      if (it == node_by_id.end())
        throw ConfigError("mechanism parent is not a node: " + p, pm.line);
      parents.push_back(it->second);
      rows *= it->second->domain.size();
    }
    pm.mech.table.assign(rows * ns.support.size(), -1);

    for (const auto& [lineno, row_text] : pm.rows) {
      const TableRow row = parse_row(row_text, lineno);
      if (row.parent_values.size() != parents.size())
        throw ConfigError("table row arity mismatch for node " + pm.mech.node, lineno);
      uint64_t flat = 0;
      for (size_t k = 0; k < parents.size(); ++k) {
        int idx = -1;
        try {
          idx = parents[k]->index_of(row.parent_values[k]);
        } catch (const InputError& e) {
          throw ConfigError(e.what(), lineno);
        }
        flat = flat * parents[k]->domain.size() + idx;
      }
      int uidx = -1, vidx = -1;
      try {
        uidx = ns.index_of(row.noise_value);
        vidx = node_it->second->index_of(row.value);
      } catch (const InputError& e) {
        throw ConfigError(e.what(), lineno);
      }
      flat = flat * ns.support.size() + uidx;
      if (pm.mech.table[flat] != -1)
        throw ConfigError("duplicate table row for node " + pm.mech.node, lineno);
      pm.mech.table[flat] = vidx;
    }
    for (size_t i = 0; i < pm.mech.table.size(); ++i)
      if (pm.mech.table[i] == -1)
        throw ConfigError("mechanism table for node " + pm.mech.node +
                              " is not total: missing row " + std::to_string(i),
                          pm.line);
    resolved.push_back(std::move(pm.mech));
  }

  try {
    return Scm(std::move(nodes), std::move(noise), std::move(resolved));
  } catch (const ConstructionError& e) {
    throw ConfigError(e.what());
  }
}

Scm load_scm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scm(buf.str());
}

std::string print_scm(const Scm& scm) {
  std::ostringstream out;
  for (int i = 0; i < scm.num_nodes(); ++i) {
    const NodeDef& nd = scm.node(i);
    out << "[node]\nid = " << nd.id << "\ndomain = ";
    for (size_t j = 0; j < nd.domain.size(); ++j)
      out << (j ? ", " : "") << nd.domain[j];
    out << "\n\n";
  }
  for (int i = 0; i < scm.num_nodes(); ++i) {
    const NoiseSpec& ns = scm.noise_spec(i);
    out << "[noise]\nid = " << ns.id << "\nsupport = ";
    for (size_t j = 0; j < ns.support.size(); ++j)
      out << (j ? ", " : "") << ns.support[j];
    out << "\nprobs = ";
    for (size_t j = 0; j < ns.probs.size(); ++j)
      out << (j ? ", " : "") << format_double(ns.probs[j]);
    out << "\n\n";
  }
  for (int i = 0; i < scm.num_nodes(); ++i) {
    const Mechanism& m = scm.mechanism(i);
    const NoiseSpec& ns = scm.noise_spec(i);
    out << "[mechanism]\nnode = " << m.node << "\nparents = (";
    for (size_t j = 0; j < m.parents.size(); ++j)
      out << (j ? ", " : "") << m.parents[j];
    out << ")\nnoise = " << m.noise << "\n";

    std::vector<size_t> parent_size;
    std::vector<const NodeDef*> parents;
    for (const std::string& p : m.parents) {
      parents.push_back(&scm.node(scm.node_index(p)));
      parent_size.push_back(parents.back()->domain.size());
    }
    const size_t u_size = ns.support.size();
    for (size_t flat = 0; flat < m.table.size(); ++flat) {
      size_t rest = flat;
      const size_t u = rest % u_size;
      rest /= u_size;
      std::vector<size_t> pv(parents.size(), 0);
      for (size_t k = parents.size(); k-- > 0;) {
        pv[k] = rest % parent_size[k];
        rest /= parent_size[k];
      }
      out << "parents=(";
      for (size_t k = 0; k < parents.size(); ++k)
        out << (k ? "," : "") << parents[k]->domain[pv[k]];
      out << ") noise=" << ns.support[u] << " -> "
          << scm.node(i).domain[m.table[flat]] << "\n";
    }
    out << "\n";
  }
  return out.str();
}

void save_scm(const Scm& scm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << print_scm(scm);
}

}  // namespace cfrl

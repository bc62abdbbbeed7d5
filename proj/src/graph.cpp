#include "qgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "qgraph/io.hpp"

namespace qgraph {

int GraphSpec::bond_between(int a, int b) const {
  if (a == b) return -1;
  const int hi = std::max(a, b), lo = std::min(a, b);
  for (int i = 0; i < num_bonds(); ++i) {
    if (bonds[i].first == hi && bonds[i].second == lo) return i;
  }
  return -1;
}

std::vector<int> GraphSpec::neighbors(int v) const {
  std::vector<int> out;
  for (const auto& [a, b] : bonds) {
    if (a == v) out.push_back(b);
    if (b == v) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

int GraphSpec::degree(int v) const {
  int d = 0;
  for (const auto& [a, b] : bonds) d += (a == v) + (b == v);
  return d;
}

int GraphSpec::lead_channel(int v) const {
  for (int c = 0; c < num_leads(); ++c) {
    if (leads[c] == v) return c;
  }
  return -1;
}

void GraphSpec::validate() const {
  if (num_vertices < 2) throw std::invalid_argument("graph: num_vertices must be >= 2");
  if (bonds.size() != lengths.size())
    throw std::invalid_argument("graph: bonds and lengths differ in size");
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : bonds) {
    if (a <= b || b < 0 || a >= num_vertices)
      throw std::invalid_argument("graph: bond endpoints must satisfy 0 <= beta < alpha < V");
    if (!seen.insert({a, b}).second)
      throw std::invalid_argument("graph: duplicate bond");
  }
  for (double l : lengths) {
    if (!(l > 0.0) || !std::isfinite(l))
      throw std::invalid_argument("graph: lengths must be positive and finite");
  }
  std::set<int> lead_set;
  for (int v : leads) {
    if (v < 0 || v >= num_vertices)
      throw std::invalid_argument("graph: lead vertex out of range");
    if (!lead_set.insert(v).second)
      throw std::invalid_argument("graph: lead vertices must be distinct");
  }
  if (num_leads() > num_vertices)
    throw std::invalid_argument("graph: more leads than vertices");
}

// ---- directed-bond indexing ----

int directed_index(const GraphSpec& g, const DirectedBond& d) {
  if (d.bond < 0 || d.bond >= g.num_bonds())
    throw std::invalid_argument("directed_index: bond out of range");
  if (d.sign != +1 && d.sign != -1)
    throw std::invalid_argument("directed_index: sign must be +1 or -1");
  return d.sign > 0 ? d.bond : d.bond + g.num_bonds();
}

DirectedBond directed_bond(const GraphSpec& g, int index) {
  const int n = g.num_directed();
  if (index < 0 || index >= n)
    throw std::invalid_argument("directed_bond: index out of range");
  const int b = g.num_bonds();
  return index < b ? DirectedBond{index, +1} : DirectedBond{index - b, -1};
}

int directed_index(const GraphSpec& g, int from, int to) {
  const int b = g.bond_between(from, to);
  if (b < 0) throw std::invalid_argument("directed_index: no bond between vertices");
  return from > to ? b : b + g.num_bonds();
}

int flip_directed(const GraphSpec& g, int index) {
  const DirectedBond d = directed_bond(g, index);
  return directed_index(g, DirectedBond{d.bond, -d.sign});
}

int directed_tail(const GraphSpec& g, int index) {
  const DirectedBond d = directed_bond(g, index);
  const auto& [a, b] = g.bonds[d.bond];
  return d.sign > 0 ? a : b;
}

int directed_head(const GraphSpec& g, int index) {
  const DirectedBond d = directed_bond(g, index);
  const auto& [a, b] = g.bonds[d.bond];
  return d.sign > 0 ? b : a;
}

// ---- construction & derived quantities ----

GraphSpec build_graph(int v, int lambda, std::pair<double, double> length_range,
                      std::uint64_t seed) {
  if (v < 2) throw std::invalid_argument("build_graph: need at least 2 vertices");
  if (lambda < 1 || lambda > v)
    throw std::invalid_argument("build_graph: need 1 <= lambda <= v");
  const auto [lo, hi] = length_range;
  if (!(lo > 0.0) || !(lo <= hi))
    throw std::invalid_argument("build_graph: need 0 < L_min <= L_max");

  GraphSpec g;
  g.num_vertices = v;
  g.rng_seed = seed;
  for (int a = 1; a < v; ++a) {
    for (int b = 0; b < a; ++b) g.bonds.emplace_back(a, b);
  }
  // Redraw the whole set in the (probability-zero) event of a collision so
  // the result is still a pure function of the seed.
  for (std::uint64_t attempt = 0;; ++attempt) {
    Stream st(seed, attempt, /*salt=*/0x6c656e31ULL);
    g.lengths.clear();
    for (std::size_t i = 0; i < g.bonds.size(); ++i)
      g.lengths.push_back(lo == hi ? lo : st.uniform(lo, hi));
    if (lo == hi || lengths_distinct(g)) break;
  }
  for (int c = 0; c < lambda; ++c) g.leads.push_back(c);
  g.validate();
  return g;
}

double mean_level_density(const GraphSpec& g) {
  double sum = 0.0;
  for (double l : g.lengths) sum += l;
  return sum / kPi;
}

bool lengths_distinct(const GraphSpec& g) {
  std::set<double> s(g.lengths.begin(), g.lengths.end());
  return s.size() == g.lengths.size();
}

double length_ratio(const GraphSpec& g) {
  if (g.lengths.empty()) throw std::invalid_argument("length_ratio: no bonds");
  const auto [mn, mx] = std::minmax_element(g.lengths.begin(), g.lengths.end());
  return *mx / *mn;
}

// ---- serialization ----

nlohmann::json to_json(const GraphSpec& g) {
  nlohmann::json j;
  j["num_vertices"] = g.num_vertices;
  auto& jb = j["bonds"] = nlohmann::json::array();
  for (const auto& [a, b] : g.bonds) jb.push_back({a, b});
  auto& jl = j["lengths"] = nlohmann::json::array();
  auto& jh = j["lengths_hex"] = nlohmann::json::array();
  for (double l : g.lengths) {
    jl.push_back(l);
    jh.push_back(hex_encode(l));
  }
  j["leads"] = g.leads;
  j["rng_seed"] = g.rng_seed;
  return j;
}

GraphSpec graph_from_json(const nlohmann::json& j) {
  GraphSpec g;
  g.num_vertices = j.at("num_vertices").get<int>();
  for (const auto& jb : j.at("bonds"))
    g.bonds.emplace_back(jb.at(0).get<int>(), jb.at(1).get<int>());
  if (j.contains("lengths_hex")) {
    for (const auto& jh : j.at("lengths_hex"))
      g.lengths.push_back(hex_decode(jh.get<std::string>()));
  } else {
    for (const auto& jl : j.at("lengths")) g.lengths.push_back(jl.get<double>());
  }
  g.leads = j.at("leads").get<std::vector<int>>();
  g.rng_seed = j.value("rng_seed", std::uint64_t{0});
  g.validate();
  return g;
}

}  // namespace qgraph

#pragma once

// Metric-graph topology: vertices, undirected bonds with lengths, leads
// (open scattering channels), and the directed-bond index space used by the
// bond-propagator module.
//
// Directed-bond convention (fixed for this repo): bonds are the pairs
// (alpha, beta) with alpha > beta, listed in ascending lexicographic order.
// Direction + means propagation from alpha toward beta; direction - is the
// reverse.  Linear index: bond b in direction + maps to b, direction - maps
// to b + B.  This convention is self-consistent; the unitarity/symmetry
// tests downstream are the arbiter.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qgraph/rng.hpp"
#include "qgraph/types.hpp"

#include <json.hpp>

namespace qgraph {

struct GraphSpec {
  int num_vertices = 0;
  std::vector<std::pair<int, int>> bonds;  // (alpha, beta), alpha > beta
  std::vector<double> lengths;             // L_b per bond, same order
  std::vector<int> leads;                  // channel index -> vertex
  std::uint64_t rng_seed = 0;

  int num_bonds() const { return static_cast<int>(bonds.size()); }
  int num_directed() const { return 2 * num_bonds(); }
  int num_leads() const { return static_cast<int>(leads.size()); }

  // Index of the bond joining a and b, or -1 if absent.
  int bond_between(int a, int b) const;
  // Neighbors of v in ascending order.
  std::vector<int> neighbors(int v) const;
  int degree(int v) const;
  // Channel index carried by vertex v, or -1 if v has no lead.
  int lead_channel(int v) const;

  // Structural validation; throws std::invalid_argument on violation.
  void validate() const;
};

// ---- directed-bond indexing ----

struct DirectedBond {
  int bond = 0;  // 0..B-1
  int sign = +1; // +1: alpha -> beta (alpha > beta), -1: beta -> alpha
};

int directed_index(const GraphSpec& g, const DirectedBond& d);
DirectedBond directed_bond(const GraphSpec& g, int index);
// Directed index of the bond from `from` toward `to`; bond must exist.
int directed_index(const GraphSpec& g, int from, int to);
int flip_directed(const GraphSpec& g, int index);
int directed_tail(const GraphSpec& g, int index);  // vertex of departure
int directed_head(const GraphSpec& g, int index);  // vertex of arrival

// ---- construction & derived quantities ----

// Complete graph on v vertices, leads on vertices 0..lambda-1, lengths drawn
// i.i.d. uniform on [length_range.first, length_range.second] from the
// seeded generator.  Deterministic given seed; lengths pairwise distinct.
GraphSpec build_graph(int v, int lambda, std::pair<double, double> length_range,
                      std::uint64_t seed);

// Mean resonance-level density: (1/pi) * sum_b L_b.
double mean_level_density(const GraphSpec& g);

// True when all lengths are pairwise distinct (incommensurability proxy).
bool lengths_distinct(const GraphSpec& g);
// max length / min length.
double length_ratio(const GraphSpec& g);

// ---- serialization ----
// Lengths are stored both as decimal (informative) and as hex floats
// (authoritative) so replay round-trips binary64 values exactly.

nlohmann::json to_json(const GraphSpec& g);
GraphSpec graph_from_json(const nlohmann::json& j);

}  // namespace qgraph

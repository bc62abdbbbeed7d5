#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "qgraph/graph.hpp"

using namespace qgraph;

TEST_CASE("smallest graph: two vertices, one bond, both lead-bearing") {
  const GraphSpec g = build_graph(2, 2, {1.0, 1.0}, 99);
  CHECK(g.num_bonds() == 1);
  CHECK(g.num_directed() == 2);
  CHECK(g.num_leads() == 2);
  CHECK(g.bonds[0] == std::pair<int, int>{1, 0});
  CHECK(g.lengths[0] == 1.0);
  CHECK(g.lead_channel(0) == 0);
  CHECK(g.lead_channel(1) == 1);
}

TEST_CASE("complete graph bond count") {
  const GraphSpec g = build_graph(5, 2, {1.0, 2.0}, 7);
  CHECK(g.num_bonds() == 10);
  CHECK(g.num_directed() == 20);
  for (int v = 0; v < 5; ++v) CHECK(g.degree(v) == 4);
  CHECK(g.lead_channel(2) == -1);
}

TEST_CASE("same seed reproduces lengths bit-for-bit") {
  const GraphSpec a = build_graph(8, 3, {1.0, 2.0}, 0xABCDEF);
  const GraphSpec b = build_graph(8, 3, {1.0, 2.0}, 0xABCDEF);
  REQUIRE(a.lengths.size() == b.lengths.size());
  for (std::size_t i = 0; i < a.lengths.size(); ++i)
    CHECK(a.lengths[i] == b.lengths[i]);
  const GraphSpec c = build_graph(8, 3, {1.0, 2.0}, 0xABCDF0);
  CHECK(a.lengths != c.lengths);
}

TEST_CASE("lengths stay in range, distinct, ratio bounded") {
  const GraphSpec g = build_graph(30, 5, {1.0, 2.0}, 2026);
  for (double l : g.lengths) {
    CHECK(l >= 1.0);
    CHECK(l <= 2.0);
  }
  CHECK(lengths_distinct(g));
  CHECK(length_ratio(g) <= 2.0);
}

TEST_CASE("mean level density") {
  GraphSpec g;
  g.num_vertices = 2;
  g.bonds = {{1, 0}};
  g.lengths = {3.14159265358979323846};
  g.leads = {0};
  CHECK(mean_level_density(g) == doctest::Approx(1.0).epsilon(1e-15));

  // 10 bonds of unit length: complete graph on 5 vertices.
  GraphSpec h = build_graph(5, 1, {1.0, 1.0}, 1);
  CHECK(mean_level_density(h) ==
        doctest::Approx(10.0 / 3.14159265358979323846).epsilon(1e-15));

  // Doubling all lengths doubles the density.
  GraphSpec h2 = h;
  for (double& l : h2.lengths) l *= 2.0;
  CHECK(mean_level_density(h2) ==
        doctest::Approx(2.0 * mean_level_density(h)).epsilon(1e-15));
}

TEST_CASE("mean level density is invariant under bond relabeling") {
  GraphSpec g = build_graph(5, 2, {1.0, 2.0}, 77);
  GraphSpec p = g;
  std::reverse(p.bonds.begin(), p.bonds.end());
  std::reverse(p.lengths.begin(), p.lengths.end());
  CHECK(mean_level_density(p) == doctest::Approx(mean_level_density(g)).epsilon(1e-15));
}

TEST_CASE("directed index space is a bijection with involutive flip") {
  const GraphSpec g = build_graph(6, 2, {1.0, 2.0}, 5);
  std::set<int> seen;
  for (int b = 0; b < g.num_bonds(); ++b) {
    for (int sign : {+1, -1}) {
      const int idx = directed_index(g, DirectedBond{b, sign});
      CHECK(idx >= 0);
      CHECK(idx < g.num_directed());
      seen.insert(idx);
      const DirectedBond back = directed_bond(g, idx);
      CHECK(back.bond == b);
      CHECK(back.sign == sign);
      CHECK(flip_directed(g, flip_directed(g, idx)) == idx);
    }
  }
  CHECK(static_cast<int>(seen.size()) == g.num_directed());
}

TEST_CASE("directed tail and head follow the propagation sense") {
  const GraphSpec g = build_graph(4, 1, {1.0, 2.0}, 3);
  for (int idx = 0; idx < g.num_directed(); ++idx) {
    const int tail = directed_tail(g, idx);
    const int head = directed_head(g, idx);
    CHECK(tail != head);
    CHECK(directed_index(g, tail, head) == idx);
    CHECK(directed_index(g, head, tail) == flip_directed(g, idx));
  }
}

TEST_CASE("json round trip preserves lengths exactly") {
  const GraphSpec g = build_graph(7, 3, {1.0, 2.0}, 0x5EED);
  const nlohmann::json j = to_json(g);
  const GraphSpec back = graph_from_json(j);
  CHECK(back.num_vertices == g.num_vertices);
  CHECK(back.bonds == g.bonds);
  CHECK(back.leads == g.leads);
  CHECK(back.rng_seed == g.rng_seed);
  REQUIRE(back.lengths.size() == g.lengths.size());
  for (std::size_t i = 0; i < g.lengths.size(); ++i)
    CHECK(back.lengths[i] == g.lengths[i]);  // bitwise, via hex encoding
}

TEST_CASE("validation rejects malformed specs") {
  GraphSpec g = build_graph(3, 1, {1.0, 2.0}, 1);
  CHECK_NOTHROW(g.validate());

  GraphSpec dup = g;
  dup.bonds.push_back(dup.bonds[0]);
  dup.lengths.push_back(1.5);
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  GraphSpec bad_lead = g;
  bad_lead.leads = {5};
  CHECK_THROWS_AS(bad_lead.validate(), std::invalid_argument);

  GraphSpec bad_len = g;
  bad_len.lengths[0] = -1.0;
  CHECK_THROWS_AS(bad_len.validate(), std::invalid_argument);

  CHECK_THROWS_AS(build_graph(1, 1, {1.0, 2.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_graph(3, 4, {1.0, 2.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_graph(3, 1, {2.0, 1.0}, 1), std::invalid_argument);
}

#include <doctest.h>

#include <cmath>
#include <complex>

#include "qgraph/correlator.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/rng.hpp"
#include "qgraph/system.hpp"
#include "qgraph/vertex.hpp"

using namespace qgraph;

namespace {

// Reference system used across cases: complete graph, canonical lead
// vertices, Kirchhoff interior.
ScatteringSystem make_system(int v, int lambda, const VecR& t,
                             std::uint64_t seed) {
  const GraphSpec g = build_graph(v, lambda, {1.0, 2.0}, seed);
  std::vector<VertexMatrix> vs;
  for (int i = 0; i < v; ++i) {
    const int chan = g.lead_channel(i);
    const int total = g.degree(i) + (chan >= 0 ? 1 : 0);
    if (chan >= 0) {
      vs.push_back(build_canonical_vertex(total, t(chan), VecR(),
                                          mix_seed(seed, i, 0), i));
    } else {
      vs.push_back(build_kirchhoff_vertex(total, false, i));
    }
  }
  return assemble_system(g, vs);
}

double unit_residual(const MatC& s) {
  return (s.adjoint() * s - MatC::Identity(s.rows(), s.cols()))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("two-vertex graph: S is the phase swap") {
  const GraphSpec g = build_graph(2, 2, {1.5, 1.5}, 3);
  std::vector<VertexMatrix> vs;
  vs.push_back(build_canonical_vertex(2, 1.0, VecR(), 9, 0));
  vs.push_back(build_canonical_vertex(2, 1.0, VecR(), 10, 1));
  const ScatteringSystem sys = assemble_system(g, vs);

  // single bond: the bond scattering matrix is empty of backscatter
  CHECK(sys.sigma_b.rows() == 2);
  CHECK(sys.sigma_b.cwiseAbs().maxCoeff() < 1e-14);

  VecR phases(1);
  phases << 0.9;
  const double kappa = 0.4;
  const SMatrixSample smp = evaluate_s(sys, phases, kappa);
  const cplx expect = std::exp(kI * (0.9 + kappa * 1.5));
  CHECK(std::abs(smp.s(0, 0)) < 1e-14);
  CHECK(std::abs(smp.s(1, 1)) < 1e-14);
  CHECK(std::abs(smp.s(0, 1) - expect) < 1e-13);
  CHECK(std::abs(smp.s(1, 0) - expect) < 1e-13);
}

TEST_CASE("closed triangle of pass-through vertices: permutation bond matrix") {
  GraphSpec tri;
  tri.num_vertices = 3;
  tri.bonds = {{1, 0}, {2, 0}, {2, 1}};
  tri.lengths = {1.0, 1.3, 1.7};
  tri.validate();
  std::vector<VertexMatrix> vs;
  for (int v = 0; v < 3; ++v) vs.push_back(build_kirchhoff_vertex(2, false, v));
  const ScatteringSystem sys = assemble_system(tri, vs);

  REQUIRE(sys.sigma_b.rows() == 6);
  for (int j = 0; j < 6; ++j) {
    int nonzero = 0;
    for (int i = 0; i < 6; ++i) {
      const double a = std::abs(sys.sigma_b(i, j));
      if (a > 1e-14) {
        ++nonzero;
        CHECK(a == doctest::Approx(1.0).epsilon(1e-14));
        // perfect transmission never backscatters
        CHECK(i != sys.flip[j]);
      }
    }
    CHECK(nonzero == 1);
  }

  const ClassicalSpectrum cs = classical_map_gap(sys);
  CHECK(std::abs(cs.gap) <= 1e-12);
  for (int i = 0; i < cs.spectrum.size(); ++i)
    CHECK(std::abs(std::abs(cs.spectrum(i)) - 1.0) < 1e-12);
}

TEST_CASE("bond gram spectrum exposes the per-channel unitarity deficit") {
  VecR t(2);
  t << 0.8, 0.5;
  const ScatteringSystem sys = make_system(6, 2, t, 0xD5);
  const int n = sys.num_directed();
  Eigen::SelfAdjointEigenSolver<MatC> es(sys.sigma_b * sys.sigma_b.adjoint());
  const VecR ev = es.eigenvalues();  // ascending
  REQUIRE(ev.size() == n);
  CHECK(ev(0) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(ev(1) == doctest::Approx(0.5).epsilon(1e-9));
  for (int i = 2; i < n; ++i) CHECK(ev(i) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("resolvent and inverse-propagator forms agree") {
  VecR t(2);
  t << 0.9, 0.4;
  const ScatteringSystem sys = make_system(5, 2, t, 0xAB);
  Stream st(0xAB, 4, 0);
  const VecR phases = sample_phases(sys.graph, st);
  const double offset = 0.73;
  const SMatrixSample smp = evaluate_s(sys, phases, offset);

  // Independent evaluation: S = diag(rho) + (T R) (D^{-1} - Sigma_B)^{-1} T^t
  const int n = sys.num_directed();
  VecC dinv(n);
  for (int i = 0; i < n; ++i) {
    const int b = i % sys.graph.num_bonds();
    dinv(i) = std::exp(-kI * (phases(b) + offset * sys.lengths_directed(i)));
  }
  MatC core = MatC::Zero(n, n);
  core.diagonal() = dinv;
  core -= sys.sigma_b;
  const MatC inner = core.lu().solve(sys.coupling.transpose());
  MatC s = sys.coupling_arrive * inner;
  s.diagonal() += sys.rho_diag;
  CHECK((s - smp.s).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("low-rank fast path equals the dense reference") {
  VecR t(3);
  t << 1.0, 0.6, 0.25;
  const ScatteringSystem sys = make_system(7, 3, t, 0xFA);
  REQUIRE(sys.has_low_rank);
  for (int trial = 0; trial < 5; ++trial) {
    Stream st(0xFA, 100 + trial, 0);
    const VecR phases = sample_phases(sys.graph, st);
    const double offset = st.uniform(0.0, 5.0);
    const SMatrixSample dense = evaluate_s(sys, phases, offset);
    MatC fl = dense.s;
    fl.diagonal() -= sys.rho_diag;
    const MatC fast = evaluate_sfl_fast(sys, phases, offset);
    CHECK((fast - fl).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("sampled S-matrices are unitary and symmetric") {
  VecR t(2);
  t << 0.7, 0.3;
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const ScatteringSystem sys = make_system(6, 2, t, seed);
    Stream st(seed, 7, 0);
    const VecR phases = sample_phases(sys.graph, st);
    const SMatrixSample smp = evaluate_s(sys, phases, st.uniform(0.0, 3.0));
    CHECK(unit_residual(smp.s) < 1e-12);  // small graphs: tight bound
    CHECK((smp.s - smp.s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("trajectory expansion: exact at zeroth order when no interior") {
  const GraphSpec g = build_graph(2, 2, {1.0, 1.0}, 5);
  std::vector<VertexMatrix> vs;
  vs.push_back(build_canonical_vertex(2, 1.0, VecR(), 1, 0));
  vs.push_back(build_canonical_vertex(2, 1.0, VecR(), 2, 1));
  const ScatteringSystem sys = assemble_system(g, vs);
  VecR phases(1);
  phases << 1.1;
  const TrajectoryResult tr = trajectory_sum(sys, phases, 0.0, 0);
  CHECK(tr.residual < 1e-13);
  CHECK(!tr.diverged);
}

TEST_CASE("trajectory expansion converges geometrically at the map radius") {
  VecR t(2);
  t << 0.7, 0.7;
  const ScatteringSystem sys = make_system(5, 2, t, 0x77);

  // Most phase draws leave the slowest interior mode within ~1e-3 of the
  // unit circle, where millions of terms would be needed.  Scan draws for a
  // moderate radius and size the term count from the one we pick.
  VecR phases;
  double radius = 1.0;
  for (std::uint64_t draw = 0; draw < 40; ++draw) {
    Stream st(0x77, draw, 1);
    const VecR candidate = sample_phases(sys.graph, st);
    const double r = trajectory_sum(sys, candidate, 0.0, 0).spectral_radius;
    if (r <= 0.998) {
      phases = candidate;
      radius = r;
      break;
    }
  }
  REQUIRE(phases.size() > 0);
  const int n_max =
      std::min(20000, static_cast<int>(std::ceil(25.0 / (1.0 - radius))));
  const TrajectoryResult tr = trajectory_sum(sys, phases, 0.0, n_max);
  CHECK(!tr.diverged);
  CHECK(tr.residual < 1e-8);
  CHECK(tr.spectral_radius > 0.0);
  CHECK(tr.spectral_radius < 1.0);

  // Measured decay ratio between distant terms tracks the spectral radius.
  int last = 0;
  for (int n = 0; n < tr.residual_history.size(); ++n)
    if (tr.residual_history(n) > 1e-12) last = n;
  const int first = last / 2;
  REQUIRE(last - first >= 4);
  const double ratio = std::pow(
      tr.residual_history(last) / tr.residual_history(first),
      1.0 / static_cast<double>(last - first));
  CHECK(std::abs(ratio - tr.spectral_radius) < 0.05);
}

TEST_CASE("fully reflecting channels: unitary interior map, no decay") {
  VecR t(2);
  t << 0.0, 0.0;
  const ScatteringSystem sys = make_system(5, 2, t, 0x99);
  // Generic phases keep the exact solve regular; the interior map is still
  // unitary, so the expansion cannot decay.
  Stream st(0x99, 3, 1);
  const VecR phases = sample_phases(sys.graph, st);
  const TrajectoryResult tr = trajectory_sum(sys, phases, 0.9, 40);
  CHECK(tr.diverged);
  CHECK(tr.spectral_radius >= 1.0 - 1e-6);
}

TEST_CASE("classical map depends only on bond-amplitude moduli") {
  VecR t(2);
  t << 0.6, 0.6;
  const ScatteringSystem sys = make_system(5, 2, t, 0x31);
  const ClassicalSpectrum base = classical_map_gap(sys);

  ScatteringSystem phased = sys;
  Stream st(0x31, 9, 9);
  for (int j = 0; j < phased.sigma_b.cols(); ++j)
    for (int i = 0; i < phased.sigma_b.rows(); ++i)
      phased.sigma_b(i, j) *= std::exp(kI * st.uniform(0.0, 2.0 * kPi));
  const ClassicalSpectrum mod = classical_map_gap(phased);
  CHECK(mod.gap == doctest::Approx(base.gap).epsilon(1e-12));
}

TEST_CASE("internal lead-vertex phase does not move observable statistics") {
  // Free parameter in the lead-vertex family: results with phi_1 = 0.7 match
  // phi_1 = 0 within combined statistical error.
  const std::uint64_t seed = 0x2F2F;
  auto build = [&](double phi1) {
    const GraphSpec g = build_graph(4, 2, {1.0, 2.0}, 17);
    std::vector<VertexMatrix> vs;
    for (int i = 0; i < 4; ++i) {
      const int chan = g.lead_channel(i);
      const int total = g.degree(i) + (chan >= 0 ? 1 : 0);
      if (chan >= 0) {
        VecR ph = VecR::Zero(total - 1);
        ph(0) = phi1;
        vs.push_back(
            build_canonical_vertex(total, 0.7, ph, mix_seed(17, i, 0), i));
      } else {
        vs.push_back(build_kirchhoff_vertex(total, false, i));
      }
    }
    return assemble_system(g, vs);
  };
  const ScatteringSystem a = build(0.0);
  const ScatteringSystem b = build(0.7);
  CorrelatorSpec spec;
  spec.p_terms = {{0, 1, 0.0}};
  spec.q_terms = {{0, 1, 0.0}};
  spec.n_samples = 20000;
  spec.seed = seed;
  const CorrelatorEstimate ea = estimate_correlator(a, spec);
  const CorrelatorEstimate eb = estimate_correlator(b, spec);
  const double se = std::hypot(ea.stderr_total, eb.stderr_total);
  CHECK(std::abs(ea.mean.real() - eb.mean.real()) < 3.0 * se);
  CHECK(std::abs(ea.mean.imag() - eb.mean.imag()) < 3.0 * se);
}

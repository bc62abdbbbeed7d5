#include <doctest.h>

#include <cmath>
#include <complex>

#include "qgraph/goe.hpp"

using namespace qgraph;

namespace {

GoeModel small_model(int dim, double w, int channels, std::uint64_t seed) {
  GoeModel m;
  m.dim = dim;
  m.couplings = VecR::Constant(channels, w);
  m.seed = seed;
  return m;
}

}  // namespace

TEST_CASE("matrix draws: symmetric, deterministic, variance profile") {
  const GoeModel m = small_model(80, 0.2, 2, 0x60E1);
  const MatR h = goe_sample_h(m, 3);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const MatR h2 = goe_sample_h(m, 3);
  CHECK((h - h2).cwiseAbs().maxCoeff() == 0.0);
  const MatR h3 = goe_sample_h(m, 4);
  CHECK((h - h3).cwiseAbs().maxCoeff() > 1e-6);

  // Variance: 1/N off the diagonal, 2/N on it (averaged over entries).
  const int n = m.dim;
  double off = 0.0, diag = 0.0;
  for (int i = 0; i < n; ++i) {
    diag += h(i, i) * h(i, i);
    for (int j = 0; j < i; ++j) off += h(i, j) * h(i, j);
  }
  diag /= n;
  off /= n * (n - 1) / 2.0;
  CHECK(off == doctest::Approx(1.0 / n).epsilon(0.15));
  CHECK(diag == doctest::Approx(2.0 / n).epsilon(0.6));

  // Spectrum stays within the semicircle support (plus edge fuzz).
  const GoeDraw d = goe_draw(m, 3);
  CHECK(d.eigenvalues.minCoeff() > -2.5);
  CHECK(d.eigenvalues.maxCoeff() < 2.5);
  CHECK(d.p.rows() == 2);
  CHECK(d.p.cols() == n);
}

TEST_CASE("resonance S-matrix is unitary and symmetric") {
  const GoeModel m = small_model(60, 0.15, 3, 0x60E2);
  for (std::uint64_t draw : {0ULL, 1ULL, 2ULL}) {
    const GoeDraw d = goe_draw(m, draw);
    const MatC s = goe_s_at(m, d, 0.37);
    CHECK((s.adjoint() * s - MatC::Identity(3, 3)).cwiseAbs().maxCoeff() <
          1e-9);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("decoupled limit: S approaches the identity") {
  const GoeModel m = small_model(60, 1e-6, 2, 0x60E3);
  const MatC s = goe_sample_s(m, 0.2);
  CHECK((s - MatC::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("eigenbasis route matches the direct resolvent") {
  const GoeModel m = small_model(40, 0.3, 2, 0x60E4);
  const MatR h = goe_sample_h(m, 5);
  Eigen::SelfAdjointEigenSolver<MatR> es(h);
  GoeDraw d;
  d.eigenvalues = es.eigenvalues();
  MatR w = MatR::Zero(2, m.dim);
  for (int c = 0; c < 2; ++c) w(c, c) = m.couplings(c);
  d.p = w * es.eigenvectors();
  for (double offset : {0.0, 1.3, -2.7}) {
    const MatC via_k = goe_s_at(m, d, offset);
    const MatC direct = goe_s_direct(m, h, offset);
    CHECK((via_k - direct).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("mean S estimate is deterministic and centered") {
  const GoeModel m = small_model(100, 0.12, 2, 0x60E5);
  const GoeMeanS a = goe_mean_s(m, 400, 11, 1, 20);
  const GoeMeanS b = goe_mean_s(m, 400, 11, 4, 20);
  CHECK(a.mean(0) == b.mean(0));
  CHECK(a.mean(1) == b.mean(1));
  CHECK(a.se(0) == b.se(0));
  CHECK(a.n_draws == 400);
  // identical couplings -> statistically identical channels
  CHECK(std::abs(a.mean(0) - a.mean(1)) <
        4.0 * std::hypot(a.se(0), a.se(1)));
  // mean diagonal S is real-positive-ish at band center for weak coupling
  CHECK(a.mean(0).real() > 0.5);
}

TEST_CASE("coupling calibration hits the requested transmissions") {
  VecR target(2);
  target << 0.5, 0.5;
  const CalibrationRecord rec = goe_calibrate(target, 150, 0xCA11, 600);
  REQUIRE(rec.achieved_t.size() == 2);
  CHECK(std::abs(rec.achieved_t(0) - 0.5) < 0.01);
  CHECK(std::abs(rec.achieved_t(1) - 0.5) < 0.01);
  CHECK(rec.iterations <= 50);
  CHECK(rec.model.couplings.minCoeff() > 0.0);
  CHECK(!rec.trace.empty());

  // Same target, different seed: couplings agree to a couple percent.
  const CalibrationRecord rec2 = goe_calibrate(target, 150, 0xCA12, 600);
  CHECK(std::abs(rec2.model.couplings(0) - rec.model.couplings(0)) /
            rec.model.couplings(0) <
        0.05);
}

TEST_CASE("perfect-coupling calibration drives the mean S to zero") {
  VecR target(2);
  target << 1.0, 1.0;
  const CalibrationRecord rec = goe_calibrate(target, 150, 0xCA13, 600);
  CHECK(std::abs(rec.mean_s(0)) < 0.03);
  CHECK(std::abs(rec.mean_s(1)) < 0.03);
  CHECK(rec.achieved_t(0) > 0.99);
}

TEST_CASE("two-point curve: real at matching points, decaying, deterministic") {
  const GoeModel m = [] {
    GoeModel g;
    g.dim = 100;
    g.couplings = VecR::Constant(2, 0.35);
    g.seed = 0x60E6;
    return g;
  }();
  VecR grid(3);
  grid << 0.0, 4.0, 12.0;
  const GoeTwoPoint tp = goe_two_point(m, 0, 1, grid, 1500, 7, 0, 30);
  REQUIRE(tp.value.size() == 3);
  CHECK(tp.se_total.minCoeff() > 0.0);
  // zero offset: the correlator is an absolute square, so Im -> 0
  CHECK(std::abs(tp.value(0).imag()) < 4.0 * tp.se_im(0));
  CHECK(tp.value(0).real() > 0.0);
  // the envelope decays with offset
  CHECK(tp.value(0).real() > std::abs(tp.value(2)));

  const GoeTwoPoint tp2 = goe_two_point(m, 0, 1, grid, 1500, 7, 3, 30);
  CHECK(tp.value(1).real() == tp2.value(1).real());
  CHECK(tp.value(1).imag() == tp2.value(1).imag());
}

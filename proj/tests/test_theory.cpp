#include <doctest.h>

#include <cmath>
#include <complex>
#include <stdexcept>

#include "qgraph/theory.hpp"

using namespace qgraph;

TEST_CASE("two-point closed form at zero offset") {
  const VecR T = VecR::Constant(10, 1.0);
  const double d = 3.0;  // irrelevant at zero offset

  // off-diagonal pairing: T_a T_b / sum T
  const cplx off = ericson_two_point(T, d, 0.0, 0.0, {0, 1, 0, 1});
  CHECK(off.real() == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(off.imag() == doctest::Approx(0.0).epsilon(1e-14));

  // diagonal element: both pairings contribute
  const cplx diag = ericson_two_point(T, d, 0.0, 0.0, {0, 0, 0, 0});
  CHECK(diag.real() == doctest::Approx(0.2).epsilon(1e-14));

  // mismatched channels: no pairing survives
  const cplx mismatch = ericson_two_point(T, d, 0.0, 0.0, {0, 1, 2, 3});
  CHECK(std::abs(mismatch) == 0.0);

  // swapped pairing (a=d, b=c) counts once
  const cplx swapped = ericson_two_point(T, d, 0.0, 0.0, {0, 1, 1, 0});
  CHECK(swapped.real() == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("two-point closed form: offset enters through the denominator") {
  VecR T(3);
  T << 1.0, 0.5, 0.25;
  const double d = 2.0;
  const double kappa = 0.03, kappa_t = 0.05;
  const cplx got = ericson_two_point(T, d, kappa, kappa_t, {0, 1, 0, 1});
  const cplx denom =
      cplx(T.sum(), -2.0 * kPi * d * (kappa + kappa_t));
  const cplx expect = T(0) * T(1) / denom;
  CHECK(std::abs(got - expect) < 1e-15);

  // conjugation symmetry: C(k, kt)* = C(-kt, -k)
  const cplx mirror = ericson_two_point(T, d, -kappa_t, -kappa, {0, 1, 0, 1});
  CHECK(std::abs(std::conj(got) - mirror) < 1e-15);
}

TEST_CASE("correlation width and its scaling") {
  const VecR T = VecR::Constant(10, 1.0);
  const double d = 10.0 / kPi;
  CHECK(ericson_width(T, d) == doctest::Approx(0.5).epsilon(1e-14));
  // doubling the channel count doubles the width
  CHECK(ericson_width(VecR::Constant(20, 1.0), d) ==
        doctest::Approx(1.0).epsilon(1e-14));
  // denser spectrum narrows it
  CHECK(ericson_width(T, 2.0 * d) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("unpaired-diagonal factor") {
  VecR T(2);
  T << 0.75, 1.0;
  // -T_a <S_aa> / sum T at zero offsets, one conjugated partner
  const cplx f =
      ericson_f_factor(0.75, cplx(0.5, 0.0), T, 1.0, 0.0, {0.0});
  CHECK(f.real() == doctest::Approx(-0.75 * 0.5 / 1.75).epsilon(1e-14));
  CHECK(f.imag() == doctest::Approx(0.0).epsilon(1e-14));

  // two conjugated partners sum two denominators
  const cplx f2 =
      ericson_f_factor(0.75, cplx(0.5, 0.0), T, 1.0, 0.0, {0.0, 0.0});
  CHECK(f2.real() == doctest::Approx(2.0 * f.real()).epsilon(1e-13));
}

TEST_CASE("general product prediction reduces to the two-point form") {
  const VecR T = VecR::Constant(10, 1.0);
  const VecC s_means = VecC::Zero(10);
  const double d = 4.0;
  const std::vector<OffsetTerm> p = {{0, 1, 0.01}};
  const std::vector<OffsetTerm> q = {{0, 1, 0.02}};
  const cplx general = ericson_pq(p, q, T, d, s_means);
  const cplx direct = ericson_two_point(T, d, 0.01, 0.02, {0, 1, 0, 1});
  CHECK(std::abs(general - direct) < 1e-15);
}

TEST_CASE("general product: two identical off-diagonal pairs") {
  // P = Q = 2 with both factors (0,1): 2! identical pairings, each
  // (T0 T1 / sum T)^2 = 0.01 -> total 0.02.
  const VecR T = VecR::Constant(10, 1.0);
  const VecC s_means = VecC::Zero(10);
  const std::vector<OffsetTerm> p = {{0, 1, 0.0}, {0, 1, 0.0}};
  const std::vector<OffsetTerm> q = {{0, 1, 0.0}, {0, 1, 0.0}};
  const cplx got = ericson_pq(p, q, T, 10.0, s_means);
  CHECK(got.real() == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(got.imag() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("general product: unpaired off-diagonal factors vanish") {
  const VecR T = VecR::Constant(10, 1.0);
  const VecC s_means = VecC::Zero(10);
  // P=2, Q=1, all off-diagonal: the leftover factor cannot be unpaired.
  const std::vector<OffsetTerm> p = {{0, 1, 0.0}, {2, 3, 0.0}};
  const std::vector<OffsetTerm> q = {{4, 5, 0.0}};
  CHECK(std::abs(ericson_pq(p, q, T, 10.0, s_means)) == 0.0);

  // ... and with vanishing mean S even a diagonal leftover dies.
  const std::vector<OffsetTerm> pd = {{0, 0, 0.0}, {1, 2, 0.0}};
  const std::vector<OffsetTerm> qd = {{1, 2, 0.0}};
  CHECK(std::abs(ericson_pq(pd, qd, T, 10.0, s_means)) == 0.0);
}

TEST_CASE("general product: diagonal leftover couples to the mean S") {
  // One channel imperfectly coupled: (P,Q) = (2,1) with the leftover on the
  // diagonal picks up the unpaired-diagonal factor times the pair term.
  VecR T(10);
  T.setConstant(1.0);
  T(0) = 0.75;
  VecC s_means = VecC::Zero(10);
  s_means(0) = cplx(0.5, 0.0);  // = sqrt(1 - 0.75)
  const std::vector<OffsetTerm> p = {{0, 0, 0.0}, {1, 2, 0.0}};
  const std::vector<OffsetTerm> q = {{1, 2, 0.0}};
  const cplx got = ericson_pq(p, q, T, 10.0, s_means);
  const double sum_t = T.sum();  // 9.75
  const double expect = (-0.75 * 0.5 / sum_t) * (1.0 / sum_t);
  CHECK(got.real() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(got.imag() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("degenerate inputs raise domain errors") {
  const VecR T = VecR::Zero(3);
  CHECK_THROWS_AS(ericson_two_point(T, 1.0, 0.0, 0.0, {0, 1, 0, 1}),
                  std::domain_error);
}

TEST_CASE("scaled offset combination") {
  CHECK(scaled_offset(10.0 / kPi, 0.05) ==
        doctest::Approx(2.0 * kPi * (10.0 / kPi) * 0.05).epsilon(1e-14));
  CHECK(scaled_offset(1.0, 0.0) == 0.0);
}

TEST_CASE("prediction record carries its inputs") {
  const VecR T = VecR::Constant(4, 0.5);
  const VecC s_means = VecC::Constant(4, cplx(std::sqrt(0.5), 0.0));
  const std::vector<OffsetTerm> p = {{0, 1, 0.0}};
  const std::vector<OffsetTerm> q = {{0, 1, 0.0}};
  const EricsonPrediction pred = ericson_predict(p, q, T, 2.0, s_means);
  CHECK(std::abs(pred.value - ericson_pq(p, q, T, 2.0, s_means)) == 0.0);
  CHECK(pred.transmissions.size() == 4);
  CHECK(pred.d_mean == 2.0);
}

TEST_CASE("Lorentzian fit recovers exact parameters from clean data") {
  const double A = 0.73, w = 2.4;
  VecR x(11), y(11);
  for (int i = 0; i < 11; ++i) {
    x(i) = 0.8 * i;
    y(i) = A / (1.0 + (x(i) / w) * (x(i) / w));
  }
  const auto [a_fit, w_fit] = fit_lorentzian(x, y);
  CHECK(a_fit == doctest::Approx(A).epsilon(1e-10));
  CHECK(w_fit == doctest::Approx(w).epsilon(1e-10));
}

TEST_CASE("Lorentzian fit tolerates mild noise") {
  const double A = 1.0, w = 5.0;
  VecR x(21), y(21);
  unsigned state = 12345;
  auto jitter = [&state]() {
    state = state * 1664525u + 1013904223u;
    return (static_cast<double>(state >> 8) / 16777216.0 - 0.5) * 0.02;
  };
  for (int i = 0; i < 21; ++i) {
    x(i) = 1.5 * i;
    y(i) = A / (1.0 + (x(i) / w) * (x(i) / w)) * (1.0 + jitter());
  }
  const auto [a_fit, w_fit] = fit_lorentzian(x, y);
  CHECK(std::abs(a_fit - A) < 0.05);
  CHECK(std::abs(w_fit - w) < 0.25);
}

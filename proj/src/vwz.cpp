#include "qgraph/vwz.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace qgraph {

namespace {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
// recurrence-evaluated Legendre polynomial.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double deriv = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
      }
      deriv = n * (t * p0 - p1) / (t * t - 1.0);
      const double dt = p0 / deriv;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * deriv * deriv);
  }
}

// Panel-composite nodes over the given boundaries.
void composite_nodes(const std::vector<double>& bounds, int order,
                     std::vector<double>& nodes, std::vector<double>& weights) {
  std::vector<double> gx, gw;
  gauss_legendre(order, gx, gw);
  nodes.clear();
  weights.clear();
  for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
    const double mid = 0.5 * (bounds[p] + bounds[p + 1]);
    const double half = 0.5 * (bounds[p + 1] - bounds[p]);
    for (int i = 0; i < order; ++i) {
      nodes.push_back(mid + half * gx[i]);
      weights.push_back(half * gw[i]);
    }
  }
}

// Dyadically graded boundaries on [0, cap], finest panels at 0.
std::vector<double> dyadic_low(int panels, double cap) {
  std::vector<double> b{0.0};
  for (int k = 1; k <= panels; ++k)
    b.push_back(cap * std::ldexp(1.0, k - panels));
  return b;
}

// Dyadic grading toward both ends of [0, 1].
std::vector<double> dyadic_both(int panels_per_side) {
  std::vector<double> b{0.0};
  for (int k = 1; k <= panels_per_side; ++k)
    b.push_back(0.5 * std::ldexp(1.0, k - panels_per_side));
  for (int k = panels_per_side - 1; k >= 1; --k)
    b.push_back(1.0 - 0.5 * std::ldexp(1.0, k - panels_per_side));
  b.push_back(1.0);
  return b;
}

std::vector<double> uniform_bounds(int panels, double lo, double hi) {
  std::vector<double> b(panels + 1);
  for (int k = 0; k <= panels; ++k)
    b[k] = lo + (hi - lo) * static_cast<double>(k) / panels;
  return b;
}

struct VwzProblem {
  VecR t;
  int a, b, c, d;
  double x;
  VecC s_means;
  bool geom1, geom2, diag;  // which delta structures contribute
};

// One full tensor evaluation at the given refinement level.
cplx vwz_level(const VwzProblem& pr, int panels, int order) {
  // lambda1 is mapped from u in (0, u_cap) via u/(1-u); the tail beyond
  // lambda1 = 50 is cut off (the integrand decays at least like
  // lambda1^(-4-Lambda) there).
  const double lam1_cap = 50.0;
  const double u_cap = lam1_cap / (1.0 + lam1_cap);

  std::vector<double> vu, wu, vv, wv, vr, wr;
  composite_nodes(dyadic_low(panels, u_cap), order, vu, wu);
  composite_nodes(dyadic_both((panels + 1) / 2), order, vv, wv);
  composite_nodes(uniform_bounds(std::max(2, panels / 2), 0.0, 1.0), order,
                  vr, wr);

  const int lam_count = static_cast<int>(pr.t.size());
  const double x2 = 0.5 * pr.x;
  cplx total = 0.0;

  for (std::size_t iv = 0; iv < vv.size(); ++iv) {
    const double lam = vv[iv];
    // Closed-channel product and the lambda-dependent bracket pieces.
    double prod_close = 1.0;
    for (int e = 0; e < lam_count; ++e) prod_close *= 1.0 - pr.t(e) * lam;
    const double g_lam_ab =
        pr.geom1 || pr.geom2
            ? 2.0 * lam * (1.0 - lam) /
                  ((1.0 - pr.t(pr.a) * lam) * (1.0 - pr.t(pr.b) * lam))
            : 0.0;
    const double k_lam_a = 2.0 * lam / (1.0 - pr.t(pr.a) * lam);
    const double k_lam_c = 2.0 * lam / (1.0 - pr.t(pr.c) * lam);
    const cplx exp_v = std::exp(kI * pr.x * lam);
    const double mu_v = lam * (1.0 - lam);

    for (std::size_t iu = 0; iu < vu.size(); ++iu) {
      const double u = vu[iu];
      const double lam1 = u / (1.0 - u);
      const double jac_u = 1.0 / ((1.0 - u) * (1.0 - u));
      double prod_open1 = 1.0;
      for (int e = 0; e < lam_count; ++e)
        prod_open1 /= std::sqrt(1.0 + pr.t(e) * lam1);
      const double g1_ab = lam1 * (1.0 + lam1) /
                           ((1.0 + pr.t(pr.a) * lam1) * (1.0 + pr.t(pr.b) * lam1));
      const double k1_a = lam1 / (1.0 + pr.t(pr.a) * lam1);
      const double k1_c = lam1 / (1.0 + pr.t(pr.c) * lam1);
      const cplx exp_u = std::exp(kI * x2 * lam1);
      const double lp1 = (lam + lam1) * (lam + lam1);
      const double wvu = wv[iv] * wu[iu] * jac_u;

      for (std::size_t ir = 0; ir < vr.size(); ++ir) {
        const double r = vr[ir];
        const double lam2 = r * r * lam1;
        double prod_open2 = 1.0;
        for (int e = 0; e < lam_count; ++e)
          prod_open2 /= std::sqrt(1.0 + pr.t(e) * lam2);
        const double g2_ab = lam2 * (1.0 + lam2) /
                             ((1.0 + pr.t(pr.a) * lam2) * (1.0 + pr.t(pr.b) * lam2));
        const double k2_a = lam2 / (1.0 + pr.t(pr.a) * lam2);
        const double k2_c = lam2 / (1.0 + pr.t(pr.c) * lam2);

        // Measure combined with dlambda2 = 2 r lam1 dr: the 1/sqrt(lambda2)
        // singularity cancels against the jacobian analytically.
        const double lp2 = (lam + lam2) * (lam + lam2);
        const double base = 2.0 * mu_v * lam1 * (1.0 - r * r) /
                            (std::sqrt((1.0 + lam1) * (1.0 + lam2)) * lp1 * lp2);

        cplx j = 0.0;
        if (pr.geom1 || pr.geom2) {
          const double count = (pr.geom1 ? 1.0 : 0.0) + (pr.geom2 ? 1.0 : 0.0);
          j += count * pr.t(pr.a) * pr.t(pr.b) * (g1_ab + g2_ab + g_lam_ab);
        }
        if (pr.diag) {
          j += pr.s_means(pr.a) * std::conj(pr.s_means(pr.c)) * pr.t(pr.a) *
               pr.t(pr.c) * (k1_a + k2_a + k_lam_a) * (k1_c + k2_c + k_lam_c);
        }

        const cplx phase = exp_v * exp_u * std::exp(kI * x2 * lam2);
        // The factor 2 doubles the lambda2 < lambda1 half-region.
        total += (2.0 / 8.0) * wvu * wr[ir] * base * prod_close * prod_open1 *
                 prod_open2 * phase * j;
      }
    }
  }
  return total;
}

}  // namespace

cplx vwz_two_point(const VecR& T, const std::array<int, 4>& channels,
                   double scaled_offset, const VecC& s_means,
                   const VwzOptions& opt) {
  const int lam_count = static_cast<int>(T.size());
  if (lam_count < 1) throw std::invalid_argument("two-point integral needs channels");
  for (int e = 0; e < lam_count; ++e)
    if (T(e) < 0.0 || T(e) > 1.0)
      throw std::invalid_argument("transmission coefficients must lie in [0,1]");
  for (int ch : channels)
    if (ch < 0 || ch >= lam_count)
      throw std::invalid_argument("two-point channel index out of range");

  VwzProblem pr;
  pr.t = T;
  pr.a = channels[0];
  pr.b = channels[1];
  pr.c = channels[2];
  pr.d = channels[3];
  pr.x = scaled_offset;
  pr.geom1 = pr.a == pr.c && pr.b == pr.d;
  pr.geom2 = pr.a == pr.d && pr.b == pr.c;
  pr.diag = pr.a == pr.b && pr.c == pr.d;
  if (s_means.size() == 0) {
    pr.s_means = VecC(lam_count);
    for (int e = 0; e < lam_count; ++e) pr.s_means(e) = std::sqrt(1.0 - T(e));
  } else if (s_means.size() == lam_count) {
    pr.s_means = s_means;
  } else {
    throw std::invalid_argument("mean-S list and transmission list differ in length");
  }
  if (!pr.geom1 && !pr.geom2 && !pr.diag) return 0.0;

  std::string trace;
  char line[160];
  cplx prev = vwz_level(pr, 4, opt.gl_order);
  std::snprintf(line, sizeof line, "panels 4: value = (%.12g, %.12g)\n",
                prev.real(), prev.imag());
  trace += line;
  for (int panels = 6; panels <= opt.max_panels; panels += 2) {
    const cplx cur = vwz_level(pr, panels, opt.gl_order);
    const double delta = std::abs(cur - prev);
    std::snprintf(line, sizeof line,
                  "panels %d: value = (%.12g, %.12g), delta = %.3g\n", panels,
                  cur.real(), cur.imag(), delta);
    trace += line;
    if (delta <= std::max(opt.tol_abs, opt.tol_rel * std::abs(cur))) return cur;
    prev = cur;
  }
  throw std::runtime_error("two-point quadrature did not settle:\n" + trace);
}

}  // namespace qgraph

#include "qgraph/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qgraph {

namespace {

double sum_t(const VecR& T) {
  for (int i = 0; i < T.size(); ++i)
    if (T(i) < 0.0 || T(i) > 1.0)
      throw std::invalid_argument("transmission coefficients must lie in [0,1]");
  return T.sum();
}

cplx lorentz_denominator(double st, double d_mean, double kappa_sum) {
  if (d_mean <= 0.0) throw std::invalid_argument("mean density must be positive");
  const cplx den = st - 2.0 * kPi * kI * d_mean * kappa_sum;
  if (std::abs(den) == 0.0)
    throw std::domain_error(
        "singular prediction: zero total transmission at zero offset");
  return den;
}

}  // namespace

cplx ericson_two_point(const VecR& T, double d_mean, double kappa,
                       double kappa_t, const std::array<int, 4>& channels) {
  const double st = sum_t(T);
  const auto [a, b, c, d] = channels;
  for (int ch : channels)
    if (ch < 0 || ch >= T.size())
      throw std::invalid_argument("two-point channel index out of range");

  // Pairing count.  The numerator uses the transmissions of the two channels
  // of the direct factor; the symmetry of S under transposition forces the
  // same value for (a,b) and (b,a), which T_a*T_b respects.
  double deltas = 0.0;
  if (a == c && b == d) deltas += 1.0;
  if (a == d && b == c) deltas += 1.0;
  if (deltas == 0.0) return 0.0;

  return deltas * T(a) * T(b) / lorentz_denominator(st, d_mean, kappa + kappa_t);
}

double ericson_width(const VecR& T, double d_mean) {
  const double st = sum_t(T);
  if (st <= 0.0) throw std::invalid_argument("width needs positive total transmission");
  if (d_mean <= 0.0) throw std::invalid_argument("mean density must be positive");
  return st / (2.0 * kPi * d_mean);
}

cplx ericson_f_factor(double T_alpha, cplx s_mean_alpha, const VecR& T,
                      double d_mean, double kappa_p,
                      const std::vector<double>& kappa_t_list) {
  if (std::abs(s_mean_alpha) > 1.0 + 1e-12)
    throw std::invalid_argument("mean S element exceeds unit modulus");
  const double st = sum_t(T);
  cplx sum = 0.0;
  for (double kt : kappa_t_list)
    sum += T_alpha * s_mean_alpha / lorentz_denominator(st, d_mean, kappa_p + kt);
  return -sum;
}

cplx ericson_pq(const std::vector<OffsetTerm>& p_terms,
                const std::vector<OffsetTerm>& q_terms, const VecR& T,
                double d_mean, const VecC& s_means) {
  const int P = static_cast<int>(p_terms.size());
  const int Q = static_cast<int>(q_terms.size());
  if (P < 1) throw std::invalid_argument("need at least one direct factor");
  if (Q > P) throw std::invalid_argument("conjugated factors exceed direct factors");
  if (s_means.size() != T.size())
    throw std::invalid_argument("mean-S list and transmission list differ in length");
  auto check_channel = [&](int ch) {
    if (ch < 0 || ch >= T.size())
      throw std::invalid_argument("correlator channel index out of range");
  };
  for (const OffsetTerm& t : p_terms) { check_channel(t.row); check_channel(t.col); }
  for (const OffsetTerm& t : q_terms) { check_channel(t.row); check_channel(t.col); }

  std::vector<double> kt_list;
  kt_list.reserve(q_terms.size());
  for (const OffsetTerm& t : q_terms) kt_list.push_back(t.kappa);

  // Enumerate which P-Q direct factors stay unpaired: a selection mask with
  // exactly Q paired slots, walked via std::next_permutation on the mask.
  std::vector<int> mask(P, 0);
  std::fill(mask.begin(), mask.begin() + Q, 1);  // 1 = paired
  std::sort(mask.begin(), mask.end());

  cplx total = 0.0;
  do {
    cplx unpaired = 1.0;
    std::vector<int> paired_p;
    paired_p.reserve(Q);
    for (int p = 0; p < P; ++p) {
      if (mask[p]) {
        paired_p.push_back(p);
        continue;
      }
      const OffsetTerm& t = p_terms[p];
      if (t.row != t.col) {
        unpaired = 0.0;  // unpaired elements survive only on the diagonal
        break;
      }
      unpaired *= ericson_f_factor(T(t.row), s_means(t.row), T, d_mean,
                                   t.kappa, kt_list);
    }
    if (unpaired == cplx(0.0)) continue;

    // Sum over all bijections between the paired direct factors and the
    // conjugated factors.
    std::vector<int> perm(Q);
    std::iota(perm.begin(), perm.end(), 0);
    cplx pair_sum = 0.0;
    do {
      cplx prod = 1.0;
      for (int j = 0; j < Q; ++j) {
        const OffsetTerm& tp = p_terms[paired_p[j]];
        const OffsetTerm& tq = q_terms[perm[j]];
        prod *= ericson_two_point(T, d_mean, tp.kappa, tq.kappa,
                                  {tp.row, tp.col, tq.row, tq.col});
      }
      pair_sum += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));

    total += unpaired * pair_sum;
  } while (std::next_permutation(mask.begin(), mask.end()));

  return total;
}

EricsonPrediction ericson_predict(const std::vector<OffsetTerm>& p_terms,
                                  const std::vector<OffsetTerm>& q_terms,
                                  const VecR& T, double d_mean,
                                  const VecC& s_means) {
  EricsonPrediction pred;
  pred.value = ericson_pq(p_terms, q_terms, T, d_mean, s_means);
  pred.p_terms = p_terms;
  pred.q_terms = q_terms;
  pred.transmissions = T;
  pred.d_mean = d_mean;
  pred.s_means = s_means;
  return pred;
}

double scaled_offset(double d_mean, double kappa_sum) {
  return 2.0 * kPi * d_mean * kappa_sum;
}

std::pair<double, double> fit_lorentzian(const VecR& x, const VecR& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("lorentzian fit needs >= 3 (x, y) points");
  const double x_scale = x.cwiseAbs().maxCoeff();
  if (x_scale <= 0.0)
    throw std::invalid_argument("lorentzian fit needs a nonzero abscissa");

  // With w fixed the amplitude is linear: A(w) = sum(y g) / sum(g g),
  // g_i = 1 / (1 + (x_i / w)^2).  sse(w) is then minimized in one variable.
  const auto sse = [&](double w) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const double g = 1.0 / (1.0 + (x(i) / w) * (x(i) / w));
      num += y(i) * g;
      den += g * g;
    }
    const double amp = den > 0.0 ? num / den : 0.0;
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const double g = 1.0 / (1.0 + (x(i) / w) * (x(i) / w));
      const double r = y(i) - amp * g;
      s += r * r;
    }
    return s;
  };

  // Coarse log-spaced scan brackets the minimum without assumptions about
  // the data's width; golden-section then refines it.  For noiseless
  // Lorentzian input the minimum is an exact zero of the residual, so the
  // refinement resolves the width far below the usual sqrt(eps) limit.
  const int n_grid = 241;
  const double lo = x_scale * 1e-3, hi = x_scale * 1e3;
  double best_w = lo, best_s = sse(lo);
  for (int i = 1; i < n_grid; ++i) {
    const double w = lo * std::pow(hi / lo, static_cast<double>(i) / (n_grid - 1));
    const double s = sse(w);
    if (s < best_s) {
      best_s = s;
      best_w = w;
    }
  }

  const double step = std::pow(hi / lo, 1.0 / (n_grid - 1));
  double a = best_w / step, b = best_w * step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = sse(c), fd = sse(d);
  for (int it = 0; it < 300 && (b - a) > 1e-15 * (a + b); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = sse(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = sse(d);
    }
  }
  const double w = 0.5 * (a + b);

  double num = 0.0, den = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double g = 1.0 / (1.0 + (x(i) / w) * (x(i) / w));
    num += y(i) * g;
    den += g * g;
  }
  return {den > 0.0 ? num / den : 0.0, w};
}

}  // namespace qgraph

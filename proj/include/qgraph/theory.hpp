#pragma once

// Closed-form strong-absorption predictions for S-matrix correlation
// functions: the Lorentzian two-point function, the factor picked up by
// unpaired diagonal elements, and the general (P,Q) combinatorial sum over
// pairings.  Plus a least-squares Lorentzian fitter used to extract
// correlation widths from measured curves.

#include <array>
#include <utility>
#include <vector>

#include "qgraph/correlator.hpp"
#include "qgraph/types.hpp"

namespace qgraph {

// <Sfl_ab(kappa) conj(Sfl_cd(kappa_t))> in the overlapping-resonance limit:
//   (delta_ac delta_bd + delta_ad delta_bc) T_a T_b
//     / (sum_t T_t - 2 pi i d_mean (kappa + kappa_t)).
// Channels are passed as {a, b, c, d}.  Throws std::domain_error when the
// denominator vanishes (all T zero at zero offset).
cplx ericson_two_point(const VecR& T, double d_mean, double kappa,
                       double kappa_t, const std::array<int, 4>& channels);

// Half-width of the Lorentzian in the combined offset (kappa + kappa_t).
double ericson_width(const VecR& T, double d_mean);

// Factor contributed by one unpaired diagonal element Sfl_aa(kappa_p):
//   -sum_q T_a <S_aa> / (sum_t T_t - 2 pi i (kappa_p + kappa_t_q) d_mean).
cplx ericson_f_factor(double T_alpha, cplx s_mean_alpha, const VecR& T,
                      double d_mean, double kappa_p,
                      const std::vector<double>& kappa_t_list);

// General (P,Q) prediction: sum over all choices of P-Q unpaired direct
// factors (each must be diagonal and contributes ericson_f_factor, else the
// selection vanishes) times the sum over all Q! pairings of the remaining
// direct factors with the conjugated ones via ericson_two_point.
// s_means holds the per-channel mean diagonal S-matrix elements.
cplx ericson_pq(const std::vector<OffsetTerm>& p_terms,
                const std::vector<OffsetTerm>& q_terms, const VecR& T,
                double d_mean, const VecC& s_means);

// Prediction record bundling the value with everything that produced it.
struct EricsonPrediction {
  cplx value;
  std::vector<OffsetTerm> p_terms, q_terms;
  VecR transmissions;
  double d_mean = 0.0;
  VecC s_means;
};

EricsonPrediction ericson_predict(const std::vector<OffsetTerm>& p_terms,
                                  const std::vector<OffsetTerm>& q_terms,
                                  const VecR& T, double d_mean,
                                  const VecC& s_means);

// Dimensionless offset combination used to compare against the
// random-matrix oracle: x = 2 pi d_mean (kappa + kappa_t).
double scaled_offset(double d_mean, double kappa_sum);

// Least-squares fit of y ~ A / (1 + (x/w)^2) with the peak pinned at x = 0.
// Returns {A, w}.  The amplitude is eliminated analytically; the width is
// found by a log-grid scan plus golden-section refinement, which recovers
// the exact width of noiseless closed-form data to machine precision.
std::pair<double, double> fit_lorentzian(const VecR& x, const VecR& y);

}  // namespace qgraph

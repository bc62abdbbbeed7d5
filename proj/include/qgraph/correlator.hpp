#pragma once

// Monte Carlo estimation over i.i.d. bond-phase draws: mean S-matrix,
// arbitrary (P,Q) products of fluctuating S-matrix elements, and moment /
// distribution diagnostics.  All estimators run on a shared batched engine:
// the sample space is split into a declared number of batches, each batch is
// accumulated serially in ascending sample order, and workers only pick up
// whole batches — so results are bit-identical for any worker count, and
// jackknife-over-batches error bars come for free.

#include <cstdint>
#include <functional>
#include <vector>

#include "qgraph/rng.hpp"
#include "qgraph/system.hpp"
#include "qgraph/types.hpp"

namespace qgraph {

// ---- batched Monte Carlo engine ----

struct McAccumulation {
  std::vector<VecC> batch_sums;   // one vector of accumulated values per batch
  std::vector<long> batch_sizes;  // samples per batch
  long n_samples = 0;
  long rejected = 0;              // solve rejections (samples were redrawn)

  VecC total() const;
  long total_size() const;
};

// fill(sample_index, retry, out): write the sample's contribution into out
// (size dim).  Throw SolveError to reject; the engine redraws with the next
// retry index.  Must derive all randomness from (sample_index, retry).
using SampleFiller = std::function<void(long, int, VecC&)>;

McAccumulation run_batched_mc(long n_samples, int n_batches, int workers,
                              int dim, const SampleFiller& fill);

// Worker-count resolution: explicit request > 0 wins, then QGRAPH_WORKERS,
// then hardware concurrency.
int resolve_workers(int requested);

struct JackknifeStat {
  cplx mean;
  double se_re = 0.0, se_im = 0.0;
  double se_total = 0.0;  // hypot(se_re, se_im)
};

// Jackknife-over-batches mean and standard error of one accumulated component.
JackknifeStat jackknife_component(const McAccumulation& acc, int component);

// Jackknife of a scalar functional of the accumulated totals
// f(totals, n_samples) -> double (handles ratio-of-means bias).
std::pair<double, double> jackknife_functional(
    const McAccumulation& acc,
    const std::function<double(const VecC&, long)>& f);

// ---- phase sampling ----

// B i.i.d. uniform [0, 2pi) bond phases.
VecR sample_phases(const GraphSpec& g, Stream& stream);

// ---- estimators ----

struct OffsetTerm {
  int row = 0, col = 0;  // channel pair
  double kappa = 0.0;    // wave-number offset
};

struct CorrelatorSpec {
  std::vector<OffsetTerm> p_terms;  // direct factors, evaluated at +kappa
  std::vector<OffsetTerm> q_terms;  // conjugated factors, evaluated at -kappa
  long n_samples = 0;
  std::uint64_t seed = 0;
  int n_batches = 50;

  void validate(int num_channels) const;
};

struct CorrelatorEstimate {
  cplx mean;
  double stderr_total = 0.0;  // hypot of component errors
  double stderr_re = 0.0, stderr_im = 0.0;
  long n_effective = 0;
  long rejected = 0;
  bool reject_warning = false;  // rejects > 1% of samples
};

// < prod_p Sfl_{a_p b_p}(+kappa_p) * prod_q conj(Sfl_{a_q b_q}(-kappa_q)) >
CorrelatorEstimate estimate_correlator(const ScatteringSystem& sys,
                                       const CorrelatorSpec& spec,
                                       int workers = 0);

// Exact ensemble mean of S: diag(rho) (used for analytic centering).
MatC mean_s_analytic(const ScatteringSystem& sys);

struct MeanSEstimate {
  MatC mean;          // Lambda x Lambda Monte Carlo mean of S
  MatR stderr_re, stderr_im;
  long n_samples = 0;
  long rejected = 0;
};

MeanSEstimate estimate_mean_s(const ScatteringSystem& sys, long n_samples,
                              std::uint64_t seed, int workers = 0,
                              int n_batches = 50);

struct DistributionReport {
  cplx mean;                   // <Sfl_ab>
  double mean_se = 0.0;
  double m2 = 0.0, m2_se = 0.0;   // <|Sfl|^2>
  double m4 = 0.0, m4_se = 0.0;   // <|Sfl|^4>
  double ratio = 0.0, ratio_se = 0.0;  // m4 / m2^2 (2 for a complex Gaussian)
  VecR bin_centers;
  VecI count_re, count_im;     // histograms of Re, Im parts
  long n_samples = 0;
  long rejected = 0;
};

DistributionReport distribution_report(const ScatteringSystem& sys, int row,
                                       int col, long n_samples,
                                       std::uint64_t seed, int bins = 81,
                                       int workers = 0, int n_batches = 50);

// Consistency check: the same (1,1) correlator estimated by sweeping the wave
// number over [k0, k0 + 100/L_min] instead of drawing phases; batch means
// over contiguous sub-intervals provide the error bar.
CorrelatorEstimate ksweep_correlator(const ScatteringSystem& sys,
                                     const OffsetTerm& p, const OffsetTerm& q,
                                     double k0, long n_points,
                                     int n_batches = 50, int workers = 0);

}  // namespace qgraph

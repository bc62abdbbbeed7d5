#include "qgraph/correlator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace qgraph {

namespace {

// Samples in batch b are the contiguous index range [start, start + size):
// the first (n % n_batches) batches carry one extra sample.
long batch_size_of(long n, int n_batches, int b) {
  const long base = n / n_batches;
  const long rem = n % n_batches;
  return base + (b < rem ? 1 : 0);
}

long batch_start_of(long n, int n_batches, int b) {
  const long base = n / n_batches;
  const long rem = n % n_batches;
  return b * base + std::min<long>(b, rem);
}

constexpr int kMaxRetries = 100;

}  // namespace

VecC McAccumulation::total() const {
  if (batch_sums.empty()) return VecC();
  VecC t = VecC::Zero(batch_sums.front().size());
  for (const VecC& s : batch_sums) t += s;
  return t;
}

long McAccumulation::total_size() const {
  long n = 0;
  for (long s : batch_sizes) n += s;
  return n;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QGRAPH_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

McAccumulation run_batched_mc(long n_samples, int n_batches, int workers,
                              int dim, const SampleFiller& fill) {
  if (n_samples < 1) throw std::invalid_argument("run_batched_mc: n_samples must be >= 1");
  if (n_batches < 2) throw std::invalid_argument("run_batched_mc: n_batches must be >= 2");
  if (n_samples < n_batches)
    throw std::invalid_argument("run_batched_mc: need at least one sample per batch");
  if (dim < 1) throw std::invalid_argument("run_batched_mc: dim must be >= 1");

  McAccumulation acc;
  acc.n_samples = n_samples;
  acc.batch_sums.assign(n_batches, VecC::Zero(dim));
  acc.batch_sizes.assign(n_batches, 0);
  for (int b = 0; b < n_batches; ++b)
    acc.batch_sizes[b] = batch_size_of(n_samples, n_batches, b);

  std::atomic<int> next_batch{0};
  std::atomic<long> rejected{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  // A worker owns a whole batch and walks it in ascending sample order, so
  // the per-batch sums (and therefore the reduced totals) do not depend on
  // how batches are distributed across threads.
  auto work = [&]() {
    VecC tmp(dim);
    for (;;) {
      const int b = next_batch.fetch_add(1);
      if (b >= n_batches || failed.load()) return;
      const long start = batch_start_of(n_samples, n_batches, b);
      const long size = acc.batch_sizes[b];
      VecC sum = VecC::Zero(dim);
      for (long i = start; i < start + size; ++i) {
        bool done = false;
        for (int retry = 0; retry < kMaxRetries && !done; ++retry) {
          try {
            tmp.setZero();
            fill(i, retry, tmp);
            done = true;
          } catch (const SolveError&) {
            rejected.fetch_add(1);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed.store(true);
            return;
          }
        }
        if (!done) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error)
            first_error = std::make_exception_ptr(std::runtime_error(
                "run_batched_mc: sample " + std::to_string(i) + " rejected " +
                std::to_string(kMaxRetries) + " times"));
          failed.store(true);
          return;
        }
        sum += tmp;
      }
      acc.batch_sums[b] = sum;
    }
  };

  const int n_threads = std::min<int>(resolve_workers(workers), n_batches);
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  acc.rejected = rejected.load();
  return acc;
}

JackknifeStat jackknife_component(const McAccumulation& acc, int component) {
  const int nb = static_cast<int>(acc.batch_sums.size());
  const long n = acc.total_size();
  const cplx total = acc.total()(component);

  JackknifeStat out;
  out.mean = total / static_cast<double>(n);

  // Leave-one-batch-out replicates.
  std::vector<cplx> theta(nb);
  cplx theta_bar = 0.0;
  for (int b = 0; b < nb; ++b) {
    theta[b] = (total - acc.batch_sums[b](component)) /
               static_cast<double>(n - acc.batch_sizes[b]);
    theta_bar += theta[b];
  }
  theta_bar /= static_cast<double>(nb);

  double var_re = 0.0, var_im = 0.0;
  for (int b = 0; b < nb; ++b) {
    const cplx d = theta[b] - theta_bar;
    var_re += d.real() * d.real();
    var_im += d.imag() * d.imag();
  }
  const double factor = static_cast<double>(nb - 1) / static_cast<double>(nb);
  out.se_re = std::sqrt(factor * var_re);
  out.se_im = std::sqrt(factor * var_im);
  out.se_total = std::hypot(out.se_re, out.se_im);
  return out;
}

std::pair<double, double> jackknife_functional(
    const McAccumulation& acc,
    const std::function<double(const VecC&, long)>& f) {
  const int nb = static_cast<int>(acc.batch_sums.size());
  const long n = acc.total_size();
  const VecC total = acc.total();

  const double value = f(total, n);
  std::vector<double> theta(nb);
  double theta_bar = 0.0;
  for (int b = 0; b < nb; ++b) {
    theta[b] = f(total - acc.batch_sums[b], n - acc.batch_sizes[b]);
    theta_bar += theta[b];
  }
  theta_bar /= static_cast<double>(nb);

  double var = 0.0;
  for (int b = 0; b < nb; ++b) {
    const double d = theta[b] - theta_bar;
    var += d * d;
  }
  const double factor = static_cast<double>(nb - 1) / static_cast<double>(nb);
  return {value, std::sqrt(factor * var)};
}

VecR sample_phases(const GraphSpec& g, Stream& stream) {
  VecR phi(g.num_bonds());
  for (int b = 0; b < g.num_bonds(); ++b) phi(b) = stream.uniform(0.0, 2.0 * kPi);
  return phi;
}

void CorrelatorSpec::validate(int num_channels) const {
  if (p_terms.empty())
    throw std::invalid_argument("correlator: need at least one direct factor");
  if (q_terms.size() > p_terms.size())
    throw std::invalid_argument(
        "correlator: conjugated factor count exceeds direct factor count");
  auto check = [&](const OffsetTerm& t, const char* kind) {
    if (t.row < 0 || t.row >= num_channels || t.col < 0 || t.col >= num_channels)
      throw std::invalid_argument(std::string("correlator: ") + kind +
                                  " factor channel out of range");
    if (!std::isfinite(t.kappa))
      throw std::invalid_argument(std::string("correlator: ") + kind +
                                  " factor offset not finite");
  };
  for (const OffsetTerm& t : p_terms) check(t, "direct");
  for (const OffsetTerm& t : q_terms) check(t, "conjugated");
  if (n_samples < n_batches)
    throw std::invalid_argument("correlator: need at least one sample per batch");
  if (n_batches < 2)
    throw std::invalid_argument("correlator: need at least two batches");
}

CorrelatorEstimate estimate_correlator(const ScatteringSystem& sys,
                                       const CorrelatorSpec& spec,
                                       int workers) {
  spec.validate(sys.num_channels());

  // Every distinct offset costs one linear solve per sample; factors at the
  // same offset share the evaluation.  Direct factors probe +kappa,
  // conjugated factors -kappa.
  std::vector<double> offsets;
  auto offset_index = [&](double value) {
    for (std::size_t i = 0; i < offsets.size(); ++i)
      if (offsets[i] == value) return static_cast<int>(i);
    offsets.push_back(value);
    return static_cast<int>(offsets.size() - 1);
  };
  std::vector<int> p_off, q_off;
  p_off.reserve(spec.p_terms.size());
  q_off.reserve(spec.q_terms.size());
  for (const OffsetTerm& t : spec.p_terms) p_off.push_back(offset_index(t.kappa));
  for (const OffsetTerm& t : spec.q_terms) q_off.push_back(offset_index(-t.kappa));

  const auto fill = [&](long index, int retry, VecC& out) {
    Stream st(spec.seed, static_cast<std::uint64_t>(index),
              static_cast<std::uint64_t>(retry));
    const VecR phases = sample_phases(sys.graph, st);
    std::vector<MatC> sfl(offsets.size());
    for (std::size_t o = 0; o < offsets.size(); ++o)
      sfl[o] = evaluate_sfl(sys, phases, offsets[o]);
    cplx prod = 1.0;
    for (std::size_t p = 0; p < spec.p_terms.size(); ++p)
      prod *= sfl[p_off[p]](spec.p_terms[p].row, spec.p_terms[p].col);
    for (std::size_t q = 0; q < spec.q_terms.size(); ++q)
      prod *= std::conj(sfl[q_off[q]](spec.q_terms[q].row, spec.q_terms[q].col));
    out(0) = prod;
  };

  const McAccumulation acc =
      run_batched_mc(spec.n_samples, spec.n_batches, workers, 1, fill);
  const JackknifeStat js = jackknife_component(acc, 0);

  CorrelatorEstimate est;
  est.mean = js.mean;
  est.stderr_re = js.se_re;
  est.stderr_im = js.se_im;
  est.stderr_total = js.se_total;
  est.n_effective = acc.total_size();
  est.rejected = acc.rejected;
  est.reject_warning = acc.rejected > acc.n_samples / 100;
  return est;
}

MatC mean_s_analytic(const ScatteringSystem& sys) {
  return sys.rho_diag.asDiagonal().toDenseMatrix();
}

MeanSEstimate estimate_mean_s(const ScatteringSystem& sys, long n_samples,
                              std::uint64_t seed, int workers, int n_batches) {
  const int lam = sys.num_channels();
  const MatC rho = mean_s_analytic(sys);

  const auto fill = [&](long index, int retry, VecC& out) {
    Stream st(seed, static_cast<std::uint64_t>(index),
              static_cast<std::uint64_t>(retry));
    const VecR phases = sample_phases(sys.graph, st);
    const MatC s = evaluate_sfl(sys, phases, 0.0) + rho;
    for (int r = 0; r < lam; ++r)
      for (int c = 0; c < lam; ++c) out(r * lam + c) = s(r, c);
  };

  const McAccumulation acc =
      run_batched_mc(n_samples, n_batches, workers, lam * lam, fill);

  MeanSEstimate est;
  est.mean = MatC::Zero(lam, lam);
  est.stderr_re = MatR::Zero(lam, lam);
  est.stderr_im = MatR::Zero(lam, lam);
  for (int r = 0; r < lam; ++r)
    for (int c = 0; c < lam; ++c) {
      const JackknifeStat js = jackknife_component(acc, r * lam + c);
      est.mean(r, c) = js.mean;
      est.stderr_re(r, c) = js.se_re;
      est.stderr_im(r, c) = js.se_im;
    }
  est.n_samples = acc.total_size();
  est.rejected = acc.rejected;
  return est;
}

DistributionReport distribution_report(const ScatteringSystem& sys, int row,
                                       int col, long n_samples,
                                       std::uint64_t seed, int bins,
                                       int workers, int n_batches) {
  const int lam = sys.num_channels();
  if (row < 0 || row >= lam || col < 0 || col >= lam)
    throw std::invalid_argument("distribution_report: channel out of range");
  if (bins < 1) throw std::invalid_argument("distribution_report: bins must be >= 1");

  // Raw values are kept per sample index (disjoint writes across threads) so
  // the histogram is reproducible independent of scheduling.
  std::vector<cplx> raw(static_cast<std::size_t>(n_samples));

  const auto fill = [&](long index, int retry, VecC& out) {
    Stream st(seed, static_cast<std::uint64_t>(index),
              static_cast<std::uint64_t>(retry));
    const VecR phases = sample_phases(sys.graph, st);
    const cplx s = evaluate_sfl(sys, phases, 0.0)(row, col);
    const double a2 = std::norm(s);
    out(0) = s;
    out(1) = a2;
    out(2) = a2 * a2;
    raw[static_cast<std::size_t>(index)] = s;
  };

  const McAccumulation acc =
      run_batched_mc(n_samples, n_batches, workers, 3, fill);

  DistributionReport rep;
  const JackknifeStat js_mean = jackknife_component(acc, 0);
  const JackknifeStat js_m2 = jackknife_component(acc, 1);
  const JackknifeStat js_m4 = jackknife_component(acc, 2);
  rep.mean = js_mean.mean;
  rep.mean_se = js_mean.se_total;
  rep.m2 = js_m2.mean.real();
  rep.m2_se = js_m2.se_re;
  rep.m4 = js_m4.mean.real();
  rep.m4_se = js_m4.se_re;

  const auto ratio_f = [](const VecC& tot, long n) {
    const double m2 = tot(1).real() / static_cast<double>(n);
    const double m4 = tot(2).real() / static_cast<double>(n);
    return m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
  };
  std::tie(rep.ratio, rep.ratio_se) = jackknife_functional(acc, ratio_f);

  double max_abs = 0.0;
  for (const cplx& v : raw)
    max_abs = std::max({max_abs, std::abs(v.real()), std::abs(v.imag())});
  if (max_abs == 0.0) max_abs = 1.0;
  const double lo = -max_abs, width = 2.0 * max_abs / bins;
  rep.bin_centers = VecR(bins);
  rep.count_re = VecI::Zero(bins);
  rep.count_im = VecI::Zero(bins);
  for (int b = 0; b < bins; ++b) rep.bin_centers(b) = lo + (b + 0.5) * width;
  auto bin_of = [&](double v) {
    const int b = static_cast<int>((v - lo) / width);
    return std::clamp(b, 0, bins - 1);
  };
  for (const cplx& v : raw) {
    rep.count_re(bin_of(v.real())) += 1;
    rep.count_im(bin_of(v.imag())) += 1;
  }

  rep.n_samples = acc.total_size();
  rep.rejected = acc.rejected;
  return rep;
}

CorrelatorEstimate ksweep_correlator(const ScatteringSystem& sys,
                                     const OffsetTerm& p, const OffsetTerm& q,
                                     double k0, long n_points, int n_batches,
                                     int workers) {
  const int lam = sys.num_channels();
  if (p.row < 0 || p.row >= lam || p.col < 0 || p.col >= lam ||
      q.row < 0 || q.row >= lam || q.col < 0 || q.col >= lam)
    throw std::invalid_argument("ksweep_correlator: channel out of range");

  // The sweep covers many level spacings: 100 / L_min in wave number.
  const double l_min =
      *std::min_element(sys.graph.lengths.begin(), sys.graph.lengths.end());
  const double span = 100.0 / l_min;
  const double dk = span / static_cast<double>(n_points);
  const VecR phases = VecR::Zero(sys.graph.num_bonds());

  const auto fill = [&](long index, int retry, VecC& out) {
    // Deterministic grid: a rejected point cannot be redrawn.
    if (retry > 0)
      throw std::runtime_error("ksweep_correlator: singular solve at grid point " +
                               std::to_string(index));
    const double k = k0 + (static_cast<double>(index) + 0.5) * dk;
    const cplx sp = evaluate_sfl(sys, phases, k + p.kappa)(p.row, p.col);
    const cplx sq = evaluate_sfl(sys, phases, k - q.kappa)(q.row, q.col);
    out(0) = sp * std::conj(sq);
  };

  const McAccumulation acc =
      run_batched_mc(n_points, n_batches, workers, 1, fill);
  const JackknifeStat js = jackknife_component(acc, 0);

  CorrelatorEstimate est;
  est.mean = js.mean;
  est.stderr_re = js.se_re;
  est.stderr_im = js.se_im;
  est.stderr_total = js.se_total;
  est.n_effective = acc.total_size();
  est.rejected = acc.rejected;
  est.reject_warning = false;
  return est;
}

}  // namespace qgraph

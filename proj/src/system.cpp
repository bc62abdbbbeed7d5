#include "qgraph/system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace qgraph {

namespace {

VecC directed_phase_factors(const ScatteringSystem& sys, const VecR& phases,
                            double offset) {
  const int n = sys.num_directed();
  const int b = n / 2;
  if (phases.size() != b)
    throw std::invalid_argument("evaluate: phases must have one entry per bond");
  VecC d(n);
  for (int i = 0; i < n; ++i) {
    const int bond = i < b ? i : i - b;
    d[i] = std::exp(kI * (phases[bond] + offset * sys.lengths_directed[i]));
  }
  return d;
}

}  // namespace

ScatteringSystem assemble_system(const GraphSpec& g,
                                 const std::vector<VertexMatrix>& vs) {
  g.validate();
  if (static_cast<int>(vs.size()) != g.num_vertices)
    throw std::invalid_argument("assemble_system: need one vertex matrix per vertex");

  const int n = g.num_directed();
  const int lam = g.num_leads();

  ScatteringSystem sys;
  sys.graph = g;
  sys.vertices = vs;
  sys.sigma_b = MatC::Zero(n, n);
  sys.coupling = MatC::Zero(lam, n);
  sys.lengths_directed = VecR(n);
  sys.rho_diag = VecC(lam);
  sys.transmissions = VecR(lam);
  sys.flip.resize(n);

  const int b = g.num_bonds();
  for (int i = 0; i < n; ++i) {
    sys.flip[i] = i < b ? i + b : i - b;
    sys.lengths_directed[i] = g.lengths[i < b ? i : i - b];
  }

  sys.has_low_rank = true;
  sys.lr_unit = VecC::Zero(n);

  for (int a = 0; a < g.num_vertices; ++a) {
    const VertexMatrix& vm = vs[a];
    const int channel = g.lead_channel(a);
    const bool lead_expected = channel >= 0;
    if (vm.has_lead != lead_expected)
      throw std::invalid_argument("assemble_system: lead flag mismatch at vertex " +
                                  std::to_string(a));
    const auto nbrs = g.neighbors(a);
    if (vm.bond_valency() != static_cast<int>(nbrs.size()))
      throw std::invalid_argument("assemble_system: valency mismatch at vertex " +
                                  std::to_string(a));

    const MatC sig = vm.sigma();
    for (std::size_t ic = 0; ic < nbrs.size(); ++ic) {
      const int in_idx = directed_index(g, nbrs[ic], a);
      for (std::size_t ib = 0; ib < nbrs.size(); ++ib) {
        const int out_idx = directed_index(g, a, nbrs[ib]);
        sys.sigma_b(out_idx, in_idx) = sig(ib, ic);
      }
    }
    if (lead_expected) {
      const VecC t = vm.tau();
      for (std::size_t ib = 0; ib < nbrs.size(); ++ib)
        sys.coupling(channel, directed_index(g, a, nbrs[ib])) = t[ib];
      sys.rho_diag[channel] = vm.rho();
      sys.transmissions[channel] = vm.transmission();
    }

    if (vm.low_rank) {
      const LowRankBlock& lr = *vm.low_rank;
      for (std::size_t ib = 0; ib < nbrs.size(); ++ib)
        sys.lr_unit[directed_index(g, a, nbrs[ib])] = lr.unit_scale;
      for (int j = 0; j < lr.coeff.size(); ++j) {
        LowRankTerm term;
        term.coeff = lr.unit_scale * lr.coeff[j];
        for (std::size_t ib = 0; ib < nbrs.size(); ++ib)
          term.entries.emplace_back(directed_index(g, a, nbrs[ib]),
                                    lr.w(static_cast<int>(ib), j));
        sys.lr_terms.push_back(std::move(term));
      }
    } else {
      sys.has_low_rank = false;
    }
  }
  if (!sys.has_low_rank) {
    sys.lr_unit = VecC(0);
    sys.lr_terms.clear();
  }

  sys.coupling_arrive = MatC::Zero(lam, n);
  for (int c = 0; c < lam; ++c) {
    for (int i = 0; i < n; ++i) sys.coupling_arrive(c, i) = sys.coupling(c, sys.flip[i]);
  }
  return sys;
}

SMatrixSample evaluate_s(const ScatteringSystem& sys, const VecR& phases,
                         double offset) {
  const int n = sys.num_directed();
  const VecC d = directed_phase_factors(sys, phases, offset);

  MatC m = MatC::Identity(n, n);
  m.noalias() -= sys.sigma_b * d.asDiagonal();
  Eigen::PartialPivLU<MatC> lu(m);
  const double rc = lu.rcond();
  if (!(rc >= kRcondReject)) {
    std::ostringstream os;
    os << "evaluate_s: solve rejected, reciprocal condition " << rc
       << " below " << kRcondReject;
    throw SolveError(os.str(), rc);
  }

  const MatC x = lu.solve(sys.coupling.transpose());
  SMatrixSample out;
  out.s = sys.coupling_arrive * (d.asDiagonal() * x);
  out.s.diagonal() += sys.rho_diag;
  out.phases = phases;
  out.offset = offset;
  out.rcond = rc;
  return out;
}

MatC evaluate_sfl_fast(const ScatteringSystem& sys, const VecR& phases,
                       double offset) {
  if (!sys.has_low_rank)
    throw std::logic_error("evaluate_sfl_fast: system lacks low-rank structure");
  const int n = sys.num_directed();
  const int b = n / 2;
  const int lam = sys.num_channels();
  const int m = static_cast<int>(sys.lr_terms.size());

  // Per-bond phase factor and 2x2 block determinant of A0 = I - diag(zeta) R D.
  VecC e(b), det(b);
  double min_abs_det = 1.0;
  for (int i = 0; i < b; ++i) {
    e[i] = std::exp(kI * (phases[i] + offset * sys.lengths_directed[i]));
    det[i] = 1.0 - sys.lr_unit[i] * sys.lr_unit[i + b] * e[i] * e[i];
    min_abs_det = std::min(min_abs_det, std::abs(det[i]));
  }
  if (min_abs_det < kRcondReject)
    throw SolveError("evaluate_sfl_fast: near-singular bond block", min_abs_det);

  // Scatter of A0^{-1) applied to a sparse column: entry w at directed index i
  // contributes w/det at i and zeta_partner e_b w/det at the flipped index.
  auto apply_block_inverse = [&](int i, cplx w, MatC& dst, int col) {
    const int bond = i < b ? i : i - b;
    const int partner = sys.flip[i];
    const cplx inv = w / det[bond];
    dst(i, col) += inv;
    dst(partner, col) += sys.lr_unit[partner] * e[bond] * inv;
  };

  // Z = A0^{-1} W (columns = low-rank terms); sparse support.
  MatC z = MatC::Zero(n, m);
  for (int j = 0; j < m; ++j) {
    for (const auto& [i, w] : sys.lr_terms[j].entries) apply_block_inverse(i, w, z, j);
  }

  // G_{j',j} = w_{j'}^T P Z_j with (P x)_i = e_b x_flip(i).
  MatC g = MatC::Zero(m, m);
  for (int jp = 0; jp < m; ++jp) {
    for (const auto& [i, w] : sys.lr_terms[jp].entries) {
      const int bond = i < b ? i : i - b;
      const cplx f = w * e[bond];
      g.row(jp).noalias() += f * z.row(sys.flip[i]);
    }
  }

  // K = I - G C, C = diag(term coefficients).
  MatC k = MatC::Identity(m, m);
  for (int j = 0; j < m; ++j) k.col(j) -= g.col(j) * sys.lr_terms[j].coeff;
  Eigen::PartialPivLU<MatC> lu(k);
  const double rc = lu.rcond();
  if (!(rc >= kRcondReject))
    throw SolveError("evaluate_sfl_fast: near-singular low-rank correction", rc);

  // X0 = A0^{-1} T^t.
  MatC x0 = MatC::Zero(n, lam);
  for (int c = 0; c < lam; ++c) {
    for (int i = 0; i < n; ++i) {
      const cplx t = sys.coupling(c, i);
      if (t != cplx(0.0, 0.0)) apply_block_inverse(i, t, x0, c);
    }
  }

  // q = W^T P X0, correction = Z C K^{-1} q.
  MatC q = MatC::Zero(m, lam);
  for (int j = 0; j < m; ++j) {
    for (const auto& [i, w] : sys.lr_terms[j].entries) {
      const int bond = i < b ? i : i - b;
      q.row(j).noalias() += (w * e[bond]) * x0.row(sys.flip[i]);
    }
  }
  MatC y = lu.solve(q);
  for (int j = 0; j < m; ++j) y.row(j) *= sys.lr_terms[j].coeff;
  MatC x = x0;
  x.noalias() += z * y;

  // S_fl = T P X.
  MatC sfl = MatC::Zero(lam, lam);
  for (int c = 0; c < lam; ++c) {
    for (int i = 0; i < n; ++i) {
      const cplx t = sys.coupling(c, i);
      if (t != cplx(0.0, 0.0)) {
        const int bond = i < b ? i : i - b;
        sfl.row(c).noalias() += (t * e[bond]) * x.row(sys.flip[i]);
      }
    }
  }
  return sfl;
}

MatC evaluate_sfl(const ScatteringSystem& sys, const VecR& phases, double offset) {
  if (sys.has_low_rank) return evaluate_sfl_fast(sys, phases, offset);
  MatC s = evaluate_s(sys, phases, offset).s;
  s.diagonal() -= sys.rho_diag;
  return s;
}

TrajectoryResult trajectory_sum(const ScatteringSystem& sys, const VecR& phases,
                                double offset, int n_max) {
  if (n_max < 0) throw std::invalid_argument("trajectory_sum: n_max must be >= 0");
  const int n = sys.num_directed();
  const VecC d = directed_phase_factors(sys, phases, offset);

  TrajectoryResult out;
  out.residual_history = VecR(n_max + 1);

  const SMatrixSample exact = evaluate_s(sys, phases, offset);

  MatC term = sys.coupling.transpose();  // (Sigma_B D)^0 T^t
  MatC acc = term;
  auto partial_s = [&](const MatC& a) {
    MatC s = sys.coupling_arrive * (d.asDiagonal() * a);
    s.diagonal() += sys.rho_diag;
    return s;
  };
  out.residual_history[0] = (partial_s(acc) - exact.s).norm();
  for (int k = 1; k <= n_max; ++k) {
    term = sys.sigma_b * (d.asDiagonal() * term).eval();
    acc += term;
    out.residual_history[k] = (partial_s(acc) - exact.s).norm();
  }
  out.sample.s = partial_s(acc);
  out.sample.phases = phases;
  out.sample.offset = offset;
  out.sample.rcond = exact.rcond;
  out.residual = out.residual_history[n_max];

  // Spectral radius of Sigma_B D by power iteration (deterministic start).
  {
    Stream st(0x5052ULL, 0, 0x706f77ULL);
    VecC v(n);
    for (int i = 0; i < n; ++i) v[i] = cplx(st.normal(), st.normal());
    v /= v.norm();
    double lambda = 0.0;
    for (int it = 0; it < 400; ++it) {
      VecC w = sys.sigma_b * (d.asDiagonal() * v).eval();
      const double nw = w.norm();
      if (nw == 0.0) {
        lambda = 0.0;
        break;
      }
      lambda = nw;
      v = w / nw;
    }
    out.spectral_radius = lambda;
  }

  // Divergence: spectral radius at (or beyond) 1, or residual growth.
  bool growing = false;
  if (n_max >= 8) {
    const double early = out.residual_history.segment(n_max / 2, 2).mean();
    const double late = out.residual_history.tail(2).mean();
    growing = late > early && late > 1e-9;
  }
  out.diverged = out.spectral_radius >= 1.0 - 1e-9 || growing;
  return out;
}

ClassicalSpectrum classical_map_gap(const ScatteringSystem& sys) {
  const MatR m = sys.sigma_b.cwiseAbs2();
  Eigen::EigenSolver<MatR> es(m, /*computeEigenvectors=*/false);
  VecC ev = es.eigenvalues();
  std::vector<int> order(ev.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(ev[a]), mb = std::abs(ev[b]);
    if (ma != mb) return ma > mb;
    return std::arg(ev[a]) < std::arg(ev[b]);  // deterministic tie-break
  });
  ClassicalSpectrum out;
  out.spectrum = VecC(ev.size());
  for (std::size_t i = 0; i < order.size(); ++i) out.spectrum[i] = ev[order[i]];
  out.gap = ev.size() >= 2 ? std::abs(out.spectrum[0]) - std::abs(out.spectrum[1]) : 0.0;
  return out;
}

}  // namespace qgraph

#include "qgraph/vertex.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace qgraph {

cplx VertexMatrix::rho() const {
  if (!has_lead) throw std::logic_error("VertexMatrix::rho: vertex has no lead");
  return gamma(0, 0);
}

VecC VertexMatrix::tau() const {
  if (!has_lead) throw std::logic_error("VertexMatrix::tau: vertex has no lead");
  return gamma.row(0).tail(bond_valency()).transpose();
}

MatC VertexMatrix::sigma() const {
  const int nb = bond_valency();
  const int off = has_lead ? 1 : 0;
  return gamma.block(off, off, nb, nb);
}

double VertexMatrix::transmission() const { return 1.0 - std::norm(rho()); }

// ---- builders ----

VertexMatrix build_kirchhoff_vertex(int valency_total, bool has_lead,
                                    int vertex_index) {
  if (valency_total < 1)
    throw std::invalid_argument("build_kirchhoff_vertex: valency_total must be >= 1");
  const int v = valency_total;
  VertexMatrix m;
  m.vertex = vertex_index;
  m.has_lead = has_lead;
  m.gamma = MatC::Constant(v, v, cplx(2.0 / v, 0.0));
  m.gamma.diagonal().array() -= 1.0;

  // sigma = (2/v) J - I on the bond block: zeta = -1, one term c = 2/v, w = 1.
  const int nb = v - (has_lead ? 1 : 0);
  LowRankBlock lr;
  lr.unit_scale = cplx(-1.0, 0.0);
  lr.coeff = VecC::Constant(1, cplx(-2.0 / v, 0.0));  // -(2/v) relative to -I
  lr.w = MatC::Constant(nb, 1, cplx(1.0, 0.0));
  m.low_rank = std::move(lr);
  return m;
}

VertexMatrix build_canonical_vertex(int valency_total, double t_coeff,
                                    const VecR& phases, std::uint64_t mixer_seed,
                                    int vertex_index) {
  if (!(t_coeff >= 0.0 && t_coeff <= 1.0))
    throw std::invalid_argument("build_canonical_vertex: t_coeff must be in [0,1]");
  const int v = valency_total;
  if (v < 1) throw std::invalid_argument("build_canonical_vertex: valency_total must be >= 1");
  if (phases.size() != 0 && phases.size() != v - 1)
    throw std::invalid_argument("build_canonical_vertex: phases must have length valency_total - 1");
  if (v == 1 && t_coeff != 0.0)
    throw std::invalid_argument("build_canonical_vertex: a lead with no bonds requires t_coeff = 0");

  const double rho = std::sqrt(1.0 - t_coeff);
  const double root_t = std::sqrt(t_coeff);
  const double phi1 = phases.size() ? phases[0] : 0.0;

  MatC core = MatC::Zero(v, v);
  core(0, 0) = rho;
  if (v >= 2) {
    const cplx e1 = std::exp(-kI * phi1);
    core(0, 1) = core(1, 0) = e1 * root_t;
    core(1, 1) = -rho * e1 * e1;
    for (int j = 2; j < v; ++j)
      core(j, j) = std::exp(kI * (phases.size() ? phases[j - 1] : 0.0));
  }

  VertexMatrix m;
  m.vertex = vertex_index;
  m.has_lead = true;
  const int nb = v - 1;
  if (nb >= 2) {
    Stream st(mixer_seed, 0, /*salt=*/0x6d697831ULL);
    const MatR o = haar_orthogonal(nb, st);
    MatC full = MatC::Identity(v, v);
    full.block(1, 1, nb, nb) = o.cast<cplx>();
    m.gamma = full * core * full.transpose();
    m.gamma = 0.5 * (m.gamma + m.gamma.transpose().eval());  // exact symmetry

    // Bond block is O * diag(-rho e^{-2i phi1}, e^{i phi_mu}) * O^T, i.e.
    // zeta (I + sum_j c_j w_j w_j^T) with w_j the mixer columns whose diagonal
    // entry differs from zeta.  Choosing zeta as the most frequent diagonal
    // value keeps the rank at the number of deviating directions (one for
    // uniform phases, ~half the valency for a balanced 0/pi pattern).
    VecC diag(nb);
    diag[0] = -rho * std::exp(-2.0 * kI * phi1);
    for (int j = 2; j < v; ++j)
      diag[j - 1] = std::exp(kI * (phases.size() ? phases[j - 1] : 0.0));
    cplx zeta = diag[nb - 1];
    int best = 0;
    for (int j = 0; j < nb; ++j) {
      int count = 0;
      for (int k = 0; k < nb; ++k)
        if (diag[k] == diag[j]) ++count;
      if (count > best) { best = count; zeta = diag[j]; }
    }
    std::vector<int> dev;
    for (int j = 0; j < nb; ++j)
      if (diag[j] != zeta) dev.push_back(j);
    LowRankBlock lr;
    lr.unit_scale = zeta;
    lr.coeff = VecC(dev.size());
    lr.w = MatC(nb, dev.size());
    for (std::size_t j = 0; j < dev.size(); ++j) {
      lr.coeff[static_cast<int>(j)] = diag[dev[j]] / zeta - 1.0;
      lr.w.col(static_cast<int>(j)) = o.col(dev[j]).cast<cplx>();
    }
    m.low_rank = std::move(lr);
  } else {
    m.gamma = core;
    if (nb == 1) {
      LowRankBlock lr;
      lr.unit_scale = core(1, 1) == cplx(0.0, 0.0) ? cplx(1.0, 0.0) : core(1, 1) / std::abs(core(1, 1));
      lr.coeff = VecC::Constant(1, core(1, 1) / lr.unit_scale - 1.0);
      lr.w = MatC::Constant(1, 1, cplx(1.0, 0.0));
      m.low_rank = std::move(lr);
    } else {
      LowRankBlock lr;  // no bonds: empty structure
      lr.coeff = VecC(0);
      lr.w = MatC(0, 0);
      m.low_rank = std::move(lr);
    }
  }
  return m;
}

VertexMatrix build_designed_vertex(int valency, std::uint64_t seed, int vertex_index) {
  if (valency < 1) throw std::invalid_argument("build_designed_vertex: valency must be >= 1");
  Stream st(seed, 0, /*salt=*/0x64657331ULL);
  MatR a(valency, valency);
  for (int i = 0; i < valency; ++i) {
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = st.normal();
  }
  Eigen::SelfAdjointEigenSolver<MatR> es(a);
  const MatR& q = es.eigenvectors();
  VecC ph(valency);
  for (int i = 0; i < valency; ++i) ph[i] = std::exp(kI * es.eigenvalues()[i]);
  VertexMatrix m;
  m.vertex = vertex_index;
  m.has_lead = false;
  m.gamma = q.cast<cplx>() * ph.asDiagonal() * q.transpose().cast<cplx>();
  m.gamma = 0.5 * (m.gamma + m.gamma.transpose().eval());
  return m;
}

VertexMatrix build_reflector_vertex(int valency, int rank, std::uint64_t seed,
                                    int vertex_index) {
  if (valency < 1) throw std::invalid_argument("build_reflector_vertex: valency must be >= 1");
  if (rank < 1 || rank > valency)
    throw std::invalid_argument("build_reflector_vertex: need 1 <= rank <= valency");
  Stream st(seed, 0, /*salt=*/0x72656631ULL);
  const MatR o = haar_orthogonal(valency, st);
  const MatR w = o.leftCols(rank);
  VertexMatrix m;
  m.vertex = vertex_index;
  m.has_lead = false;
  m.gamma = (MatR::Identity(valency, valency) - 2.0 * w * w.transpose()).cast<cplx>();
  LowRankBlock lr;
  lr.unit_scale = cplx(1.0, 0.0);
  lr.coeff = VecC::Constant(rank, cplx(-2.0, 0.0));
  lr.w = w.cast<cplx>();
  m.low_rank = std::move(lr);
  return m;
}

// ---- validation ----

VertexReport validate_vertex(const VertexMatrix& m) {
  VertexReport r;
  const int n = m.total_valency();
  const MatC g = m.gamma;
  r.unitarity_residual = (g.adjoint() * g - MatC::Identity(n, n)).cwiseAbs().maxCoeff();
  r.symmetry_residual = (g - g.transpose()).cwiseAbs().maxCoeff();
  const MatC s = m.sigma();
  if (s.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<MatC> es(s * s.adjoint());
    r.sigma_gram_spectrum = es.eigenvalues();
  } else {
    r.sigma_gram_spectrum = VecR(0);
  }
  if (m.low_rank) {
    const auto& lr = *m.low_rank;
    MatC rebuilt = MatC::Identity(s.rows(), s.cols());
    for (int j = 0; j < lr.coeff.size(); ++j)
      rebuilt += lr.coeff[j] * lr.w.col(j) * lr.w.col(j).transpose();
    rebuilt *= lr.unit_scale;
    r.low_rank_residual = s.rows() > 0 ? (s - rebuilt).cwiseAbs().maxCoeff() : 0.0;
  }
  r.ok = r.unitarity_residual < 1e-10 && r.symmetry_residual < 1e-10 &&
         r.low_rank_residual < 1e-10;
  return r;
}

MatR haar_orthogonal(int n, Stream& st) {
  MatR g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = st.normal();
  }
  Eigen::HouseholderQR<MatR> qr(g);
  MatR q = qr.householderQ();
  const MatR r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace qgraph

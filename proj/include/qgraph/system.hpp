#pragma once

// Assembled scattering system: the 2B x 2B bond matrix Sigma_B, the channel
// coupling matrix, and evaluation of the exact channel S-matrix
//
//   S = diag(rho) + T R D (I - Sigma_B D)^{-1} T^t
//
// with D = diag(e^{i(phi_b + kappa L_b)}) on directed bonds and R the
// direction-flip involution (amplitudes are extracted from bonds arriving at
// the lead vertex; R maps the departing-bond support of T onto them).  The
// dense complex solve is the reference evaluator; systems whose vertices all
// carry low-rank bond blocks also support an algebraically exact
// Woodbury-style fast path used by the Monte Carlo estimators.

#include <stdexcept>
#include <vector>

#include "qgraph/graph.hpp"
#include "qgraph/types.hpp"
#include "qgraph/vertex.hpp"

namespace qgraph {

// Thrown when a linear solve is too ill-conditioned to trust (resonance-pole
// near-hit); Monte Carlo callers reject and resample.
struct SolveError : std::runtime_error {
  explicit SolveError(const std::string& what, double rcond_estimate)
      : std::runtime_error(what), rcond(rcond_estimate) {}
  double rcond = 0.0;
};

// Sparse column of one low-rank term, embedded in directed-bond space.
struct LowRankTerm {
  cplx coeff;
  std::vector<std::pair<int, cplx>> entries;  // (directed index, w component)
};

struct ScatteringSystem {
  GraphSpec graph;
  std::vector<VertexMatrix> vertices;

  MatC sigma_b;           // 2B x 2B bond scattering matrix
  MatC coupling;          // Lambda x 2B, row = channel, support on departing bonds
  MatC coupling_arrive;   // coupling with columns permuted by the flip (T R)
  VecR lengths_directed;  // 2B, pairwise equal across directions of one bond
  VecC rho_diag;          // Lambda
  VecR transmissions;     // Lambda
  std::vector<int> flip;  // directed-bond involution

  // Fast-path data; valid when has_low_rank.
  bool has_low_rank = false;
  VecC lr_unit;                      // per directed bond i: zeta of tail vertex
  std::vector<LowRankTerm> lr_terms; // all vertices' terms, vertex-major order

  int num_directed() const { return static_cast<int>(flip.size()); }
  int num_channels() const { return static_cast<int>(rho_diag.size()); }
};

ScatteringSystem assemble_system(const GraphSpec& g,
                                 const std::vector<VertexMatrix>& vs);

struct SMatrixSample {
  MatC s;       // Lambda x Lambda
  VecR phases;  // the B phase draws
  double offset = 0.0;
  double rcond = 0.0;  // reciprocal condition estimate of the solve
};

// Reciprocal-condition rejection threshold (condition number 1e12).
inline constexpr double kRcondReject = 1e-12;

// Dense reference evaluation; one complex LU solve of size 2B.
SMatrixSample evaluate_s(const ScatteringSystem& sys, const VecR& phases,
                         double offset);

// Low-rank fast path returning the fluctuating part S - diag(rho); requires
// has_low_rank.  Exactly equivalent to the dense path (see tests).
MatC evaluate_sfl_fast(const ScatteringSystem& sys, const VecR& phases,
                       double offset);

// Fluctuating S via the best available path.
MatC evaluate_sfl(const ScatteringSystem& sys, const VecR& phases, double offset);

// ---- diagnostics ----

struct TrajectoryResult {
  SMatrixSample sample;          // the partial sum after n_max terms
  double residual = 0.0;         // Frobenius distance to the exact S
  VecR residual_history;         // residual after each term count 0..n_max
  bool diverged = false;         // residual failed to decay
  double spectral_radius = 0.0;  // of Sigma_B D, by power iteration
};

// Partial sums of the multiple-scattering (trajectory) expansion
//   diag(rho) + sum_{n=0..n_max} T R D (Sigma_B D)^n T^t.
TrajectoryResult trajectory_sum(const ScatteringSystem& sys, const VecR& phases,
                                double offset, int n_max);

struct ClassicalSpectrum {
  VecC spectrum;  // eigenvalues of M_ij = |Sigma_B_ij|^2, by descending modulus
  double gap = 0.0;  // |lambda_1| - |lambda_2|
};

// Spectrum of the classical (doubly substochastic) map; the gap between the
// two largest eigenvalue moduli is the quantum-ergodicity proxy.
ClassicalSpectrum classical_map_gap(const ScatteringSystem& sys);

}  // namespace qgraph

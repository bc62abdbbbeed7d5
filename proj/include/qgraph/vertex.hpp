#pragma once

// Vertex scattering matrices: unitary symmetric matrices mapping incoming to
// outgoing amplitudes at a vertex.  Families:
//   - kirchhoff:   Gamma_ij = 2/v - delta_ij (real, the standard boundary
//                  condition; backscatter rho = 2/v - 1 may be negative).
//   - canonical:   lead vertex with designed transmission T = 1 - rho^2,
//                  rho = +sqrt(1 - t_coeff), conjugated by a seeded random
//                  orthogonal mixer on the bond indices.
//   - designed:    lead-free generic vertex Gamma = exp(iA), A random real
//                  symmetric (seeded).
//   - reflector:   lead-free vertex sigma = I - 2WW^T with W a seeded random
//                  orthonormal v x k frame; strong mixing at low rank.
//
// When the bond block sigma has the form zeta*(I + sum_j c_j w_j w_j^T) the
// builder records it; the bond-propagator uses that structure for a fast
// low-rank solve path (algebraically exact, equivalence-tested against the
// dense path).

#include <cstdint>
#include <optional>
#include <vector>

#include "qgraph/rng.hpp"
#include "qgraph/types.hpp"

namespace qgraph {

// Bond block written as unit_scale * (I + sum_j coeff[j] * w_j w_j^T),
// |unit_scale| = 1, w_j = w.col(j).
struct LowRankBlock {
  cplx unit_scale{1.0, 0.0};
  VecC coeff;  // k entries
  MatC w;      // bond_valency x k
};

struct VertexMatrix {
  int vertex = 0;
  bool has_lead = false;
  MatC gamma;  // (bond_valency + has_lead) square; lead index 0 when present
  std::optional<LowRankBlock> low_rank;

  int total_valency() const { return static_cast<int>(gamma.rows()); }
  int bond_valency() const { return total_valency() - (has_lead ? 1 : 0); }

  cplx rho() const;          // Gamma_{lead,lead}; requires has_lead
  VecC tau() const;          // lead <-> bond couplings; requires has_lead
  MatC sigma() const;        // bond <-> bond block
  double transmission() const;  // 1 - |rho|^2
};

// ---- builders ----

VertexMatrix build_kirchhoff_vertex(int valency_total, bool has_lead,
                                    int vertex_index = 0);

// phases: size valency_total - 1 = (phi_1, phi_mu for mu = 2..v-1); empty
// means all zero.  rho = +sqrt(1 - t_coeff).
VertexMatrix build_canonical_vertex(int valency_total, double t_coeff,
                                    const VecR& phases, std::uint64_t mixer_seed,
                                    int vertex_index = 0);

VertexMatrix build_designed_vertex(int valency, std::uint64_t seed,
                                   int vertex_index = 0);

VertexMatrix build_reflector_vertex(int valency, int rank, std::uint64_t seed,
                                    int vertex_index = 0);

// ---- validation ----

struct VertexReport {
  double unitarity_residual = 0.0;   // max |(G^dag G - I)_ij|
  double symmetry_residual = 0.0;    // max |(G - G^T)_ij|
  VecR sigma_gram_spectrum;          // eigenvalues of sigma sigma^dag, ascending
  double low_rank_residual = 0.0;    // ||sigma - rebuilt|| when structure present
  bool ok = false;                   // residuals below 1e-10
};

VertexReport validate_vertex(const VertexMatrix& m);

// Haar-like random real orthogonal matrix (QR of a Gaussian matrix with the
// R-diagonal sign fix); deterministic per stream.
MatR haar_orthogonal(int n, Stream& st);

}  // namespace qgraph

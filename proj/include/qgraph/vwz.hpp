#pragma once

// Exact random-matrix two-point function as a three-fold integral over
// radial supersymmetric coordinates, evaluated by graded tensor quadrature
// with panel refinement.  Serves as a second, Monte-Carlo-free oracle for
// the two-point correlator at arbitrary absorption.

#include <array>
#include <string>

#include "qgraph/types.hpp"

namespace qgraph {

struct VwzOptions {
  double tol_rel = 2e-4;   // relative agreement required between levels
  double tol_abs = 1e-10;  // absolute floor for near-zero values
  int gl_order = 14;       // Gauss-Legendre order per panel
  int max_panels = 14;     // refinement cap (panels per dimension)
};

// <Sfl_ab(x/2) conj(Sfl_cd(-x/2))> where x = 2 pi d_mean (kappa + kappa_t)
// is the dimensionless offset.  channels = {a, b, c, d}; s_means are the
// per-channel mean diagonal elements (defaulted to +sqrt(1 - T) when empty,
// the resonance-model convention).  Throws std::runtime_error with the
// refinement trace if the quadrature fails to settle.
cplx vwz_two_point(const VecR& T, const std::array<int, 4>& channels,
                   double scaled_offset, const VecC& s_means = VecC(),
                   const VwzOptions& opt = VwzOptions());

}  // namespace qgraph

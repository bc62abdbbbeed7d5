#pragma once

// Independent random-matrix oracle: a resonance model with a GOE Hamiltonian
// and fixed coupling vectors, used to cross-check the graph's two-point
// function.  One symmetric eigensolve per matrix draw provides S at any
// number of energies cheaply through the K-matrix (Cayley) form.

#include <cstdint>
#include <string>

#include "qgraph/correlator.hpp"
#include "qgraph/types.hpp"

namespace qgraph {

struct GoeModel {
  int dim = 0;              // Hamiltonian dimension N
  VecR couplings;           // per-channel strengths w_c (columns w_c * e_c)
  double energy_center = 0.0;
  std::uint64_t seed = 0;

  int num_channels() const { return static_cast<int>(couplings.size()); }
  // Mean level spacing at band center for the normalization used here
  // (semicircle support [-2, 2]): D = pi / N.
  double mean_spacing() const { return kPi / dim; }
};

// One Hamiltonian draw reduced to what S needs: eigenvalues and the coupling
// matrix rotated into the eigenbasis, p(c, n) = w_c * <e_c | v_n>.
struct GoeDraw {
  VecR eigenvalues;
  MatR p;  // Lambda x N
};

// Deterministic GOE sample: entry variances 1/N off the diagonal and 2/N on
// it, indexed by (seed, draw_index, salt).
MatR goe_sample_h(const GoeModel& model, std::uint64_t draw_index,
                  std::uint64_t salt = 0);

GoeDraw goe_draw(const GoeModel& model, std::uint64_t draw_index,
                 std::uint64_t salt = 0);

// S(E) from a draw via the K-matrix: K = p diag(1/(E - lambda)) p^T,
// S = (I - i pi K)(I + i pi K)^(-1); unitary and symmetric by construction.
// energy_offset is measured in units of the mean spacing.  Throws SolveError
// if the energy sits on an eigenvalue (caller resamples).
MatC goe_s_at(const GoeModel& model, const GoeDraw& draw, double energy_offset);

// Same S through the direct resolvent S = I - 2 pi i W^T (E - H + i pi W W^T)^(-1) W,
// used to validate the K-matrix route.
MatC goe_s_direct(const GoeModel& model, const MatR& h, double energy_offset);

// Spec'd sampling entry point: one draw, one energy.
MatC goe_sample_s(const GoeModel& model, double energy_offset,
                  std::uint64_t draw_index = 0);

// Ensemble mean of the diagonal S elements, averaged over draws and a comb
// of energies spread across the band center.
struct GoeMeanS {
  VecC mean;      // per channel
  VecR se;        // combined per-channel standard error
  long n_draws = 0;
  long rejected = 0;
};

GoeMeanS goe_mean_s(const GoeModel& model, long n_draws, std::uint64_t salt,
                    int workers = 0, int n_batches = 50);

// Coupling calibration: root-find strengths so that |<S_cc>|^2 = 1 - T_c
// within 0.01, using common random numbers across secant iterations and an
// independent confirmation measurement.  Throws std::runtime_error with the
// iteration trace on non-convergence (50 iteration cap).
struct CalibrationRecord {
  GoeModel model;
  VecR target_t, achieved_t;
  VecC mean_s;          // confirmed mean diagonal
  int iterations = 0;
  long draws_per_iter = 0;
  std::string trace;
};

CalibrationRecord goe_calibrate(const VecR& target_t, int dim,
                                std::uint64_t seed,
                                long draws_per_iter = 1500, int workers = 0);

// Connected two-point curve <S_ab(E+) conj(S_ab(E-))> - <S_ab><S_ab>* on a
// grid of dimensionless offsets x = 2 pi (E+ - E-) / D, averaged over draws
// and several base energies per draw.
struct GoeTwoPoint {
  VecR x;
  VecC value;
  VecR se_re, se_im, se_total;
  long n_draws = 0;
  long rejected = 0;
};

GoeTwoPoint goe_two_point(const GoeModel& model, int row, int col,
                          const VecR& x_grid, long n_draws,
                          std::uint64_t salt, int workers = 0,
                          int n_batches = 50);

}  // namespace qgraph

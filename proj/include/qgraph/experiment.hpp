#pragma once

// Orchestration: JSON experiment configs, system construction from configs,
// the full artifact-directory pipeline (estimates, predictions, oracle
// comparison, diagnostics, manifest with checksums), and the named
// verification suites behind the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgraph/correlator.hpp"
#include "qgraph/goe.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/system.hpp"
#include "qgraph/theory.hpp"

#include <json.hpp>

namespace qgraph {

// Config schema violation; the message carries the JSON path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorrelatorJob {
  std::string label;
  std::vector<OffsetTerm> p_terms, q_terms;
  long samples = 10000;
  int batches = 50;
  // none: record only.  ericson / zero: z-test against the closed form / 0.
  // ericson-rel: relative window, for strong-absorption asymptotics whose
  // finite-sum(T) deviation from the exact average exceeds Monte Carlo errors.
  std::string compare = "none";
  double z_limit = 3.0;
  double rel_tol = 0.10;  // used by ericson-rel
};

struct SweepJob {
  std::string label;
  int row = 0, col = 1;
  VecR x_values;  // dimensionless offsets x = 2 pi d (kappa + kappa_t)
  long samples = 10000;
  int batches = 50;
  bool fit_width = false;     // Lorentzian fit of |C|^2 against the width law
  double width_tol = 0.10;
};

struct MeanSJob {
  bool enabled = false;
  long samples = 10000;
  int batches = 50;
  double z_limit = 4.0;
};

struct DistributionJob {
  bool enabled = false;
  int row = 0, col = 1;
  long samples = 10000;
  int bins = 81;
  int batches = 50;
};

struct OracleJob {
  bool enabled = false;
  int dim = 400;
  long draws = 20000;
  long calibration_draws = 1500;
  int row = 0, col = 1;
  VecR x_values;
  std::string compare_sweep;  // label of the graph sweep to z-score against
  double z_limit = 3.0;
};

struct DiagnosticsJob {
  bool gap = false;
  int trajectory_terms = 0;  // 0 = skip
  bool dump_sigma = false;
  long ksweep_points = 0;    // 0 = skip
  double ksweep_k0 = 100.0;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 1;
  int workers = 0;  // execution hint only; never recorded in artifacts

  // Graph.
  int vertices = 2, leads = 1;
  double length_min = 1.0, length_max = 2.0;

  // Vertex families.
  std::string lead_family = "canonical";  // canonical | kirchhoff
  std::string bulk_family = "kirchhoff";  // kirchhoff | designed | reflector
  VecR t_coeff;                           // per channel (canonical leads)
  double phases_phi1 = 0.0;
  std::string lead_phases = "none";       // none | alternating (0/pi pattern)
  std::uint64_t mixer_seed = 0;
  int reflector_rank = 2;

  // Work items.
  std::vector<CorrelatorJob> correlators;
  std::vector<SweepJob> sweeps;
  MeanSJob mean_s;
  DistributionJob distribution;
  OracleJob oracle;
  DiagnosticsJob diagnostics;
  bool check_swap = false;  // two-vertex exact swap-matrix check

  // Echo used in manifests: schema-normalized, execution hints stripped.
  nlohmann::json normalized() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct BuiltSystem {
  GraphSpec graph;
  std::vector<VertexMatrix> vertices;
  ScatteringSystem system;
};

BuiltSystem build_system_from_config(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::filesystem::path dir;
  bool passed = false;   // complete and every declared check passed
  std::string status;    // "complete" or "partial"
  std::vector<std::string> notes;  // one line per check
};

ExperimentResult run_experiment(const std::filesystem::path& config_path,
                                const std::filesystem::path& out_dir = {},
                                std::optional<std::uint64_t> seed_override = {},
                                int workers_override = 0,
                                std::optional<long> samples_override = {});

// Same pipeline for an already-parsed (possibly restricted) configuration.
ExperimentResult run_experiment_config(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_dir = {});

// ---- verification suites ----

struct VerifyReport {
  std::string suite;
  bool passed = false;
  std::vector<std::string> lines;
};

// suite in {unitarity, mean-s, two-point, ericson, gap, trajectories};
// unknown names throw ConfigError (usage error at the CLI).
VerifyReport verify_suite(const std::string& suite, int workers = 0);

// Shared battery: n random systems spanning sizes and vertex families,
// several phase samples each, maximum unitarity and symmetry residuals.
struct UnitarityBattery {
  double max_unitarity = 0.0;
  double max_symmetry = 0.0;
  int systems = 0;
  int samples_each = 0;
};

UnitarityBattery run_unitarity_battery(int n_systems, int samples_each,
                                       std::uint64_t seed);

// Deterministic random test system (size, families, couplings all drawn from
// the seeded stream); index selects the draw.
BuiltSystem random_system(std::uint64_t seed, int index);

}  // namespace qgraph

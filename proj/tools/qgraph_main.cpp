// Command-line driver around the qgraph library.
//
// Subcommands:
//   generate   build a system from a config and write graph/system artifacts
//   smatrix    evaluate one exact S-matrix sample and report residuals
//   correlate  run the Monte Carlo sections of a config (no oracle)
//   predict    emit closed-form and integral predictions, no Monte Carlo
//   oracle     run only the random-matrix oracle section of a config
//   diagnose   classical map gap, trajectory sums, wave-number sweep
//   verify     named invariant batteries (unitarity, mean-s, two-point, ...)
//   run        the full experiment pipeline with comparison report
//
// Exit codes: 0 pass, 1 test failure, 2 usage/config error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qgraph/correlator.hpp"
#include "qgraph/experiment.hpp"
#include "qgraph/io.hpp"
#include "qgraph/theory.hpp"
#include "qgraph/vwz.hpp"

namespace {

using namespace qgraph;
namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long> samples;
  int workers = 0;
};

void add_common(CLI::App* sub, CommonArgs& args, bool need_config,
                bool with_samples = true) {
  auto* c = sub->add_option("--config", args.config, "experiment config (JSON)");
  if (need_config) c->required();
  sub->add_option("--out", args.out, "output directory");
  sub->add_option("--seed", args.seed, "override the config seed");
  if (with_samples)
    sub->add_option("--samples", args.samples, "override per-job sample counts");
  sub->add_option("--workers", args.workers,
                  "worker threads (0 = QGRAPH_WORKERS or hardware)");
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (args.workers > 0) cfg.workers = args.workers;
  if (args.samples) {
    for (CorrelatorJob& c : cfg.correlators) c.samples = *args.samples;
    for (SweepJob& s : cfg.sweeps) s.samples = *args.samples;
    if (cfg.mean_s.enabled) cfg.mean_s.samples = *args.samples;
    if (cfg.distribution.enabled) cfg.distribution.samples = *args.samples;
  }
  return cfg;
}

int report_result(const ExperimentResult& result) {
  for (const std::string& line : result.notes) std::cout << line << "\n";
  std::cout << "status: " << result.status << "\n";
  std::cout << "artifacts: " << result.dir.string() << "\n";
  return result.passed ? 0 : 1;
}

int cmd_generate(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  cfg.correlators.clear();
  cfg.sweeps.clear();
  cfg.mean_s = MeanSJob{};
  cfg.distribution = DistributionJob{};
  cfg.oracle = OracleJob{};
  cfg.diagnostics = DiagnosticsJob{};
  return report_result(run_experiment_config(cfg, args.out));
}

int cmd_smatrix(const CommonArgs& args, double kappa) {
  const ExperimentConfig cfg = [&] {
    ExperimentConfig c = load_config(args.config);
    if (args.seed) c.seed = *args.seed;
    return c;
  }();
  const BuiltSystem bs = build_system_from_config(cfg);
  Stream st(cfg.seed, 0, 0x736d7478ULL);
  const VecR phases = sample_phases(bs.graph, st);
  const SMatrixSample smp = evaluate_s(bs.system, phases, kappa);
  const int lam = bs.system.num_channels();
  const MatC eye = MatC::Identity(lam, lam);
  const double unit = (smp.s.adjoint() * smp.s - eye).cwiseAbs().maxCoeff();
  const double symm = (smp.s - smp.s.transpose()).cwiseAbs().maxCoeff();
  std::cout << "channels: " << lam << "  offset: " << format_g17(kappa) << "\n";
  std::cout << "unitarity residual: " << format_g17(unit) << "\n";
  std::cout << "symmetry residual:  " << format_g17(symm) << "\n";
  for (int r = 0; r < lam; ++r) {
    for (int c = 0; c < lam; ++c)
      std::printf("  (% .10f, % .10f)", smp.s(r, c).real(), smp.s(r, c).imag());
    std::printf("\n");
  }
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    nlohmann::json j;
    j["offset"] = kappa;
    j["unitarity_residual"] = unit;
    j["symmetry_residual"] = symm;
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < lam; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < lam; ++c) row.push_back(cplx_to_json(smp.s(r, c)));
      rows.push_back(row);
    }
    j["s"] = rows;
    nlohmann::json ph = nlohmann::json::array();
    for (int b = 0; b < phases.size(); ++b) ph.push_back(hex_encode(phases(b)));
    j["phases_hex"] = ph;
    write_text_file(fs::path(args.out) / "s_matrix.json", j.dump(2) + "\n");
    std::cout << "wrote " << (fs::path(args.out) / "s_matrix.json").string() << "\n";
  }
  return unit < 1e-9 && symm < 1e-12 ? 0 : 1;
}

int cmd_correlate(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  cfg.oracle = OracleJob{};
  cfg.diagnostics = DiagnosticsJob{};
  return report_result(run_experiment_config(cfg, args.out));
}

int cmd_predict(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  const BuiltSystem bs = build_system_from_config(cfg);
  const double d_mean = mean_level_density(bs.graph);
  const VecR& trans = bs.system.transmissions;
  const VecC& s_means = bs.system.rho_diag;
  const fs::path dir = args.out.empty() ? fs::path(cfg.name + "-predict")
                                        : fs::path(args.out);
  fs::create_directories(dir);

  std::string csv = "label,p_spec,q_spec,re,im\n";
  for (const CorrelatorJob& job : cfg.correlators) {
    const cplx pred = ericson_pq(job.p_terms, job.q_terms, trans, d_mean, s_means);
    auto compact = [](const std::vector<OffsetTerm>& terms) {
      std::string s;
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) s += "|";
        s += std::to_string(terms[i].row) + "-" + std::to_string(terms[i].col) +
             "@" + format_g17(terms[i].kappa);
      }
      return s.empty() ? std::string("-") : s;
    };
    csv += job.label + "," + compact(job.p_terms) + "," + compact(job.q_terms) +
           "," + format_g17(pred.real()) + "," + format_g17(pred.imag()) + "\n";
    std::cout << job.label << ": (" << format_g17(pred.real()) << ", "
              << format_g17(pred.imag()) << ")\n";
  }
  const double width = ericson_width(trans, d_mean);
  csv += "width,-,-," + format_g17(width) + ",0\n";
  std::cout << "correlation half-width: " << format_g17(width) << "\n";
  write_text_file(dir / "predictions.csv", csv);

  // Exact-integral two-point curve on each sweep grid.
  for (const SweepJob& job : cfg.sweeps) {
    std::vector<std::vector<double>> rows;
    for (int p = 0; p < job.x_values.size(); ++p) {
      const cplx v = vwz_two_point(
          trans, {job.row, job.col, job.row, job.col}, job.x_values(p), s_means);
      rows.push_back({job.x_values(p), v.real(), v.imag()});
    }
    write_csv(dir / ("integral_" + job.label + ".csv"), {"x", "re", "im"}, rows);
    std::cout << "integral curve '" << job.label << "': "
              << job.x_values.size() << " points\n";
  }
  std::cout << "artifacts: " << dir.string() << "\n";
  return 0;
}

int cmd_oracle(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  if (!cfg.oracle.enabled)
    throw ConfigError("config has no oracle section");
  cfg.correlators.clear();
  cfg.sweeps.clear();
  cfg.mean_s = MeanSJob{};
  cfg.distribution = DistributionJob{};
  cfg.diagnostics = DiagnosticsJob{};
  cfg.check_swap = false;
  cfg.oracle.compare_sweep.clear();
  return report_result(run_experiment_config(cfg, args.out));
}

int cmd_diagnose(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  cfg.correlators.clear();
  cfg.sweeps.clear();
  cfg.mean_s = MeanSJob{};
  cfg.distribution = DistributionJob{};
  cfg.oracle = OracleJob{};
  cfg.check_swap = false;
  if (!cfg.diagnostics.gap && cfg.diagnostics.trajectory_terms == 0 &&
      cfg.diagnostics.ksweep_points == 0 && !cfg.diagnostics.dump_sigma) {
    cfg.diagnostics.gap = true;
    cfg.diagnostics.trajectory_terms = 60;
  }
  return report_result(run_experiment_config(cfg, args.out));
}

int cmd_verify(const std::vector<std::string>& suites, int workers) {
  static const std::vector<std::string> kAll = {
      "unitarity", "mean-s", "two-point", "ericson", "gap", "trajectories"};
  const std::vector<std::string>& list = suites.empty() ? kAll : suites;
  bool all_ok = true;
  for (const std::string& name : list) {
    const VerifyReport rep = verify_suite(name, workers);
    for (const std::string& line : rep.lines)
      std::cout << "[" << rep.suite << "] " << line << "\n";
    all_ok = all_ok && rep.passed;
  }
  std::cout << (all_ok ? "verify: all suites passed"
                       : "verify: at least one suite failed")
            << "\n";
  return all_ok ? 0 : 1;
}

int cmd_run(const CommonArgs& args) {
  return report_result(run_experiment(args.config, args.out, args.seed,
                                      args.workers, args.samples));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chaotic scattering on open quantum graphs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonArgs gen_args, smx_args, cor_args, prd_args, orc_args, dia_args, run_args;
  double kappa = 0.0;
  std::vector<std::string> suites;
  int verify_workers = 0;

  CLI::App* gen = app.add_subcommand("generate", "build and validate a system");
  add_common(gen, gen_args, true, false);

  CLI::App* smx = app.add_subcommand("smatrix", "one exact S-matrix sample");
  add_common(smx, smx_args, true, false);
  smx->add_option("--kappa", kappa, "wave-number offset");

  CLI::App* cor = app.add_subcommand("correlate", "Monte Carlo sections only");
  add_common(cor, cor_args, true);

  CLI::App* prd = app.add_subcommand("predict", "closed-form predictions only");
  add_common(prd, prd_args, true, false);

  CLI::App* orc = app.add_subcommand("oracle", "random-matrix oracle only");
  add_common(orc, orc_args, true);

  CLI::App* dia = app.add_subcommand("diagnose", "classical map diagnostics");
  add_common(dia, dia_args, true, false);

  CLI::App* ver = app.add_subcommand("verify", "invariant batteries");
  ver->add_option("suites", suites,
                  "unitarity, mean-s, two-point, ericson, gap, trajectories");
  ver->add_option("--workers", verify_workers, "worker threads");

  CLI::App* run = app.add_subcommand("run", "full experiment pipeline");
  add_common(run, run_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_generate(gen_args);
    if (*smx) return cmd_smatrix(smx_args, kappa);
    if (*cor) return cmd_correlate(cor_args);
    if (*prd) return cmd_predict(prd_args);
    if (*orc) return cmd_oracle(orc_args);
    if (*dia) return cmd_diagnose(dia_args);
    if (*ver) return cmd_verify(suites, verify_workers);
    if (*run) return cmd_run(run_args);
  } catch (const qgraph::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

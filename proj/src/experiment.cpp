#include "qgraph/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qgraph/io.hpp"
#include "qgraph/vwz.hpp"

namespace qgraph {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void fail_at(const std::string& path, const std::string& what) {
  throw ConfigError("config error at " + path + ": " + what);
}

const json* find_key(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require_key(const json& obj, const char* key,
                        const std::string& path) {
  if (!obj.is_object()) fail_at(path, "expected an object");
  const json* j = find_key(obj, key);
  if (!j) fail_at(path + "." + key, "missing required field");
  return *j;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail_at(path, "expected a number");
  return j.get<double>();
}

long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail_at(path, "expected an integer");
  return j.get<long>();
}

std::uint64_t as_seed(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail_at(path, "expected an integer seed");
  return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail_at(path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail_at(path, "expected a boolean");
  return j.get<bool>();
}

double get_number(const json& obj, const char* key, const std::string& path,
                  double dflt) {
  const json* j = find_key(obj, key);
  return j ? as_number(*j, path + "." + key) : dflt;
}

long get_integer(const json& obj, const char* key, const std::string& path,
                 long dflt) {
  const json* j = find_key(obj, key);
  return j ? as_integer(*j, path + "." + key) : dflt;
}

std::string get_string(const json& obj, const char* key,
                       const std::string& path, const std::string& dflt) {
  const json* j = find_key(obj, key);
  return j ? as_string(*j, path + "." + key) : dflt;
}

bool get_bool(const json& obj, const char* key, const std::string& path,
              bool dflt) {
  const json* j = find_key(obj, key);
  return j ? as_bool(*j, path + "." + key) : dflt;
}

VecR as_real_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail_at(path, "expected an array of numbers");
  VecR v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<int>(i)) = as_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

OffsetTerm as_offset_term(const json& j, const std::string& path) {
  if (!j.is_object()) fail_at(path, "expected {row, col, kappa}");
  OffsetTerm t;
  t.row = static_cast<int>(as_integer(require_key(j, "row", path), path + ".row"));
  t.col = static_cast<int>(as_integer(require_key(j, "col", path), path + ".col"));
  t.kappa = get_number(j, "kappa", path, 0.0);
  return t;
}

std::vector<OffsetTerm> as_offset_terms(const json& j, const std::string& path) {
  if (!j.is_array()) fail_at(path, "expected an array of {row, col, kappa}");
  std::vector<OffsetTerm> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_offset_term(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

json offset_terms_to_json(const std::vector<OffsetTerm>& terms) {
  json arr = json::array();
  for (const OffsetTerm& t : terms)
    arr.push_back({{"row", t.row}, {"col", t.col}, {"kappa", t.kappa}});
  return arr;
}

json real_vector_to_json(const VecR& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) fail_at("$", "expected a JSON object");
  ExperimentConfig cfg;
  cfg.name = get_string(j, "name", "$", "experiment");
  cfg.seed = find_key(j, "seed") ? as_seed(*find_key(j, "seed"), "$.seed") : 1;
  cfg.workers = static_cast<int>(get_integer(j, "workers", "$", 0));

  const json& graph = require_key(j, "graph", "$");
  cfg.vertices =
      static_cast<int>(as_integer(require_key(graph, "vertices", "$.graph"),
                                  "$.graph.vertices"));
  cfg.leads = static_cast<int>(
      as_integer(require_key(graph, "leads", "$.graph"), "$.graph.leads"));
  cfg.length_min = get_number(graph, "length_min", "$.graph", 1.0);
  cfg.length_max = get_number(graph, "length_max", "$.graph", 2.0);
  if (cfg.vertices < 2) fail_at("$.graph.vertices", "need at least 2 vertices");
  if (cfg.leads < 1 || cfg.leads > cfg.vertices)
    fail_at("$.graph.leads", "need 1..vertices leads");
  if (!(cfg.length_min > 0.0) || !(cfg.length_max >= cfg.length_min))
    fail_at("$.graph.length_min", "need 0 < length_min <= length_max");

  if (const json* vx = find_key(j, "vertices")) {
    const std::string path = "$.vertices";
    cfg.lead_family = get_string(*vx, "lead_family", path, "canonical");
    cfg.bulk_family = get_string(*vx, "bulk_family", path, "kirchhoff");
    if (cfg.lead_family != "canonical" && cfg.lead_family != "kirchhoff")
      fail_at(path + ".lead_family", "unknown family '" + cfg.lead_family + "'");
    if (cfg.bulk_family != "kirchhoff" && cfg.bulk_family != "designed" &&
        cfg.bulk_family != "reflector")
      fail_at(path + ".bulk_family", "unknown family '" + cfg.bulk_family + "'");
    if (const json* t = find_key(*vx, "t_coeff")) {
      if (t->is_number()) {
        cfg.t_coeff = VecR::Constant(1, as_number(*t, path + ".t_coeff"));
      } else {
        cfg.t_coeff = as_real_vector(*t, path + ".t_coeff");
      }
      if (cfg.t_coeff.size() != 1 && cfg.t_coeff.size() != cfg.leads)
        fail_at(path + ".t_coeff", "need a scalar or one value per lead");
      for (int i = 0; i < cfg.t_coeff.size(); ++i)
        if (cfg.t_coeff(i) < 0.0 || cfg.t_coeff(i) > 1.0)
          fail_at(path + ".t_coeff", "values must lie in [0,1]");
    }
    cfg.phases_phi1 = get_number(*vx, "phases_phi1", path, 0.0);
    cfg.lead_phases = get_string(*vx, "lead_phases", path, "none");
    if (cfg.lead_phases != "none" && cfg.lead_phases != "alternating")
      fail_at(path + ".lead_phases", "unknown pattern '" + cfg.lead_phases + "'");
    cfg.mixer_seed = find_key(*vx, "mixer_seed")
                         ? as_seed(*find_key(*vx, "mixer_seed"), path + ".mixer_seed")
                         : cfg.seed;
    cfg.reflector_rank =
        static_cast<int>(get_integer(*vx, "reflector_rank", path, 2));
    if (cfg.reflector_rank < 1)
      fail_at(path + ".reflector_rank", "rank must be >= 1");
  } else {
    cfg.mixer_seed = cfg.seed;
  }
  if (cfg.t_coeff.size() == 0) cfg.t_coeff = VecR::Constant(1, 1.0);

  if (const json* arr = find_key(j, "correlators")) {
    if (!arr->is_array()) fail_at("$.correlators", "expected an array");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string path = "$.correlators[" + std::to_string(i) + "]";
      const json& cj = (*arr)[i];
      CorrelatorJob job;
      job.label = get_string(cj, "label", path, "correlator-" + std::to_string(i));
      job.p_terms = as_offset_terms(require_key(cj, "p", path), path + ".p");
      if (const json* q = find_key(cj, "q"))
        job.q_terms = as_offset_terms(*q, path + ".q");
      job.samples = get_integer(cj, "samples", path, 10000);
      job.batches = static_cast<int>(get_integer(cj, "batches", path, 50));
      job.compare = get_string(cj, "compare", path, "none");
      if (job.compare != "none" && job.compare != "ericson" &&
          job.compare != "ericson-rel" && job.compare != "zero" &&
          job.compare != "nonzero")
        fail_at(path + ".compare", "unknown comparison '" + job.compare + "'");
      job.z_limit = get_number(cj, "z_limit", path, 3.0);
      job.rel_tol = get_number(cj, "rel_tol", path, 0.10);
      if (!(job.rel_tol > 0.0)) fail_at(path + ".rel_tol", "must be positive");
      cfg.correlators.push_back(std::move(job));
    }
  }

  if (const json* arr = find_key(j, "sweeps")) {
    if (!arr->is_array()) fail_at("$.sweeps", "expected an array");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string path = "$.sweeps[" + std::to_string(i) + "]";
      const json& sj = (*arr)[i];
      SweepJob job;
      job.label = get_string(sj, "label", path, "sweep-" + std::to_string(i));
      job.row = static_cast<int>(get_integer(sj, "row", path, 0));
      job.col = static_cast<int>(get_integer(sj, "col", path, 1));
      job.x_values = as_real_vector(require_key(sj, "x_values", path),
                                    path + ".x_values");
      job.samples = get_integer(sj, "samples", path, 10000);
      job.batches = static_cast<int>(get_integer(sj, "batches", path, 50));
      job.fit_width = get_bool(sj, "fit_width", path, false);
      job.width_tol = get_number(sj, "width_tol", path, 0.10);
      cfg.sweeps.push_back(std::move(job));
    }
  }

  if (const json* mj = find_key(j, "mean_s")) {
    const std::string path = "$.mean_s";
    cfg.mean_s.enabled = true;
    cfg.mean_s.samples = get_integer(*mj, "samples", path, 10000);
    cfg.mean_s.batches = static_cast<int>(get_integer(*mj, "batches", path, 50));
    cfg.mean_s.z_limit = get_number(*mj, "z_limit", path, 4.0);
  }

  if (const json* dj = find_key(j, "distribution")) {
    const std::string path = "$.distribution";
    cfg.distribution.enabled = true;
    cfg.distribution.row = static_cast<int>(get_integer(*dj, "row", path, 0));
    cfg.distribution.col = static_cast<int>(get_integer(*dj, "col", path, 1));
    cfg.distribution.samples = get_integer(*dj, "samples", path, 10000);
    cfg.distribution.bins = static_cast<int>(get_integer(*dj, "bins", path, 81));
    cfg.distribution.batches =
        static_cast<int>(get_integer(*dj, "batches", path, 50));
  }

  if (const json* oj = find_key(j, "oracle")) {
    const std::string path = "$.oracle";
    cfg.oracle.enabled = true;
    cfg.oracle.dim = static_cast<int>(get_integer(*oj, "dim", path, 400));
    cfg.oracle.draws = get_integer(*oj, "draws", path, 20000);
    cfg.oracle.calibration_draws =
        get_integer(*oj, "calibration_draws", path, 1500);
    cfg.oracle.row = static_cast<int>(get_integer(*oj, "row", path, 0));
    cfg.oracle.col = static_cast<int>(get_integer(*oj, "col", path, 1));
    cfg.oracle.x_values = as_real_vector(require_key(*oj, "x_values", path),
                                         path + ".x_values");
    cfg.oracle.compare_sweep = get_string(*oj, "compare_sweep", path, "");
    cfg.oracle.z_limit = get_number(*oj, "z_limit", path, 3.0);
    if (!cfg.oracle.compare_sweep.empty()) {
      bool found = false;
      for (const SweepJob& s : cfg.sweeps) {
        if (s.label != cfg.oracle.compare_sweep) continue;
        found = true;
        if (s.x_values.size() != cfg.oracle.x_values.size() ||
            (s.x_values - cfg.oracle.x_values).cwiseAbs().maxCoeff() != 0.0)
          fail_at(path + ".x_values", "grid must match sweep '" + s.label + "'");
      }
      if (!found)
        fail_at(path + ".compare_sweep",
                "no sweep labeled '" + cfg.oracle.compare_sweep + "'");
    }
  }

  if (const json* gj = find_key(j, "diagnostics")) {
    const std::string path = "$.diagnostics";
    cfg.diagnostics.gap = get_bool(*gj, "gap", path, false);
    cfg.diagnostics.trajectory_terms =
        static_cast<int>(get_integer(*gj, "trajectory_terms", path, 0));
    cfg.diagnostics.dump_sigma = get_bool(*gj, "dump_sigma", path, false);
    cfg.diagnostics.ksweep_points = get_integer(*gj, "ksweep_points", path, 0);
    cfg.diagnostics.ksweep_k0 = get_number(*gj, "ksweep_k0", path, 100.0);
  }

  if (const json* cj = find_key(j, "checks")) {
    cfg.check_swap = get_bool(*cj, "swap", "$.checks", false);
  }

  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON (" + path.string() +
                      "): " + e.what());
  }
  return config_from_json(j);
}

json ExperimentConfig::normalized() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["graph"] = {{"vertices", vertices},
                {"leads", leads},
                {"length_min", length_min},
                {"length_max", length_max}};
  j["vertices"] = {{"lead_family", lead_family},
                   {"bulk_family", bulk_family},
                   {"t_coeff", real_vector_to_json(t_coeff)},
                   {"phases_phi1", phases_phi1},
                   {"lead_phases", lead_phases},
                   {"mixer_seed", mixer_seed},
                   {"reflector_rank", reflector_rank}};
  if (!correlators.empty()) {
    json arr = json::array();
    for (const CorrelatorJob& c : correlators)
      arr.push_back({{"label", c.label},
                     {"p", offset_terms_to_json(c.p_terms)},
                     {"q", offset_terms_to_json(c.q_terms)},
                     {"samples", c.samples},
                     {"batches", c.batches},
                     {"compare", c.compare},
                     {"z_limit", c.z_limit},
                     {"rel_tol", c.rel_tol}});
    j["correlators"] = arr;
  }
  if (!sweeps.empty()) {
    json arr = json::array();
    for (const SweepJob& s : sweeps)
      arr.push_back({{"label", s.label},
                     {"row", s.row},
                     {"col", s.col},
                     {"x_values", real_vector_to_json(s.x_values)},
                     {"samples", s.samples},
                     {"batches", s.batches},
                     {"fit_width", s.fit_width},
                     {"width_tol", s.width_tol}});
    j["sweeps"] = arr;
  }
  if (mean_s.enabled)
    j["mean_s"] = {{"samples", mean_s.samples},
                   {"batches", mean_s.batches},
                   {"z_limit", mean_s.z_limit}};
  if (distribution.enabled)
    j["distribution"] = {{"row", distribution.row},
                         {"col", distribution.col},
                         {"samples", distribution.samples},
                         {"bins", distribution.bins},
                         {"batches", distribution.batches}};
  if (oracle.enabled)
    j["oracle"] = {{"dim", oracle.dim},
                   {"draws", oracle.draws},
                   {"calibration_draws", oracle.calibration_draws},
                   {"row", oracle.row},
                   {"col", oracle.col},
                   {"x_values", real_vector_to_json(oracle.x_values)},
                   {"compare_sweep", oracle.compare_sweep},
                   {"z_limit", oracle.z_limit}};
  json diag;
  if (diagnostics.gap) diag["gap"] = true;
  if (diagnostics.trajectory_terms > 0)
    diag["trajectory_terms"] = diagnostics.trajectory_terms;
  if (diagnostics.dump_sigma) diag["dump_sigma"] = true;
  if (diagnostics.ksweep_points > 0) {
    diag["ksweep_points"] = diagnostics.ksweep_points;
    diag["ksweep_k0"] = diagnostics.ksweep_k0;
  }
  if (!diag.is_null()) j["diagnostics"] = diag;
  if (check_swap) j["checks"] = {{"swap", true}};
  return j;
}

// ---------------------------------------------------------------------------
// System construction
// ---------------------------------------------------------------------------

BuiltSystem build_system_from_config(const ExperimentConfig& cfg) {
  BuiltSystem bs;
  bs.graph = build_graph(cfg.vertices, cfg.leads,
                         {cfg.length_min, cfg.length_max}, cfg.seed);
  bs.vertices.reserve(cfg.vertices);
  for (int v = 0; v < cfg.vertices; ++v) {
    const int channel = bs.graph.lead_channel(v);
    const int bond_valency = bs.graph.degree(v);
    const int valency = bond_valency + (channel >= 0 ? 1 : 0);
    const std::uint64_t vseed = mix_seed(cfg.mixer_seed, v, 0);
    if (channel >= 0) {
      if (cfg.lead_family == "canonical") {
        const double t = cfg.t_coeff.size() == 1 ? cfg.t_coeff(0)
                                                 : cfg.t_coeff(channel);
        VecR phases;
        if (cfg.phases_phi1 != 0.0 || cfg.lead_phases == "alternating") {
          // "alternating" sets every other bond-direction phase to pi, which
          // turns the bond block into a balanced random reflection: the
          // mixing needed for universal interior dynamics.  Uniform phases
          // leave it one rank-one defect away from the identity.
          phases = VecR::Zero(valency - 1);
          phases(0) = cfg.phases_phi1;
          if (cfg.lead_phases == "alternating")
            for (int p = 1; p < phases.size(); ++p)
              phases(p) = (p % 2 == 1) ? kPi : 0.0;
        }
        bs.vertices.push_back(build_canonical_vertex(valency, t, phases, vseed, v));
      } else {
        bs.vertices.push_back(build_kirchhoff_vertex(valency, true, v));
      }
    } else if (cfg.bulk_family == "designed") {
      bs.vertices.push_back(build_designed_vertex(valency, vseed, v));
    } else if (cfg.bulk_family == "reflector") {
      const int rank = std::min(cfg.reflector_rank, valency);
      bs.vertices.push_back(build_reflector_vertex(valency, rank, vseed, v));
    } else {
      bs.vertices.push_back(build_kirchhoff_vertex(valency, false, v));
    }
  }
  bs.system = assemble_system(bs.graph, bs.vertices);
  return bs;
}

// ---------------------------------------------------------------------------
// Experiment pipeline
// ---------------------------------------------------------------------------

namespace {

double safe_z(double diff, double se) {
  if (se > 0.0) return diff / se;
  return diff == 0.0 ? 0.0 : 1e99;
}

struct Check {
  std::string label;
  bool passed = false;
  std::string detail;
};

std::string check_line(const Check& c) {
  return std::string(c.passed ? "PASS " : "FAIL ") + c.label + ": " + c.detail;
}

std::string fmt(double x) { return format_g17(x); }

std::string fmt3(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

// Collects artifact files and their checksums as they are written.
struct ArtifactWriter {
  fs::path dir;
  std::map<std::string, std::string> checksums;

  void note(const std::string& name) {
    checksums[name] = to_hex64(fnv1a64_file(dir / name));
  }
  void write_json(const std::string& name, const json& j) {
    write_text_file(dir / name, j.dump(2) + "\n");
    note(name);
  }
  void write_csv_file(const std::string& name,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    write_csv(dir / name, header, rows);
    note(name);
  }
  void write_text(const std::string& name, const std::string& content) {
    write_text_file(dir / name, content);
    note(name);
  }
};

std::string offset_terms_compact(const std::vector<OffsetTerm>& terms) {
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) s += "|";
    s += std::to_string(terms[i].row) + "-" + std::to_string(terms[i].col) +
         "@" + fmt(terms[i].kappa);
  }
  return s.empty() ? "-" : s;
}

}  // namespace

ExperimentResult run_experiment(const fs::path& config_path,
                                const fs::path& out_dir,
                                std::optional<std::uint64_t> seed_override,
                                int workers_override,
                                std::optional<long> samples_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  if (workers_override > 0) cfg.workers = workers_override;
  if (samples_override) {
    for (CorrelatorJob& c : cfg.correlators) c.samples = *samples_override;
    for (SweepJob& s : cfg.sweeps) s.samples = *samples_override;
    if (cfg.mean_s.enabled) cfg.mean_s.samples = *samples_override;
    if (cfg.distribution.enabled) cfg.distribution.samples = *samples_override;
  }
  return run_experiment_config(cfg, out_dir);
}

ExperimentResult run_experiment_config(const ExperimentConfig& cfg,
                                       const fs::path& out_dir) {
  const int workers = cfg.workers;

  ExperimentResult result;
  result.dir = out_dir.empty() ? fs::path(cfg.name + "-out") : out_dir;
  fs::create_directories(result.dir);

  ArtifactWriter art;
  art.dir = result.dir;
  std::vector<Check> checks;
  json comparisons = json::array();
  long rejected_total = 0;
  std::string error_text;

  try {
    // ---- system ----
    const BuiltSystem bs = build_system_from_config(cfg);
    const ScatteringSystem& sys = bs.system;
    const double d_mean = mean_level_density(bs.graph);
    const VecR& trans = sys.transmissions;
    const VecC s_means = sys.rho_diag;

    art.write_json("graph.json", to_json(bs.graph));
    {
      double max_vertex_residual = 0.0;
      for (const VertexMatrix& vm : bs.vertices) {
        const VertexReport rep = validate_vertex(vm);
        max_vertex_residual = std::max(
            {max_vertex_residual, rep.unitarity_residual, rep.symmetry_residual});
      }
      json sj;
      sj["channels"] = sys.num_channels();
      sj["directed_bonds"] = sys.num_directed();
      sj["d_mean"] = d_mean;
      sj["sum_t"] = trans.sum();
      json rho = json::array();
      for (int c = 0; c < sys.num_channels(); ++c)
        rho.push_back(cplx_to_json(sys.rho_diag(c)));
      sj["rho"] = rho;
      sj["transmissions"] = real_vector_to_json(trans);
      sj["has_low_rank"] = sys.has_low_rank;
      sj["lead_family"] = cfg.lead_family;
      sj["lead_phases"] = cfg.lead_phases;
      sj["bulk_family"] = cfg.bulk_family;
      sj["max_vertex_residual"] = max_vertex_residual;
      art.write_json("system.json", sj);
    }

    if (cfg.diagnostics.dump_sigma) {
      dump_matrix_binary(art.dir / "sigma_b", sys.sigma_b);
      art.note("sigma_b.bin");
      art.note("sigma_b.json");
    }

    // ---- exact swap check (two-vertex, fully open configuration) ----
    if (cfg.check_swap) {
      Check ck;
      ck.label = "swap";
      if (cfg.vertices != 2 || cfg.leads != 2) {
        ck.passed = false;
        ck.detail = "requires vertices=2, leads=2";
      } else {
        double worst = 0.0;
        const double length = bs.graph.lengths[0];
        const double offsets[3] = {0.0, 0.37, 1.1};
        for (int s = 0; s < 3; ++s) {
          Stream st(cfg.seed, s, 0x73776170ULL);
          const VecR phases = sample_phases(bs.graph, st);
          const SMatrixSample smp = evaluate_s(sys, phases, offsets[s]);
          const cplx expected = std::exp(kI * (phases(0) + offsets[s] * length));
          worst = std::max({worst, std::abs(smp.s(0, 1) - expected),
                            std::abs(smp.s(1, 0) - expected),
                            std::abs(smp.s(0, 0)), std::abs(smp.s(1, 1))});
        }
        ck.passed = worst < 1e-12;
        ck.detail = "max deviation from swap form = " + fmt3(worst);
      }
      checks.push_back(ck);
    }

    // ---- mean S ----
    if (cfg.mean_s.enabled) {
      const MeanSEstimate est =
          estimate_mean_s(sys, cfg.mean_s.samples,
                          mix_seed(cfg.seed, 0, 0x6d65616eULL), workers,
                          cfg.mean_s.batches);
      rejected_total += est.rejected;
      const MatC expected = mean_s_analytic(sys);
      double max_z = 0.0;
      for (int r = 0; r < est.mean.rows(); ++r)
        for (int c = 0; c < est.mean.cols(); ++c) {
          const cplx diff = est.mean(r, c) - expected(r, c);
          max_z = std::max(max_z, std::abs(safe_z(diff.real(), est.stderr_re(r, c))));
          max_z = std::max(max_z, std::abs(safe_z(diff.imag(), est.stderr_im(r, c))));
        }
      Check ck;
      ck.label = "mean-s";
      ck.passed = max_z <= cfg.mean_s.z_limit;
      ck.detail = "max |z| = " + fmt3(max_z) + " over " +
                  std::to_string(est.mean.rows() * est.mean.cols()) +
                  " entries, n = " + std::to_string(est.n_samples);
      checks.push_back(ck);
      json mj;
      mj["n_samples"] = est.n_samples;
      mj["rejected"] = est.rejected;
      mj["max_z"] = max_z;
      json rows = json::array();
      for (int r = 0; r < est.mean.rows(); ++r)
        for (int c = 0; c < est.mean.cols(); ++c)
          rows.push_back({{"row", r},
                          {"col", c},
                          {"mean", cplx_to_json(est.mean(r, c))},
                          {"stderr_re", est.stderr_re(r, c)},
                          {"stderr_im", est.stderr_im(r, c)}});
      mj["entries"] = rows;
      art.write_json("mean_s.json", mj);
    }

    // ---- correlators ----
    std::vector<std::array<std::string, 5>> prediction_rows;
    if (!cfg.correlators.empty()) {
      json records = json::array();
      for (std::size_t i = 0; i < cfg.correlators.size(); ++i) {
        const CorrelatorJob& job = cfg.correlators[i];
        CorrelatorSpec spec;
        spec.p_terms = job.p_terms;
        spec.q_terms = job.q_terms;
        spec.n_samples = job.samples;
        spec.n_batches = job.batches;
        spec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i),
                             0x636f7272ULL);
        const CorrelatorEstimate est = estimate_correlator(sys, spec, workers);
        rejected_total += est.rejected;

        json rec;
        rec["label"] = job.label;
        rec["spec"] = {{"p", offset_terms_to_json(job.p_terms)},
                       {"q", offset_terms_to_json(job.q_terms)}};
        rec["mean_re"] = est.mean.real();
        rec["mean_im"] = est.mean.imag();
        rec["stderr"] = est.stderr_total;
        rec["stderr_re"] = est.stderr_re;
        rec["stderr_im"] = est.stderr_im;
        rec["n"] = est.n_effective;
        rec["rejects"] = est.rejected;

        if (job.compare != "none") {
          cplx pred = 0.0;
          if (job.compare == "ericson" || job.compare == "ericson-rel")
            pred = ericson_pq(job.p_terms, job.q_terms, trans, d_mean, s_means);
          const double z_re = safe_z(est.mean.real() - pred.real(), est.stderr_re);
          const double z_im = safe_z(est.mean.imag() - pred.imag(), est.stderr_im);
          bool ok = false;
          Check ck;
          ck.label = "correlator " + job.label;
          if (job.compare == "ericson-rel") {
            const double rel = std::abs(est.mean - pred) / std::abs(pred);
            ok = rel <= job.rel_tol;
            ck.detail = "mean = (" + fmt3(est.mean.real()) + ", " +
                        fmt3(est.mean.imag()) + "), asymptote = (" +
                        fmt3(pred.real()) + ", " + fmt3(pred.imag()) +
                        "), rel err = " + fmt3(rel);
            rec["rel_err"] = rel;
          } else if (job.compare == "nonzero") {
            const double z_max = std::max(std::abs(z_re), std::abs(z_im));
            ok = z_max >= job.z_limit;
            ck.detail = "mean = (" + fmt3(est.mean.real()) + ", " +
                        fmt3(est.mean.imag()) + "), max |z| vs zero = " +
                        fmt3(z_max) + " (must exceed " + fmt3(job.z_limit) + ")";
          } else {
            ok = std::abs(z_re) <= job.z_limit && std::abs(z_im) <= job.z_limit;
            ck.detail = "mean = (" + fmt3(est.mean.real()) + ", " +
                        fmt3(est.mean.imag()) + "), prediction = (" +
                        fmt3(pred.real()) + ", " + fmt3(pred.imag()) +
                        "), z = (" + fmt3(z_re) + ", " + fmt3(z_im) + ")";
          }
          ck.passed = ok;
          rec["prediction_re"] = pred.real();
          rec["prediction_im"] = pred.imag();
          rec["z_re"] = z_re;
          rec["z_im"] = z_im;
          comparisons.push_back({{"label", job.label},
                                 {"kind", "correlator-vs-" + job.compare},
                                 {"z_re", z_re},
                                 {"z_im", z_im},
                                 {"passed", ok}});
          checks.push_back(ck);
          if (job.compare == "ericson" || job.compare == "ericson-rel")
            prediction_rows.push_back({job.label,
                                       offset_terms_compact(job.p_terms),
                                       offset_terms_compact(job.q_terms),
                                       fmt(pred.real()), fmt(pred.imag())});
        }
        records.push_back(rec);
      }
      art.write_json("correlators.json", records);
    }

    // ---- sweeps ----
    struct SweepData {
      const SweepJob* job;
      VecC value;
      VecR se_re, se_im, se_total;
    };
    std::vector<SweepData> sweep_data;
    for (std::size_t i = 0; i < cfg.sweeps.size(); ++i) {
      const SweepJob& job = cfg.sweeps[i];
      const int nx = static_cast<int>(job.x_values.size());
      SweepData data;
      data.job = &job;
      data.value = VecC(nx);
      data.se_re = VecR(nx);
      data.se_im = VecR(nx);
      data.se_total = VecR(nx);
      std::vector<std::vector<double>> rows;
      for (int p = 0; p < nx; ++p) {
        const double kappa = job.x_values(p) / (4.0 * kPi * d_mean);
        CorrelatorSpec spec;
        spec.p_terms = {{job.row, job.col, kappa}};
        spec.q_terms = {{job.row, job.col, kappa}};
        spec.n_samples = job.samples;
        spec.n_batches = job.batches;
        spec.seed = mix_seed(cfg.seed, 5000 + i * 512 + p, 0x73776565ULL);
        const CorrelatorEstimate est = estimate_correlator(sys, spec, workers);
        rejected_total += est.rejected;
        data.value(p) = est.mean;
        data.se_re(p) = est.stderr_re;
        data.se_im(p) = est.stderr_im;
        data.se_total(p) = est.stderr_total;
        rows.push_back({kappa, est.mean.real(), est.mean.imag(), est.stderr_total});
      }
      art.write_csv_file("sweep_" + job.label + ".csv",
                         {"kappa", "re", "im", "stderr"}, rows);

      if (job.fit_width) {
        // Fit |C|^2 against the combined offset kappa + kappa_t = 2 kappa.
        VecR xs(nx), ys(nx);
        for (int p = 0; p < nx; ++p) {
          xs(p) = 2.0 * job.x_values(p) / (4.0 * kPi * d_mean);
          ys(p) = std::norm(data.value(p));
        }
        const auto [amp, width] = fit_lorentzian(xs, ys);
        (void)amp;
        const double width_pred = ericson_width(trans, d_mean);
        const double rel = std::abs(width - width_pred) / width_pred;
        Check ck;
        ck.label = "width " + job.label;
        ck.passed = rel <= job.width_tol;
        ck.detail = "fitted = " + fmt3(width) + ", predicted = " +
                    fmt3(width_pred) + ", rel err = " + fmt3(rel);
        checks.push_back(ck);
        comparisons.push_back({{"label", job.label},
                               {"kind", "width-vs-lorentzian"},
                               {"fitted", width},
                               {"predicted", width_pred},
                               {"rel_err", rel},
                               {"passed", ck.passed}});
        prediction_rows.push_back({"width-" + job.label,
                                   offset_terms_compact({{job.row, job.col, 0.0}}),
                                   "-", fmt(width_pred), fmt(0.0)});
      }
      sweep_data.push_back(std::move(data));
    }

    if (!prediction_rows.empty()) {
      std::string csv = "label,p_spec,q_spec,re,im\n";
      for (const auto& r : prediction_rows)
        csv += r[0] + "," + r[1] + "," + r[2] + "," + r[3] + "," + r[4] + "\n";
      art.write_text("predictions.csv", csv);
    }

    // ---- distribution ----
    if (cfg.distribution.enabled) {
      const DistributionReport rep = distribution_report(
          sys, cfg.distribution.row, cfg.distribution.col,
          cfg.distribution.samples, mix_seed(cfg.seed, 0, 0x64697374ULL),
          cfg.distribution.bins, workers, cfg.distribution.batches);
      rejected_total += rep.rejected;
      json dj;
      dj["row"] = cfg.distribution.row;
      dj["col"] = cfg.distribution.col;
      dj["n_samples"] = rep.n_samples;
      dj["rejected"] = rep.rejected;
      dj["mean"] = cplx_to_json(rep.mean);
      dj["mean_se"] = rep.mean_se;
      dj["m2"] = rep.m2;
      dj["m2_se"] = rep.m2_se;
      dj["m4"] = rep.m4;
      dj["m4_se"] = rep.m4_se;
      dj["ratio"] = rep.ratio;
      dj["ratio_se"] = rep.ratio_se;
      art.write_json("distribution.json", dj);
      std::vector<std::vector<double>> rows;
      for (int b = 0; b < rep.bin_centers.size(); ++b)
        rows.push_back({rep.bin_centers(b), static_cast<double>(rep.count_re(b)),
                        static_cast<double>(rep.count_im(b))});
      art.write_csv_file("distribution.csv", {"bin_center", "count_re", "count_im"},
                         rows);
    }

    // ---- GOE oracle ----
    if (cfg.oracle.enabled) {
      for (int c = 0; c < trans.size(); ++c)
        if (!(trans(c) > 0.0))
          throw ConfigError("oracle requires positive channel transmission");
      const CalibrationRecord cal =
          goe_calibrate(trans, cfg.oracle.dim, mix_seed(cfg.seed, 0, 0x6f7261ULL),
                        cfg.oracle.calibration_draws, workers);
      json cj;
      cj["dim"] = cal.model.dim;
      cj["target_t"] = real_vector_to_json(cal.target_t);
      cj["achieved_t"] = real_vector_to_json(cal.achieved_t);
      json strengths = json::array();
      for (int c = 0; c < cal.model.couplings.size(); ++c)
        strengths.push_back(cal.model.couplings(c));
      cj["couplings"] = strengths;
      cj["iterations"] = cal.iterations;
      cj["draws_per_iter"] = cal.draws_per_iter;
      cj["trace"] = cal.trace;
      art.write_json("calibration.json", cj);

      const GoeTwoPoint curve =
          goe_two_point(cal.model, cfg.oracle.row, cfg.oracle.col,
                        cfg.oracle.x_values, cfg.oracle.draws, 7, workers);
      rejected_total += curve.rejected;
      std::vector<std::vector<double>> rows;
      for (int p = 0; p < curve.x.size(); ++p)
        rows.push_back({curve.x(p), curve.value(p).real(), curve.value(p).imag(),
                        curve.se_total(p)});
      art.write_csv_file("oracle_curve.csv", {"x", "re", "im", "stderr"}, rows);

      if (!cfg.oracle.compare_sweep.empty()) {
        const SweepData* graph_side = nullptr;
        for (const SweepData& d : sweep_data)
          if (d.job->label == cfg.oracle.compare_sweep) graph_side = &d;
        if (!graph_side)
          throw ConfigError("oracle comparison sweep missing: " +
                            cfg.oracle.compare_sweep);
        double max_z = 0.0;
        json points = json::array();
        for (int p = 0; p < curve.x.size(); ++p) {
          const cplx diff = graph_side->value(p) - curve.value(p);
          const double z_re = safe_z(
              diff.real(), std::hypot(graph_side->se_re(p), curve.se_re(p)));
          const double z_im = safe_z(
              diff.imag(), std::hypot(graph_side->se_im(p), curve.se_im(p)));
          max_z = std::max({max_z, std::abs(z_re), std::abs(z_im)});
          points.push_back({{"x", curve.x(p)},
                            {"graph_re", graph_side->value(p).real()},
                            {"graph_im", graph_side->value(p).imag()},
                            {"oracle_re", curve.value(p).real()},
                            {"oracle_im", curve.value(p).imag()},
                            {"z_re", z_re},
                            {"z_im", z_im}});
        }
        const bool ok = max_z <= cfg.oracle.z_limit;
        comparisons.push_back({{"label", cfg.oracle.compare_sweep},
                               {"kind", "graph-vs-oracle"},
                               {"points", points},
                               {"max_z", max_z},
                               {"passed", ok}});
        Check ck;
        ck.label = "oracle vs sweep " + cfg.oracle.compare_sweep;
        ck.passed = ok;
        ck.detail = "max |z| = " + fmt3(max_z) + " over " +
                    std::to_string(curve.x.size()) + " grid points";
        checks.push_back(ck);
      }
    }

    // ---- diagnostics ----
    if (cfg.diagnostics.gap || cfg.diagnostics.trajectory_terms > 0 ||
        cfg.diagnostics.ksweep_points > 0) {
      json dj;
      if (cfg.diagnostics.gap) {
        const ClassicalSpectrum spec = classical_map_gap(sys);
        dj["gap"] = spec.gap;
        json moduli = json::array();
        const int top = std::min<int>(6, static_cast<int>(spec.spectrum.size()));
        for (int m = 0; m < top; ++m) moduli.push_back(std::abs(spec.spectrum(m)));
        dj["top_moduli"] = moduli;
      }
      if (cfg.diagnostics.trajectory_terms > 0) {
        Stream st(cfg.seed, 0, 0x74726a31ULL);
        const VecR phases = sample_phases(bs.graph, st);
        const TrajectoryResult tr =
            trajectory_sum(sys, phases, 0.0, cfg.diagnostics.trajectory_terms);
        dj["trajectory"] = {{"residual", tr.residual},
                            {"spectral_radius", tr.spectral_radius},
                            {"diverged", tr.diverged},
                            {"terms", cfg.diagnostics.trajectory_terms}};
      }
      if (cfg.diagnostics.ksweep_points > 0) {
        const int row = 0, col = sys.num_channels() > 1 ? 1 : 0;
        const OffsetTerm term{row, col, 0.0};
        const CorrelatorEstimate ks = ksweep_correlator(
            sys, term, term, cfg.diagnostics.ksweep_k0,
            cfg.diagnostics.ksweep_points, 50, workers);
        CorrelatorSpec spec;
        spec.p_terms = {term};
        spec.q_terms = {term};
        spec.n_samples = std::min<long>(cfg.diagnostics.ksweep_points, 20000);
        spec.seed = mix_seed(cfg.seed, 0, 0x6b737770ULL);
        const CorrelatorEstimate ph = estimate_correlator(sys, spec, workers);
        rejected_total += ph.rejected;
        const cplx diff = ks.mean - ph.mean;
        const double z_re = safe_z(diff.real(), std::hypot(ks.stderr_re, ph.stderr_re));
        const double z_im = safe_z(diff.imag(), std::hypot(ks.stderr_im, ph.stderr_im));
        const double max_z = std::max(std::abs(z_re), std::abs(z_im));
        dj["ksweep"] = {{"ksweep_re", ks.mean.real()},
                        {"ksweep_im", ks.mean.imag()},
                        {"phase_re", ph.mean.real()},
                        {"phase_im", ph.mean.imag()},
                        {"z_re", z_re},
                        {"z_im", z_im}};
        Check ck;
        ck.label = "ksweep consistency";
        ck.passed = max_z <= 4.0;
        ck.detail = "wave-number sweep vs phase average, max |z| = " + fmt3(max_z);
        checks.push_back(ck);
      }
      art.write_json("diagnostics.json", dj);
    }

    result.status = "complete";
  } catch (const std::exception& e) {
    result.status = "partial";
    error_text = e.what();
  }

  if (!comparisons.empty()) art.write_json("comparison.json", comparisons);

  bool all_passed = result.status == "complete";
  std::string report;
  report += "experiment: " + cfg.name + "\n";
  report += "status: " + result.status + "\n";
  if (!error_text.empty()) report += "error: " + error_text + "\n";
  for (const Check& c : checks) {
    all_passed = all_passed && c.passed;
    const std::string line = check_line(c);
    report += line + "\n";
    result.notes.push_back(line);
  }
  art.write_text("report.txt", report);

  json manifest;
  manifest["name"] = cfg.name;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.normalized();
  manifest["status"] = result.status;
  if (!error_text.empty()) manifest["error"] = error_text;
  manifest["rejected_total"] = rejected_total;
  json checks_json = json::array();
  for (const Check& c : checks)
    checks_json.push_back(
        {{"label", c.label}, {"passed", c.passed}, {"detail", c.detail}});
  manifest["checks"] = checks_json;
  json files;
  for (const auto& [name, sum] : art.checksums) files[name] = sum;
  manifest["files"] = files;
  write_text_file(result.dir / "manifest.json", manifest.dump(2) + "\n");

  result.passed = all_passed;
  return result;
}

// ---------------------------------------------------------------------------
// Random systems and verification suites
// ---------------------------------------------------------------------------

BuiltSystem random_system(std::uint64_t seed, int index) {
  Stream st(seed, static_cast<std::uint64_t>(index), 0x73797331ULL);
  ExperimentConfig cfg;
  cfg.name = "random-" + std::to_string(index);
  cfg.vertices = 2 + static_cast<int>(st.uniform() * 29.0);
  cfg.vertices = std::min(cfg.vertices, 30);
  const int max_leads = std::min(cfg.vertices, 10);
  cfg.leads = 1 + static_cast<int>(st.uniform() * max_leads);
  cfg.leads = std::min(cfg.leads, max_leads);
  cfg.seed = st.raw();
  cfg.mixer_seed = st.raw();
  cfg.lead_family = index % 2 == 0 ? "canonical" : "kirchhoff";
  switch (index % 3) {
    case 0: cfg.bulk_family = "kirchhoff"; break;
    case 1: cfg.bulk_family = "designed"; break;
    default: cfg.bulk_family = "reflector"; break;
  }
  cfg.reflector_rank = 1 + static_cast<int>(st.uniform() * 2.0);
  if (cfg.lead_family == "canonical") {
    cfg.t_coeff = VecR(cfg.leads);
    for (int c = 0; c < cfg.leads; ++c) cfg.t_coeff(c) = 0.05 + 0.95 * st.uniform();
    if (index % 4 == 0) cfg.phases_phi1 = st.uniform(0.0, 2.0 * kPi);
  }
  return build_system_from_config(cfg);
}

UnitarityBattery run_unitarity_battery(int n_systems, int samples_each,
                                       std::uint64_t seed) {
  UnitarityBattery battery;
  battery.systems = n_systems;
  battery.samples_each = samples_each;
  for (int i = 0; i < n_systems; ++i) {
    const BuiltSystem bs = random_system(seed, i);
    const MatC eye = MatC::Identity(bs.system.num_channels(),
                                    bs.system.num_channels());
    for (int s = 0; s < samples_each; ++s) {
      for (int retry = 0; retry < 10; ++retry) {
        Stream st(seed, static_cast<std::uint64_t>(i) * 1024 + s,
                  0x62617431ULL + retry);
        const VecR phases = sample_phases(bs.graph, st);
        const double offset = st.uniform(0.0, 10.0);
        try {
          const SMatrixSample smp = evaluate_s(bs.system, phases, offset);
          battery.max_unitarity = std::max(
              battery.max_unitarity,
              (smp.s.adjoint() * smp.s - eye).cwiseAbs().maxCoeff());
          battery.max_symmetry = std::max(
              battery.max_symmetry,
              (smp.s - smp.s.transpose()).cwiseAbs().maxCoeff());
          break;
        } catch (const SolveError&) {
          // Resonance near-hit (measure zero); redraw this sample.
        }
      }
    }
  }
  return battery;
}

namespace {

ExperimentConfig verify_base_config(int vertices, int leads,
                                    const VecR& t_coeff, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.vertices = vertices;
  cfg.leads = leads;
  cfg.seed = seed;
  cfg.mixer_seed = mix_seed(seed, 1, 1);
  cfg.t_coeff = t_coeff;
  return cfg;
}

void add_line(VerifyReport& rep, bool ok, const std::string& text) {
  rep.lines.push_back(std::string(ok ? "PASS " : "FAIL ") + text);
  rep.passed = rep.passed && ok;
}

VerifyReport verify_unitarity(int workers) {
  (void)workers;
  VerifyReport rep;
  rep.suite = "unitarity";
  rep.passed = true;
  const UnitarityBattery b = run_unitarity_battery(100, 10, 0xACC1ULL);
  add_line(rep, b.max_unitarity < 1e-9,
           "max |S^dag S - I| = " + fmt3(b.max_unitarity) + " over " +
               std::to_string(b.systems) + " systems (limit 1e-9)");
  add_line(rep, b.max_symmetry < 1e-12,
           "max |S - S^T| = " + fmt3(b.max_symmetry) + " (limit 1e-12)");
  return rep;
}

VerifyReport verify_mean_s(int workers) {
  VerifyReport rep;
  rep.suite = "mean-s";
  rep.passed = true;
  VecR t(3);
  t << 0.9, 0.6, 0.3;
  const BuiltSystem bs = build_system_from_config(
      verify_base_config(10, 3, t, 0x5EED01ULL));
  const MeanSEstimate est =
      estimate_mean_s(bs.system, 20000, 0x11ULL, workers);
  const MatC expected = mean_s_analytic(bs.system);
  double max_z = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const cplx diff = est.mean(r, c) - expected(r, c);
      max_z = std::max(max_z, std::abs(safe_z(diff.real(), est.stderr_re(r, c))));
      max_z = std::max(max_z, std::abs(safe_z(diff.imag(), est.stderr_im(r, c))));
    }
  add_line(rep, max_z <= 4.0,
           "<S> vs diag(rho): max |z| = " + fmt3(max_z) + " at n = 20000");
  return rep;
}

VerifyReport verify_two_point(int workers) {
  VerifyReport rep;
  rep.suite = "two-point";
  rep.passed = true;
  const VecR t = VecR::Constant(2, 0.5);
  const BuiltSystem bs = build_system_from_config(
      verify_base_config(16, 2, t, 0x5EED02ULL));
  const double d_mean = mean_level_density(bs.graph);

  VecR grid(3);
  grid << 0.0, 3.0, 8.0;

  VecC graph_val(3);
  VecR graph_se_re(3), graph_se_im(3);
  for (int p = 0; p < 3; ++p) {
    const double kappa = grid(p) / (4.0 * kPi * d_mean);
    CorrelatorSpec spec;
    spec.p_terms = {{0, 1, kappa}};
    spec.q_terms = {{0, 1, kappa}};
    spec.n_samples = 30000;
    spec.seed = mix_seed(0x5EED02ULL, 100 + p, 0);
    const CorrelatorEstimate est = estimate_correlator(bs.system, spec, workers);
    graph_val(p) = est.mean;
    graph_se_re(p) = est.stderr_re;
    graph_se_im(p) = est.stderr_im;
  }

  const CalibrationRecord cal =
      goe_calibrate(bs.system.transmissions, 150, 0x5EED03ULL, 600, workers);
  rep.lines.push_back("calibration: achieved T = [" + fmt3(cal.achieved_t(0)) +
                      ", " + fmt3(cal.achieved_t(1)) + "] in " +
                      std::to_string(cal.iterations) + " iterations");
  const GoeTwoPoint curve =
      goe_two_point(cal.model, 0, 1, grid, 3000, 7, workers);

  double max_z = 0.0;
  for (int p = 0; p < 3; ++p) {
    const cplx diff = graph_val(p) - curve.value(p);
    max_z = std::max(max_z, std::abs(safe_z(diff.real(),
                      std::hypot(graph_se_re(p), curve.se_re(p)))));
    max_z = std::max(max_z, std::abs(safe_z(diff.imag(),
                      std::hypot(graph_se_im(p), curve.se_im(p)))));
  }
  add_line(rep, max_z <= 3.5,
           "graph MC vs GOE MC on x = {0, 3, 8}: max |z| = " + fmt3(max_z));
  return rep;
}

VerifyReport verify_ericson(int workers) {
  VerifyReport rep;
  rep.suite = "ericson";
  rep.passed = true;
  const VecR t = VecR::Constant(10, 1.0);
  const BuiltSystem bs = build_system_from_config(
      verify_base_config(30, 10, t, 0x5EED04ULL));
  const double d_mean = mean_level_density(bs.graph);
  const double sum_t = bs.system.transmissions.sum();

  CorrelatorSpec off;
  off.p_terms = {{0, 1, 0.0}};
  off.q_terms = {{0, 1, 0.0}};
  off.n_samples = 20000;
  off.seed = 0x0FF0ULL;
  const CorrelatorEstimate e_off = estimate_correlator(bs.system, off, workers);
  const double pred_off = 1.0 / sum_t;  // T^2 / sum(T) at T = 1
  add_line(rep, std::abs(e_off.mean.real() - pred_off) <= 0.1 * pred_off &&
                    std::abs(e_off.mean.imag()) <= 4.0 * e_off.stderr_im,
           "off-diagonal two-point = " + fmt3(e_off.mean.real()) +
               " vs " + fmt3(pred_off) + " (10% window)");

  CorrelatorSpec diag;
  diag.p_terms = {{0, 0, 0.0}};
  diag.q_terms = {{0, 0, 0.0}};
  diag.n_samples = 20000;
  diag.seed = 0x0FF1ULL;
  const CorrelatorEstimate e_diag = estimate_correlator(bs.system, diag, workers);
  const double pred_diag = 2.0 / sum_t;
  add_line(rep, std::abs(e_diag.mean.real() - pred_diag) <= 0.1 * pred_diag,
           "diagonal two-point = " + fmt3(e_diag.mean.real()) + " vs " +
               fmt3(pred_diag) + " (10% window)");

  VecR xs(7), ys(7);
  const double x_grid[7] = {0.0, 3.0, 6.0, 10.0, 15.0, 22.0, 30.0};
  for (int p = 0; p < 7; ++p) {
    const double kappa = x_grid[p] / (4.0 * kPi * d_mean);
    CorrelatorSpec spec;
    spec.p_terms = {{0, 1, kappa}};
    spec.q_terms = {{0, 1, kappa}};
    spec.n_samples = 20000;
    spec.seed = mix_seed(0x0FF2ULL, p, 0);
    const CorrelatorEstimate est = estimate_correlator(bs.system, spec, workers);
    xs(p) = 2.0 * kappa;
    ys(p) = std::norm(est.mean);
  }
  const auto [amp, width] = fit_lorentzian(xs, ys);
  (void)amp;
  const double width_pred = ericson_width(bs.system.transmissions, d_mean);
  add_line(rep, std::abs(width - width_pred) <= 0.1 * width_pred,
           "fitted half-width = " + fmt3(width) + " vs " + fmt3(width_pred) +
               " (10% window)");
  return rep;
}

VerifyReport verify_gap(int workers) {
  (void)workers;
  VerifyReport rep;
  rep.suite = "gap";
  rep.passed = true;

  // Closed triangle with degree-2 vertices: the classical map is a
  // permutation, every eigenvalue has unit modulus, the gap is exactly zero.
  GraphSpec tri;
  tri.num_vertices = 3;
  tri.bonds = {{1, 0}, {2, 0}, {2, 1}};
  tri.lengths = {1.0, 1.3, 1.7};
  tri.validate();
  std::vector<VertexMatrix> tri_v;
  for (int v = 0; v < 3; ++v)
    tri_v.push_back(build_kirchhoff_vertex(2, false, v));
  const ScatteringSystem tri_sys = assemble_system(tri, tri_v);
  const ClassicalSpectrum tri_spec = classical_map_gap(tri_sys);
  double max_mod_dev = 0.0;
  for (int m = 0; m < tri_spec.spectrum.size(); ++m)
    max_mod_dev = std::max(max_mod_dev,
                           std::abs(std::abs(tri_spec.spectrum(m)) - 1.0));
  add_line(rep, std::abs(tri_spec.gap) <= 1e-12 && max_mod_dev < 1e-12,
           "triangle: gap = " + fmt(tri_spec.gap) +
               ", max |modulus - 1| = " + fmt3(max_mod_dev));

  // Large closed complete graph: mixing, clear gap.
  ExperimentConfig cfg;
  cfg.vertices = 20;
  cfg.leads = 1;  // construction requires one; replaced below by closed vertices
  cfg.seed = 0x5EED05ULL;
  GraphSpec g = build_graph(20, 1, {1.0, 2.0}, cfg.seed);
  g.leads.clear();
  std::vector<VertexMatrix> vs;
  for (int v = 0; v < 20; ++v)
    vs.push_back(build_kirchhoff_vertex(g.degree(v), false, v));
  const ScatteringSystem closed = assemble_system(g, vs);
  const ClassicalSpectrum spec = classical_map_gap(closed);
  add_line(rep, spec.gap > 0.05,
           "complete V=20: gap = " + fmt3(spec.gap) + " (limit 0.05)");
  return rep;
}

VerifyReport verify_trajectories(int workers) {
  (void)workers;
  VerifyReport rep;
  rep.suite = "trajectories";
  rep.passed = true;
  VecR t(2);
  t << 0.7, 0.7;
  const BuiltSystem bs = build_system_from_config(
      verify_base_config(5, 2, t, 0x5EED06ULL));

  // The slowest internal mode sits close to the unit circle for most phase
  // draws (radii up to ~0.9998 here), where reaching a small residual takes
  // impractically many terms.  Scan draws for a moderate radius, then size
  // the term count from it.
  VecR phases;
  double radius = 1.0;
  for (std::uint64_t draw = 0; draw < 40; ++draw) {
    Stream st(0x5EED06ULL, draw, 0x74726a31ULL);
    const VecR candidate = sample_phases(bs.graph, st);
    const double r =
        trajectory_sum(bs.system, candidate, 0.0, 0).spectral_radius;
    if (r <= 0.998) {
      phases = candidate;
      radius = r;
      break;
    }
  }
  add_line(rep, phases.size() > 0,
           "found a phase draw with spectral radius = " + fmt3(radius) +
               " (<= 0.998)");
  if (phases.size() == 0) return rep;

  const int n_max =
      std::min(20000, static_cast<int>(std::ceil(25.0 / (1.0 - radius))));
  const TrajectoryResult tr = trajectory_sum(bs.system, phases, 0.0, n_max);

  // Geometric decay ratio measured over the late window of the residuals.
  int last = n_max;
  while (last > 0 && tr.residual_history(last) <= 1e-12) --last;
  const int first = last / 2;
  double ratio = 0.0;
  if (last - first >= 4)
    ratio = std::pow(tr.residual_history(last) / tr.residual_history(first),
                     1.0 / (last - first));
  add_line(rep, std::abs(ratio - tr.spectral_radius) <= 0.05,
           "decay ratio = " + fmt3(ratio) + " vs spectral radius = " +
               fmt3(tr.spectral_radius) + " (window 0.05)");
  add_line(rep, tr.residual < 1e-8 && !tr.diverged,
           "residual after " + std::to_string(n_max) + " terms = " +
               fmt3(tr.residual) + " (limit 1e-8)");
  return rep;
}

}  // namespace

VerifyReport verify_suite(const std::string& suite, int workers) {
  if (suite == "unitarity") return verify_unitarity(workers);
  if (suite == "mean-s") return verify_mean_s(workers);
  if (suite == "two-point") return verify_two_point(workers);
  if (suite == "ericson") return verify_ericson(workers);
  if (suite == "gap") return verify_gap(workers);
  if (suite == "trajectories") return verify_trajectories(workers);
  throw ConfigError("unknown verify suite '" + suite +
                    "' (expected unitarity, mean-s, two-point, ericson, gap, "
                    "or trajectories)");
}

}  // namespace qgraph

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "qgraph/experiment.hpp"

using namespace qgraph;
namespace fs = std::filesystem;

#ifndef QGRAPH_CONFIG_DIR
#error "QGRAPH_CONFIG_DIR must point at the bundled configuration directory"
#endif

namespace {

nlohmann::json base_config() {
  return nlohmann::json{{"name", "unit"},
                        {"seed", 7},
                        {"graph", {{"vertices", 3}, {"leads", 2}}}};
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("qgraph-test-" + tag);
  fs::remove_all(dir);
  return dir;
}

// filename -> file bytes for every regular file under dir
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    out[fs::relative(entry.path(), dir).string()] = body.str();
  }
  return out;
}

bool has_note(const ExperimentResult& res, const std::string& needle) {
  for (const std::string& line : res.notes)
    if (line.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("config errors carry the JSON path") {
  auto message_of = [](const nlohmann::json& j) {
    try {
      config_from_json(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("(no error)");
  };

  nlohmann::json no_graph = base_config();
  no_graph.erase("graph");
  CHECK(message_of(no_graph).find("$.graph") != std::string::npos);

  nlohmann::json bad_compare = base_config();
  bad_compare["correlators"] = nlohmann::json::array(
      {{{"p", {{{"row", 0}, {"col", 1}}}}, {"compare", "sideways"}}});
  CHECK(message_of(bad_compare).find("$.correlators[0].compare") !=
        std::string::npos);

  nlohmann::json bad_t = base_config();
  bad_t["vertices"] = {{"t_coeff", {0.5, 0.5, 0.5}}};  // 3 values, 2 leads
  CHECK(message_of(bad_t).find("$.vertices.t_coeff") != std::string::npos);

  nlohmann::json bad_leads = base_config();
  bad_leads["graph"]["leads"] = 9;
  CHECK(message_of(bad_leads).find("$.graph.leads") != std::string::npos);

  CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ConfigError);
}

TEST_CASE("bundled configurations parse and build") {
  int found = 0;
  for (const auto& entry : fs::directory_iterator(QGRAPH_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++found;
    const ExperimentConfig cfg = load_config(entry.path());
    CHECK(!cfg.name.empty());
    CHECK(cfg.vertices >= 2);
    const BuiltSystem bs = build_system_from_config(cfg);
    CHECK(bs.system.num_channels() == cfg.leads);
  }
  CHECK(found >= 5);
}

TEST_CASE("small experiment runs green end to end") {
  const fs::path config = fs::path(QGRAPH_CONFIG_DIR) / "tiny-v2.json";
  const fs::path out = fresh_dir("tiny-run");
  const ExperimentResult res = run_experiment(config, out);
  CHECK(res.status == "complete");
  CHECK(res.passed);
  CHECK(has_note(res, "PASS swap"));
  CHECK(has_note(res, "PASS mean-s"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "graph.json"));
  CHECK(fs::exists(out / "system.json"));
  CHECK(fs::exists(out / "correlators.json"));
  CHECK(fs::exists(out / "report.txt"));

  // The manifest checksums every other artifact.
  std::ifstream in(out / "manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(in);
  CHECK(manifest["status"] == "complete");
  CHECK(manifest["files"].contains("graph.json"));
  CHECK(manifest["files"].contains("correlators.json"));
  CHECK(manifest["config"].contains("graph"));
  // execution hints never reach the artifact
  CHECK(!manifest["config"].contains("workers"));
}

TEST_CASE("reruns and worker counts leave artifacts byte-identical") {
  const fs::path config = fs::path(QGRAPH_CONFIG_DIR) / "tiny-v2.json";
  const fs::path out_a = fresh_dir("det-a");
  const fs::path out_b = fresh_dir("det-b");
  const fs::path out_c = fresh_dir("det-c");
  run_experiment(config, out_a, {}, 1);
  run_experiment(config, out_b, {}, 1);
  run_experiment(config, out_c, {}, 3);

  const auto a = snapshot(out_a);
  const auto b = snapshot(out_b);
  const auto c = snapshot(out_c);
  REQUIRE(!a.empty());
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("seed override reroutes every estimate") {
  const fs::path config = fs::path(QGRAPH_CONFIG_DIR) / "tiny-v2.json";
  const fs::path out_a = fresh_dir("seed-a");
  const fs::path out_b = fresh_dir("seed-b");
  run_experiment(config, out_a);
  run_experiment(config, out_b, 43, 0);
  const auto a = snapshot(out_a);
  const auto b = snapshot(out_b);
  CHECK(a.at("correlators.json") != b.at("correlators.json"));
  CHECK(a.at("graph.json") != b.at("graph.json"));
}

TEST_CASE("fast verification suites pass") {
  const VerifyReport gap = verify_suite("gap");
  CHECK(gap.passed);
  CHECK(gap.lines.size() == 2);
  const VerifyReport traj = verify_suite("trajectories");
  CHECK(traj.passed);
  CHECK_THROWS_AS(verify_suite("bogus"), ConfigError);
}

TEST_CASE("randomized systems cover the family matrix") {
  for (int i = 0; i < 6; ++i) {
    const BuiltSystem bs = random_system(0x5151, i);
    CHECK(bs.graph.num_vertices >= 2);
    CHECK(bs.system.num_channels() >= 1);
    // spot unitarity on one dense evaluation
    Stream st(0x5151, 1000 + i, 0);
    const VecR phases = sample_phases(bs.graph, st);
    const SMatrixSample smp = evaluate_s(bs.system, phases, 0.5);
    const MatC& s = smp.s;
    CHECK((s.adjoint() * s - MatC::Identity(s.rows(), s.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

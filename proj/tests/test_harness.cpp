#include "nci/harness.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

using namespace nci;

namespace {

json small_d2() {
  return json{{"model", {{"d", 2}, {"m0", -1.0}}}, {"lattice", {{"L", 8}}}, {"index", {{"R", 2.0}}}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NCI_RUN_EXE) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nci_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, DefaultsAndUnknownKeys) {
  const json r = cfg::resolve(json::object());
  EXPECT_EQ(r["experiment"], "compute-index");
  EXPECT_EQ(r["index"]["delta"], 0.2);
  EXPECT_THROW(cfg::resolve(json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(cfg::resolve(json{{"model", {{"mass", 1}}}}), ConfigError);
  EXPECT_THROW(cfg::resolve(json{{"model", 3}}), ConfigError);
}

TEST(Config, OverridesParseJsonValues) {
  json j = json::object();
  cfg::apply_override(j, "model.m0=-1.5");
  cfg::apply_override(j, "lattice.boundary=open");
  cfg::apply_override(j, "sweep.W=[0,0.1]");
  EXPECT_EQ(j["model"]["m0"], -1.5);
  EXPECT_EQ(j["lattice"]["boundary"], "open");
  EXPECT_EQ(j["sweep"]["W"].size(), 2u);
  EXPECT_THROW(cfg::apply_override(j, "noequals"), ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
  const json a = cfg::resolve(small_d2());
  const json b = cfg::resolve(small_d2());
  EXPECT_EQ(cfg::config_hash(a), cfg::config_hash(b));
  EXPECT_EQ(cfg::config_hash(a).size(), 16u);
  json c = small_d2();
  c["model"]["m0"] = -1.01;
  EXPECT_NE(cfg::config_hash(a), cfg::config_hash(cfg::resolve(c)));
  // FNV-1a reference values
  EXPECT_EQ(cfg::fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(cfg::fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Config, ModelRequestValidation) {
  json c = cfg::resolve(json{{"model", {{"family", "nope"}}}});
  EXPECT_THROW(model_request(c), ConfigError);
  c = cfg::resolve(json{{"lattice", {{"boundary", "twisted"}}}});
  EXPECT_THROW(model_request(c), ConfigError);
  c = cfg::resolve(json{{"model", {{"d", 2}, {"symmetries", json::array({"trs"})}}}});
  EXPECT_THROW(build_model(model_request(c)), ConfigError);
  c = cfg::resolve(json{{"index", {{"delta", 0.7}}}});
  EXPECT_THROW(index_params(c, model_request(c).spec), ConfigError);
  c = cfg::resolve(json{{"index", {{"kink", json::array({3.0, 3.5})}}}});
  EXPECT_THROW(index_params(c, model_request(c).spec), GeometryError);
}

TEST(Experiments, EmptyCellIsRefusedUnlessOverridden) {
  json c = small_d2();
  c["model"]["family"] = "doubled-trs-even";
  c["lattice"]["L"] = 4;
  c["index"]["R"] = 1.0;
  EXPECT_THROW(run_experiment("compute-index", cfg::resolve(c), 1), ConfigError);
  c["allow_empty_cell"] = true;
  EXPECT_NO_THROW(run_experiment("compute-index", cfg::resolve(c), 1));
}

TEST(Experiments, DeclaredClassMustMatch) {
  json c = small_d2();
  c["symmetry_class"] = "AII";
  EXPECT_THROW(run_experiment("compute-index", cfg::resolve(c), 1), ConfigError);
  c["symmetry_class"] = "A";
  EXPECT_NO_THROW(run_experiment("compute-index", cfg::resolve(c), 1));
}

TEST(Experiments, ComputeIndexRecord) {
  const auto run = run_experiment("compute-index", cfg::resolve(small_d2()), 1);
  ASSERT_EQ(run.records.size(), 1u);
  const auto& r = run.records[0];
  EXPECT_EQ(r.status, "ok");
  EXPECT_EQ(*r.index, 1);
  EXPECT_LT(*r.symmetry_residual, 1e-12);
  ASSERT_TRUE(r.susy_residual.has_value());
  EXPECT_LT(*r.susy_residual, 1e-11);
  EXPECT_TRUE(run.all_certified());
}

TEST(Experiments, StatusesAreTypedRecords) {
  json c = small_d2();
  c["model"]["m0"] = 2.0;  // gap closes at E = 0
  const auto run = run_experiment("compute-index", cfg::resolve(c), 1);
  EXPECT_EQ(run.records[0].status, "fermi_level_on_spectrum");
  EXPECT_FALSE(run.all_certified());
}

TEST(Experiments, DeterministicAcrossWorkerCounts) {
  json c = small_d2();
  c["disorder"] = {{"W", 0.4}, {"n_realizations", 4}, {"seed", 11}};
  const json r = cfg::resolve(c);
  const auto a = run_experiment("compute-index", r, 1);
  const auto b = run_experiment("compute-index", r, 3);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(csv_row(a.hash, a.records[i]), csv_row(b.hash, b.records[i]));
  EXPECT_NE(csv_row(a.hash, a.records[0]), csv_row(a.hash, a.records[1]));
}

TEST(Experiments, MomentumInvariant) {
  json c = json{{"model", {{"d", 1}, {"m0", 0.0}}}, {"grid", {{"n_k", 128}}}};
  const auto run = run_experiment("momentum-invariant", cfg::resolve(c), 1);
  EXPECT_NEAR(std::abs(run.summary["chiral_winding"].get<double>()), 1.0, 1e-6);
  EXPECT_NEAR(std::abs(run.summary["winding_unitvector"].get<double>()), 1.0, 1e-8);
}

TEST(Experiments, CliffordSelftest) {
  const auto run = run_experiment("clifford-selftest", cfg::resolve(json::object()), 1);
  EXPECT_TRUE(run.summary["pass"].get<bool>());
  EXPECT_EQ(run.records.size(), 4u);
}

TEST(Experiments, LinearResponseSignOdd) {
  json c = json{{"model", {{"d", 1}, {"m0", 0.0}}}, {"linear_response", {{"L", json::array({24, 32})}}}};
  const auto run = run_experiment("linear-response", cfg::resolve(c), 1);
  for (const auto& e : run.summary["response"]) {
    EXPECT_NEAR(e["g_I"].get<double>(), -e["g_I_flipped"].get<double>(), 1e-12);
    EXPECT_GT(std::abs(e["g_I"].get<double>()), 0.1);
  }
}

TEST(LinearResponse, ZeroHoppingGivesZero) {
  DiracModelParams p{1, {0.0}, {0.0}, 1.0};
  const auto m = build_dirac_lattice_model(p, LatticeSpec::cube(1, 16, Boundary::periodic, 2));
  EXPECT_EQ(linear_response_1d(m), 0.0);
}

TEST(Experiments, ConvergenceGrid) {
  json c = json{{"model", {{"d", 1}, {"m0", 0.5}}},
                {"convergence",
                 {{"L", json::array({8, 16, 32})}, {"R", json::array({"L/4"})}, {"delta", json::array({0.1, 0.3})}}}};
  const auto run = run_experiment("convergence", cfg::resolve(c), 2);
  ASSERT_EQ(run.records.size(), 6u);
  for (const auto& r : run.records) EXPECT_EQ(std::abs(*r.index), 1);
  // 1 - lambda shrinks as the window grows with L
  EXPECT_GT(*run.records[0].near_distance, *run.records[2].near_distance);
  EXPECT_GT(*run.records[2].near_distance, *run.records[4].near_distance);
  for (const auto& s : run.summary["series"]) {
    EXPECT_TRUE(s["non_increasing"].get<bool>());
    EXPECT_EQ(s["distinct_indices"].size(), 1u);
  }
  c["convergence"]["R"] = json::array({"L/3"});
  EXPECT_THROW(run_experiment("convergence", cfg::resolve(c), 1), ConfigError);
}

TEST(Outputs, FilesAreByteIdenticalOnRerun) {
  const json r = cfg::resolve(small_d2());
  const auto d1 = scratch("out1"), d2 = scratch("out2");
  write_outputs(run_experiment("compute-index", r, 1), d1);
  write_outputs(run_experiment("compute-index", r, 2), d2);
  EXPECT_EQ(slurp(d1 / "records.csv"), slurp(d2 / "records.csv"));
  EXPECT_EQ(slurp(d1 / "summary.json"), slurp(d2 / "summary.json"));
  const std::string csv = slurp(d1 / "records.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), csv_header);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  std::filesystem::create_directories(dir);
  const auto cfg_path = dir / "c.json";
  std::ofstream(cfg_path) << small_d2().dump();
  const std::string base = "--config " + cfg_path.string() + " --out " + (dir / "o").string();
  EXPECT_EQ(run_cli("compute-index " + base), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "o" / "records.csv"));
  EXPECT_EQ(run_cli("compute-index " + base + " --override nope=1"), 2);
  EXPECT_EQ(run_cli("compute-index --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("compute-index " + base + " --override model.family=doubled-trs-even --override lattice.L=4"), 2);
  // a wide tolerance puts interior eigenvalues in the buffer zone
  EXPECT_EQ(run_cli("compute-index " + base + " --override index.delta=0.45 --strict"), 3);
  EXPECT_EQ(run_cli("compute-index " + base + " --override index.delta=0.45"), 0);
  EXPECT_NE(run_cli("not-an-experiment"), 0);
}

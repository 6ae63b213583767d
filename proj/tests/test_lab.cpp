#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "sdlab/lab.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace sdlab::lab;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json small_formbound(double declared_delta) {
  return {{"kind", "formbound"},
          {"name", "fb"},
          {"grid", {{"d", 3}, {"L", 1.0}, {"N", 16}}},
          {"drift", {{"family", "hardy"}, {"d", 3}, {"delta", 1.0}, {"sign", 1}}},
          {"formbound",
           {{"lambda", 0.0},
            {"family", {{"type", "hardy_optimizers"}, {"offsets", {0.1, 0.2}}, {"cutoff", 0.8}}},
            {"declared", {{{"delta", declared_delta}, {"c", 0.0}, {"expect", "pass"}}}}}}};
}

json small_scan() {
  return {{"kind", "sde-scan"},
          {"name", "scan"},
          {"seed", 5},
          {"sde",
           {{"d", 3}, {"x0", {0.5, 0.0, 0.0}}, {"dt", 4e-6}, {"T", 1e9}, {"paths", 40},
            {"box_radius", 10.0}, {"step_factor", 0.01}, {"eps_hit_list", {0.1}}}},
          {"delta_list", {0, 16, 64}}};
}

}  // namespace

TEST(Manifest, ValidationErrorsNameTheField) {
  json m = small_formbound(1.0);
  m["grid"]["N"] = 8;
  auto r = run_experiment(m, {std::nullopt, scratch("v1").string()});
  EXPECT_EQ(r.exit_code, kExitValidation);
  EXPECT_NE(r.message.find("grid.N"), std::string::npos) << r.message;

  m = small_formbound(1.0);
  m["drift"]["family"] = "bogus";
  r = run_experiment(m, {std::nullopt, scratch("v2").string()});
  EXPECT_EQ(r.exit_code, kExitValidation);
  EXPECT_NE(r.message.find("drift"), std::string::npos) << r.message;

  json multi = {{"experiments", {small_formbound(1.0), {{"kind", "nonsense"}}}}};
  r = run_experiment(multi, {std::nullopt, scratch("v3").string()});
  EXPECT_EQ(r.exit_code, kExitValidation);
  EXPECT_NE(r.message.find("experiments[1].kind"), std::string::npos) << r.message;

  EXPECT_EQ(run_experiment(json::array(), {}).exit_code, kExitValidation);
}

TEST(Manifest, EmptyExperimentListPasses) {
  const fs::path dir = scratch("empty");
  const auto r = run_experiment({{"experiments", json::array()}}, {std::nullopt, dir.string()});
  EXPECT_EQ(r.exit_code, kExitPass);
  EXPECT_TRUE(r.index.at("artifacts").empty());
  EXPECT_TRUE(fs::exists(dir / "index.json"));
}

TEST(Manifest, DuplicateNamesAreSuffixed) {
  const auto exps = validate_manifest({{"experiments", {small_formbound(1.0), small_formbound(1.0)}}});
  ASSERT_EQ(exps.size(), 2u);
  EXPECT_NE(exps[0].at("name"), exps[1].at("name"));
}

TEST(Run, FormboundWritesReport) {
  const fs::path dir = scratch("fb");
  const auto r = run_experiment(small_formbound(1.0), {std::nullopt, dir.string()});
  ASSERT_EQ(r.exit_code, kExitPass) << r.message;
  const json rep = json::parse(slurp(dir / "fb.json"));
  EXPECT_TRUE(rep.contains("delta_est"));
  EXPECT_GT(rep.at("delta_est").get<double>(), 0.0);
  EXPECT_LT(rep.at("delta_est").get<double>(), 1.0);
  EXPECT_TRUE(rep.at("pass").get<bool>());
  EXPECT_TRUE(fs::exists(dir / "fb_estimates.csv"));
}

TEST(Run, CertificateMismatchExitsThree) {
  // a Hardy drift is not form-bounded with δ = 0.01 on this grid
  const auto r = run_experiment(small_formbound(0.01), {std::nullopt, scratch("fb3").string()});
  EXPECT_EQ(r.exit_code, kExitCertificateFailed) << r.message;
}

TEST(Run, CflViolationIsAComputationError) {
  json m = {{"kind", "evolve"},
            {"name", "ev"},
            {"grid", {{"d", 3}, {"L", 2.0}, {"N", 17}}},
            {"drift", {{"family", "hardy"}, {"d", 3}, {"delta", 1.0}, {"sign", 1}}},
            {"mollify", {{"epsilon", 0.3}}},
            {"initial", {{"type", "point_mass"}, {"center", {0, 0, 0}}}},
            {"evolution", {{"tau", 0.5}, {"T", 1.0}}}};
  auto r = run_experiment(m, {std::nullopt, scratch("cfl").string()});
  EXPECT_EQ(r.exit_code, kExitComputation) << r.message;
  m["evolution"]["cfl_safety"] = 0.9;
  r = run_experiment(m, {std::nullopt, scratch("cfl2").string()});
  EXPECT_NE(r.exit_code, kExitComputation) << r.message;
}

TEST(Run, ScanIsByteIdenticalOnRerun) {
  const fs::path a = scratch("scan_a"), b = scratch("scan_b");
  ASSERT_EQ(run_experiment(small_scan(), {std::nullopt, a.string()}).exit_code, kExitPass);
  ASSERT_EQ(run_experiment(small_scan(), {std::nullopt, b.string()}).exit_code, kExitPass);
  for (const auto& f : {"index.json", "scan.json", "scan_curve.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  // the seed override changes the sample
  const fs::path c = scratch("scan_c");
  ASSERT_EQ(run_experiment(small_scan(), {std::uint64_t{6}, c.string()}).exit_code, kExitPass);
  EXPECT_NE(slurp(a / "scan_curve.csv"), slurp(c / "scan_curve.csv"));
}

TEST(Render, HittingCurveMarksTheThreshold) {
  const fs::path dir = scratch("render");
  ASSERT_EQ(run_experiment(small_scan(), {std::nullopt, dir.string()}).exit_code, kExitPass);
  const auto res = render_report(dir / "index.json");
  ASSERT_FALSE(res.plots.empty());
  EXPECT_TRUE(res.skipped.empty());
  const std::string svg = slurp(dir / res.plots.front());
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("delta = 36"), std::string::npos);
}

TEST(Render, MissingCsvIsSkipped) {
  const fs::path dir = scratch("render2");
  ASSERT_EQ(run_experiment(small_scan(), {std::nullopt, dir.string()}).exit_code, kExitPass);
  fs::remove(dir / "scan_curve.csv");
  const auto res = render_report(dir / "index.json");
  EXPECT_TRUE(res.plots.empty());
  EXPECT_EQ(res.skipped.size(), 1u);
}

TEST(Render, EmptyIndex) {
  const fs::path dir = scratch("render3");
  std::ofstream(dir / "index.json") << R"({"artifacts": [], "pass": true})";
  const auto res = render_report(dir / "index.json");
  EXPECT_TRUE(res.plots.empty());
  EXPECT_TRUE(res.skipped.empty());
  EXPECT_THROW(render_report(dir / "missing.json"), sdlab::Error);
}

TEST(Run, TrotterReportsMuOnset) {
  const fs::path dir = scratch("trotter");
  const json m = {{"kind", "trotter"},
                  {"name", "tr"},
                  {"grid", {{"d", 3}, {"L", 3.0}, {"N", 17}}},
                  {"drift", {{"family", "compact_hardy"}, {"d", 3}, {"delta", 1.0}, {"radius", 1.0}}},
                  {"mollify", {{"epsilon", 0.8}, {"sampling", "cell_average"}}},
                  {"epsilons", {1.6, 0.8}},
                  {"mu_list", {10, 100}},
                  {"g", {{"type", "bump"}, {"center", {0, 0, 0}}, {"radius", 1.0}}}};
  const auto r = run_experiment(m, {std::nullopt, dir.string()});
  ASSERT_NE(r.exit_code, kExitValidation) << r.message;
  ASSERT_NE(r.exit_code, kExitComputation) << r.message;
  const json rep = json::parse(slurp(dir / "tr.json"));
  // the scheme contracts for every μ, so condition 1 holds from the smallest
  EXPECT_EQ(rep.at("mu_onset").at("condition1"), 10.0);
  EXPECT_TRUE(rep.at("condition1").get<bool>());
}

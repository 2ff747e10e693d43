// Copyright 2026 The otbayes Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cli/commands.hpp"

namespace fs = std::filesystem;
using otbayes::cli::RunConfig;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("otbayes-cli-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

RunConfig config(const std::string& command, const std::string& dir) {
  RunConfig cfg;
  cfg.command = command;
  cfg.out = scratch(dir);
  return cfg;
}

// Small enough to run in a unit test; thresholds are not expected to hold.
RunConfig tiny_icnn(const std::string& dir) {
  RunConfig cfg = config("bimodal-icnn", dir);
  cfg.particles = 500;
  cfg.eval_samples = 400;
  cfg.units = 8;
  cfg.train.outer_steps = 30;
  cfg.train.inner_steps = 2;
  cfg.train.batch_size = 64;
  return cfg;
}

}  // namespace

TEST(Config, FileValuesThenOverrides) {
  RunConfig cfg;
  otbayes::cli::apply_config_text(cfg,
                                  "# comment\n"
                                  "seed = 7\n"
                                  "  particles=300  \n"
                                  "\n"
                                  "lr_f = 5e-4\n"
                                  "plot = false\n"
                                  "projection = absolute\n");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.particles, 300);
  EXPECT_DOUBLE_EQ(cfg.train.lr_f, 5e-4);
  EXPECT_FALSE(cfg.plot);
  EXPECT_EQ(cfg.train.projection, otbayes::ProjectionMode::kAbsolute);
  otbayes::cli::apply_setting(cfg, "seed", "9");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.particles, 300);
}

TEST(Config, Errors) {
  RunConfig cfg;
  const auto message = [&](const std::string& text) {
    try {
      otbayes::cli::apply_config_text(cfg, text);
    } catch (const otbayes::Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("colour = red\n").find("unknown key 'colour'"), std::string::npos);
  EXPECT_NE(message("seed 4\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("\nparticles = lots\n").find("bad value 'lots'"), std::string::npos);
  EXPECT_NE(message("plot = maybe\n").find("bad boolean"), std::string::npos);
  EXPECT_NE(message("= 3\n").find("empty key"), std::string::npos);
}

TEST(Config, FileRoundTrip) {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "run.cfg") << "dt = 0.002\nhorizon = 0.5\nobservation_function = constant\n";
  RunConfig cfg;
  otbayes::cli::apply_config_file(cfg, dir / "run.cfg");
  EXPECT_DOUBLE_EQ(cfg.dt, 0.002);
  EXPECT_DOUBLE_EQ(cfg.horizon, 0.5);
  EXPECT_EQ(cfg.observation_function, "constant");
  EXPECT_THROW(otbayes::cli::apply_config_file(cfg, dir / "missing.cfg"), otbayes::Error);
}

TEST(Prop1Check, DefaultCasesPass) {
  const RunConfig cfg = config("prop1-check", "prop1");
  const auto report = otbayes::cli::run_command(cfg);
  EXPECT_TRUE(report.passed());
  EXPECT_LT(report.check("max_entrywise_error").value, 1e-4);
  EXPECT_EQ(line_count(cfg.out / "prop1-check-cases.csv"), 21u);
  EXPECT_TRUE(fs::exists(cfg.out / "prop1-check-errors.svg"));
}

TEST(Prop1Check, ScalarCaseRuns) {
  RunConfig cfg = config("prop1-check", "prop1-scalar");
  cfg.cases = 1;
  EXPECT_TRUE(otbayes::cli::run_command(cfg).passed());
  EXPECT_NE(slurp(cfg.out / "prop1-check-cases.csv").find("\n0,1,1,"), std::string::npos);
}

TEST(Prop1Check, SingularObservationCovariance) {
  RunConfig cfg = config("prop1-check", "prop1-degenerate");
  cfg.degenerate_case = true;
  try {
    otbayes::cli::run_command(cfg);
    FAIL() << "expected an error";
  } catch (const otbayes::Error& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate moments"), std::string::npos);
  }
}

TEST(GaussEnkf, TwoParticlesComplete) {
  RunConfig cfg = config("gauss-enkf", "enkf-two");
  cfg.particles = 2;
  const auto report = otbayes::cli::run_command(cfg);
  EXPECT_TRUE(report.check("moment_identity_residual").passed);
  EXPECT_EQ(line_count(cfg.out / "gauss-enkf-particles.csv"), 3u);
}

TEST(GaussEnkf, RejectsSingleParticle) {
  RunConfig cfg = config("gauss-enkf", "enkf-one");
  cfg.particles = 1;
  EXPECT_THROW(otbayes::cli::run_command(cfg), otbayes::Error);
}

TEST(GaussEnkf, ReferenceRunPasses) {
  const RunConfig cfg = config("gauss-enkf", "enkf-ref");
  const auto report = otbayes::cli::run_command(cfg);
  EXPECT_TRUE(report.passed());
  EXPECT_LT(report.check("moment_identity_residual").value, 1e-8);
  EXPECT_LE(report.check("ot_minus_perturbed_displacement").value, 0.0);
}

TEST(Fpf, ConstantObservationLeavesStatistics) {
  RunConfig cfg = config("fpf", "fpf-constant");
  cfg.observation_function = "constant";
  cfg.horizon = 0.05;
  cfg.particles = 500;
  const auto report = otbayes::cli::run_command(cfg);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.checks.size(), 1u);
  EXPECT_FALSE(fs::exists(cfg.out / "fpf-expansion.csv"));
}

TEST(Output, SvgNamesAndPlotToggle) {
  RunConfig cfg = config("fpf", "svg");
  cfg.horizon = 0.01;
  cfg.particles = 200;
  cfg.expansion_samples = 2000;
  const auto report = otbayes::cli::run_command(cfg);
  for (const char* panel : {"trajectory", "gain", "expansion"}) {
    EXPECT_TRUE(fs::exists(cfg.out / (std::string("fpf-") + panel + ".svg"))) << panel;
  }
  for (const auto& f : report.files) EXPECT_EQ(f.filename().string().rfind("fpf-", 0), 0u) << f;

  cfg.out = scratch("no-svg");
  cfg.plot = false;
  otbayes::cli::run_command(cfg);
  for (const auto& entry : fs::directory_iterator(cfg.out)) EXPECT_NE(entry.path().extension(), ".svg");
}

TEST(Output, IcnnArtifacts) {
  const RunConfig cfg = tiny_icnn("icnn-files");
  const auto report = otbayes::cli::run_command(cfg);
  for (const char* name : {"loss.csv", "loss.svg", "f.ckpt", "g.ckpt", "scatter.csv", "scatter.svg", "posterior.csv",
                           "posterior-y0.svg", "posterior-y1.svg", "metrics.csv", "checks.csv"}) {
    EXPECT_TRUE(fs::exists(cfg.out / (std::string("bimodal-icnn-") + name))) << name;
  }
  EXPECT_EQ(line_count(cfg.out / "bimodal-icnn-loss.csv"), 31u);
  EXPECT_EQ(report.checks.size(), 3u);
}

TEST(Output, ChecksCsvListsFailures) {
  otbayes::cli::CommandReport report{"demo", {}, {}};
  report.at_most("small", 0.5, 1.0);
  report.at_least("large", 0.5, 1.0);
  report.above("nan", std::nan(""), 0.0);
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(otbayes::cli::print_report(report, out, err), 1);
  EXPECT_EQ(out.str(), "PASS demo small value=0.5 <= 1\n");
  EXPECT_EQ(err.str(), "FAIL demo large value=0.5 >= 1\nFAIL demo nan value=nan > 0\n");
  EXPECT_THROW((void)report.check("absent"), otbayes::Error);
}

TEST(Output, UnknownCommand) {
  const RunConfig cfg = config("plot-everything", "unknown");
  EXPECT_THROW(otbayes::cli::run_command(cfg), otbayes::Error);
}

class Determinism : public ::testing::TestWithParam<std::string> {};

TEST_P(Determinism, RerunGivesIdenticalCsv) {
  const auto make = [&](const std::string& dir) {
    RunConfig cfg = GetParam() == "bimodal-icnn" ? tiny_icnn(dir) : config(GetParam(), dir);
    cfg.seed = 11;
    cfg.plot = false;
    if (GetParam() == "fpf") {
      cfg.horizon = 0.05;
      cfg.particles = 300;
      cfg.expansion_samples = 5000;
    }
    return cfg;
  };
  const RunConfig a = make("det-a-" + GetParam());
  const RunConfig b = make("det-b-" + GetParam());
  const auto ra = otbayes::cli::run_command(a);
  otbayes::cli::run_command(b);
  std::size_t compared = 0;
  for (const auto& f : ra.files) {
    if (f.extension() != ".csv") continue;
    EXPECT_EQ(slurp(f), slurp(b.out / f.filename())) << f;
    ++compared;
  }
  EXPECT_GE(compared, 2u);
}

INSTANTIATE_TEST_SUITE_P(Commands, Determinism,
                         ::testing::Values("prop1-check", "gauss-enkf", "bimodal-icnn", "fpf"),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

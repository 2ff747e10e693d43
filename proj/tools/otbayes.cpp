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


// Command-line driver: otbayes <subcommand> [flags].

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  long particles = 0;
  std::string out;
  bool no_plot = false;
  std::vector<std::string> settings;
};

void add_common(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config, "key = value file; flags override it")->check(CLI::ExistingFile);
  sub->add_option("--seed", flags.seed, "root random seed");
  sub->add_option("--particles", flags.particles, "ensemble or training-set size")->check(CLI::PositiveNumber);
  sub->add_option("--out", flags.out, "output directory");
  sub->add_flag("--no-plot", flags.no_plot, "skip SVG output");
  sub->add_option("--set", flags.settings, "extra key=value setting, applied last");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-transport Bayesian update experiments"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& name : otbayes::cli::command_names()) add_common(app.add_subcommand(name), flags);
  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  otbayes::cli::RunConfig cfg;
  cfg.command = sub->get_name();
  try {
    if (!flags.config.empty()) otbayes::cli::apply_config_file(cfg, flags.config);
    if (sub->count("--seed") > 0) cfg.seed = flags.seed;
    if (sub->count("--particles") > 0) cfg.particles = flags.particles;
    if (sub->count("--out") > 0) cfg.out = flags.out;
    if (flags.no_plot) cfg.plot = false;
    for (const auto& kv : flags.settings) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw otbayes::Error("--set expects key=value, got '" + kv + "'");
      otbayes::cli::apply_setting(cfg, otbayes::cli::detail::trim(kv.substr(0, eq)),
                                  otbayes::cli::detail::trim(kv.substr(eq + 1)));
    }
    const auto report = otbayes::cli::run_command(cfg);
    return otbayes::cli::print_report(report, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "ERROR " << cfg.command << ": " << e.what() << '\n';
    return 2;
  }
}

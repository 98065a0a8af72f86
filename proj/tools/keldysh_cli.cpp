// Copyright 2026 The keldysh-map Authors
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


// keldysh: command-line front end for scenario runs.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "keldysh/scenario.hpp"

namespace {

using namespace keldysh;

int env_threads() {
  const char* v = std::getenv("KELDYSH_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("KELDYSH_THREADS must be a positive integer");
  return static_cast<int>(n);
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string mode;
  std::optional<int> k_cut;

  RunOptions options() const {
    RunOptions o;
    if (!out.empty()) o.out_dir = out;
    o.seed = seed;
    o.threads = threads ? *threads : env_threads();
    if (o.threads < 1) throw ConfigError("--threads must be >= 1");
    if (!mode.empty()) {
      if (mode != "secular" && mode != "fullwave") throw ConfigError("--mode must be secular or fullwave");
      o.mode = mode == "secular" ? MapMode::Secular : MapMode::Fullwave;
    }
    o.k_cut = k_cut;
    return o;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("config,--config", c.config, "scenario file or bundled scenario name")->required();
  app->add_option("--out", c.out, "output directory (default: the scenario's output field)");
  app->add_option("--seed", c.seed, "random seed override");
  app->add_option("--threads", c.threads, "worker threads (default: KELDYSH_THREADS or 1)");
  app->add_option("--mode", c.mode, "secular or fullwave");
  app->add_option("--kcut", c.k_cut, "fullwave cross-mode cutoff");
}

void print_report(const RunReport& r) {
  std::cout << "output: " << r.out_dir.string() << "\n";
  for (const auto& f : r.files) std::cout << "  " << f << "\n";
  bool all = true;
  for (const auto& e : r.cptp) all = all && e.report.cptp();
  if (!r.cptp.empty()) std::cout << "cptp: " << (all ? "all maps CPTP" : "NOT CPTP (see manifest.json)") << "\n";
  if (!r.summary.is_null()) std::cout << r.summary.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Second-order Keldysh decoherence maps for driven few-level systems"};
  app.set_version_flag("--version", KELDYSH_VERSION);
  app.require_subcommand(1);

  Common run_opts;
  CLI::App* run = app.add_subcommand("run", "run a scenario and write its outputs");
  add_common(run, run_opts);

  std::vector<std::string> to_check;
  CLI::App* validate = app.add_subcommand("validate", "parse and check scenario files without running them");
  validate->add_option("configs,--config", to_check, "scenario files or names")->required();

  CLI::App* list = app.add_subcommand("list", "list bundled scenarios");

  Common phi_opts;
  int k_max = 8;
  bool lines = false;
  CLI::App* phi = app.add_subcommand("phi-table", "tabulate diagonal overlaps for a scenario's spectrum and tau");
  add_common(phi, phi_opts);
  phi->add_option("--kmax", k_max, "largest |k|");
  phi->add_flag("--lines", lines, "also tabulate the line integrals J_k");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      const RunOptions o = run_opts.options();
      print_report(run_scenario(load_scenario(resolve_scenario(run_opts.config)), o));
    } else if (*validate) {
      for (const auto& c : to_check) {
        const ScenarioConfig cfg = load_scenario(resolve_scenario(c));
        std::cout << "ok: " << cfg.name << " (dim " << cfg.model.dim() << ", n_t " << cfg.n_t << ")\n";
      }
    } else if (*list) {
      const auto dir = scenario_dir();
      for (const auto& n : list_scenarios(dir)) {
        std::string desc;
        try {
          desc = load_scenario(dir / (n + ".json")).description;
        } catch (const ConfigError& e) {
          desc = std::string("invalid: ") + e.what();
        }
        std::cout << n << (desc.empty() ? "" : "  " + desc) << "\n";
      }
    } else if (*phi) {
      const RunOptions o = phi_opts.options();
      print_report(write_phi_table(load_scenario(resolve_scenario(phi_opts.config)), o, k_max, lines));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

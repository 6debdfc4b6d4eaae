// Copyright 2026 The qmarl Authors
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

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qmarl/experiment.hpp"

namespace {

namespace ex = qmarl::experiment;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

struct CommonFlags {
  std::string config_file;
  std::string env;
  std::string protocol;
  std::string seeds;
  std::string out_dir;
  std::optional<std::size_t> episodes;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
  bool trace = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "key = value settings file");
  cmd->add_option("--env", f.env, "ipd | stag_hunt | chicken | harvest");
  cmd->add_option("--protocol", f.protocol,
                  "baseline | mate_rew | mate_td | automate | mediate_i | mediate_s | gifting_zerosum | "
                  "gifting_budget | rial | harvest_iql");
  cmd->add_option("--seed,--seeds", f.seeds, "seed list, e.g. 7 or 0-14 or 0,3,5");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  cmd->add_option("--episodes", f.episodes, "episode count");
  cmd->add_option("--override", f.overrides, "key=value setting (repeatable)");
  cmd->add_option("--jobs", f.jobs, "seeds run concurrently")->check(CLI::PositiveNumber);
  cmd->add_flag("--trace", f.trace, "write a per-step protocol trace");
}

std::pair<std::string, std::string> split_kv(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw qmarl::ConfigError("expected key=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

ex::ExperimentConfig build_config(const CommonFlags& f, const std::vector<std::string>& grid = {}) {
  std::vector<std::pair<std::string, std::string>> settings;
  if (!f.config_file.empty()) settings = ex::read_settings_file(f.config_file);
  if (!f.env.empty()) settings.emplace_back("env", f.env);
  if (!f.env.empty() && f.env == "harvest" && f.protocol.empty()) settings.emplace_back("protocol", "harvest_iql");
  if (!f.protocol.empty()) settings.emplace_back("protocol", f.protocol);
  if (!f.seeds.empty()) settings.emplace_back("seeds", f.seeds);
  if (!f.out_dir.empty()) settings.emplace_back("out_dir", f.out_dir);
  if (f.episodes) settings.emplace_back("episodes", std::to_string(*f.episodes));
  if (f.trace) settings.emplace_back("trace", "true");
  for (const auto& o : f.overrides) settings.push_back(split_kv(o));
  for (const auto& g : grid) {
    auto [k, v] = split_kv(g);
    settings.emplace_back("grid." + k, v);
  }
  auto config = ex::resolve_config(settings);
  ex::validate(config);
  return config;
}

int report_run(const ex::RunReport& report) {
  for (const auto& s : report.seeds) {
    if (s.ok) {
      std::cout << "seed " << s.seed << ": ok (" << s.seconds << " s) " << s.episodes_csv.string() << '\n';
    } else {
      std::cerr << "seed " << s.seed << ": FAILED: " << s.error << '\n';
    }
  }
  return report.all_ok() ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum multi-agent Q-learning with communication protocols"};
  app.set_version_flag("--version", std::string(ex::kVersion));
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "train agents for every configured seed");
  add_common(run_cmd, run_flags);

  CommonFlags sweep_flags;
  std::vector<std::string> grid;
  auto* sweep_cmd = app.add_subcommand("sweep", "one run per point of a parameter grid");
  add_common(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--grid", grid, "axis=v1,v2,... (repeatable)");

  std::vector<std::string> summary_dirs;
  std::size_t window = 100;
  std::string summary_out;
  auto* sum_cmd = app.add_subcommand("summarize", "aggregate run directories across seeds");
  sum_cmd->add_option("dirs", summary_dirs, "run directories")->required();
  sum_cmd->add_option("--window", window, "final episodes per seed")->check(CLI::PositiveNumber);
  sum_cmd->add_option("--out", summary_out, "CSV output path (default stdout)");

  std::vector<std::string> checkpoints;
  auto* eval_cmd = app.add_subcommand("eval", "greedy final-policy evaluation of checkpoints");
  eval_cmd->add_option("checkpoints", checkpoints, "one or two agent checkpoints")->required()->expected(1, 2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) {
      const auto config = build_config(run_flags);
      return report_run(ex::run(config, run_flags.jobs));
    }
    if (*sweep_cmd) {
      const auto config = build_config(sweep_flags, grid);
      const auto report = ex::sweep(config, sweep_flags.jobs);
      for (const auto& [point, r] : report.completed) {
        std::cout << "ok     " << (point.label.empty() ? "(single run)" : point.label) << " -> " << r.dir.string()
                  << '\n';
      }
      for (const auto& [point, why] : report.failed) {
        std::cerr << "FAILED " << (point.label.empty() ? "(single run)" : point.label) << ": " << why << '\n';
      }
      if (report.failed.empty()) return kExitOk;
      return report.completed.empty() ? kExitRuntime : kExitPartial;
    }
    if (*sum_cmd) {
      std::vector<std::filesystem::path> dirs(summary_dirs.begin(), summary_dirs.end());
      const auto rows = ex::summarize(dirs, window);
      if (summary_out.empty()) {
        ex::write_summary_csv(std::cout, rows);
      } else {
        std::ofstream out(summary_out);
        if (!out) throw qmarl::InputError("cannot write " + summary_out);
        ex::write_summary_csv(out, rows);
      }
      return kExitOk;
    }
    if (*eval_cmd) {
      std::vector<qmarl::qnet::Checkpoint> loaded;
      for (const auto& path : checkpoints) loaded.push_back(qmarl::qnet::load_checkpoint(path));
      std::cout << "agent,coop_fraction\n";
      for (std::size_t i = 0; i < loaded.size(); ++i) {
        if (!loaded[i].protocol || *loaded[i].protocol == qmarl::qnet::ProtocolKind::HarvestIql) {
          throw qmarl::ConfigError(checkpoints[i] + ": final-policy evaluation needs a matrix-game agent");
        }
        std::cout << i << ','
                  << qmarl::metrics::format_number(
                         qmarl::metrics::final_policy_eval(*loaded[i].net, *loaded[i].protocol))
                  << '\n';
      }
      if (loaded.size() == 2) {
        if (loaded[0].protocol != loaded[1].protocol) throw qmarl::ConfigError("checkpoints use different protocols");
        const bool dd =
            qmarl::metrics::converges_to_mutual_defection(*loaded[0].net, *loaded[1].net, *loaded[0].protocol);
        std::cout << "# greedy self-play ends in mutual defection: " << (dd ? "yes" : "no") << '\n';
      }
      return kExitOk;
    }
  } catch (const qmarl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

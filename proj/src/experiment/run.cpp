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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "qmarl/experiment.hpp"

namespace qmarl::experiment {

namespace fs = std::filesystem;

namespace {

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw InputError("cannot replace " + path.string() + ": " + ec.message());
}

nlohmann::json manifest_json(const ExperimentConfig& config, const std::vector<SeedReport>& seeds,
                             const std::string& status) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["status"] = status;
  j["env"] = std::string(env_name(config.env));
  j["protocol"] = std::string(qnet::protocol_name(config.protocol));
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : to_settings(config)) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : seeds) {
    nlohmann::json e;
    e["seed"] = s.seed;
    e["ok"] = s.ok;
    if (!s.error.empty()) e["error"] = s.error;
    if (!s.episodes_csv.empty()) e["episodes_csv"] = s.episodes_csv.string();
    if (!s.final_eval_csv.empty()) e["final_eval_csv"] = s.final_eval_csv.string();
    nlohmann::json ck = nlohmann::json::array();
    for (const auto& p : s.checkpoints) ck.push_back(p.string());
    e["checkpoints"] = ck;
    e["seconds"] = s.seconds;
    list.push_back(e);
  }
  j["seeds"] = list;
  return j;
}

std::string settings_text(const ExperimentConfig& config) {
  std::string text = "# " + std::string(kVersion) + " resolved configuration\n";
  for (const auto& [k, v] : to_settings(config)) {
    if (k.rfind("grid.", 0) == 0) continue;
    text += k + " = " + v + "\n";
  }
  return text;
}

SeedReport run_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir) {
  SeedReport report;
  report.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const fs::path seed_dir = dir / ("seed_" + std::to_string(seed));
    fs::create_directories(seed_dir);
    auto outcome = simulate(config, seed);

    report.episodes_csv = seed_dir / "episodes.csv";
    {
      std::ofstream out(report.episodes_csv, std::ios::binary);
      if (!out) throw InputError("cannot write " + report.episodes_csv.string());
      metrics::write_episode_csv(out, outcome.records);
      if (!out) throw InputError("failed writing " + report.episodes_csv.string());
    }
    report.final_eval_csv = seed_dir / "final_eval.csv";
    {
      std::ofstream out(report.final_eval_csv, std::ios::binary);
      if (!out) throw InputError("cannot write " + report.final_eval_csv.string());
      out << "agent,coop_fraction\n";
      if (outcome.coop_fraction) {
        for (std::size_t i = 0; i < 2; ++i) {
          out << i << ',' << metrics::format_number((*outcome.coop_fraction)[i]) << '\n';
        }
      }
      if (!out) throw InputError("failed writing " + report.final_eval_csv.string());
    }
    if (config.checkpoints) {
      const std::optional<qnet::ProtocolKind> protocol =
          dynamic_cast<const qnet::QNetwork*>(outcome.nets[0].get()) ? std::optional(config.protocol) : std::nullopt;
      for (std::size_t i = 0; i < 2; ++i) {
        const fs::path path = seed_dir / ("agent" + std::to_string(i) + ".json");
        qnet::save_checkpoint(*outcome.nets[i], protocol, path.string());
        report.checkpoints.push_back(path);
      }
    }
    if (config.trace) {
      std::ofstream out(seed_dir / "trace.txt", std::ios::binary);
      if (!out) throw InputError("cannot write trace for seed " + std::to_string(seed));
      for (const auto& line : outcome.trace) out << line << '\n';
    }
    report.ok = true;
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

bool RunReport::all_ok() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedReport& s) { return s.ok; });
}

RunReport run(const ExperimentConfig& config, std::size_t jobs) {
  validate(config);
  RunReport report;
  report.dir = config.out_dir;
  fs::create_directories(report.dir);
  write_file_atomic(report.dir / "config.resolved", settings_text(config));
  write_file_atomic(report.dir / "manifest.json", manifest_json(config, {}, "running").dump(2) + "\n");

  report.seeds.resize(config.seeds.size());
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, config.seeds.size());
  if (workers == 1) {
    for (std::size_t k = 0; k < config.seeds.size(); ++k) report.seeds[k] = run_seed(config, config.seeds[k], report.dir);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < config.seeds.size(); k = next++) {
          report.seeds[k] = run_seed(config, config.seeds[k], report.dir);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  write_file_atomic(report.dir / "manifest.json",
                    manifest_json(config, report.seeds, report.all_ok() ? "complete" : "partial").dump(2) + "\n");
  return report;
}

std::vector<SweepPoint> expand_grid(const std::map<std::string, std::vector<std::string>>& grid) {
  std::vector<SweepPoint> points(1);
  for (const auto& [axis, values] : grid) {
    std::vector<SweepPoint> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        SweepPoint q = p;
        q.settings.emplace_back(axis, v);
        q.label += (q.label.empty() ? "" : "_") + axis + "=" + v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

SweepReport sweep(const ExperimentConfig& config, std::size_t jobs) {
  SweepReport report;
  for (const auto& point : expand_grid(config.grid)) {
    try {
      ExperimentConfig c = config;
      c.grid.clear();
      for (const auto& [k, v] : point.settings) apply_setting(c, k, v);
      if (!point.label.empty()) c.out_dir = (fs::path(config.out_dir) / point.label).string();
      auto r = run(c, jobs);
      if (r.all_ok()) {
        report.completed.emplace_back(point, std::move(r));
      } else {
        std::string why;
        for (const auto& s : r.seeds) {
          if (!s.ok) why += (why.empty() ? "" : "; ") + ("seed " + std::to_string(s.seed) + ": " + s.error);
        }
        report.failed.emplace_back(point, why);
      }
    } catch (const std::exception& e) {
      report.failed.emplace_back(point, e.what());
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Summaries

Stat mean_std(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

double window_mean(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<fs::path>& run_dirs, std::size_t window) {
  if (window == 0) throw ConfigError("summary window must be positive");
  std::vector<SummaryRow> rows;
  for (const auto& dir : run_dirs) {
    const auto settings_path = dir / "config.resolved";
    if (!fs::exists(settings_path)) throw InputError(settings_path.string() + ": missing run configuration");
    const auto config = resolve_config(read_settings_file(settings_path.string()));

    std::vector<fs::path> seed_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0) {
        seed_dirs.push_back(entry.path());
      }
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());
    if (seed_dirs.empty()) throw InputError(dir.string() + ": no seed directories");

    SummaryRow row;
    row.run = dir.filename().string();
    if (row.run.empty()) row.run = dir.parent_path().filename().string();
    row.env = std::string(env_name(config.env));
    row.protocol = std::string(qnet::protocol_name(config.protocol));
    row.n_seeds = seed_dirs.size();

    std::vector<double> c, fc, ineq, fg, token, coop;
    bool all_fg = true;
    bool all_token = true;
    bool all_coop = true;
    for (const auto& sd : seed_dirs) {
      const auto csv = sd / "episodes.csv";
      std::ifstream in(csv);
      if (!in) throw InputError(csv.string() + ": cannot open");
      const auto records = metrics::read_episode_csv(in, csv.string());
      if (records.empty()) throw InputError(csv.string() + ": no episodes");
      const std::size_t n = std::min(window, records.size());
      std::vector<double> wc, wfc, wi, wfg, wt;
      for (std::size_t k = records.size() - n; k < records.size(); ++k) {
        const auto& r = records[k];
        wc.push_back(r.collective);
        wfc.push_back(static_cast<double>(r.mutual_cooperation) / static_cast<double>(config.steps_per_episode));
        wi.push_back(r.inequality);
        if (r.gifting_frequency) wfg.push_back(*r.gifting_frequency);
        if (r.token_mean) wt.push_back(*r.token_mean);
      }
      c.push_back(window_mean(wc));
      fc.push_back(window_mean(wfc));
      ineq.push_back(window_mean(wi));
      if (wfg.size() == n) {
        fg.push_back(window_mean(wfg));
      } else {
        all_fg = false;
      }
      if (wt.size() == n) {
        token.push_back(window_mean(wt));
      } else {
        all_token = false;
      }

      const auto eval_path = sd / "final_eval.csv";
      std::ifstream eval(eval_path);
      std::string line;
      std::vector<double> fractions;
      if (eval && std::getline(eval, line)) {
        if (line != "agent,coop_fraction") throw InputError(eval_path.string() + ": unexpected header");
        while (std::getline(eval, line)) {
          if (line.empty()) continue;
          const auto comma = line.find(',');
          if (comma == std::string::npos) throw InputError(eval_path.string() + ": malformed row");
          try {
            fractions.push_back(std::stod(line.substr(comma + 1)));
          } catch (const std::exception&) {
            throw InputError(eval_path.string() + ": malformed number");
          }
        }
      }
      if (fractions.empty()) {
        all_coop = false;
      } else {
        coop.push_back(window_mean(fractions));
      }
    }
    row.collective = mean_std(c);
    row.fc_rate = mean_std(fc);
    row.inequality = mean_std(ineq);
    if (all_fg) row.gifting = mean_std(fg);
    if (all_token) row.token = mean_std(token);
    if (all_coop) row.coop_fraction = mean_std(coop);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  using metrics::format_number;
  auto opt = [](const std::optional<Stat>& s) {
    return s ? format_number(s->mean) + "," + format_number(s->std) : std::string(",");
  };
  out << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.run << ',' << r.env << ',' << r.protocol << ',' << r.n_seeds << ',' << format_number(r.collective.mean)
        << ',' << format_number(r.collective.std) << ',' << format_number(r.fc_rate.mean) << ','
        << format_number(r.fc_rate.std) << ',' << format_number(r.inequality.mean) << ','
        << format_number(r.inequality.std) << ',' << opt(r.gifting) << ',' << opt(r.token) << ','
        << opt(r.coop_fraction) << '\n';
  }
}

}  // namespace qmarl::experiment

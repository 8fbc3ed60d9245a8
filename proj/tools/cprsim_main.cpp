// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// cprsim: batch CLI over the checkpoint/recovery library. Subcommands fit
// failure traces, plan checkpoint strategies, run analytic or coupled
// simulations, sweep parameter grids, and aggregate result CSVs.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cprsim/config.hpp"
#include "cprsim/simulator.hpp"

namespace fs = std::filesystem;
using namespace cprsim;

namespace {

constexpr const char* kToolVersion = "cprsim 1.0.0";

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

/// Writes content to path atomically (temp file + rename) so a failed run
/// never leaves a partial artifact behind.
void atomic_write(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void emit(const std::optional<std::string>& out_path, const std::string& content) {
  if (out_path.has_value()) {
    atomic_write(*out_path, content);
    std::cout << "wrote " << *out_path << "\n";
  } else {
    std::cout << content;
  }
}

SimConfig load_config_with_env(const std::string& path) {
  SimConfig config = load_sim_config(path);
  if (const char* env_seed = std::getenv("CPRSIM_SEED"); env_seed != nullptr) {
    config.master_seed = std::stoull(env_seed);
  }
  return config;
}

std::string format_percent(double fraction) {
  std::ostringstream out;
  out.precision(3);
  out << fraction * 100.0 << "%";
  return out.str();
}

std::string reports_csv_with_hash(const SimConfig& config,
                                  const std::vector<SimulationReport>& reports) {
  std::ostringstream csv;
  csv << "# tool=" << kToolVersion << "\n";
  csv << "# config_hash=" << config_hash_hex(config) << "\n";
  write_reports_csv(csv, reports);
  return csv.str();
}

std::string summary_line(std::string_view label, const RunAggregate& agg, double interval) {
  std::ostringstream out;
  out << "  " << label << ": interval " << interval << " h, mean overhead "
      << format_percent(agg.mean_overhead_fraction) << " (p50 "
      << format_percent(agg.p50_overhead_fraction) << ", p95 "
      << format_percent(agg.p95_overhead_fraction) << "), mean PLS " << agg.mean_final_pls;
  if (agg.mean_auc.has_value()) out << ", mean AUC " << *agg.mean_auc;
  out << "\n";
  return out.str();
}

int run_fit_trace(const std::string& trace_path, std::vector<std::string> family_names,
                  const std::optional<std::string>& out_path) {
  const std::vector<double> samples = load_trace_samples(trace_path);
  if (family_names.empty()) {
    family_names = {"gamma", "weibull", "exponential", "lognormal"};
  }
  struct Row {
    FittedDistribution fit;
    std::string note;
  };
  std::vector<Row> rows;
  for (const auto& name : family_names) {
    const auto family = parse_family(name);
    if (!family) {
      std::cerr << "error: unknown distribution family '" << name << "'\n";
      return kExitValidation;
    }
    Row row;
    try {
      row.fit = fit_distribution(samples, *family);
    } catch (const FitError& e) {
      row.fit.family = *family;
      row.fit.params.clear();
      row.fit.survival_rmse = std::numeric_limits<double>::infinity();
      row.fit.log_likelihood = -std::numeric_limits<double>::infinity();
      row.note = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.fit.survival_rmse < b.fit.survival_rmse;
  });
  std::vector<FittedDistribution> fits;
  std::vector<std::string> notes;
  for (auto& row : rows) {
    fits.push_back(std::move(row.fit));
    notes.push_back(std::move(row.note));
  }
  std::ostringstream csv;
  write_fit_report_csv(csv, fits, notes);
  emit(out_path, csv.str());
  return 0;
}

int run_plan(const std::string& config_path, std::optional<double> target_pls,
             std::optional<double> margin_hours, bool print_config) {
  SimConfig config = load_config_with_env(config_path);
  if (target_pls.has_value()) config.target_pls = *target_pls;
  if (print_config) {
    std::cout << to_json(config).dump(2) << "\n";
    return 0;
  }
  const double margin =
      margin_hours.value_or(config.margin_fraction * config.costs.t_total);
  const StrategyDecision decision = choose_strategy(config.costs, config.target_pls, margin);
  std::cout << "config_hash: " << config_hash_hex(config) << "\n";
  std::cout << "predicted overhead, full recovery at its optimal interval: "
            << decision.predicted_overhead_full << " h ("
            << format_percent(decision.predicted_overhead_full / config.costs.t_total) << ")\n";
  std::cout << "predicted overhead, partial recovery at the target-PLS interval: "
            << decision.predicted_overhead_partial << " h ("
            << format_percent(decision.predicted_overhead_partial / config.costs.t_total)
            << ")\n";
  std::cout << "target PLS: " << decision.target_pls << ", decision margin: " << margin
            << " h\n";
  std::cout << "chosen: " << recovery_choice_name(decision.chosen) << " at interval "
            << decision.interval_hours << " h\n";
  return 0;
}

int run_simulate(const std::string& config_path, std::optional<int> seeds_override,
                 const std::vector<std::string>& strategy_names,
                 const std::optional<std::string>& out_path, bool parallel, bool coupled) {
  SimConfig config = load_config_with_env(config_path);
  if (seeds_override.has_value()) config.n_seeds = *seeds_override;
  if (coupled) config.mode = SimMode::Coupled;
  const ExecutionMode exec = parallel ? ExecutionMode::Parallel : ExecutionMode::Serial;

  std::vector<Strategy> strategies;
  for (const auto& name : strategy_names) {
    const auto s = parse_strategy(name);
    if (!s) {
      std::cerr << "error: unknown strategy '" << name << "'\n";
      return kExitValidation;
    }
    strategies.push_back(*s);
  }

  std::vector<SimulationReport> all_reports;
  std::ostringstream summary;
  summary << "simulated " << config.n_seeds << " seed(s), mode "
          << (config.mode == SimMode::Coupled ? "coupled" : "analytic") << "\n";
  if (strategies.empty()) {
    all_reports = monte_carlo(config, config.n_seeds, exec);
    summary << summary_line(strategy_name(config.policy.strategy),
                            aggregate_reports(all_reports), resolved_interval(config));
  } else {
    const auto rows = compare_strategies(config, strategies, exec);
    for (const auto& row : rows) {
      summary << summary_line(strategy_name(row.strategy), row.aggregate, row.interval_hours);
      all_reports.insert(all_reports.end(), row.reports.begin(), row.reports.end());
    }
  }
  emit(out_path, reports_csv_with_hash(config, all_reports));
  std::cout << summary.str();
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& axis,
              std::optional<int> seeds_override, const std::optional<std::string>& out_path,
              bool parallel) {
  SimConfig config = load_config_with_env(config_path);
  if (seeds_override.has_value()) config.n_seeds = *seeds_override;
  const ExecutionMode exec = parallel ? ExecutionMode::Parallel : ExecutionMode::Serial;
  std::ostringstream csv;
  csv.precision(17);
  csv << "# tool=" << kToolVersion << "\n";
  csv << "# config_hash=" << config_hash_hex(config) << "\n";

  if (axis == "target-pls") {
    csv << "target_pls,interval_hours,mean_overhead_fraction,p95_overhead_fraction,"
           "mean_final_pls\n";
    for (const double pls : {0.02, 0.1, 0.2}) {
      SimConfig variant = config;
      variant.policy.strategy = Strategy::CprVanilla;
      variant.policy.t_save = 0.0;
      variant.target_pls = pls;
      const auto agg = aggregate_reports(monte_carlo(variant, variant.n_seeds, exec));
      csv << pls << ',' << resolved_interval(variant) << ',' << agg.mean_overhead_fraction
          << ',' << agg.p95_overhead_fraction << ',' << agg.mean_final_pls << "\n";
    }
  } else if (axis == "failures") {
    csv << "n_failures,lost_fraction,mean_overhead_full,mean_overhead_partial,"
           "predicted_choice,simulated_winner\n";
    for (const int count : {2, 20, 40}) {
      for (const double fraction : {0.125, 0.25, 0.5}) {
        SimConfig variant = config;
        variant.costs.t_fail = variant.costs.t_total / static_cast<double>(count);
        variant.process =
            FailureProcess::uniform_hazard(static_cast<double>(count) / variant.costs.t_total);
        variant.fraction_set = {fraction};
        variant.policy.t_save = 0.0;

        SimConfig full_cfg = variant;
        full_cfg.policy.strategy = Strategy::FullRecovery;
        SimConfig part_cfg = variant;
        part_cfg.policy.strategy = Strategy::CprVanilla;
        const auto full_agg =
            aggregate_reports(monte_carlo(full_cfg, variant.n_seeds, exec));
        const auto part_agg =
            aggregate_reports(monte_carlo(part_cfg, variant.n_seeds, exec));
        const auto decision =
            choose_strategy(variant.costs, variant.target_pls,
                            variant.margin_fraction * variant.costs.t_total);
        csv << count << ',' << fraction << ',' << full_agg.mean_overhead_fraction << ','
            << part_agg.mean_overhead_fraction << ','
            << recovery_choice_name(decision.chosen) << ','
            << (part_agg.mean_overhead_fraction < full_agg.mean_overhead_fraction
                    ? "PartialRecovery"
                    : "FullRecovery")
            << "\n";
      }
    }
  } else if (axis == "nodes") {
    csv << "nodes,overhead_full_hours,overhead_partial_hours\n";
    const std::vector<int> node_range = {8, 16, 32, 64, 128, 256, 512, 1024};
    const auto points =
        scalability_sweep(config.costs, config.process, node_range, config.target_pls);
    for (const auto& p : points) {
      csv << p.nodes << ',' << p.overhead_full << ',' << p.overhead_partial << "\n";
    }
  } else {
    std::cerr << "error: unknown sweep axis '" << axis
              << "' (expected target-pls, failures, or nodes)\n";
    return kExitValidation;
  }
  emit(out_path, csv.str());
  return 0;
}

int run_report(const std::string& in_dir, const std::optional<std::string>& out_path) {
  if (!fs::is_directory(in_dir)) {
    std::cerr << "error: '" << in_dir << "' is not a directory\n";
    return kExitIo;
  }
  struct Bucket {
    size_t runs = 0;
    double overhead_sum = 0.0;
    double overhead_max = 0.0;
    double pls_sum = 0.0;
    double auc_sum = 0.0;
    size_t auc_count = 0;
  };
  std::map<std::string, Bucket> buckets;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (line.rfind("seed,", 0) == 0) continue;  // header
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      while (cells.size() < 10) cells.emplace_back();
      try {
        Bucket& b = buckets[cells[1]];
        const double overhead = std::stod(cells[7]);
        ++b.runs;
        b.overhead_sum += overhead;
        b.overhead_max = std::max(b.overhead_max, overhead);
        b.pls_sum += std::stod(cells[8]);
        if (!cells[9].empty()) {
          b.auc_sum += std::stod(cells[9]);
          ++b.auc_count;
        }
      } catch (const std::exception&) {
        std::cerr << "error: " << file.string() << ": malformed row: " << line << "\n";
        return kExitIo;
      }
    }
  }
  size_t total_runs = 0;
  for (const auto& [name, b] : buckets) total_runs += b.runs;
  if (total_runs == 0) {
    std::cerr << "error: no report rows found under '" << in_dir << "'\n";
    return kExitIo;
  }
  std::ostringstream out;
  out.precision(6);
  out << "strategy,runs,mean_overhead_fraction,max_overhead_fraction,mean_final_pls,mean_auc\n";
  for (const auto& [name, b] : buckets) {
    out << name << ',' << b.runs << ',' << b.overhead_sum / static_cast<double>(b.runs) << ','
        << b.overhead_max << ',' << b.pls_sum / static_cast<double>(b.runs) << ',';
    if (b.auc_count > 0) out << b.auc_sum / static_cast<double>(b.auc_count);
    out << "\n";
  }
  emit(out_path, out.str());
  return 0;
}

int run_gen_trace(const std::string& family_name_arg, std::vector<double> params, int n,
                  uint64_t seed, const std::string& out_path) {
  const auto family = parse_family(family_name_arg);
  if (!family) {
    std::cerr << "error: unknown distribution family '" << family_name_arg << "'\n";
    return kExitValidation;
  }
  FailureProcess process;
  process.family = *family;
  process.params = std::move(params);
  process.validate();
  if (const char* env_seed = std::getenv("CPRSIM_SEED"); env_seed != nullptr) {
    seed = std::stoull(env_seed);
  }
  Rng rng(split_seed(seed, 0x7261ceULL));
  std::ostringstream out;
  out.precision(17);
  out << "# inter-failure times in hours, " << family_name(*family) << " draws, seed " << seed
      << "\n";
  for (int i = 0; i < n; ++i) out << process.sample_gap(rng) << "\n";
  atomic_write(out_path, out.str());
  std::cout << "wrote " << out_path << " (" << n << " samples)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"checkpoint/recovery cost modeling and simulation toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // fit-trace
  std::string trace_path;
  std::vector<std::string> families;
  std::optional<std::string> fit_out;
  auto* fit = app.add_subcommand("fit-trace", "fit failure-time distributions to a trace file");
  fit->add_option("trace", trace_path, "trace file, one time-to-failure in hours per line")
      ->required();
  fit->add_option("--families", families, "distribution families to fit (default: all four)")
      ->delimiter(',');
  fit->add_option("--out", fit_out, "output CSV path (default: stdout)");

  // plan
  std::string plan_config;
  std::optional<double> plan_pls;
  std::optional<double> plan_margin;
  bool plan_print_config = false;
  auto* plan = app.add_subcommand("plan", "choose full vs partial recovery for a config");
  plan->add_option("--config", plan_config, "config JSON path")->required();
  plan->add_option("--target-pls", plan_pls, "target portion of lost samples");
  plan->add_option("--margin", plan_margin, "decision margin in hours");
  plan->add_flag("--print-config", plan_print_config, "print the resolved config and exit");

  // simulate
  std::string sim_config;
  std::optional<int> sim_seeds;
  std::vector<std::string> sim_strategies;
  std::optional<std::string> sim_out;
  bool sim_parallel = false;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo simulation of the configured policy");
  sim->add_option("--config", sim_config, "config JSON path")->required();
  sim->add_option("--seeds", sim_seeds, "number of seeds (overrides config)");
  sim->add_option("--strategies", sim_strategies,
                  "compare these strategies under common random numbers")
      ->delimiter(',');
  sim->add_option("--out", sim_out, "output CSV path (default: stdout)");
  sim->add_flag("--parallel", sim_parallel, "fan seeds out across OpenMP threads");

  // sweep
  std::string sweep_config;
  std::string sweep_axis;
  std::optional<int> sweep_seeds;
  std::optional<std::string> sweep_out;
  bool sweep_parallel = false;
  auto* sweep = app.add_subcommand("sweep", "grid sweeps over PLS targets, failures, or nodes");
  sweep->add_option("--config", sweep_config, "config JSON path")->required();
  sweep->add_option("--axis", sweep_axis, "target-pls | failures | nodes")->required();
  sweep->add_option("--seeds", sweep_seeds, "number of seeds per grid point");
  sweep->add_option("--out", sweep_out, "output CSV path (default: stdout)");
  sweep->add_flag("--parallel", sweep_parallel, "fan seeds out across OpenMP threads");

  // train
  std::string train_config;
  std::optional<int> train_seeds;
  std::optional<std::string> train_out;
  bool train_parallel = false;
  auto* train = app.add_subcommand("train", "coupled-mode experiments driving the toy trainer");
  train->add_option("--config", train_config, "config JSON path (must include trainer)")
      ->required();
  train->add_option("--seeds", train_seeds, "number of seeds (overrides config)");
  train->add_option("--out", train_out, "output CSV path (default: stdout)");
  train->add_flag("--parallel", train_parallel, "fan seeds out across OpenMP threads");

  // report
  std::string report_in;
  std::optional<std::string> report_out;
  auto* report = app.add_subcommand("report", "aggregate run CSVs into a per-strategy summary");
  report->add_option("--in", report_in, "directory of run CSVs")->required();
  report->add_option("--out", report_out, "output path (default: stdout)");

  // gen-trace
  std::string gen_family = "gamma";
  std::vector<double> gen_params = {2.0, 14.0};
  int gen_n = 200;
  uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-trace", "sample a synthetic failure trace file");
  gen->add_option("--family", gen_family, "distribution family (default: gamma)");
  gen->add_option("--params", gen_params, "distribution parameters")->delimiter(',');
  gen->add_option("--n", gen_n, "number of samples");
  gen->add_option("--seed", gen_seed, "sampling seed");
  gen->add_option("--out", gen_out, "output trace path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return run_fit_trace(trace_path, families, fit_out);
    if (plan->parsed()) return run_plan(plan_config, plan_pls, plan_margin, plan_print_config);
    if (sim->parsed()) {
      return run_simulate(sim_config, sim_seeds, sim_strategies, sim_out, sim_parallel,
                          /*coupled=*/false);
    }
    if (sweep->parsed()) {
      return run_sweep(sweep_config, sweep_axis, sweep_seeds, sweep_out, sweep_parallel);
    }
    if (train->parsed()) {
      return run_simulate(train_config, train_seeds, {}, train_out, train_parallel,
                          /*coupled=*/true);
    }
    if (report->parsed()) return run_report(report_in, report_out);
    if (gen->parsed()) return run_gen_trace(gen_family, gen_params, gen_n, gen_seed, gen_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}

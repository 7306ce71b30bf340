#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lifenet/board.hpp"
#include "lifenet/checkpoint.hpp"
#include "lifenet/config.hpp"
#include "lifenet/datasets.hpp"
#include "lifenet/experiments.hpp"
#include "lifenet/report.hpp"
#include "lifenet/verification.hpp"

namespace lifenet {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitVerification = 3 };

namespace detail {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string checkpoint_stem(const TrialResult& t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-t%04zu", t.trial_index);
  return t.cohort.label() + buf;
}

/// Runs the experiment described by `config` and writes everything under `out_dir`.
inline void run_experiment_to(const ExperimentConfig& config, const std::string& config_text,
                              const std::filesystem::path& out_dir, std::size_t workers, std::ostream& log) {
  ExperimentResults results;
  if (config.kind == ExperimentKind::perturbation) {
    std::optional<Network<float>> converged, initial;
    auto load = [](const std::string& field, const std::string& path) {
      if (path.empty()) return std::optional<Network<float>>{};
      if (!std::filesystem::exists(path)) throw ConfigError(field + ": checkpoint '" + path + "' does not exist");
      try {
        return std::optional<Network<float>>(load_checkpoint(path).network);
      } catch (const ParseError& e) {
        throw ConfigError(field + ": " + e.what());
      } catch (const VersionError& e) {
        throw ConfigError(field + ": " + e.what());
      }
    };
    converged = load("base-checkpoint", config.perturbation.base_checkpoint);
    initial = load("base-initial-checkpoint", config.perturbation.base_initial_checkpoint);
    results = run_perturbation_study(config, converged, initial, workers);
  } else if (config.kind == ExperimentKind::density) {
    results = run_density_study(config, workers);
  } else {
    results = run_success_rate(config, workers);
  }

  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "config.txt", config_text);
  write_file(out_dir / "trials.jsonl", trials_jsonl(results.trials));
  emit_report(results.trials, out_dir);

  if (config.checkpoints != CheckpointPolicy::none) {
    const auto dir = out_dir / "checkpoints";
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < results.trials.size(); ++i) {
      const auto& t = results.trials[i];
      if (config.checkpoints == CheckpointPolicy::converged && !t.converged) continue;
      const auto stem = checkpoint_stem(t);
      Provenance p{config.experiment_id, config.master_seed, t.trial_index, 0};
      save_checkpoint(results.initial_networks[i], p, (dir / (stem + ".init.ckpt")).string());
      p.epoch = t.train_loss.size();
      save_checkpoint(results.final_networks[i], p, (dir / (stem + ".final.ckpt")).string());
    }
  }

  for (const auto& g : tally(results.trials, {ExperimentKind::success_rate, ExperimentKind::convergence,
                                              ExperimentKind::perturbation, ExperimentKind::density}))
    log << g.key.label() << ": " << g.successes << "/" << g.trials << " succeeded\n";
}

}  // namespace detail

/// Command-line entry point. Output goes to `out`, diagnostics to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"LifeNet: convolutional networks for n-step Game of Life", "lifenet"};
  app.require_subcommand(1);

  std::string sim_input, sim_output;
  std::size_t sim_steps = 1;
  auto* simulate = app.add_subcommand("simulate", "Advance a board file by n Life steps");
  simulate->add_option("input", sim_input, "Board file ('0'/'1' rows)")->required();
  simulate->add_option("--steps", sim_steps, "Number of steps")->capture_default_str();
  simulate->add_option("-o,--output", sim_output, "Write the result here instead of stdout");

  int verify_n = 1;
  std::size_t verify_boards = 1000;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify-hand-weights", "Check the hand-built LifeNet(n,1) against the Life engine");
  verify->add_option("--n", verify_n, "Number of steps")->required()->check(CLI::Range(1, 63));
  verify->add_option("--boards", verify_boards, "Random 32x32 boards to test")->capture_default_str();
  verify->add_option("--seed", verify_seed, "Seed for the random boards")->capture_default_str();

  std::size_t curve_h = 32, curve_w = 32, curve_res = 100;
  std::string curve_output;
  auto* curve = app.add_subcommand("density-curve", "Exact probability that a cell is alive after one step, per density");
  curve->add_option("--height", curve_h)->capture_default_str()->check(CLI::PositiveNumber);
  curve->add_option("--width", curve_w)->capture_default_str()->check(CLI::PositiveNumber);
  curve->add_option("--resolution", curve_res, "Number of intervals on [0, 1]")->capture_default_str()->check(CLI::PositiveNumber);
  curve->add_option("-o,--output", curve_output, "Write CSV here instead of stdout");

  std::string config_path, run_out = "results";
  std::size_t workers = 1;
  auto* experiment = app.add_subcommand("experiment", "Run experiments");
  experiment->require_subcommand(1);
  auto* run = experiment->add_subcommand("run", "Run one experiment config");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", run_out, "Output directory")->capture_default_str();
  run->add_option("--workers", workers, "Worker threads (does not change results)")->capture_default_str()->check(CLI::PositiveNumber);

  std::string report_dir, report_out;
  auto* report = app.add_subcommand("report", "Regenerate figure CSVs from stored trial results");
  report->add_option("--results", report_dir, "Results directory containing trials.jsonl")->required();
  report->add_option("--out", report_out, "Output directory (default: the results directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*simulate) {
      const auto board = step_n(parse_board(detail::read_text(sim_input)), sim_steps);
      if (sim_output.empty())
        out << format_board(board);
      else
        detail::write_file(sim_output, format_board(board));
      return kExitOk;
    }
    if (*verify) {
      const auto rep = verify_hand_weights(verify_n, verify_boards, verify_seed);
      out << rep.local_passed << "/" << rep.local_cases << " local cases passed\n";
      out << rep.boards_passed << "/" << rep.boards << " random boards matched (" << rep.wrong_cells
          << " wrong cells)\n";
      return rep.passed() ? kExitOk : kExitVerification;
    }
    if (*curve) {
      std::ostringstream csv;
      csv << "d,alive_probability\n";
      char buf[64];
      for (std::size_t i = 0; i <= curve_res; ++i) {
        const double d = static_cast<double>(i) / static_cast<double>(curve_res);
        std::snprintf(buf, sizeof buf, "%.6f,%.10f\n", d, alive_prob_curve(d, curve_h, curve_w));
        csv << buf;
      }
      if (curve_output.empty())
        out << csv.str();
      else
        detail::write_file(curve_output, csv.str());
      return kExitOk;
    }
    if (*run) {
      const auto config = load_config(config_path);
      detail::run_experiment_to(config, detail::read_text(config_path), run_out, workers, err);
      return kExitOk;
    }
    if (*report) {
      const std::filesystem::path dir(report_dir);
      emit_report(read_trials_jsonl(dir / "trials.jsonl"), report_out.empty() ? dir : std::filesystem::path(report_out));
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace lifenet

#pragma once

// Experiment config files: one `key = value` per line, '#' starts a comment.
// Lists are comma-separated; `densities` also accepts `start:stop:step`.
//
//   experiment-id            identifier used in checkpoints      (default "experiment")
//   kind                     success_rate | convergence | perturbation | density
//   n-steps                  list of n                            (default 1)
//   overcompleteness         list of m                            (default 1)
//   instances                trials per cohort                    (default 64)
//   epochs                                                        (default 100)
//   examples-per-epoch                                            (default 10000)
//   batch-size                                                    (default 8)
//   board-height, board-width                                     (default 32)
//   dataset                  uniform | fixed                      (default uniform)
//   density                  training density for dataset=fixed   (default 0.38)
//   densities                density-study grid
//   perturbation-variants    sign_of_init, sign_of_converged, uniform_of_init
//   k-values, r-values       perturbation grids
//   base-checkpoint          converged network (relative to the config file)
//   base-initial-checkpoint  its initial weights
//   master-seed              64-bit seed                          (default 0)
//   loss-threshold                                                (default 0.01)
//   validation-size                                               (default 1024)
//   adam-alpha, adam-beta1, adam-beta2, adam-epsilon              (0.001, 0.9, 0.999, 1e-7)
//   save-checkpoints         none | converged | all               (default converged)

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lifenet/errors.hpp"
#include "lifenet/experiments.hpp"

namespace lifenet {

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename Num>
Num parse_number(const std::string& key, const std::string& s) {
  Num v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(key + ": invalid number '" + s + "'");
  return v;
}

template <typename Num>
std::vector<Num> parse_numbers(const std::string& key, const std::string& value) {
  std::vector<Num> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<Num>(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

/// `a:b:step` inclusive of b (within half a step), or a plain list.
inline std::vector<double> parse_grid(const std::string& key, const std::string& value) {
  if (value.find(':') == std::string::npos) return parse_numbers<double>(key, value);
  std::vector<std::string> parts;
  std::stringstream ss(value);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(trim(p));
  if (parts.size() != 3) throw ConfigError(key + ": range must be start:stop:step");
  const double a = parse_number<double>(key, parts[0]), b = parse_number<double>(key, parts[1]),
               step = parse_number<double>(key, parts[2]);
  if (!(step > 0) || b < a) throw ConfigError(key + ": range needs step > 0 and stop >= start");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 0.5));
  for (std::size_t i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

inline ExperimentKind parse_kind(const std::string& v) {
  if (v == "success_rate") return ExperimentKind::success_rate;
  if (v == "convergence") return ExperimentKind::convergence;
  if (v == "perturbation") return ExperimentKind::perturbation;
  if (v == "density") return ExperimentKind::density;
  throw ConfigError("kind: unknown experiment kind '" + v + "'");
}

inline PerturbationVariant parse_variant(const std::string& v) {
  if (v == "sign_of_init") return PerturbationVariant::sign_of_init;
  if (v == "sign_of_converged") return PerturbationVariant::sign_of_converged;
  if (v == "uniform_of_init") return PerturbationVariant::uniform_of_init;
  throw ConfigError("perturbation-variants: unknown variant '" + v + "'");
}

}  // namespace detail

/// Parses config text. Relative checkpoint paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  ExperimentConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).string();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(key + ": missing value");
    if (!seen.insert(key).second) throw ConfigError(key + ": given more than once");

    if (key == "experiment-id") c.experiment_id = value;
    else if (key == "kind") c.kind = parse_kind(value);
    else if (key == "n-steps") c.n_steps = parse_numbers<int>(key, value);
    else if (key == "overcompleteness") c.overcompleteness = parse_numbers<int>(key, value);
    else if (key == "instances") c.instances = parse_number<std::size_t>(key, value);
    else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
    else if (key == "examples-per-epoch") c.examples_per_epoch = parse_number<std::size_t>(key, value);
    else if (key == "batch-size") c.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "board-height") c.board_height = parse_number<std::size_t>(key, value);
    else if (key == "board-width") c.board_width = parse_number<std::size_t>(key, value);
    else if (key == "dataset") {
      if (value == "uniform") c.dataset = DensityMode::uniform_density;
      else if (value == "fixed") c.dataset = DensityMode::fixed_density;
      else throw ConfigError("dataset: expected 'uniform' or 'fixed', got '" + value + "'");
    }
    else if (key == "density") c.density = parse_number<double>(key, value);
    else if (key == "densities") c.densities = parse_grid(key, value);
    else if (key == "perturbation-variants") {
      for (const auto& v : split_list(value)) c.perturbation.variants.push_back(parse_variant(v));
    }
    else if (key == "k-values") c.perturbation.k_values = parse_numbers<std::size_t>(key, value);
    else if (key == "r-values") c.perturbation.r_values = parse_numbers<double>(key, value);
    else if (key == "base-checkpoint") c.perturbation.base_checkpoint = resolve(value);
    else if (key == "base-initial-checkpoint") c.perturbation.base_initial_checkpoint = resolve(value);
    else if (key == "master-seed") c.master_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "loss-threshold") c.loss_threshold = parse_number<double>(key, value);
    else if (key == "validation-size") c.validation_size = parse_number<std::size_t>(key, value);
    else if (key == "adam-alpha") c.adam.alpha = parse_number<double>(key, value);
    else if (key == "adam-beta1") c.adam.beta1 = parse_number<double>(key, value);
    else if (key == "adam-beta2") c.adam.beta2 = parse_number<double>(key, value);
    else if (key == "adam-epsilon") c.adam.epsilon = parse_number<double>(key, value);
    else if (key == "save-checkpoints") {
      if (value == "none") c.checkpoints = CheckpointPolicy::none;
      else if (value == "converged") c.checkpoints = CheckpointPolicy::converged;
      else if (value == "all") c.checkpoints = CheckpointPolicy::all;
      else throw ConfigError("save-checkpoints: expected none, converged or all");
    }
    else throw ConfigError(key + ": unknown key");
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::filesystem::path(path).parent_path());
}

}  // namespace lifenet

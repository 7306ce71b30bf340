#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "lifenet/adam.hpp"
#include "lifenet/autograd.hpp"
#include "lifenet/datasets.hpp"
#include "lifenet/errors.hpp"
#include "lifenet/evaluation.hpp"
#include "lifenet/network.hpp"
#include "lifenet/rng.hpp"

namespace lifenet {

enum class ExperimentKind { success_rate = 0, convergence = 1, perturbation = 2, density = 3 };
enum class PerturbationVariant { sign_of_init = 0, sign_of_converged = 1, uniform_of_init = 2 };
enum class CheckpointPolicy { none, converged, all };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::success_rate: return "success_rate";
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::perturbation: return "perturbation";
    case ExperimentKind::density: return "density";
  }
  return "?";
}

inline const char* to_string(PerturbationVariant v) {
  switch (v) {
    case PerturbationVariant::sign_of_init: return "sign_of_init";
    case PerturbationVariant::sign_of_converged: return "sign_of_converged";
    case PerturbationVariant::uniform_of_init: return "uniform_of_init";
  }
  return "?";
}

inline bool is_sign_variant(PerturbationVariant v) { return v != PerturbationVariant::uniform_of_init; }

struct PerturbationConfig {
  std::vector<PerturbationVariant> variants;
  std::vector<std::size_t> k_values;  // sign variants
  std::vector<double> r_values;       // uniform variant
  std::string base_checkpoint;          // converged weights
  std::string base_initial_checkpoint;  // initial weights of that converged run
};

/// One experiment, fully determined by its fields.
struct ExperimentConfig {
  std::string experiment_id = "experiment";
  ExperimentKind kind = ExperimentKind::success_rate;
  std::vector<int> n_steps{1};
  std::vector<int> overcompleteness{1};
  std::size_t instances = 64;
  std::size_t epochs = 100;
  std::size_t examples_per_epoch = 10000;
  std::size_t batch_size = 8;
  std::size_t board_height = 32;
  std::size_t board_width = 32;
  DensityMode dataset = DensityMode::uniform_density;
  double density = 0.38;          // training density when dataset is fixed
  std::vector<double> densities;  // density study grid
  PerturbationConfig perturbation;
  std::uint64_t master_seed = 0;
  double loss_threshold = kSuccessLoss;
  std::size_t validation_size = 1024;
  AdamConfig adam;
  CheckpointPolicy checkpoints = CheckpointPolicy::converged;

  /// Throws ConfigError naming the first offending field.
  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
    if (experiment_id.empty()) fail("experiment-id", "must not be empty");
    if (experiment_id.find_first_of(" \t\r\n") != std::string::npos) fail("experiment-id", "must not contain whitespace");
    if (instances < 1) fail("instances", "must be >= 1");
    if (instances >= (std::size_t{1} << 32)) fail("instances", "must be < 2^32");
    if (batch_size < 1) fail("batch-size", "must be >= 1");
    if (examples_per_epoch < 1) fail("examples-per-epoch", "must be >= 1");
    if (examples_per_epoch % batch_size != 0) fail("examples-per-epoch", "must be divisible by batch-size");
    if (board_height < 1 || board_width < 1) fail("board-height", "board dimensions must be >= 1");
    if (validation_size < 1) fail("validation-size", "must be >= 1");
    if (!(loss_threshold > 0)) fail("loss-threshold", "must be > 0");
    if (!(adam.alpha > 0)) fail("adam-alpha", "must be > 0");
    if (!(adam.beta1 >= 0 && adam.beta1 < 1)) fail("adam-beta1", "must lie in [0, 1)");
    if (!(adam.beta2 >= 0 && adam.beta2 < 1)) fail("adam-beta2", "must lie in [0, 1)");
    if (!(adam.epsilon > 0)) fail("adam-epsilon", "must be > 0");
    if (dataset == DensityMode::fixed_density && !(density >= 0 && density <= 1)) fail("density", "must lie in [0, 1]");
    if (kind != ExperimentKind::perturbation) {
      if (n_steps.empty()) fail("n-steps", "needs at least one value");
      if (overcompleteness.empty()) fail("overcompleteness", "needs at least one value");
      for (int n : n_steps)
        if (n < 1 || n > 63) fail("n-steps", "values must lie in 1..63");
      for (int m : overcompleteness)
        if (m < 1 || m > 255) fail("overcompleteness", "values must lie in 1..255");
    }
    if (kind == ExperimentKind::density) {
      if (densities.empty()) fail("densities", "needs at least one value");
      if (densities.size() > 1024) fail("densities", "at most 1024 values");
      for (double d : densities)
        if (!(d >= 0 && d <= 1)) fail("densities", "values must lie in [0, 1]");
      if (n_steps.size() != 1 || overcompleteness.size() != 1)
        fail("n-steps", "a density study uses a single architecture (one n-steps and one overcompleteness value)");
    }
    if (kind == ExperimentKind::perturbation) {
      const auto& p = perturbation;
      if (p.variants.empty()) fail("perturbation-variants", "needs at least one variant");
      bool sign = false, uniform = false;
      for (auto v : p.variants) (is_sign_variant(v) ? sign : uniform) = true;
      if (sign && p.k_values.empty()) fail("k-values", "required for sign perturbation variants");
      if (uniform && p.r_values.empty()) fail("r-values", "required for the uniform_of_init variant");
      if (p.k_values.size() > 1024 || p.r_values.size() > 1024) fail("k-values", "at most 1024 values");
      for (double r : p.r_values)
        if (!(r > 0)) fail("r-values", "values must be > 0");
      for (auto v : p.variants) {
        if (v == PerturbationVariant::sign_of_converged && p.base_checkpoint.empty())
          fail("base-checkpoint", "required by sign_of_converged");
        if (v != PerturbationVariant::sign_of_converged && p.base_initial_checkpoint.empty())
          fail("base-initial-checkpoint", std::string("required by ") + to_string(v));
      }
    }
  }
};

/// Identifies a cohort: trials that share architecture, data stream and treatment.
struct CohortKey {
  ExperimentKind kind = ExperimentKind::success_rate;
  int n = 1;
  int m = 1;
  std::optional<double> density;  // density study
  std::optional<PerturbationVariant> variant;
  double value = 0;         // k or r of a perturbation cohort
  std::uint32_t grid = 0;   // index of the density / perturbation value within the config

  /// Injective packing of the key into 32 bits (kind:2 | n:6 | m:8 | grid:16).
  std::uint64_t id() const {
    return (static_cast<std::uint64_t>(kind) << 30) | (static_cast<std::uint64_t>(n) << 24) |
           (static_cast<std::uint64_t>(m) << 16) | grid;
  }

  std::string label() const {
    std::string s = "n" + std::to_string(n) + "-m" + std::to_string(m);
    char buf[64];
    if (density) {
      std::snprintf(buf, sizeof buf, "-d%.4f", *density);
      s += buf;
    }
    if (variant) {
      if (is_sign_variant(*variant))
        std::snprintf(buf, sizeof buf, "-%s-k%zu", to_string(*variant), static_cast<std::size_t>(value));
      else
        std::snprintf(buf, sizeof buf, "-%s-r%.4f", to_string(*variant), value);
      s += buf;
    }
    return s;
  }

  auto order_tuple() const {
    return std::make_tuple(static_cast<int>(kind), n, m, density.value_or(-1.0),
                           variant ? static_cast<int>(*variant) : -1, value);
  }
  friend bool operator<(const CohortKey& a, const CohortKey& b) { return a.order_tuple() < b.order_tuple(); }
  friend bool operator==(const CohortKey& a, const CohortKey& b) { return a.order_tuple() == b.order_tuple(); }
};

/// Seed key of trial `trial` in `cohort`; distinct (cohort, trial) pairs give distinct keys.
inline std::uint64_t trial_key(const CohortKey& cohort, std::uint64_t trial) { return (cohort.id() << 32) | trial; }
/// Key of the data stream shared by a whole cohort.
inline std::uint64_t cohort_key(const CohortKey& cohort) { return (cohort.id() << 32) | 0xffffffffULL; }

/// Outcome of training one network.
struct TrialResult {
  CohortKey cohort;
  std::size_t trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;  // per-epoch mean over training batches
  std::vector<double> val_loss;    // end-of-epoch loss on the fixed validation set
  bool converged = false;
  std::optional<std::size_t> first_convergence_epoch;  // 1-based
  bool degenerate_dead = false;
  double accuracy = 0;
  bool failed_numerics = false;

  std::string label() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%04zu", trial_index);
    return cohort.label() + buf;
  }
};

struct TrainingSettings {
  std::size_t n_steps = 1;
  std::size_t epochs = 100;
  std::size_t examples_per_epoch = 10000;
  std::size_t batch_size = 8;
  double loss_threshold = kSuccessLoss;
  AdamConfig adam;

  static TrainingSettings from(const ExperimentConfig& c, int n) {
    return {static_cast<std::size_t>(n), c.epochs, c.examples_per_epoch, c.batch_size, c.loss_threshold, c.adam};
  }
};

struct TrialOutcome {
  TrialResult result;
  Network<float> final_network;
};

/// One Adam step on a batch; returns the batch loss.
inline float train_step(Network<float>& net, AdamState<float>& state, const Batch<float>& batch) {
  Tape<float> tape;
  const auto rec = record_forward(tape, net, tape.constant(batch.inputs));
  const auto loss = tape.bce_with_logits(rec.logits, tape.constant(batch.targets));
  tape.backward(loss);
  std::vector<const Tensor<float>*> grads;
  grads.reserve(rec.parameters.size());
  for (auto p : rec.parameters) grads.push_back(&tape.grad(p));
  adam_step<float>(net.parameter_tensors(), grads, state);
  return tape.value(loss)[0];
}

/// Trains `initial` on the batch stream seeded by `data_seed`.
///
/// Every trial with the same data seed sees the identical batch sequence. The
/// validation loss is measured after each epoch; success and degeneracy are
/// judged on the final network.
inline TrialOutcome train_instance(Network<float> initial, const TrainingSettings& settings, const DensitySpec& data,
                                   std::uint64_t data_seed, const ValidationSet& validation) {
  if (settings.batch_size == 0 || settings.examples_per_epoch % settings.batch_size != 0)
    throw ConfigError("examples-per-epoch: must be divisible by batch-size");
  TrialOutcome out{{}, std::move(initial)};
  auto& net = out.final_network;
  auto& r = out.result;
  std::vector<Tensor<float>> shapes;
  for (const auto* p : std::as_const(net).parameter_tensors()) shapes.push_back(*p);
  AdamState<float> adam(settings.adam, shapes);
  Rng data_rng(data_seed);
  const std::size_t steps = settings.examples_per_epoch / settings.batch_size;

  SuccessReport last;
  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    double total = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto batch = sample_training_batch<float>(data, settings.n_steps, settings.batch_size, data_rng);
      total += train_step(net, adam, batch);
    }
    const double mean = total / static_cast<double>(steps);
    if (!std::isfinite(mean)) {
      r.failed_numerics = true;
      return out;
    }
    r.train_loss.push_back(mean);
    last = evaluate_success(net, validation, settings.loss_threshold);
    if (!std::isfinite(last.loss)) {
      r.failed_numerics = true;
      return out;
    }
    r.val_loss.push_back(last.loss);
    if (!r.first_convergence_epoch && last.loss < settings.loss_threshold) r.first_convergence_epoch = epoch;
  }
  if (settings.epochs > 0) {
    r.converged = last.success;
    r.degenerate_dead = last.degenerate_dead;
    r.accuracy = last.accuracy;
  }
  return out;
}

/// A unit of work: one network to build, train and record.
struct TrialJob {
  CohortKey cohort;
  std::size_t trial_index;
  std::uint64_t seed;       // seed that produced the initial network
  Network<float> initial;
  DensitySpec data;
  std::uint64_t data_seed;  // shared by the cohort
};

struct ExperimentResults {
  ExperimentConfig config;
  std::vector<TrialResult> trials;
  std::vector<Network<float>> initial_networks;  // parallel to trials
  std::vector<Network<float>> final_networks;
};

/// Runs jobs on `workers` threads. Results land in job order, so output does
/// not depend on the worker count.
inline ExperimentResults run_jobs(const ExperimentConfig& config, std::vector<TrialJob> jobs, std::size_t workers) {
  std::map<int, ValidationSet> validation;
  for (const auto& j : jobs) {
    if (validation.count(j.cohort.n)) continue;
    validation.emplace(j.cohort.n, make_validation_set(DensitySpec::uniform(config.board_height, config.board_width),
                                                       static_cast<std::size_t>(j.cohort.n), config.validation_size,
                                                       derive_seed(config.master_seed, Stream::validation, 0)));
  }

  std::vector<std::optional<TrialOutcome>> outcomes(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const auto& j = jobs[i];
        auto o = train_instance(j.initial, TrainingSettings::from(config, j.cohort.n), j.data, j.data_seed,
                                validation.at(j.cohort.n));
        o.result.cohort = j.cohort;
        o.result.trial_index = j.trial_index;
        o.result.seed = j.seed;
        outcomes[i] = std::move(o);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResults res{config, {}, {}, {}};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    res.trials.push_back(std::move(outcomes[i]->result));
    res.initial_networks.push_back(std::move(jobs[i].initial));
    res.final_networks.push_back(std::move(outcomes[i]->final_network));
  }
  return res;
}

namespace detail {

inline DensitySpec training_data(const ExperimentConfig& c) {
  return c.dataset == DensityMode::fixed_density ? DensitySpec::fixed(c.density, c.board_height, c.board_width)
                                                 : DensitySpec::uniform(c.board_height, c.board_width);
}

inline void add_fresh_cohort(std::vector<TrialJob>& jobs, const ExperimentConfig& c, const CohortKey& key,
                             const DensitySpec& data) {
  const NetworkSpec spec{key.n, key.m, c.board_height, c.board_width};
  const auto data_seed = derive_seed(c.master_seed, Stream::data, cohort_key(key));
  for (std::size_t t = 0; t < c.instances; ++t) {
    const auto seed = derive_seed(c.master_seed, Stream::init, trial_key(key, t));
    jobs.push_back(TrialJob{key, t, seed, init_unit_normal(build_network<float>(spec), seed), data, data_seed});
  }
}

}  // namespace detail

/// Success-rate grid: one cohort per (n, m), each trained on its own shared stream.
inline ExperimentResults run_success_rate(const ExperimentConfig& config, std::size_t workers = 1) {
  config.validate();
  std::vector<TrialJob> jobs;
  for (int n : config.n_steps)
    for (int m : config.overcompleteness) {
      CohortKey key;
      key.kind = config.kind == ExperimentKind::convergence ? ExperimentKind::convergence : ExperimentKind::success_rate;
      key.n = n;
      key.m = m;
      detail::add_fresh_cohort(jobs, config, key, detail::training_data(config));
    }
  return run_jobs(config, std::move(jobs), workers);
}

/// Density sweep: one cohort per d, trained on fixed-density boards and
/// validated on uniform-density boards.
inline ExperimentResults run_density_study(const ExperimentConfig& config, std::size_t workers = 1) {
  config.validate();
  if (config.kind != ExperimentKind::density) throw ConfigError("kind: run_density_study needs kind = density");
  std::vector<TrialJob> jobs;
  for (std::size_t i = 0; i < config.densities.size(); ++i) {
    CohortKey key;
    key.kind = ExperimentKind::density;
    key.n = config.n_steps.front();
    key.m = config.overcompleteness.front();
    key.density = config.densities[i];
    key.grid = static_cast<std::uint32_t>(i);
    detail::add_fresh_cohort(jobs, config, key,
                             DensitySpec::fixed(config.densities[i], config.board_height, config.board_width));
  }
  return run_jobs(config, std::move(jobs), workers);
}

/// Perturbation study around a converged network and the initial weights it was trained from.
/// A base that no variant needs may be left empty.
inline ExperimentResults run_perturbation_study(const ExperimentConfig& config,
                                                const std::optional<Network<float>>& base_converged,
                                                const std::optional<Network<float>>& base_initial,
                                                std::size_t workers = 1) {
  config.validate();
  if (config.kind != ExperimentKind::perturbation)
    throw ConfigError("kind: run_perturbation_study needs kind = perturbation");
  const auto& p = config.perturbation;
  std::vector<TrialJob> jobs;
  for (auto variant : p.variants) {
    const bool from_converged = variant == PerturbationVariant::sign_of_converged;
    const auto& base = from_converged ? base_converged : base_initial;
    if (!base)
      throw ConfigError(std::string(from_converged ? "base-checkpoint" : "base-initial-checkpoint") +
                        ": missing base network");
    const std::size_t count = is_sign_variant(variant) ? p.k_values.size() : p.r_values.size();
    for (std::size_t i = 0; i < count; ++i) {
      CohortKey key;
      key.kind = ExperimentKind::perturbation;
      key.n = base->spec().n_steps;
      key.m = base->spec().overcompleteness;
      key.variant = variant;
      key.value = is_sign_variant(variant) ? static_cast<double>(p.k_values[i]) : p.r_values[i];
      key.grid = static_cast<std::uint32_t>(static_cast<int>(variant) * 1024 + static_cast<int>(i));
      if (is_sign_variant(variant) && p.k_values[i] > base->parameter_count())
        throw ConfigError("k-values: k = " + std::to_string(p.k_values[i]) + " exceeds the base network's " +
                          std::to_string(base->parameter_count()) + " parameters");
      const auto data_seed = derive_seed(config.master_seed, Stream::data, cohort_key(key));
      for (std::size_t t = 0; t < config.instances; ++t) {
        const auto seed = derive_seed(config.master_seed, Stream::perturbation, trial_key(key, t));
        auto net = is_sign_variant(variant) ? k_sign_perturb(*base, p.k_values[i], seed)
                                            : uniform_perturb(*base, p.r_values[i], seed);
        jobs.push_back(TrialJob{key, t, seed, std::move(net), detail::training_data(config), data_seed});
      }
    }
  }
  return run_jobs(config, std::move(jobs), workers);
}

// ---------------------------------------------------------------------------
// Aggregation. Pure functions of trial results; rows come out sorted by key.

struct ConvergenceSummary {
  std::optional<double> mean_first_epoch;  // empty when nothing converged
  std::size_t converged_count = 0;
};

/// Mean first-convergence epoch over converged trials only.
inline ConvergenceSummary run_convergence_stats(const std::vector<TrialResult>& trials) {
  ConvergenceSummary s;
  double total = 0;
  for (const auto& t : trials) {
    if (!t.converged || !t.first_convergence_epoch) continue;
    total += static_cast<double>(*t.first_convergence_epoch);
    ++s.converged_count;
  }
  if (s.converged_count > 0) s.mean_first_epoch = total / static_cast<double>(s.converged_count);
  return s;
}

struct CohortTally {
  CohortKey key;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::vector<TrialResult> members;

  double rate() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
};

/// Groups trials of the given kind by cohort, in key order.
inline std::vector<CohortTally> tally(const std::vector<TrialResult>& trials, std::initializer_list<ExperimentKind> kinds) {
  std::map<CohortKey, CohortTally> groups;
  for (const auto& t : trials) {
    if (std::find(kinds.begin(), kinds.end(), t.cohort.kind) == kinds.end()) continue;
    auto& g = groups[t.cohort];
    g.key = t.cohort;
    ++g.trials;
    g.successes += t.converged ? 1 : 0;
    g.members.push_back(t);
  }
  std::vector<CohortTally> out;
  for (auto& [k, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace lifenet

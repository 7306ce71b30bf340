#include <gtest/gtest.h>

#include <set>

#include "lifenet/experiments.hpp"
#include "lifenet/report.hpp"

using namespace lifenet;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.experiment_id = "tiny";
  c.n_steps = {1};
  c.overcompleteness = {1, 2};
  c.instances = 3;
  c.epochs = 2;
  c.examples_per_epoch = 64;
  c.board_height = 8;
  c.board_width = 8;
  c.validation_size = 16;
  c.master_seed = 12;
  return c;
}

TrialResult converged_at(std::optional<std::size_t> epoch, bool converged) {
  TrialResult t;
  t.first_convergence_epoch = epoch;
  t.converged = converged;
  return t;
}

}  // namespace

TEST(TrainInstance, HandWeightsConvergeInTheFirstEpoch) {
  TrainingSettings s;
  s.epochs = 2;
  s.examples_per_epoch = 80;
  const auto vs = make_validation_set(DensitySpec::uniform(), 1, 64, 5);
  const auto out = train_instance(hand_engineered_weights(1), s, DensitySpec::uniform(), 6, vs);
  ASSERT_EQ(out.result.val_loss.size(), 2u);
  EXPECT_LT(out.result.val_loss[0], 1e-6);
  EXPECT_EQ(out.result.first_convergence_epoch, std::optional<std::size_t>(1));
  EXPECT_TRUE(out.result.converged);
  EXPECT_FALSE(out.result.degenerate_dead);
  EXPECT_EQ(out.result.accuracy, 1.0);
}

TEST(TrainInstance, ZeroEpochs) {
  TrainingSettings s;
  s.epochs = 0;
  const auto vs = make_validation_set(DensitySpec::uniform(), 1, 4, 5);
  const auto init = init_unit_normal(build_network({1, 1}), 3);
  const auto out = train_instance(init, s, DensitySpec::uniform(), 6, vs);
  EXPECT_TRUE(out.result.train_loss.empty());
  EXPECT_TRUE(out.result.val_loss.empty());
  EXPECT_FALSE(out.result.converged);
  EXPECT_FALSE(out.result.first_convergence_epoch);
  EXPECT_EQ(out.final_network, init);
}

TEST(TrainInstance, DeterministicAndLearning) {
  TrainingSettings s;
  s.epochs = 3;
  s.examples_per_epoch = 400;
  const DensitySpec data = DensitySpec::uniform(10, 10);
  const auto vs = make_validation_set(data, 1, 32, 5);
  const auto init = init_unit_normal(build_network({1, 3, 10, 10}), 8);
  const auto a = train_instance(init, s, data, 6, vs);
  const auto b = train_instance(init, s, data, 6, vs);
  EXPECT_EQ(a.result.train_loss, b.result.train_loss);
  EXPECT_EQ(a.result.val_loss, b.result.val_loss);
  EXPECT_EQ(a.final_network, b.final_network);
  EXPECT_LT(a.result.train_loss.back(), a.result.train_loss.front());
  auto uneven = s;
  uneven.examples_per_epoch = 10;
  EXPECT_THROW(train_instance(init, uneven, data, 6, vs), ConfigError);
}

TEST(Seeds, DistinctPerTrialAndCohort) {
  std::set<std::uint64_t> seeds;
  std::size_t count = 0;
  for (int kind = 0; kind < 4; ++kind)
    for (int n = 1; n <= 5; ++n)
      for (int m : {1, 2, 24, 255})
        for (std::uint32_t grid : {0u, 1u, 1025u}) {
          CohortKey key;
          key.kind = static_cast<ExperimentKind>(kind);
          key.n = n;
          key.m = m;
          key.grid = grid;
          seeds.insert(derive_seed(1, Stream::data, cohort_key(key)));
          ++count;
          for (std::uint64_t t = 0; t < 8; ++t) {
            seeds.insert(derive_seed(1, Stream::init, trial_key(key, t)));
            ++count;
          }
        }
  EXPECT_EQ(seeds.size(), count);
  EXPECT_NE(derive_seed(1, Stream::init, 5), derive_seed(2, Stream::init, 5));
  EXPECT_NE(derive_seed(1, Stream::init, 5), derive_seed(1, Stream::perturbation, 5));
}

TEST(RunSuccessRate, CohortsShareDataAndWorkersDoNotMatter) {
  const auto c = tiny_config();
  const auto one = run_success_rate(c, 1);
  const auto many = run_success_rate(c, 4);
  ASSERT_EQ(one.trials.size(), 6u);
  EXPECT_EQ(trials_jsonl(one.trials), trials_jsonl(many.trials));
  EXPECT_EQ(one.final_networks, many.final_networks);
  std::set<std::uint64_t> init_seeds;
  for (const auto& t : one.trials) init_seeds.insert(t.seed);
  EXPECT_EQ(init_seeds.size(), 6u);
  // A cohort member retrained alone on the cohort stream reproduces its result.
  CohortKey key;
  key.n = 1;
  key.m = 2;
  const auto vs = make_validation_set(DensitySpec::uniform(8, 8), 1, 16, derive_seed(c.master_seed, Stream::validation, 0));
  const auto solo = train_instance(one.initial_networks[4], TrainingSettings::from(c, 1), DensitySpec::uniform(8, 8),
                                   derive_seed(c.master_seed, Stream::data, cohort_key(key)), vs);
  EXPECT_EQ(solo.result.val_loss, one.trials[4].val_loss);
  EXPECT_EQ(one.trials[4].cohort.m, 2);
  EXPECT_EQ(one.trials[4].trial_index, 1u);
}

TEST(RunSuccessRate, SeedChangesResults) {
  auto c = tiny_config();
  const auto a = run_success_rate(c);
  c.master_seed = 13;
  const auto b = run_success_rate(c);
  EXPECT_NE(trials_jsonl(a.trials), trials_jsonl(b.trials));
}

TEST(RunDensityStudy, OneCohortPerDensity) {
  auto c = tiny_config();
  c.kind = ExperimentKind::density;
  c.overcompleteness = {1};
  c.instances = 2;
  c.epochs = 1;
  c.densities = {0.2, 0.4};
  const auto r = run_density_study(c);
  ASSERT_EQ(r.trials.size(), 4u);
  EXPECT_EQ(*r.trials[0].cohort.density, 0.2);
  EXPECT_EQ(*r.trials[3].cohort.density, 0.4);
  EXPECT_EQ(r.trials[3].cohort.label(), "n1-m1-d0.4000");
  c.overcompleteness = {1, 2};
  EXPECT_THROW(run_density_study(c), ConfigError);
}

TEST(RunPerturbationStudy, BuildsPerturbedCohorts) {
  auto c = tiny_config();
  c.kind = ExperimentKind::perturbation;
  c.instances = 2;
  c.epochs = 1;
  c.perturbation.variants = {PerturbationVariant::sign_of_converged, PerturbationVariant::uniform_of_init};
  c.perturbation.k_values = {0, 2};
  c.perturbation.r_values = {0.5};
  c.perturbation.base_checkpoint = "unused";
  c.perturbation.base_initial_checkpoint = "unused";
  const auto base = hand_engineered_weights(1, 8, 8);
  const auto init = init_unit_normal(build_network({1, 1, 8, 8}), 4);
  const auto r = run_perturbation_study(c, base, init);
  ASSERT_EQ(r.trials.size(), 6u);
  EXPECT_EQ(r.initial_networks[0], base);  // k = 0 leaves the base untouched
  EXPECT_TRUE(r.trials[0].converged);
  EXPECT_EQ(r.trials[2].cohort.label(), "n1-m1-sign_of_converged-k2");
  EXPECT_EQ(r.trials[4].cohort.label(), "n1-m1-uniform_of_init-r0.5000");
  EXPECT_NE(r.initial_networks[2], r.initial_networks[3]);

  EXPECT_THROW(run_perturbation_study(c, std::nullopt, init), ConfigError);
  EXPECT_THROW(run_perturbation_study(c, base, std::nullopt), ConfigError);
  c.perturbation.k_values = {26};
  EXPECT_THROW(run_perturbation_study(c, base, init), ConfigError);
}

TEST(ConvergenceStats, MeanOverConvergedOnly) {
  const auto s = run_convergence_stats({converged_at(3, true), converged_at(5, true), converged_at(2, false),
                                        converged_at(std::nullopt, false)});
  EXPECT_EQ(s.converged_count, 2u);
  EXPECT_EQ(*s.mean_first_epoch, 4.0);
  const auto none = run_convergence_stats({converged_at(std::nullopt, false)});
  EXPECT_FALSE(none.mean_first_epoch);
  EXPECT_FALSE(run_convergence_stats({}).mean_first_epoch);
}

TEST(Tally, GroupsByCohortInKeyOrder) {
  std::vector<TrialResult> trials;
  for (int m : {4, 1})
    for (int i = 0; i < 4; ++i) {
      TrialResult t;
      t.cohort.m = m;
      t.trial_index = static_cast<std::size_t>(i);
      t.converged = i < m - 1;
      trials.push_back(t);
    }
  const auto g = tally(trials, {ExperimentKind::success_rate});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].key.m, 1);
  EXPECT_EQ(g[0].successes, 0u);
  EXPECT_EQ(g[1].successes, 3u);
  EXPECT_EQ(g[1].rate(), 0.75);
  EXPECT_TRUE(tally(trials, {ExperimentKind::density}).empty());
}

TEST(Config, ValidationNamesTheField) {
  auto c = tiny_config();
  c.examples_per_epoch = 10;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("examples-per-epoch:", 0), 0u);
  }
  c = tiny_config();
  c.n_steps = {0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.kind = ExperimentKind::perturbation;
  c.perturbation.variants = {PerturbationVariant::sign_of_converged};
  c.perturbation.k_values = {1};
  EXPECT_THROW(c.validate(), ConfigError);  // no base checkpoint
}

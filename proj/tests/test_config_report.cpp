#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lifenet/config.hpp"
#include "lifenet/report.hpp"

using namespace lifenet;

namespace {

TrialResult trial(int n, int m, std::size_t index, bool converged) {
  TrialResult t;
  t.cohort.n = n;
  t.cohort.m = m;
  t.trial_index = index;
  t.converged = converged;
  t.train_loss = {0.5, 0.25};
  t.val_loss = {0.4, converged ? 0.005 : 0.2};
  if (converged) t.first_convergence_epoch = 2;
  return t;
}

std::string first_lines(const std::string& s, int n) {
  std::size_t at = 0;
  for (int i = 0; i < n && at != std::string::npos; ++i) at = s.find('\n', at + 1);
  return s.substr(0, at == std::string::npos ? s.size() : at + 1);
}

}  // namespace

TEST(ConfigParse, FullSchema) {
  const auto c = parse_config(R"(
# comment
experiment-id = run-a
kind = perturbation
n-steps = 1
overcompleteness = 1
instances = 16   # trailing comment
epochs = 20
examples-per-epoch = 1000
batch-size = 8
board-height = 16
board-width = 24
dataset = fixed
density = 0.4
perturbation-variants = sign_of_converged, uniform_of_init
k-values = 1, 2
r-values = 0.25
base-checkpoint = base.ckpt
base-initial-checkpoint = /abs/init.ckpt
master-seed = 18446744073709551615
loss-threshold = 0.02
validation-size = 64
adam-alpha = 0.002
adam-beta1 = 0.8
adam-beta2 = 0.99
adam-epsilon = 1e-8
save-checkpoints = all
)",
                              "/cfg");
  EXPECT_EQ(c.experiment_id, "run-a");
  EXPECT_EQ(c.kind, ExperimentKind::perturbation);
  EXPECT_EQ(c.instances, 16u);
  EXPECT_EQ(c.board_width, 24u);
  EXPECT_EQ(c.dataset, DensityMode::fixed_density);
  EXPECT_EQ(c.perturbation.variants.size(), 2u);
  EXPECT_EQ(c.perturbation.k_values, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.perturbation.base_checkpoint, "/cfg/base.ckpt");
  EXPECT_EQ(c.perturbation.base_initial_checkpoint, "/abs/init.ckpt");
  EXPECT_EQ(c.master_seed, 18446744073709551615ULL);
  EXPECT_EQ(c.adam.epsilon, 1e-8);
  EXPECT_EQ(c.checkpoints, CheckpointPolicy::all);
}

TEST(ConfigParse, DensityRange) {
  const auto c = parse_config("kind = density\ndensities = 0.2:0.5:0.0125\n");
  ASSERT_EQ(c.densities.size(), 25u);
  EXPECT_DOUBLE_EQ(c.densities.back(), 0.5);
  EXPECT_EQ(parse_config("kind = density\ndensities = 0.1:0.9:0.05\n").densities.size(), 17u);
}

TEST(ConfigParse, FieldLevelErrors) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(message("instances = many\n").rfind("instances:", 0), 0u);
  EXPECT_EQ(message("colour = red\n").rfind("colour:", 0), 0u);
  EXPECT_EQ(message("epochs = 3\nepochs = 4\n").rfind("epochs:", 0), 0u);
  EXPECT_EQ(message("kind = magic\n").rfind("kind:", 0), 0u);
  EXPECT_EQ(message("batch-size = 3\n").rfind("examples-per-epoch:", 0), 0u);
  EXPECT_EQ(message("kind = density\n").rfind("densities:", 0), 0u);
  EXPECT_EQ(message("just words\n").rfind("line 1:", 0), 0u);
  EXPECT_THROW(load_config("/nonexistent/config.cfg"), ConfigError);
}

TEST(ConfigParse, ShippedConfigsParse) {
  for (const auto& entry : std::filesystem::directory_iterator(LIFENET_FIXTURES "/../../configs")) {
    if (entry.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
  }
}

TEST(Report, SuccessRates) {
  std::vector<TrialResult> trials;
  for (std::size_t i = 0; i < 16; ++i) trials.push_back(trial(1, 4, i, i < 9));
  for (std::size_t i = 0; i < 2; ++i) trials.push_back(trial(1, 1, i, false));
  EXPECT_EQ(success_rates_csv(trials),
            "n,m,instances,successes,rate\n"
            "1,1,2,0,0.0000\n"
            "1,4,16,9,0.5625\n");
}

TEST(Report, HeaderOnlyWhenEmpty) {
  EXPECT_EQ(success_rates_csv({}), "n,m,instances,successes,rate\n");
  EXPECT_EQ(convergence_csv({}), "n,m,mean_first_convergence_epoch,converged_count\n");
  EXPECT_EQ(perturbation_csv({}), "variant,k_or_r,trials,successes,rate\n");
  EXPECT_EQ(density_csv({}), "d,trials,successes,rate\n");
  EXPECT_EQ(losses_csv({}), "trial,epoch,train_loss,val_loss,degenerate_flag\n");
}

TEST(Report, ConvergenceAndLosses) {
  std::vector<TrialResult> trials{trial(2, 1, 0, false), trial(1, 2, 1, true), trial(1, 2, 0, true)};
  trials[1].first_convergence_epoch = 4;
  EXPECT_EQ(convergence_csv(trials),
            "n,m,mean_first_convergence_epoch,converged_count\n"
            "1,2,3.0000,2\n"
            "2,1,NA,0\n");
  const auto losses = losses_csv(trials);
  EXPECT_EQ(first_lines(losses, 3),
            "trial,epoch,train_loss,val_loss,degenerate_flag\n"
            "n1-m2#0000,1,5.00000000e-01,4.00000000e-01,0\n"
            "n1-m2#0000,2,2.50000000e-01,5.00000000e-03,0\n");
}

TEST(Report, PerturbationAndDensityRows) {
  std::vector<TrialResult> trials;
  for (std::size_t i = 0; i < 4; ++i) {
    auto t = trial(1, 1, i, i == 0);
    t.cohort.kind = ExperimentKind::perturbation;
    t.cohort.variant = PerturbationVariant::uniform_of_init;
    t.cohort.value = 0.25;
    trials.push_back(t);
    auto s = t;
    s.cohort.variant = PerturbationVariant::sign_of_converged;
    s.cohort.value = 1;
    trials.push_back(s);
    auto d = trial(1, 1, i, i < 2);
    d.cohort.kind = ExperimentKind::density;
    d.cohort.density = 0.375;
    trials.push_back(d);
  }
  EXPECT_EQ(perturbation_csv(trials),
            "variant,k_or_r,trials,successes,rate\n"
            "sign_of_converged,1,4,1,0.2500\n"
            "uniform_of_init,0.2500,4,1,0.2500\n");
  EXPECT_EQ(density_csv(trials), "d,trials,successes,rate\n0.3750,4,2,0.5000\n");
}

TEST(Report, JsonRoundTrip) {
  auto t = trial(3, 5, 12, true);
  t.cohort.kind = ExperimentKind::perturbation;
  t.cohort.variant = PerturbationVariant::sign_of_init;
  t.cohort.value = 3;
  t.cohort.grid = 1026;
  t.seed = 0xfedcba9876543210ULL;
  t.accuracy = 0.9990234375;
  t.train_loss = {0.1234567890123, 1e-9};
  const auto back = trial_from_json(to_json(t));
  EXPECT_EQ(to_json(back), to_json(t));
  EXPECT_EQ(back.seed, t.seed);
  EXPECT_EQ(back.train_loss, t.train_loss);
  EXPECT_EQ(back.cohort.label(), t.cohort.label());

  const auto dir = std::filesystem::temp_directory_path() / "lifenet_report_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "trials.jsonl") << trials_jsonl({t, trial(1, 1, 0, false)});
  }
  const auto read = read_trials_jsonl(dir / "trials.jsonl");
  ASSERT_EQ(read.size(), 2u);
  EXPECT_EQ(read[0].label(), t.label());
  emit_report(read, dir);
  for (auto name : {"success_rates.csv", "convergence.csv", "perturbation.csv", "density.csv", "losses.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  std::filesystem::remove_all(dir);
}

#pragma once

// Figure-data CSVs and the trial-result store they are regenerated from.
//
//   success_rates.csv  n,m,instances,successes,rate
//   losses.csv         trial,epoch,train_loss,val_loss,degenerate_flag
//   convergence.csv    n,m,mean_first_convergence_epoch,converged_count
//   perturbation.csv   variant,k_or_r,trials,successes,rate
//   density.csv        d,trials,successes,rate
//
// Precision: rate, d, r and mean epoch use 4 decimals; losses use %.8e.
// A cohort with no converged trial reports mean_first_convergence_epoch as NA.
// Rows are sorted by cohort key (n, m, d, variant, k/r), then trial and epoch.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lifenet/experiments.hpp"

namespace lifenet {

namespace detail {

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string sci8(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8e", v);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace detail

inline std::string success_rates_csv(const std::vector<TrialResult>& trials) {
  std::string out = "n,m,instances,successes,rate\n";
  for (const auto& g : tally(trials, {ExperimentKind::success_rate, ExperimentKind::convergence}))
    out += std::to_string(g.key.n) + "," + std::to_string(g.key.m) + "," + std::to_string(g.trials) + "," +
           std::to_string(g.successes) + "," + detail::fixed4(g.rate()) + "\n";
  return out;
}

inline std::string convergence_csv(const std::vector<TrialResult>& trials) {
  std::string out = "n,m,mean_first_convergence_epoch,converged_count\n";
  for (const auto& g : tally(trials, {ExperimentKind::success_rate, ExperimentKind::convergence})) {
    const auto s = run_convergence_stats(g.members);
    out += std::to_string(g.key.n) + "," + std::to_string(g.key.m) + "," +
           (s.mean_first_epoch ? detail::fixed4(*s.mean_first_epoch) : std::string("NA")) + "," +
           std::to_string(s.converged_count) + "\n";
  }
  return out;
}

inline std::string perturbation_csv(const std::vector<TrialResult>& trials) {
  std::string out = "variant,k_or_r,trials,successes,rate\n";
  for (const auto& g : tally(trials, {ExperimentKind::perturbation})) {
    const auto variant = *g.key.variant;
    const std::string value = is_sign_variant(variant) ? std::to_string(static_cast<std::size_t>(g.key.value))
                                                       : detail::fixed4(g.key.value);
    out += std::string(to_string(variant)) + "," + value + "," + std::to_string(g.trials) + "," +
           std::to_string(g.successes) + "," + detail::fixed4(g.rate()) + "\n";
  }
  return out;
}

inline std::string density_csv(const std::vector<TrialResult>& trials) {
  std::string out = "d,trials,successes,rate\n";
  for (const auto& g : tally(trials, {ExperimentKind::density}))
    out += detail::fixed4(g.key.density.value_or(0)) + "," + std::to_string(g.trials) + "," +
           std::to_string(g.successes) + "," + detail::fixed4(g.rate()) + "\n";
  return out;
}

inline std::string losses_csv(const std::vector<TrialResult>& trials) {
  std::vector<const TrialResult*> sorted;
  for (const auto& t : trials) sorted.push_back(&t);
  std::stable_sort(sorted.begin(), sorted.end(), [](const TrialResult* a, const TrialResult* b) {
    if (a->cohort < b->cohort) return true;
    if (b->cohort < a->cohort) return false;
    return a->trial_index < b->trial_index;
  });
  std::string out = "trial,epoch,train_loss,val_loss,degenerate_flag\n";
  for (const auto* t : sorted) {
    const std::string label = t->label(), flag = t->degenerate_dead ? "1" : "0";
    for (std::size_t e = 0; e < t->train_loss.size(); ++e)
      out += label + "," + std::to_string(e + 1) + "," + detail::sci8(t->train_loss[e]) + "," +
             (e < t->val_loss.size() ? detail::sci8(t->val_loss[e]) : std::string("NA")) + "," + flag + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trial store (trials.jsonl): one JSON object per trial, doubles round-trip exactly.

inline nlohmann::json to_json(const TrialResult& t) {
  nlohmann::json c = {{"kind", to_string(t.cohort.kind)}, {"n", t.cohort.n}, {"m", t.cohort.m},
                      {"grid", t.cohort.grid}, {"value", t.cohort.value}};
  if (t.cohort.density) c["density"] = *t.cohort.density;
  if (t.cohort.variant) c["variant"] = to_string(*t.cohort.variant);
  nlohmann::json j = {{"cohort", c},
                      {"trial_index", t.trial_index},
                      {"seed", t.seed},
                      {"train_loss", t.train_loss},
                      {"val_loss", t.val_loss},
                      {"converged", t.converged},
                      {"degenerate_dead", t.degenerate_dead},
                      {"accuracy", t.accuracy},
                      {"failed_numerics", t.failed_numerics}};
  j["first_convergence_epoch"] = t.first_convergence_epoch ? nlohmann::json(*t.first_convergence_epoch) : nlohmann::json();
  return j;
}

inline TrialResult trial_from_json(const nlohmann::json& j) {
  TrialResult t;
  const auto& c = j.at("cohort");
  const auto kind = c.at("kind").get<std::string>();
  if (kind == "success_rate") t.cohort.kind = ExperimentKind::success_rate;
  else if (kind == "convergence") t.cohort.kind = ExperimentKind::convergence;
  else if (kind == "perturbation") t.cohort.kind = ExperimentKind::perturbation;
  else if (kind == "density") t.cohort.kind = ExperimentKind::density;
  else throw ParseError("trials: unknown cohort kind '" + kind + "'");
  t.cohort.n = c.at("n").get<int>();
  t.cohort.m = c.at("m").get<int>();
  t.cohort.grid = c.at("grid").get<std::uint32_t>();
  t.cohort.value = c.at("value").get<double>();
  if (c.contains("density")) t.cohort.density = c.at("density").get<double>();
  if (c.contains("variant")) {
    const auto v = c.at("variant").get<std::string>();
    if (v == "sign_of_init") t.cohort.variant = PerturbationVariant::sign_of_init;
    else if (v == "sign_of_converged") t.cohort.variant = PerturbationVariant::sign_of_converged;
    else if (v == "uniform_of_init") t.cohort.variant = PerturbationVariant::uniform_of_init;
    else throw ParseError("trials: unknown variant '" + v + "'");
  }
  t.trial_index = j.at("trial_index").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.train_loss = j.at("train_loss").get<std::vector<double>>();
  t.val_loss = j.at("val_loss").get<std::vector<double>>();
  t.converged = j.at("converged").get<bool>();
  t.degenerate_dead = j.at("degenerate_dead").get<bool>();
  t.accuracy = j.at("accuracy").get<double>();
  t.failed_numerics = j.at("failed_numerics").get<bool>();
  if (!j.at("first_convergence_epoch").is_null())
    t.first_convergence_epoch = j.at("first_convergence_epoch").get<std::size_t>();
  return t;
}

inline std::string trials_jsonl(const std::vector<TrialResult>& trials) {
  std::string out;
  for (const auto& t : trials) out += to_json(t).dump() + "\n";
  return out;
}

inline std::vector<TrialResult> read_trials_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::vector<TrialResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Writes the five figure-data CSVs into `dir`.
inline void emit_report(const std::vector<TrialResult>& trials, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "success_rates.csv", success_rates_csv(trials));
  detail::write_file(dir / "losses.csv", losses_csv(trials));
  detail::write_file(dir / "convergence.csv", convergence_csv(trials));
  detail::write_file(dir / "perturbation.csv", perturbation_csv(trials));
  detail::write_file(dir / "density.csv", density_csv(trials));
}

}  // namespace lifenet

// Acceptance gate for the whole library: solver correctness, learning-theory
// checks, gradient checks, end-to-end training on both bundled presets,
// environment invariants under fuzzing, and bitwise reproducibility of the
// metric logs. Prints one PASS/FAIL line per check and exits nonzero if any
// check fails. Training runs write their artifacts under the system temp
// directory; expect a total runtime in the tens of minutes on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seda/assignment.hpp"
#include "seda/config.hpp"
#include "seda/constellation.hpp"
#include "seda/csv.hpp"
#include "seda/dictator.hpp"
#include "seda/experiment.hpp"
#include "seda/learner.hpp"
#include "seda/log.hpp"
#include "seda/mlp.hpp"
#include "seda/policy.hpp"
#include "seda/tabular.hpp"

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Shortest round-trip decimal form, for exact-looking numbers in the report.
std::string num(double value) { return seda::format_double(value); }

struct CheckResult {
  bool pass = false;
  std::string detail;
};

/// Artifacts shared between checks: later checks compare against runs
/// produced by earlier ones.
struct Shared {
  fs::path work;
  double dictator_reda_final_mean = 0.0;
  fs::path dictator_seed1_dir;
  fs::path constellation_seed1_dir;
};

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Bundled preset with the algorithm line optionally swapped, so the trained
/// baselines run under the exact same environment and schedule settings.
seda::ExperimentConfig load_preset(const std::string& file_name,
                                   const std::string& algorithm = "") {
  const fs::path path = fs::path(SEDA_SOURCE_DIR) / "configs" / file_name;
  std::string text = file_bytes(path);
  if (!algorithm.empty()) {
    const std::string key = "algorithm = ";
    const auto pos = text.find(key);
    if (pos == std::string::npos)
      throw std::runtime_error("no algorithm line in " + path.string());
    const auto line_end = text.find('\n', pos);
    text = text.substr(0, pos + key.size()) + algorithm + text.substr(line_end);
  }
  return seda::ExperimentConfig::from_text(text);
}

seda::RunRecord run_preset(const seda::ExperimentConfig& config,
                           std::uint64_t seed, const fs::path& out_dir) {
  std::error_code ec;
  fs::remove_all(out_dir, ec);
  seda::log_message(seda::LogLevel::info,
                    "acceptance: training " + config.algorithm + " seed " +
                        std::to_string(seed) + " -> " + out_dir.string());
  seda::RunRecord record = seda::run_experiment(config, seed, out_dir);
  if (record.metrics.empty())
    throw std::runtime_error("run produced no metric rows");
  return record;
}

/// 1,000 random rectangular instances shared by the two solver checks.
/// n <= 5 agents, n <= m <= 7 tasks, benefits uniform on [-10, 10].
std::vector<Eigen::MatrixXd> random_instances() {
  std::mt19937_64 rng(20250825);
  std::uniform_int_distribution<int> n_dist(1, 5);
  std::uniform_real_distribution<double> entry(-10.0, 10.0);
  std::vector<Eigen::MatrixXd> instances;
  instances.reserve(1000);
  for (int k = 0; k < 1000; ++k) {
    const int n = n_dist(rng);
    std::uniform_int_distribution<int> m_dist(n, 7);
    const int m = m_dist(rng);
    Eigen::MatrixXd benefits(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) benefits(i, j) = entry(rng);
    instances.push_back(std::move(benefits));
  }
  return instances;
}

// Check 1: the exact solver and exhaustive enumeration agree on every
// random instance, within 1e-9, in under 10 seconds total.
CheckResult check_exact_solver() {
  const auto start = Clock::now();
  double worst_gap = 0.0;
  int invalid = 0;
  for (const Eigen::MatrixXd& benefits : random_instances()) {
    const seda::JointAssignment exact = seda::solve_exact(benefits);
    const seda::JointAssignment brute = seda::solve_brute_force(benefits);
    const int m = static_cast<int>(benefits.cols());
    if (!seda::is_valid_assignment(exact, m) ||
        !seda::is_valid_assignment(brute, m))
      ++invalid;
    worst_gap = std::max(worst_gap,
                         std::abs(seda::objective_value(benefits, exact) -
                                  seda::objective_value(benefits, brute)));
  }
  const double elapsed = seconds_since(start);
  CheckResult result;
  result.pass = worst_gap <= 1e-9 && invalid == 0 && elapsed < 10.0;
  result.detail = "exact solver vs exhaustive search on 1000 random instances: "
                  "largest objective gap " +
                  num(worst_gap) + ", " + std::to_string(invalid) +
                  " invalid assignments, " + num(elapsed) + " s";
  return result;
}

// Check 2: with bid increment 0.01 the auction objective is within
// n * 0.01 of optimal on every instance.
CheckResult check_auction_bound() {
  seda::AuctionConfig auction;
  auction.epsilon_bid = 0.01;
  int within_bound = 0;
  int total = 0;
  double worst_slack = 0.0;
  for (const Eigen::MatrixXd& benefits : random_instances()) {
    const double exact = seda::objective_value(benefits, seda::solve_exact(benefits));
    const double auctioned =
        seda::objective_value(benefits, seda::solve_auction(benefits, auction));
    const double n = static_cast<double>(benefits.rows());
    ++total;
    if (auctioned >= exact - n * auction.epsilon_bid - 1e-9) ++within_bound;
    worst_slack = std::max(worst_slack, exact - auctioned);
  }
  CheckResult result;
  result.pass = within_bound == total;
  result.detail = "auction with bid increment 0.01 within n*0.01 of optimal on " +
                  std::to_string(within_bound) + "/" + std::to_string(total) +
                  " instances (worst shortfall " + num(worst_slack) + ")";
  return result;
}

// Check 3: the dictator preset trains to near the 60-point maximum on at
// least 4 of 5 seeds, each seed within its 15-minute budget.
CheckResult check_dictator_training(Shared& shared) {
  const seda::ExperimentConfig config = load_preset("dictator.cfg");
  int reached = 0;
  double slowest = 0.0;
  std::string finals;
  double final_sum = 0.0;
  for (std::uint64_t seed : config.seeds) {
    const fs::path dir =
        shared.work / ("dictator_reda_seed" + std::to_string(seed));
    const seda::RunRecord record = run_preset(config, seed, dir);
    const double final_return = record.metrics.back().mean_return;
    final_sum += final_return;
    if (final_return >= 58.0) ++reached;
    slowest = std::max(slowest, record.wall_clock_seconds);
    if (!finals.empty()) finals += "/";
    finals += num(final_return);
    if (seed == 1) shared.dictator_seed1_dir = dir;
  }
  shared.dictator_reda_final_mean =
      final_sum / static_cast<double>(config.seeds.size());
  CheckResult result;
  result.pass = reached >= 4 && slowest <= 900.0;
  result.detail = "dictator preset, 5 seeds: final mean returns " + finals +
                  ", >=58 on " + std::to_string(reached) +
                  "/5 seeds, slowest seed " + num(slowest) + " s";
  return result;
}

// Check 4: on the same preset, independent per-agent learning stays at
// least 10 points below the assignment-based learner and never beats 50,
// while the myopic assignment policy scores exactly 37.8.
CheckResult check_dictator_separation(Shared& shared) {
  const seda::ExperimentConfig iql_config = load_preset("dictator.cfg", "iql");
  const seda::RunRecord iql_run =
      run_preset(iql_config, 1, shared.work / "dictator_iql_seed1");
  const double iql_final = iql_run.metrics.back().mean_return;

  const std::unique_ptr<seda::SapEnv> env = seda::make_environment(iql_config);
  const seda::EvalResult greedy =
      seda::evaluate(*env, seda::greedy_policy(), 100, 1);
  const bool greedy_exact = std::abs(greedy.mean_return - 37.8) <= 1e-9;

  CheckResult result;
  result.pass = iql_final <= 50.0 &&
                iql_final <= shared.dictator_reda_final_mean - 10.0 &&
                greedy_exact;
  result.detail = "independent learner final return " + num(iql_final) +
                  " (<=50 and <=" + num(shared.dictator_reda_final_mean) +
                  "-10), myopic assignment baseline " + num(greedy.mean_return) +
                  " (expected exactly 37.8)";
  return result;
}

// Check 5: the on-policy evaluation operator contracts at rate gamma and
// its iterates converge to the closed-form fixed point, whose agent-1
// value at the first state and task is 200.
CheckResult check_contraction() {
  const auto start = Clock::now();
  const seda::DictatorSpec spec = seda::DictatorSpec::standard();
  seda::DictatorPolicy policy;
  policy.joint_action = {{{0, 1, 2}, {0, 1, 2}, {0, 1, 2}}};
  const double gamma = 0.99;

  const seda::AgentTables fixed = seda::tabular_fixed_point(spec, policy, gamma);
  seda::AgentTables tables = seda::zero_tables();
  double previous_distance = -1.0;
  double worst_ratio = 0.0;
  int ratio_checks = 0;
  for (int iteration = 0; iteration < 2500; ++iteration) {
    const seda::AgentTables next =
        seda::tabular_backup(tables, spec, policy, gamma);
    const double distance = seda::sup_distance(next, tables);
    // Ratios are only meaningful while the successive differences sit well
    // above the double-precision noise floor of ~1e-14 for entries near 200.
    if (previous_distance > 1e-3) {
      worst_ratio = std::max(worst_ratio, distance / previous_distance);
      ++ratio_checks;
    }
    previous_distance = distance;
    tables = next;
  }
  const double to_fixed = seda::sup_distance(tables, fixed);
  const double value_gap = std::abs(fixed[0](0, 0) - 200.0);
  const double elapsed = seconds_since(start);

  CheckResult result;
  result.pass = worst_ratio <= gamma + 1e-9 && ratio_checks > 500 &&
                to_fixed < 1e-6 && value_gap <= 1e-6 && elapsed <= 1.0;
  result.detail = "policy evaluation contracts: worst ratio " + num(worst_ratio) +
                  " over " + std::to_string(ratio_checks) +
                  " iterations, distance to closed form " + num(to_fixed) +
                  ", agent-1 fixed-point value gap " + num(value_gap) + ", " +
                  num(elapsed) + " s";
  return result;
}

// Check 6: under any frozen deterministic joint policy, the per-agent
// episodic values at the policy's own action sum to the joint return.
CheckResult check_decomposition() {
  const auto start = Clock::now();
  const seda::DictatorSpec spec = seda::DictatorSpec::standard();
  const double gamma = 0.99;
  std::mt19937_64 rng(909);
  double worst_gap = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    const seda::DictatorPolicy policy = seda::random_dictator_policy(rng);
    const seda::AgentTables q = seda::episodic_q_tables(spec, policy, gamma);
    for (int s = 0; s < seda::DictatorSpec::n_states; ++s) {
      const std::vector<int>& x = policy.joint_action[s];
      double per_agent_sum = 0.0;
      for (int i = 0; i < seda::DictatorSpec::n_agents; ++i)
        per_agent_sum += q[i](s, x[i]);
      const double joint =
          seda::discounted_joint_return(spec, policy, s, x, gamma);
      worst_gap = std::max(worst_gap, std::abs(joint - per_agent_sum));
    }
  }
  const double elapsed = seconds_since(start);
  CheckResult result;
  result.pass = worst_gap <= 1e-9 && elapsed <= 1.0;
  result.detail = "per-agent values sum to the joint return for 10 random "
                  "frozen policies: largest gap " +
                  num(worst_gap) + ", " + num(elapsed) + " s";
  return result;
}

seda::MlpGradient finite_difference_gradient(seda::MlpParams params,
                                             const Eigen::MatrixXd& inputs,
                                             const std::vector<int>& actions,
                                             const Eigen::VectorXd& targets,
                                             double inv_norm) {
  const double h = 1e-5;
  seda::MlpGradient grad = seda::MlpParams::zeros(params.layer_sizes());
  auto probe = [&](double& parameter, double& slot) {
    const double saved = parameter;
    parameter = saved + h;
    const double up =
        seda::mlp_loss_and_gradient(params, inputs, actions, targets, inv_norm);
    parameter = saved - h;
    const double down =
        seda::mlp_loss_and_gradient(params, inputs, actions, targets, inv_norm);
    parameter = saved;
    slot = (up - down) / (2.0 * h);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Eigen::Index c = 0; c < params.weights[l].cols(); ++c)
      for (Eigen::Index r = 0; r < params.weights[l].rows(); ++r)
        probe(params.weights[l](r, c), grad.weights[l](r, c));
    for (Eigen::Index r = 0; r < params.biases[l].size(); ++r)
      probe(params.biases[l][r], grad.biases[l][r]);
  }
  return grad;
}

double max_relative_error(const seda::MlpGradient& a,
                          const seda::MlpGradient& b) {
  double worst = 0.0;
  auto compare = [&](double x, double y) {
    const double scale = std::max({1.0, std::abs(x), std::abs(y)});
    worst = std::max(worst, std::abs(x - y) / scale);
  };
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (Eigen::Index c = 0; c < a.weights[l].cols(); ++c)
      for (Eigen::Index r = 0; r < a.weights[l].rows(); ++r)
        compare(a.weights[l](r, c), b.weights[l](r, c));
    for (Eigen::Index r = 0; r < a.biases[l].size(); ++r)
      compare(a.biases[l][r], b.biases[l][r]);
  }
  return worst;
}

// Check 7: analytic network gradients match central finite differences to
// a relative error of 1e-4 across 20 random network/batch draws.
CheckResult check_gradients() {
  std::mt19937_64 rng(6021023);
  std::uniform_int_distribution<int> batch_size(1, 6);
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const seda::MlpParams params =
        seda::MlpParams::uniform_init({5, 10, 8, 4}, rng);
    const int batch = batch_size(rng);
    Eigen::MatrixXd inputs(5, batch);
    for (Eigen::Index c = 0; c < inputs.cols(); ++c)
      for (Eigen::Index r = 0; r < inputs.rows(); ++r) inputs(r, c) = value(rng);
    std::vector<int> actions;
    std::uniform_int_distribution<int> pick_action(0, 3);
    Eigen::VectorXd targets(batch);
    for (int s = 0; s < batch; ++s) {
      actions.push_back(pick_action(rng));
      targets[s] = value(rng);
    }
    const double inv_norm = 1.0 / batch;
    seda::MlpGradient analytic;
    seda::mlp_loss_and_gradient(params, inputs, actions, targets, inv_norm,
                                &analytic);
    const seda::MlpGradient numeric =
        finite_difference_gradient(params, inputs, actions, targets, inv_norm);
    worst = std::max(worst, max_relative_error(analytic, numeric));
  }
  CheckResult result;
  result.pass = worst <= 1e-4;
  result.detail =
      "analytic vs finite-difference gradients over 20 draws: largest "
      "relative error " +
      num(worst);
  return result;
}

// Check 8: on the constellation preset (16 satellites, 25 tasks, 50-step
// episodes, 3 seeds, 2-hour budget per seed): the assignment-based learner
// never conflicts, beats the myopic baseline by 10% on at least 2 of 3
// seeds, and keeps no more satellites out of power than the baseline;
// independent learning does conflict.
CheckResult check_constellation(Shared& shared) {
  const seda::ExperimentConfig reda_config =
      load_preset("mini-constellation.cfg");
  const seda::ExperimentConfig greedy_config =
      load_preset("mini-constellation.cfg", "greedy");
  const seda::ExperimentConfig iql_config =
      load_preset("mini-constellation.cfg", "iql");

  const seda::RunRecord greedy_run =
      run_preset(greedy_config, 1, shared.work / "constellation_greedy");
  const seda::MetricRow& greedy_final = greedy_run.metrics.back();
  const double greedy_return = greedy_final.mean_return;
  const double greedy_power_out = greedy_final.power_out_fraction.value();

  int beat_baseline = 0;
  bool conflict_free = true;
  bool power_ok = true;
  double slowest = 0.0;
  std::string finals;
  for (std::uint64_t seed : reda_config.seeds) {
    const fs::path dir =
        shared.work / ("constellation_reda_seed" + std::to_string(seed));
    const seda::RunRecord record = run_preset(reda_config, seed, dir);
    for (const seda::MetricRow& row : record.metrics)
      if (row.conflict_rate != 0.0) conflict_free = false;
    const seda::MetricRow& final_row = record.metrics.back();
    if (final_row.mean_return >= 1.10 * greedy_return) ++beat_baseline;
    if (!(final_row.power_out_fraction.value() <= greedy_power_out))
      power_ok = false;
    slowest = std::max(slowest, record.wall_clock_seconds);
    if (!finals.empty()) finals += "/";
    finals += num(final_row.mean_return);
    if (seed == 1) shared.constellation_seed1_dir = dir;
  }

  const seda::RunRecord iql_run =
      run_preset(iql_config, 1, shared.work / "constellation_iql_seed1");
  const double iql_conflict = iql_run.metrics.back().conflict_rate;

  CheckResult result;
  result.pass = conflict_free && beat_baseline >= 2 && power_ok &&
                iql_conflict > 0.0 && slowest <= 7200.0;
  result.detail = "constellation preset: trained returns " + finals +
                  " vs myopic " + num(greedy_return) + " (>=1.10x on " +
                  std::to_string(beat_baseline) + "/3 seeds), conflict-free " +
                  (conflict_free ? "yes" : "no") + ", power-out <= " +
                  num(greedy_power_out) + " " + (power_ok ? "yes" : "no") +
                  ", independent-learner conflict rate " + num(iql_conflict) +
                  ", slowest seed " + num(slowest) + " s";
  return result;
}

// Check 9: 10,000 random constellation steps keep every invariant: power
// stays in (-0.2, 1.0], dead agents earn nothing, state-dependent benefits
// never exceed the baseline, and rewards sum to the joint objective.
CheckResult check_env_fuzz() {
  const seda::ExperimentConfig config = load_preset("mini-constellation.cfg");
  seda::ConstellationEnv env(config.constellation);
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> pick_local(0, env.n_local_actions() - 1);

  long steps_done = 0;
  long violations = 0;
  std::uint64_t episode = 0;
  const int n = env.n_agents();
  while (steps_done < 10000) {
    env.reset(episode++);
    while (!env.done() && steps_done < 10000) {
      const Eigen::MatrixXd baseline = env.baseline(0);
      const Eigen::MatrixXd benefits = env.benefits();
      if (((benefits - baseline).array() > 1e-12).any()) ++violations;

      std::vector<char> dead_before(n);
      std::vector<int> tasks(n);
      for (int i = 0; i < n; ++i) {
        dead_before[i] = env.is_dead(i) ? 1 : 0;
        tasks[i] = env.resolve_local_action(i, pick_local(rng));
      }
      std::vector<int> chooser_count(env.n_tasks(), 0);
      for (int t : tasks) ++chooser_count[t];

      const seda::StepResult step = env.step(tasks, true);
      double expected_sum = 0.0;
      for (int i = 0; i < n; ++i) {
        expected_sum += benefits(i, tasks[i]) / chooser_count[tasks[i]];
        if (dead_before[i] && step.rewards[i] != 0.0) ++violations;
      }
      if (std::abs(step.rewards.sum() - expected_sum) > 1e-9) ++violations;
      for (int i = 0; i < n; ++i) {
        const double p = env.power()[i];
        if (!(p > -0.2 && p <= 1.0)) ++violations;
      }
      ++steps_done;
    }
  }
  CheckResult result;
  result.pass = violations == 0;
  result.detail = "environment fuzz over " + std::to_string(steps_done) +
                  " random steps: " + std::to_string(violations) +
                  " invariant violations";
  return result;
}

// Check 10: retraining either preset with the same seed reproduces the
// metric log byte for byte.
CheckResult check_reproducibility(Shared& shared) {
  const seda::ExperimentConfig dictator = load_preset("dictator.cfg");
  const seda::RunRecord dictator_rerun =
      run_preset(dictator, 1, shared.work / "dictator_reda_seed1_rerun");
  const std::string dict_first =
      file_bytes(shared.dictator_seed1_dir / "metrics.jsonl");
  const std::string dict_second =
      file_bytes(dictator_rerun.out_dir / "metrics.jsonl");

  const seda::ExperimentConfig constellation =
      load_preset("mini-constellation.cfg");
  const seda::RunRecord constellation_rerun = run_preset(
      constellation, 1, shared.work / "constellation_reda_seed1_rerun");
  const std::string cons_first =
      file_bytes(shared.constellation_seed1_dir / "metrics.jsonl");
  const std::string cons_second =
      file_bytes(constellation_rerun.out_dir / "metrics.jsonl");

  const bool dict_equal = dict_first == dict_second;
  const bool cons_equal = cons_first == cons_second;
  CheckResult result;
  result.pass = dict_equal && cons_equal && !dict_first.empty() &&
                !cons_first.empty();
  result.detail = std::string("metric logs bitwise reproducible: dictator ") +
                  (dict_equal ? "yes" : "no") + " (" +
                  std::to_string(dict_first.size()) +
                  " bytes), constellation " + (cons_equal ? "yes" : "no") +
                  " (" + std::to_string(cons_first.size()) + " bytes)";
  return result;
}

}  // namespace

int main() {
  Shared shared;
  shared.work = fs::temp_directory_path() / "seda_acceptance";
  std::error_code ec;
  fs::remove_all(shared.work, ec);
  fs::create_directories(shared.work);

  int failures = 0;
  auto report = [&failures](int id, const CheckResult& result) {
    if (!result.pass) ++failures;
    std::cout << (result.pass ? "PASS" : "FAIL") << " " << id << " "
              << result.detail << "\n"
              << std::flush;
  };

  try {
    report(1, check_exact_solver());
    report(2, check_auction_bound());
    report(3, check_dictator_training(shared));
    report(4, check_dictator_separation(shared));
    report(5, check_contraction());
    report(6, check_decomposition());
    report(7, check_gradients());
    report(8, check_constellation(shared));
    report(9, check_env_fuzz());
    report(10, check_reproducibility(shared));
  } catch (const std::exception& error) {
    std::cout << "FAIL - aborted: " << error.what() << "\n";
    return 1;
  }

  if (failures == 0) {
    std::cout << "all 10 checks passed\n";
    return 0;
  }
  std::cout << failures << " of 10 checks failed\n";
  return 1;
}

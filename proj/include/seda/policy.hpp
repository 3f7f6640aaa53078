#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "seda/assignment.hpp"
#include "seda/env.hpp"
#include "seda/learner.hpp"
#include "seda/mlp.hpp"

namespace seda {

/// A policy maps the environment's current state to one global task per
/// agent.
using Policy = std::function<std::vector<int>(const SapEnv&)>;

/// Assigns agents to tasks by maximizing the current benefit matrix.
inline Policy greedy_policy() {
  return [](const SapEnv& env) {
    return solve_exact(env.benefits()).task_of_agent;
  };
}

/// Uniformly random valid assignment (distinct tasks). The generator is owned
/// by the returned closure.
inline Policy random_valid_policy(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](const SapEnv& env) {
    const int n = env.n_agents();
    const int m = env.n_tasks();
    std::vector<int> pool(m);
    for (int j = 0; j < m; ++j) pool[j] = j;
    std::vector<int> tasks(n);
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<int> pick(i, m - 1);
      std::swap(pool[i], pool[pick(*rng)]);
      tasks[i] = pool[i];
    }
    return tasks;
  };
}

/// Greedy exploitation of learned action values under the assignment
/// constraint: forward pass, global expansion, exact assignment. Fully
/// deterministic.
inline Policy learned_assignment_policy(MlpParams params) {
  auto shared = std::make_shared<MlpParams>(std::move(params));
  return [shared](const SapEnv& env) {
    const Eigen::MatrixXd q_local =
        forward_batch(*shared, joint_observation(env)).transpose();
    std::vector<std::vector<int>> local_tasks(env.n_agents());
    for (int i = 0; i < env.n_agents(); ++i)
      local_tasks[i] = env.local_tasks(i);
    return solve_exact(expand_q_global(q_local, local_tasks, env.n_tasks()))
        .task_of_agent;
  };
}

/// Independent greedy exploitation: each agent argmaxes its own action
/// values; duplicate tasks possible.
inline Policy learned_independent_policy(MlpParams params) {
  auto shared = std::make_shared<MlpParams>(std::move(params));
  return [shared](const SapEnv& env) {
    const Eigen::MatrixXd q_local =
        forward_batch(*shared, joint_observation(env)).transpose();
    std::vector<int> tasks(env.n_agents());
    for (int i = 0; i < env.n_agents(); ++i) {
      Eigen::Index best = 0;
      q_local.row(i).maxCoeff(&best);
      tasks[i] = env.resolve_local_action(i, static_cast<int>(best));
    }
    return tasks;
  };
}

/// Aggregate statistics over a batch of greedy evaluation episodes.
struct EvalResult {
  int episodes = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double conflict_rate = 0.0;
  std::optional<double> power_out_fraction;
  std::optional<double> mean_assignment_duration;
};

/// Rolls the policy through `episodes` full episodes (seeds seed_base,
/// seed_base+1, ...) and aggregates the per-episode metrics. The return
/// spread is the population standard deviation.
inline EvalResult evaluate(SapEnv& env, const Policy& policy, int episodes,
                           std::uint64_t seed_base,
                           bool allow_duplicates = false) {
  if (episodes <= 0) throw std::invalid_argument("episodes must be positive");
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(episodes));
  double conflict_sum = 0.0;
  double power_sum = 0.0;
  double duration_sum = 0.0;
  int power_count = 0;
  int duration_count = 0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(seed_base + static_cast<std::uint64_t>(e));
    while (!env.done()) env.step(policy(env), allow_duplicates);
    const EpisodeMetrics metrics = env.episode_metrics();
    returns.push_back(metrics.undiscounted_return);
    conflict_sum += metrics.conflict_rate;
    if (metrics.power_out_fraction) {
      power_sum += *metrics.power_out_fraction;
      ++power_count;
    }
    if (metrics.mean_assignment_duration) {
      duration_sum += *metrics.mean_assignment_duration;
      ++duration_count;
    }
  }
  EvalResult result;
  result.episodes = episodes;
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(episodes);
  double variance = 0.0;
  for (double r : returns) variance += (r - mean) * (r - mean);
  variance /= static_cast<double>(episodes);
  result.mean_return = mean;
  result.std_return = std::sqrt(variance);
  result.conflict_rate = conflict_sum / static_cast<double>(episodes);
  if (power_count == episodes)
    result.power_out_fraction = power_sum / static_cast<double>(episodes);
  if (duration_count == episodes)
    result.mean_assignment_duration =
        duration_sum / static_cast<double>(episodes);
  return result;
}

}  // namespace seda

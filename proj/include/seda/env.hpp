#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "seda/assignment.hpp"

namespace seda {

using Observation = Eigen::VectorXd;

struct StepResult {
  Eigen::VectorXd rewards;  // one entry per agent
  std::vector<Observation> next_observations;
  bool terminal = false;
};

/// Summary statistics for one finished episode. Power and assignment-duration
/// metrics only exist for environments that model them.
struct EpisodeMetrics {
  double undiscounted_return = 0.0;
  double conflict_rate = 0.0;
  std::optional<double> power_out_fraction;
  std::optional<double> mean_assignment_duration;
};

// Sequential assignment environment: a state-dependent benefit matrix, a
// transition driven by the joint assignment, and per-agent observations.
// Agents act through a small local action set; local action a < top task
// count selects the a-th ranked candidate task, and environments with one
// extra action treat it as "take some out-of-view task" (charging).
class SapEnv {
 public:
  virtual ~SapEnv() = default;

  virtual int n_agents() const = 0;
  virtual int n_tasks() const = 0;
  virtual int horizon() const = 0;
  virtual int obs_dim() const = 0;
  virtual int n_local_actions() const = 0;

  virtual void reset(std::uint64_t seed) = 0;

  /// Current state-dependent benefit matrix (n_agents x n_tasks).
  virtual Eigen::MatrixXd benefits() const = 0;

  virtual Observation observe(int agent) const = 0;

  /// Ranked candidate task set for this agent at the current step (global
  /// task indices, best first).
  virtual const std::vector<int>& local_tasks(int agent) const = 0;

  /// Map a local action to the global task it stands for at the current step.
  virtual int resolve_local_action(int agent, int local_action) const = 0;

  /// Inverse of resolve_local_action for executed global tasks: the rank of
  /// the task in the agent's candidate set, or the out-of-set action.
  virtual int local_action_of(int agent, int global_task) const = 0;

  virtual StepResult step(const std::vector<int>& task_of_agent,
                          bool allow_duplicates) = 0;

  /// 1-based index of the upcoming time step, in [1, horizon()].
  virtual int time_step() const = 0;
  virtual bool done() const = 0;

  virtual EpisodeMetrics episode_metrics() const = 0;

  std::vector<Observation> observe_all() const {
    std::vector<Observation> obs;
    obs.reserve(n_agents());
    for (int i = 0; i < n_agents(); ++i) obs.push_back(observe(i));
    return obs;
  }
};

/// Stack per-agent observations into an obs_dim x n_agents matrix.
inline Eigen::MatrixXd joint_observation(const SapEnv& env) {
  Eigen::MatrixXd joint(env.obs_dim(), env.n_agents());
  for (int i = 0; i < env.n_agents(); ++i) joint.col(i) = env.observe(i);
  return joint;
}

}  // namespace seda

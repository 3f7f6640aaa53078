#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "seda/env.hpp"

namespace seda {

/// Three-agent benchmark where agent 1's task choice alone decides the next
/// state. One benefit matrix per state; rewards for a shared task are split
/// evenly among the agents that chose it.
struct DictatorSpec {
  static constexpr int n_states = 3;
  static constexpr int n_agents = 3;
  static constexpr int n_tasks = 3;
  static constexpr int horizon = 10;

  std::array<Eigen::Matrix3d, n_states> benefit_by_state;

  static DictatorSpec standard() {
    DictatorSpec spec;
    spec.benefit_by_state[0] << 2, 3, 0,
                                0, 2, 3,
                                3, 0, 2;
    spec.benefit_by_state[1] << 0, 3, 0,
                                0, 0, 0.1,
                                0.1, 0, 0;
    spec.benefit_by_state[2] << 0, 0, 3,
                                0.1, 0, 0,
                                0, 0.1, 0;
    return spec;
  }
};

class DictatorEnv final : public SapEnv {
 public:
  explicit DictatorEnv(DictatorSpec spec = DictatorSpec::standard())
      : spec_(std::move(spec)) {
    for (int j = 0; j < DictatorSpec::n_tasks; ++j) all_tasks_.push_back(j);
    reset(0);
  }

  int n_agents() const override { return DictatorSpec::n_agents; }
  int n_tasks() const override { return DictatorSpec::n_tasks; }
  int horizon() const override { return DictatorSpec::horizon; }
  int obs_dim() const override { return DictatorSpec::n_states + DictatorSpec::n_agents; }
  int n_local_actions() const override { return DictatorSpec::n_tasks; }

  /// Start of episode is always state 1; the seed only exists to satisfy the
  /// environment contract (this environment is fully deterministic).
  void reset(std::uint64_t /*seed*/) override {
    state_ = 0;
    upcoming_step_ = 1;
    done_ = false;
    return_sum_ = 0.0;
    conflict_agent_steps_ = 0;
    steps_taken_ = 0;
  }

  Eigen::MatrixXd benefits() const override { return spec_.benefit_by_state[state_]; }

  Observation observe(int agent) const override {
    check_agent(agent);
    Observation obs = Observation::Zero(obs_dim());
    obs[state_] = 1.0;
    obs[DictatorSpec::n_states + agent] = 1.0;
    return obs;
  }

  // Every agent can always pick any task, so the local action space is the
  // full task set and the local/global mapping is the identity.
  const std::vector<int>& local_tasks(int agent) const override {
    check_agent(agent);
    return all_tasks_;
  }

  int resolve_local_action(int agent, int local_action) const override {
    check_agent(agent);
    if (local_action < 0 || local_action >= n_local_actions())
      throw std::out_of_range("local action out of range");
    return local_action;
  }

  int local_action_of(int agent, int global_task) const override {
    check_agent(agent);
    if (global_task < 0 || global_task >= DictatorSpec::n_tasks)
      throw std::out_of_range("task index out of range");
    return global_task;
  }

  StepResult step(const std::vector<int>& task_of_agent,
                  bool allow_duplicates) override {
    if (done_) throw std::logic_error("step() called on a finished episode");
    if (static_cast<int>(task_of_agent.size()) != n_agents())
      throw std::invalid_argument("joint action must list one task per agent");

    std::array<int, DictatorSpec::n_tasks> chooser_count{};
    for (int t : task_of_agent) {
      if (t < 0 || t >= DictatorSpec::n_tasks)
        throw std::out_of_range("task index out of range");
      ++chooser_count[t];
    }
    if (!allow_duplicates) {
      for (int c : chooser_count)
        if (c > 1) throw std::invalid_argument("duplicate task in joint action");
    }

    const Eigen::Matrix3d& beta = spec_.benefit_by_state[state_];
    StepResult result;
    result.rewards = Eigen::VectorXd(n_agents());
    int conflicted = 0;
    for (int i = 0; i < n_agents(); ++i) {
      const int count = chooser_count[task_of_agent[i]];
      result.rewards[i] = beta(i, task_of_agent[i]) / count;
      if (count > 1) ++conflicted;
    }

    return_sum_ += result.rewards.sum();
    conflict_agent_steps_ += conflicted;
    ++steps_taken_;

    state_ = task_of_agent[0];
    result.terminal = (upcoming_step_ == horizon());
    if (result.terminal)
      done_ = true;
    else
      ++upcoming_step_;

    result.next_observations = observe_all();
    return result;
  }

  int time_step() const override { return upcoming_step_; }
  bool done() const override { return done_; }

  EpisodeMetrics episode_metrics() const override {
    EpisodeMetrics metrics;
    metrics.undiscounted_return = return_sum_;
    if (steps_taken_ > 0)
      metrics.conflict_rate =
          static_cast<double>(conflict_agent_steps_) /
          (static_cast<double>(steps_taken_) * n_agents());
    return metrics;
  }

 private:
  void check_agent(int agent) const {
    if (agent < 0 || agent >= n_agents())
      throw std::out_of_range("agent index out of range");
  }

  DictatorSpec spec_;
  std::vector<int> all_tasks_;
  int state_ = 0;           // 0-based state index
  int upcoming_step_ = 1;   // 1-based index of the next step to execute
  bool done_ = false;
  double return_sum_ = 0.0;
  long conflict_agent_steps_ = 0;
  long steps_taken_ = 0;
};

}  // namespace seda

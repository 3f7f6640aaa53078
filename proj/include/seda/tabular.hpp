#pragma once

#include <algorithm>
#include <array>
#include <random>
#include <stdexcept>
#include <vector>

#include "seda/dictator.hpp"

// Tabular per-agent action values for the dictator problem under a frozen
// stationary joint policy. Used to validate the learning theory: the
// on-policy evaluation operator is a gamma-contraction whose fixed point is
// the per-agent value function, and the per-agent values sum to the joint
// value.

namespace seda {

/// One joint assignment per state (0-based tasks, duplicates allowed).
struct DictatorPolicy {
  std::array<std::vector<int>, DictatorSpec::n_states> joint_action;

  void validate() const {
    for (const auto& x : joint_action) {
      if (static_cast<int>(x.size()) != DictatorSpec::n_agents)
        throw std::invalid_argument("policy must assign every agent a task");
      for (int t : x)
        if (t < 0 || t >= DictatorSpec::n_tasks)
          throw std::invalid_argument("policy task index out of range");
    }
  }
};

/// Uniformly random policy; each state's joint action is a permutation, so
/// the policy is always a valid assignment.
inline DictatorPolicy random_dictator_policy(std::mt19937_64& rng) {
  DictatorPolicy policy;
  for (auto& x : policy.joint_action) {
    x = {0, 1, 2};
    std::shuffle(x.begin(), x.end(), rng);
  }
  return policy;
}

/// Reward of agent `i` taking task `j` at state `s` while every other agent
/// follows the policy, with the usual equal split for shared tasks.
inline double deviation_reward(const DictatorSpec& spec,
                               const DictatorPolicy& policy, int s, int agent,
                               int task) {
  int count = 1;
  for (int l = 0; l < DictatorSpec::n_agents; ++l)
    if (l != agent && policy.joint_action[s][l] == task) ++count;
  return spec.benefit_by_state[s](agent, task) / count;
}

/// tables[agent](state, task) -> value of taking that task now.
using AgentTables = std::vector<Eigen::MatrixXd>;

inline AgentTables zero_tables() {
  return AgentTables(DictatorSpec::n_agents,
                     Eigen::MatrixXd::Zero(DictatorSpec::n_states,
                                           DictatorSpec::n_tasks));
}

inline double sup_distance(const AgentTables& a, const AgentTables& b) {
  double sup = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    sup = std::max(sup, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return sup;
}

/// One application of the on-policy evaluation operator to every table
/// entry:
///
///   (F q_i)(s, j) = r_i(s, j) + gamma * q_i(s', pi(s')^i)
///
/// The action argument j changes only the immediate reward; the trajectory
/// itself follows the policy, so the next state s' is the task the policy's
/// first agent takes at s (the dictator transition).
inline AgentTables tabular_backup(const AgentTables& q,
                                  const DictatorSpec& spec,
                                  const DictatorPolicy& policy, double gamma) {
  policy.validate();
  AgentTables next = zero_tables();
  for (int s = 0; s < DictatorSpec::n_states; ++s) {
    const int s_next = policy.joint_action[s][0];
    for (int i = 0; i < DictatorSpec::n_agents; ++i) {
      const int policy_action = policy.joint_action[s_next][i];
      for (int j = 0; j < DictatorSpec::n_tasks; ++j)
        next[i](s, j) = deviation_reward(spec, policy, s, i, j) +
                        gamma * q[i](s_next, policy_action);
    }
  }
  return next;
}

/// Fixed point of the evaluation operator by direct linear solve,
/// independent of the iterative backup.
inline AgentTables tabular_fixed_point(const DictatorSpec& spec,
                                       const DictatorPolicy& policy,
                                       double gamma) {
  policy.validate();
  constexpr int n_entries = DictatorSpec::n_states * DictatorSpec::n_tasks;
  AgentTables fixed = zero_tables();
  for (int i = 0; i < DictatorSpec::n_agents; ++i) {
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n_entries, n_entries);
    Eigen::VectorXd rewards(n_entries);
    for (int s = 0; s < DictatorSpec::n_states; ++s) {
      const int s_next = policy.joint_action[s][0];
      const int policy_action = policy.joint_action[s_next][i];
      for (int j = 0; j < DictatorSpec::n_tasks; ++j) {
        const int row = s * DictatorSpec::n_tasks + j;
        system(row, s_next * DictatorSpec::n_tasks + policy_action) -= gamma;
        rewards[row] = deviation_reward(spec, policy, s, i, j);
      }
    }
    const Eigen::VectorXd solution = system.partialPivLu().solve(rewards);
    for (int s = 0; s < DictatorSpec::n_states; ++s)
      for (int j = 0; j < DictatorSpec::n_tasks; ++j)
        fixed[i](s, j) = solution[s * DictatorSpec::n_tasks + j];
  }
  return fixed;
}

/// Finite-horizon variant: value at the first step of a T-step episode of
/// taking task j at state s and following the policy afterwards.
inline AgentTables episodic_q_tables(const DictatorSpec& spec,
                                     const DictatorPolicy& policy,
                                     double gamma) {
  policy.validate();
  AgentTables value = zero_tables();  // value after the episode ends
  for (int k = DictatorSpec::horizon; k >= 1; --k) {
    AgentTables at_k = zero_tables();
    for (int s = 0; s < DictatorSpec::n_states; ++s) {
      const int s_next = policy.joint_action[s][0];
      for (int i = 0; i < DictatorSpec::n_agents; ++i) {
        const int policy_action = policy.joint_action[s_next][i];
        for (int j = 0; j < DictatorSpec::n_tasks; ++j) {
          double future =
              k < DictatorSpec::horizon ? value[i](s_next, policy_action) : 0.0;
          at_k[i](s, j) =
              deviation_reward(spec, policy, s, i, j) + gamma * future;
        }
      }
    }
    value = std::move(at_k);
  }
  return value;
}

/// Discounted joint return of playing `first_action` at state `s`, then the
/// policy, over one full episode. Independent rollout oracle for the
/// value-decomposition check.
inline double discounted_joint_return(const DictatorSpec& spec,
                                      const DictatorPolicy& policy, int s,
                                      const std::vector<int>& first_action,
                                      double gamma) {
  policy.validate();
  if (static_cast<int>(first_action.size()) != DictatorSpec::n_agents)
    throw std::invalid_argument("first action must cover every agent");
  double total = 0.0;
  double discount = 1.0;
  std::vector<int> x = first_action;
  int state = s;
  for (int k = 1; k <= DictatorSpec::horizon; ++k) {
    std::array<int, DictatorSpec::n_tasks> count{};
    for (int t : x) ++count[t];
    for (int i = 0; i < DictatorSpec::n_agents; ++i)
      total += discount * spec.benefit_by_state[state](i, x[i]) / count[x[i]];
    discount *= gamma;
    state = x[0];
    x = policy.joint_action[state];
  }
  return total;
}

}  // namespace seda

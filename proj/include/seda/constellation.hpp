#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seda/env.hpp"
#include "seda/orbit.hpp"

namespace seda {

/// Satellite-constellation tasking environment: per-step benefit matrices
/// from orbital geometry, a switching penalty that rewards persistent
/// assignments, battery dynamics with permanent instrument death, and a
/// compact per-agent interface of the top-ranked candidate tasks plus one
/// charging action.
struct ConstellationConfig {
  ConstellationGeometry geometry;
  int n_tasks = 450;
  int horizon = 100;
  double sigma_deg = 20.0;
  double theta_fov_deg = 60.0;
  int top_k_tasks = 10;
  int n_neighbors = 10;
  double switch_penalty = 0.5;
  double power_drain = 0.2;
  double power_charge = 0.1;
  std::vector<double> priority_pool = {1.0, 1.0, 1.0, 5.0};
  std::uint64_t task_seed = 0;
  // The switching penalty also applies on the first step, where no previous
  // assignment exists; set false to make the first step penalty-free.
  bool apply_switch_penalty_at_start = true;

  /// Benefit lookahead window used for candidate-task ranking and
  /// observations (the current step plus two future steps).
  static constexpr int lookahead = 3;

  int n_satellites() const { return geometry.n_satellites(); }

  int observation_length() const {
    const int per_agent = lookahead * top_k_tasks  // benefit window
                          + 1                      // power
                          + top_k_tasks + 1;       // previous action one-hot
    return (n_neighbors + 1) * per_agent;
  }

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("constellation config: " + what);
    };
    if (geometry.n_planes < 1) fail("n_planes must be >= 1");
    if (geometry.sats_per_plane < 1) fail("sats_per_plane must be >= 1");
    if (geometry.altitude_km <= 0.0) fail("altitude_km must be > 0");
    if (geometry.inclination_deg < 0.0 || geometry.inclination_deg > 180.0)
      fail("inclination_deg must be in [0, 180]");
    if (geometry.dt_seconds <= 0.0) fail("dt_seconds must be > 0");
    if (n_tasks < 1) fail("n_tasks must be >= 1");
    if (n_satellites() > n_tasks)
      fail("n_tasks must be >= the satellite count for one-task-per-agent "
           "assignments");
    if (horizon < 1) fail("horizon must be >= 1");
    if (sigma_deg <= 0.0) fail("sigma_deg must be > 0");
    if (theta_fov_deg <= 0.0) fail("theta_fov_deg must be > 0");
    if (top_k_tasks < 1 || top_k_tasks >= n_tasks)
      fail("top_k_tasks must be in [1, n_tasks - 1]");
    if (n_neighbors < 0 || n_neighbors >= n_satellites())
      fail("n_neighbors must be in [0, satellite count - 1]");
    if (switch_penalty < 0.0) fail("switch_penalty must be >= 0");
    if (power_drain < 0.0) fail("power_drain must be >= 0");
    if (power_charge < 0.0) fail("power_charge must be >= 0");
    if (priority_pool.empty()) fail("priority_pool must not be empty");
  }
};

/// One entry of the state-dependent benefit matrix: the baseline value when
/// the agent keeps its previous task, the baseline minus the switching
/// penalty when it moves onto a different in-view task, and zero otherwise
/// (out-of-view task, or agent out of power).
inline double state_dependent_benefit(double baseline_ij,
                                      bool previously_assigned, bool alive,
                                      double switch_penalty) {
  if (!alive) return 0.0;
  if (previously_assigned) return baseline_ij;
  if (baseline_ij > 0.0) return baseline_ij - switch_penalty;
  return 0.0;
}

/// Battery update for one step: observing an in-view task drains the
/// battery, anything else charges it up to the cap. A dead agent's
/// instrument stays off, so its power no longer moves.
inline double updated_power(double power, bool assigned_in_view, bool alive,
                            double drain, double charge) {
  if (!alive) return power;
  if (assigned_in_view) return power - drain;
  return std::min(1.0, power + charge);
}

class ConstellationEnv final : public SapEnv {
 public:
  /// One executed step of an episode, for trace export and metric checks.
  struct StepTrace {
    int k = 0;  // 1-based time step
    std::vector<int> tasks;
    Eigen::VectorXd rewards;
    Eigen::VectorXd powers;
  };

  // Power at or below this threshold counts as empty; absorbs the float
  // residue of repeated drain subtractions reaching exactly zero.
  static constexpr double kPowerEmptyTol = 1e-9;

  explicit ConstellationEnv(ConstellationConfig config)
      : config_(std::move(config)) {
    config_.validate();
    sites_ = random_task_sites(config_.n_tasks, config_.task_seed,
                               config_.priority_pool);
    // Baseline benefits for steps 1 .. horizon + lookahead - 1, so a full
    // lookahead window exists at every step of the episode.
    const int cached_steps = config_.horizon + ConstellationConfig::lookahead - 1;
    baseline_.reserve(cached_steps);
    for (int k = 1; k <= cached_steps; ++k)
      baseline_.push_back(baseline_benefit_matrix(
          config_.geometry, sites_, k, config_.sigma_deg, config_.theta_fov_deg));
    reset(0);
  }

  const ConstellationConfig& config() const { return config_; }
  const std::vector<TaskSite>& sites() const { return sites_; }

  int n_agents() const override { return config_.n_satellites(); }
  int n_tasks() const override { return config_.n_tasks; }
  int horizon() const override { return config_.horizon; }
  int obs_dim() const override { return config_.observation_length(); }
  int n_local_actions() const override { return config_.top_k_tasks + 1; }

  /// Index of the charging action (the last local action).
  int charging_action() const { return config_.top_k_tasks; }

  /// Task placement is fixed by config.task_seed and the geometry is
  /// deterministic, so the reset seed is unused.
  void reset(std::uint64_t /*seed*/) override {
    upcoming_step_ = 1;
    done_ = false;
    power_ = Eigen::VectorXd::Ones(n_agents());
    dead_.assign(n_agents(), false);
    prev_task_.assign(n_agents(), kNoTask);
    return_sum_ = 0.0;
    conflict_agent_steps_ = 0;
    steps_taken_ = 0;
    closed_runs_ = 0;
    run_task_.assign(n_agents(), kNoTask);
    run_length_.assign(n_agents(), 0);
    trace_.clear();
    refresh_step_caches();
  }

  /// Baseline benefit matrix for the current step plus `offset` (0-based,
  /// offset < lookahead).
  const Eigen::MatrixXd& baseline(int offset = 0) const {
    if (offset < 0 || offset >= ConstellationConfig::lookahead)
      throw std::out_of_range("lookahead offset out of range");
    return baseline_[upcoming_step_ - 1 + offset];
  }

  /// State-dependent benefit matrix: the baseline entry for a continued
  /// assignment, baseline minus the switching penalty for a newly taken
  /// in-view task, and zero otherwise (out of view, or agent out of power).
  Eigen::MatrixXd benefits() const override { return state_benefits_; }

  const Eigen::VectorXd& power() const { return power_; }
  bool is_dead(int agent) const { return dead_.at(agent); }
  int previous_task(int agent) const { return prev_task_.at(agent); }

  const std::vector<int>& local_tasks(int agent) const override {
    check_agent(agent);
    return candidate_tasks_[agent];
  }

  const std::vector<int>& neighbors(int agent) const {
    check_agent(agent);
    return neighbors_[agent];
  }

  int resolve_local_action(int agent, int local_action) const override {
    check_agent(agent);
    if (local_action < 0 || local_action > charging_action())
      throw std::out_of_range("local action out of range");
    if (local_action == charging_action()) return charge_task_[agent];
    return candidate_tasks_[agent][local_action];
  }

  int local_action_of(int agent, int global_task) const override {
    check_agent(agent);
    if (global_task < 0 || global_task >= n_tasks())
      throw std::out_of_range("task index out of range");
    const auto& tasks = candidate_tasks_[agent];
    const auto it = std::find(tasks.begin(), tasks.end(), global_task);
    if (it == tasks.end()) return charging_action();
    return static_cast<int>(it - tasks.begin());
  }

  Observation observe(int agent) const override {
    check_agent(agent);
    Observation obs(obs_dim());
    int pos = 0;
    const auto& own_tasks = candidate_tasks_[agent];

    auto emit_agent = [&](int l) {
      for (int offset = 0; offset < ConstellationConfig::lookahead; ++offset) {
        const Eigen::MatrixXd& beta = baseline(offset);
        for (int j : own_tasks) obs[pos++] = beta(l, j);
      }
    };
    emit_agent(agent);
    for (int l : neighbors_[agent]) emit_agent(l);

    obs[pos++] = power_[agent];
    for (int l : neighbors_[agent]) obs[pos++] = power_[l];

    // Previous assignments, re-encoded against each agent's current
    // candidate set so "keep the same task" is recognizable after the
    // ranking shifts. No previous assignment reads as charging.
    auto emit_prev_action = [&](int l) {
      Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(n_local_actions());
      const int action = prev_task_[l] == kNoTask
                             ? charging_action()
                             : local_action_of(l, prev_task_[l]);
      one_hot[action] = 1.0;
      obs.segment(pos, n_local_actions()) = one_hot;
      pos += n_local_actions();
    };
    emit_prev_action(agent);
    for (int l : neighbors_[agent]) emit_prev_action(l);

    return obs;
  }

  StepResult step(const std::vector<int>& task_of_agent,
                  bool allow_duplicates) override {
    if (done_) throw std::logic_error("step() called on a finished episode");
    const int n = n_agents();
    if (static_cast<int>(task_of_agent.size()) != n)
      throw std::invalid_argument("joint action must list one task per agent");

    std::vector<int> chooser_count(n_tasks(), 0);
    for (int t : task_of_agent) {
      if (t < 0 || t >= n_tasks())
        throw std::out_of_range("task index out of range");
      ++chooser_count[t];
    }
    if (!allow_duplicates) {
      for (int t : task_of_agent)
        if (chooser_count[t] > 1)
          throw std::invalid_argument("duplicate task in joint action");
    }

    const Eigen::MatrixXd& beta_now = baseline(0);
    StepResult result;
    result.rewards = Eigen::VectorXd(n);
    int conflicted = 0;
    for (int i = 0; i < n; ++i) {
      const int t = task_of_agent[i];
      result.rewards[i] = state_benefits_(i, t) / chooser_count[t];
      if (chooser_count[t] > 1 && beta_now(i, t) > 0.0) ++conflicted;
    }

    for (int i = 0; i < n; ++i) {
      power_[i] =
          updated_power(power_[i], beta_now(i, task_of_agent[i]) > 0.0,
                        !dead_[i], config_.power_drain, config_.power_charge);
      if (!dead_[i] && power_[i] <= kPowerEmptyTol) dead_[i] = true;
    }

    for (int i = 0; i < n; ++i) {
      if (task_of_agent[i] == run_task_[i]) {
        ++run_length_[i];
      } else {
        if (run_task_[i] != kNoTask) ++closed_runs_;
        run_task_[i] = task_of_agent[i];
        run_length_[i] = 1;
      }
    }

    return_sum_ += result.rewards.sum();
    conflict_agent_steps_ += conflicted;
    ++steps_taken_;
    trace_.push_back({upcoming_step_, task_of_agent, result.rewards, power_});

    prev_task_ = task_of_agent;
    result.terminal = (upcoming_step_ == horizon());
    if (result.terminal)
      done_ = true;
    else
      ++upcoming_step_;
    refresh_step_caches();

    result.next_observations = observe_all();
    return result;
  }

  int time_step() const override { return upcoming_step_; }
  bool done() const override { return done_; }

  EpisodeMetrics episode_metrics() const override {
    EpisodeMetrics metrics;
    metrics.undiscounted_return = return_sum_;
    const int n = n_agents();
    if (steps_taken_ > 0)
      metrics.conflict_rate = static_cast<double>(conflict_agent_steps_) /
                              (static_cast<double>(steps_taken_) * n);
    metrics.power_out_fraction =
        static_cast<double>(std::count(dead_.begin(), dead_.end(), true)) / n;
    long runs = closed_runs_;
    for (int i = 0; i < n; ++i)
      if (run_task_[i] != kNoTask) ++runs;
    metrics.mean_assignment_duration =
        runs > 0 ? static_cast<double>(steps_taken_) * n / runs : 0.0;
    return metrics;
  }

  const std::vector<StepTrace>& trace() const { return trace_; }

 private:
  static constexpr int kNoTask = -1;

  void check_agent(int agent) const {
    if (agent < 0 || agent >= n_agents())
      throw std::out_of_range("agent index out of range");
  }

  /// Recompute everything that depends on the current step: candidate task
  /// ranking, neighbor ranking, charging placeholders, and the
  /// state-dependent benefit matrix.
  void refresh_step_caches() {
    const int n = n_agents();
    const int m = n_tasks();

    // Lookahead score: summed baseline benefit over the next three steps.
    Eigen::MatrixXd score = baseline(0);
    for (int offset = 1; offset < ConstellationConfig::lookahead; ++offset)
      score += baseline(offset);

    candidate_tasks_.assign(n, {});
    charge_task_.assign(n, 0);
    std::vector<int> order(m);
    for (int i = 0; i < n; ++i) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return score(i, a) > score(i, b);
      });
      candidate_tasks_[i].assign(order.begin(),
                                 order.begin() + config_.top_k_tasks);

      // Charging placeholder: the lowest-index task that is out of view and
      // not a candidate, falling back to any non-candidate task.
      const Eigen::MatrixXd& beta_now = baseline(0);
      int fallback = kNoTask;
      int chosen = kNoTask;
      for (int j = 0; j < m && chosen == kNoTask; ++j) {
        if (std::find(candidate_tasks_[i].begin(), candidate_tasks_[i].end(),
                      j) != candidate_tasks_[i].end())
          continue;
        if (fallback == kNoTask) fallback = j;
        if (beta_now(i, j) == 0.0) chosen = j;
      }
      charge_task_[i] = chosen != kNoTask ? chosen : fallback;
    }

    neighbors_.assign(n, {});
    if (config_.n_neighbors > 0) {
      std::vector<int> agents;
      for (int i = 0; i < n; ++i) {
        agents.clear();
        for (int l = 0; l < n; ++l)
          if (l != i) agents.push_back(l);
        auto rank = [&](int l) {
          double best = 0.0;
          bool first = true;
          for (int j : candidate_tasks_[i]) {
            if (first || score(l, j) > best) best = score(l, j);
            first = false;
          }
          return best;
        };
        std::stable_sort(agents.begin(), agents.end(),
                         [&](int a, int b) { return rank(a) > rank(b); });
        neighbors_[i].assign(agents.begin(),
                             agents.begin() + config_.n_neighbors);
      }
    }

    const Eigen::MatrixXd& beta_now = baseline(0);
    const double penalty = (upcoming_step_ > 1 ||
                            config_.apply_switch_penalty_at_start)
                               ? config_.switch_penalty
                               : 0.0;
    state_benefits_ = Eigen::MatrixXd::Zero(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        state_benefits_(i, j) = state_dependent_benefit(
            beta_now(i, j), prev_task_[i] == j, !dead_[i], penalty);
  }

  ConstellationConfig config_;
  std::vector<TaskSite> sites_;
  std::vector<Eigen::MatrixXd> baseline_;  // index k-1 holds step k

  int upcoming_step_ = 1;
  bool done_ = false;
  Eigen::VectorXd power_;
  std::vector<bool> dead_;
  std::vector<int> prev_task_;

  std::vector<std::vector<int>> candidate_tasks_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<int> charge_task_;
  Eigen::MatrixXd state_benefits_;

  double return_sum_ = 0.0;
  long conflict_agent_steps_ = 0;
  long steps_taken_ = 0;
  long closed_runs_ = 0;
  std::vector<int> run_task_;
  std::vector<int> run_length_;
  std::vector<StepTrace> trace_;
};

}  // namespace seda

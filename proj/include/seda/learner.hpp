#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seda/assignment.hpp"
#include "seda/env.hpp"
#include "seda/mlp.hpp"
#include "seda/replay.hpp"

namespace seda {

/// Hyperparameters for the assignment-constrained DQN learner and its
/// independent-learner sibling. Batch size and buffer capacity are counted in
/// transitions; front ends that configure them in episodes convert using the
/// environment horizon before filling this struct.
struct RedaConfig {
  double gamma = 0.99;
  double learning_rate = 5e-4;
  int batch_size = 50;
  std::size_t buffer_capacity = 10000;
  double tau = 0.01;
  int train_every = 1;
  /// Optional periodic hard copy of the online parameters into the target
  /// parameters, counted in train steps; 0 disables it.
  int hard_update_every = 0;
  std::vector<int> hidden_sizes = {64, 64};
  /// The exploration perturbation is normal with spread
  /// noise_scale * mean|Q_local| * epsilon, interpreted as a standard
  /// deviation by default or as a variance when noise_as_std is false.
  double noise_scale = 2.0;
  bool noise_as_std = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (gamma < 0.0 || gamma >= 1.0)
      throw std::invalid_argument("gamma must lie in [0, 1)");
    if (learning_rate <= 0.0)
      throw std::invalid_argument("learning_rate must be positive");
    if (batch_size <= 0)
      throw std::invalid_argument("batch_size must be positive");
    if (buffer_capacity < static_cast<std::size_t>(batch_size))
      throw std::invalid_argument("buffer_capacity must be >= batch_size");
    if (tau <= 0.0 || tau > 1.0)
      throw std::invalid_argument("tau must lie in (0, 1]");
    if (train_every <= 0)
      throw std::invalid_argument("train_every must be positive");
    if (hard_update_every < 0)
      throw std::invalid_argument("hard_update_every must be >= 0");
    if (noise_scale < 0.0)
      throw std::invalid_argument("noise_scale must be >= 0");
    for (int h : hidden_sizes)
      if (h <= 0) throw std::invalid_argument("hidden sizes must be positive");
  }
};

/// Expands a per-agent local action-value matrix (n x A, columns ordered as
/// the agents' candidate tasks followed by an optional charging action) into a
/// global n x n_tasks matrix. The charging value fills every non-candidate
/// column, so from the expanded matrix's point of view "pick a task I do not
/// rank" and "charge" are the same choice. Agents whose action count equals
/// their candidate count have no charging action and must cover every task.
inline Eigen::MatrixXd expand_q_global(
    const Eigen::MatrixXd& q_local,
    const std::vector<std::vector<int>>& local_tasks, int n_tasks) {
  const int n = static_cast<int>(q_local.rows());
  const int n_actions = static_cast<int>(q_local.cols());
  if (static_cast<int>(local_tasks.size()) != n)
    throw std::invalid_argument("one candidate list required per agent");
  Eigen::MatrixXd q_global(n, n_tasks);
  for (int i = 0; i < n; ++i) {
    const auto& tasks = local_tasks[i];
    const int n_candidates = static_cast<int>(tasks.size());
    if (n_candidates == n_actions - 1) {
      q_global.row(i).setConstant(q_local(i, n_actions - 1));
    } else if (n_candidates == n_actions) {
      if (n_candidates != n_tasks)
        throw std::invalid_argument(
            "without a charging action the candidate list must cover all "
            "tasks");
    } else {
      throw std::invalid_argument(
          "candidate list size must equal the action count or be one less");
    }
    for (int a = 0; a < n_candidates; ++a) {
      const int task = tasks[a];
      if (task < 0 || task >= n_tasks)
        throw std::invalid_argument("candidate task index out of range");
      q_global(i, task) = q_local(i, a);
    }
  }
  return q_global;
}

/// Maps a global task back to an agent's local action: its rank in the
/// candidate list when present, otherwise the charging action (the expansion
/// above gives every non-candidate task the charging value, so this is the
/// action whose value the learner attaches to that choice).
inline int local_action_for_task(const std::vector<int>& candidate_tasks,
                                 int task, int n_local_actions) {
  const int n_candidates = static_cast<int>(candidate_tasks.size());
  for (int a = 0; a < n_candidates; ++a)
    if (candidate_tasks[a] == task) return a;
  if (n_local_actions == n_candidates + 1) return n_candidates;
  throw std::invalid_argument("task is not reachable by any local action");
}

/// Mean absolute action value over the local matrix; scales the exploration
/// perturbation.
inline double mean_absolute_q(const Eigen::MatrixXd& q_local) {
  if (q_local.size() == 0)
    throw std::invalid_argument("empty action-value matrix");
  return q_local.cwiseAbs().mean();
}

/// Spread knobs for the exploration perturbation.
struct NoiseConfig {
  double scale = 2.0;
  bool as_std = true;
};

/// Exploration-aware joint action selection. With probability epsilon the
/// joint action greedily maximizes the current benefit matrix (the guide);
/// otherwise the local action values are expanded to the global matrix, an
/// i.i.d. normal perturbation with standard deviation
/// scale * mean|Q_local| * epsilon is added, and the assignment maximizing
/// the perturbed matrix is returned. At epsilon = 0 the path is fully
/// deterministic and consumes no randomness.
inline JointAssignment select_joint_action(
    const Eigen::MatrixXd& q_local,
    const std::vector<std::vector<int>>& local_tasks, int n_tasks,
    double epsilon, const Eigen::MatrixXd& benefits_now, std::mt19937_64& rng,
    const NoiseConfig& noise = {}) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (epsilon == 0.0)
    return solve_exact(expand_q_global(q_local, local_tasks, n_tasks));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) return solve_exact(benefits_now);
  Eigen::MatrixXd q_global = expand_q_global(q_local, local_tasks, n_tasks);
  const double spread = noise.scale * mean_absolute_q(q_local) * epsilon;
  const double std_dev = noise.as_std ? spread : std::sqrt(spread);
  if (std_dev > 0.0) {
    std::normal_distribution<double> normal(0.0, std_dev);
    for (int i = 0; i < q_global.rows(); ++i)
      for (int j = 0; j < q_global.cols(); ++j) q_global(i, j) += normal(rng);
  }
  return solve_exact(q_global);
}

/// Independent per-agent action selection: each agent epsilon-greedily
/// argmaxes its own row of the local matrix, ties to the lowest action index.
/// Conflicting task choices are allowed by design. At epsilon = 0 no
/// randomness is consumed.
inline std::vector<int> iql_select_local(const Eigen::MatrixXd& q_local,
                                         double epsilon,
                                         std::mt19937_64& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  const int n = static_cast<int>(q_local.rows());
  const int n_actions = static_cast<int>(q_local.cols());
  std::vector<int> actions(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_action(0, n_actions - 1);
  for (int i = 0; i < n; ++i) {
    if (epsilon > 0.0 && unit(rng) < epsilon) {
      actions[i] = any_action(rng);
    } else {
      Eigen::Index best = 0;
      q_local.row(i).maxCoeff(&best);
      actions[i] = static_cast<int>(best);
    }
  }
  return actions;
}

/// Inputs/actions/targets for one gradient step, flattened to one column per
/// (transition, agent) pair; the loss normalizer is 1/batch so the loss sums
/// over agents and averages over transitions.
struct TrainingBatch {
  Eigen::MatrixXd inputs;
  std::vector<int> actions;
  Eigen::VectorXd targets;
  double inv_norm = 1.0;
};

namespace detail {

inline Eigen::MatrixXd stack_columns(
    const std::vector<const JointTransition*>& batch, bool next) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const auto& first = next ? batch.front()->next_obs : batch.front()->obs;
  const Eigen::Index obs_dim = first.rows();
  Eigen::Index total = 0;
  for (const auto* t : batch) total += (next ? t->next_obs : t->obs).cols();
  Eigen::MatrixXd stacked(obs_dim, total);
  Eigen::Index col = 0;
  for (const auto* t : batch) {
    const auto& block = next ? t->next_obs : t->obs;
    stacked.middleCols(col, block.cols()) = block;
    col += block.cols();
  }
  return stacked;
}

}  // namespace detail

/// Builds the regression batch for the assignment-constrained learner. For
/// non-terminal transitions the next-step action values come from the online
/// parameters, the next joint action is the assignment maximizing their
/// global expansion, and the bootstrap value is the target-parameter estimate
/// of that chosen action. Terminal transitions bootstrap nothing.
inline TrainingBatch reda_training_batch(
    const std::vector<const JointTransition*>& batch, const MlpParams& online,
    const MlpParams& target, double gamma, int n_tasks) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  TrainingBatch out;
  out.inputs = detail::stack_columns(batch, false);
  const Eigen::MatrixXd next_inputs = detail::stack_columns(batch, true);
  const Eigen::MatrixXd q_next_online = forward_batch(online, next_inputs);
  const Eigen::MatrixXd q_next_target = forward_batch(target, next_inputs);
  const int n_actions = online.output_size();
  out.actions.reserve(static_cast<std::size_t>(out.inputs.cols()));
  out.targets.resize(out.inputs.cols());
  Eigen::Index col = 0;
  for (const auto* t : batch) {
    const int n = t->n_agents();
    std::vector<int> next_local(n, 0);
    if (!t->terminal && gamma != 0.0) {
      const Eigen::MatrixXd q_local =
          q_next_online.middleCols(col, n).transpose();
      const JointAssignment x_next = solve_exact(
          expand_q_global(q_local, t->next_local_tasks, n_tasks));
      for (int i = 0; i < n; ++i)
        next_local[i] = local_action_for_task(t->next_local_tasks[i],
                                              x_next.task_of_agent[i],
                                              n_actions);
    }
    for (int i = 0; i < n; ++i) {
      out.actions.push_back(t->actions[i]);
      double y = t->rewards[i];
      if (!t->terminal && gamma != 0.0)
        y += gamma * q_next_target(next_local[i], col + i);
      out.targets[col + i] = y;
    }
    col += n;
  }
  out.inv_norm = 1.0 / static_cast<double>(batch.size());
  return out;
}

/// Builds the regression batch for the independent learner: the bootstrap is
/// each agent's own maximum target-parameter value over its local actions.
inline TrainingBatch iql_training_batch(
    const std::vector<const JointTransition*>& batch, const MlpParams& target,
    double gamma) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  TrainingBatch out;
  out.inputs = detail::stack_columns(batch, false);
  const Eigen::MatrixXd next_inputs = detail::stack_columns(batch, true);
  const Eigen::MatrixXd q_next_target = forward_batch(target, next_inputs);
  out.actions.reserve(static_cast<std::size_t>(out.inputs.cols()));
  out.targets.resize(out.inputs.cols());
  Eigen::Index col = 0;
  for (const auto* t : batch) {
    const int n = t->n_agents();
    for (int i = 0; i < n; ++i) {
      out.actions.push_back(t->actions[i]);
      double y = t->rewards[i];
      if (!t->terminal && gamma != 0.0)
        y += gamma * q_next_target.col(col + i).maxCoeff();
      out.targets[col + i] = y;
    }
    col += n;
  }
  out.inv_norm = 1.0 / static_cast<double>(batch.size());
  return out;
}

enum class Algorithm { reda, iql };

inline std::string algorithm_name(Algorithm a) {
  return a == Algorithm::reda ? "reda" : "iql";
}

inline Algorithm algorithm_from_name(const std::string& name) {
  if (name == "reda") return Algorithm::reda;
  if (name == "iql") return Algorithm::iql;
  throw std::invalid_argument("unknown algorithm: " + name);
}

/// Shared-parameter DQN learner over a sequential assignment environment.
/// One parameter set serves all agents; per-agent differences enter only
/// through observations. Supports the assignment-constrained variant (joint
/// actions always form valid assignments, both when acting and inside
/// targets) and the independent variant (per-agent argmax, duplicate task
/// choices allowed). Both share the replay buffer, the target parameters,
/// and the greedy-guide branch of the exploration schedule.
class DqnLearner {
 public:
  DqnLearner(Algorithm algorithm, int obs_dim, int n_local_actions,
             const RedaConfig& config)
      : algorithm_(algorithm),
        config_(config),
        obs_dim_(obs_dim),
        n_local_actions_(n_local_actions),
        buffer_(config.buffer_capacity),
        rng_(config.seed) {
    config_.validate();
    if (obs_dim <= 0 || n_local_actions <= 0)
      throw std::invalid_argument("observation and action sizes must be positive");
    std::vector<int> sizes;
    sizes.push_back(obs_dim);
    sizes.insert(sizes.end(), config_.hidden_sizes.begin(),
                 config_.hidden_sizes.end());
    sizes.push_back(n_local_actions);
    online_ = MlpParams::uniform_init(sizes, rng_);
    target_ = online_;
    adam_.learning_rate = config_.learning_rate;
  }

  Algorithm algorithm() const { return algorithm_; }
  const RedaConfig& config() const { return config_; }
  int obs_dim() const { return obs_dim_; }
  int n_local_actions() const { return n_local_actions_; }
  const MlpParams& online() const { return online_; }
  const MlpParams& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long train_steps() const { return train_steps_; }
  std::mt19937_64& rng() { return rng_; }

  struct ActionChoice {
    std::vector<int> tasks;
    std::vector<int> local_actions;
  };

  /// Chooses the joint action for the environment's current state. The
  /// assignment-constrained variant always yields a valid assignment; the
  /// independent variant may yield duplicates outside its guide branch.
  ActionChoice select_actions(const SapEnv& env, double epsilon) {
    const Eigen::MatrixXd q_local =
        forward_batch(online_, joint_observation(env)).transpose();
    const auto local_tasks = collect_local_tasks(env);
    ActionChoice choice;
    if (algorithm_ == Algorithm::reda) {
      const NoiseConfig noise{config_.noise_scale, config_.noise_as_std};
      const JointAssignment x =
          select_joint_action(q_local, local_tasks, env.n_tasks(), epsilon,
                              env.benefits(), rng_, noise);
      choice.tasks = x.task_of_agent;
    } else {
      bool guided = false;
      if (epsilon > 0.0) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        if (unit(rng_) < epsilon) {
          choice.tasks = solve_exact(env.benefits()).task_of_agent;
          guided = true;
        }
      }
      if (!guided) {
        const std::vector<int> local =
            iql_select_local(q_local, epsilon, rng_);
        choice.tasks.resize(local.size());
        for (int i = 0; i < static_cast<int>(local.size()); ++i)
          choice.tasks[i] = env.resolve_local_action(i, local[i]);
      }
    }
    choice.local_actions.resize(choice.tasks.size());
    for (int i = 0; i < static_cast<int>(choice.tasks.size()); ++i)
      choice.local_actions[i] = local_action_for_task(
          local_tasks[i], choice.tasks[i], n_local_actions_);
    return choice;
  }

  void record(JointTransition transition) {
    buffer_.push(std::move(transition));
  }

  /// Runs one gradient step when due: the buffer must hold at least one
  /// batch and the environment step count must land on the training cadence.
  /// Returns the loss when a step ran.
  std::optional<double> train_if_due(long env_step, int n_tasks) {
    if (buffer_.size() < static_cast<std::size_t>(config_.batch_size))
      return std::nullopt;
    if (env_step % config_.train_every != 0) return std::nullopt;
    return train_once(n_tasks);
  }

  double train_once(int n_tasks) {
    const auto batch =
        buffer_.sample(static_cast<std::size_t>(config_.batch_size), rng_);
    const TrainingBatch regression =
        algorithm_ == Algorithm::reda
            ? reda_training_batch(batch, online_, target_, config_.gamma,
                                  n_tasks)
            : iql_training_batch(batch, target_, config_.gamma);
    MlpGradient gradient;
    const double loss = mlp_loss_and_gradient(
        online_, regression.inputs, regression.actions, regression.targets,
        regression.inv_norm, &gradient);
    adam_step(online_, adam_, gradient);
    soft_update(online_, target_, config_.tau);
    ++train_steps_;
    if (config_.hard_update_every > 0 &&
        train_steps_ % config_.hard_update_every == 0)
      target_ = online_;
    return loss;
  }

  /// Serializes everything except the replay buffer; a reloaded learner
  /// continues greedy evaluation bit-exactly and training identically once
  /// the buffer refills.
  void save(std::ostream& out) const {
    detail::write_i64(out, kMagic);
    detail::write_i64(out, static_cast<std::int64_t>(algorithm_));
    detail::write_i64(out, obs_dim_);
    detail::write_i64(out, n_local_actions_);
    detail::write_f64(out, config_.gamma);
    detail::write_f64(out, config_.learning_rate);
    detail::write_i64(out, config_.batch_size);
    detail::write_i64(out, static_cast<std::int64_t>(config_.buffer_capacity));
    detail::write_f64(out, config_.tau);
    detail::write_i64(out, config_.train_every);
    detail::write_i64(out, config_.hard_update_every);
    detail::write_i64(out, static_cast<std::int64_t>(config_.hidden_sizes.size()));
    for (int h : config_.hidden_sizes) detail::write_i64(out, h);
    detail::write_f64(out, config_.noise_scale);
    detail::write_i64(out, config_.noise_as_std ? 1 : 0);
    detail::write_i64(out, static_cast<std::int64_t>(config_.seed));
    detail::write_i64(out, train_steps_);
    std::ostringstream rng_text;
    rng_text << rng_;
    const std::string rng_state = rng_text.str();
    detail::write_i64(out, static_cast<std::int64_t>(rng_state.size()));
    out.write(rng_state.data(),
              static_cast<std::streamsize>(rng_state.size()));
    write_mlp(out, online_);
    write_mlp(out, target_);
    write_adam(out, adam_);
    if (!out) throw std::runtime_error("failed to write learner state");
  }

  static DqnLearner load(std::istream& in) {
    if (detail::read_i64(in) != kMagic)
      throw std::runtime_error("not a learner state blob");
    const Algorithm algorithm = static_cast<Algorithm>(detail::read_i64(in));
    const int obs_dim = static_cast<int>(detail::read_i64(in));
    const int n_local_actions = static_cast<int>(detail::read_i64(in));
    RedaConfig config;
    config.gamma = detail::read_f64(in);
    config.learning_rate = detail::read_f64(in);
    config.batch_size = static_cast<int>(detail::read_i64(in));
    config.buffer_capacity = static_cast<std::size_t>(detail::read_i64(in));
    config.tau = detail::read_f64(in);
    config.train_every = static_cast<int>(detail::read_i64(in));
    config.hard_update_every = static_cast<int>(detail::read_i64(in));
    const std::int64_t n_hidden = detail::read_i64(in);
    config.hidden_sizes.clear();
    for (std::int64_t i = 0; i < n_hidden; ++i)
      config.hidden_sizes.push_back(static_cast<int>(detail::read_i64(in)));
    config.noise_scale = detail::read_f64(in);
    config.noise_as_std = detail::read_i64(in) != 0;
    config.seed = static_cast<std::uint64_t>(detail::read_i64(in));
    DqnLearner learner(algorithm, obs_dim, n_local_actions, config);
    learner.train_steps_ = detail::read_i64(in);
    const std::int64_t rng_len = detail::read_i64(in);
    std::string rng_state(static_cast<std::size_t>(rng_len), '\0');
    in.read(rng_state.data(), rng_len);
    if (!in) throw std::runtime_error("truncated learner state");
    std::istringstream rng_text(rng_state);
    rng_text >> learner.rng_;
    learner.online_ = read_mlp(in);
    learner.target_ = read_mlp(in);
    learner.adam_ = read_adam(in);
    return learner;
  }

 private:
  static constexpr std::int64_t kMagic = 0x5345444c524e5231;  // "SEDLRNR1"

  static std::vector<std::vector<int>> collect_local_tasks(const SapEnv& env) {
    std::vector<std::vector<int>> tasks(env.n_agents());
    for (int i = 0; i < env.n_agents(); ++i) tasks[i] = env.local_tasks(i);
    return tasks;
  }

  Algorithm algorithm_;
  RedaConfig config_;
  int obs_dim_;
  int n_local_actions_;
  MlpParams online_;
  MlpParams target_;
  AdamState adam_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  long train_steps_ = 0;
};

/// Everything produced by one training-time environment step.
struct StepOutcome {
  std::vector<int> tasks;
  StepResult result;
  std::optional<double> loss;
};

/// Advances the environment by one step under the learner's exploration
/// policy, records the transition, and trains when due. `env_step` is the
/// 1-based count of environment steps after this one completes. The
/// independent variant steps the environment with duplicate tasks allowed;
/// the assignment-constrained variant never produces duplicates.
inline StepOutcome training_step(SapEnv& env, DqnLearner& learner,
                                 double epsilon, long env_step) {
  if (env.done())
    throw std::logic_error("environment must be reset before training_step");
  const int n = env.n_agents();
  JointTransition transition;
  transition.obs = joint_observation(env);
  transition.local_tasks.resize(n);
  for (int i = 0; i < n; ++i) transition.local_tasks[i] = env.local_tasks(i);

  StepOutcome outcome;
  DqnLearner::ActionChoice choice = learner.select_actions(env, epsilon);
  const bool allow_duplicates = learner.algorithm() == Algorithm::iql;
  outcome.result = env.step(choice.tasks, allow_duplicates);
  outcome.tasks = std::move(choice.tasks);

  transition.actions = std::move(choice.local_actions);
  transition.rewards = outcome.result.rewards;
  transition.terminal = outcome.result.terminal;
  transition.next_obs.resize(transition.obs.rows(), n);
  for (int i = 0; i < n; ++i)
    transition.next_obs.col(i) = outcome.result.next_observations[i];
  transition.next_local_tasks.resize(n);
  for (int i = 0; i < n; ++i)
    transition.next_local_tasks[i] = env.local_tasks(i);
  learner.record(std::move(transition));

  outcome.loss = learner.train_if_due(env_step, env.n_tasks());
  return outcome;
}

}  // namespace seda

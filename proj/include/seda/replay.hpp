#pragma once

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <vector>

namespace seda {

/// One joint environment transition. Observations are stacked per agent
/// (obs_dim x n). The per-agent candidate task lists of both time steps ride
/// along so assignment inputs can be rebuilt during target computation.
struct JointTransition {
  Eigen::MatrixXd obs;
  std::vector<int> actions;  // local action per agent
  Eigen::VectorXd rewards;
  Eigen::MatrixXd next_obs;
  bool terminal = false;
  std::vector<std::vector<int>> local_tasks;
  std::vector<std::vector<int>> next_local_tasks;

  int n_agents() const { return static_cast<int>(actions.size()); }
};

/// Bounded FIFO of joint transitions with uniform mini-batch sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0)
      throw std::invalid_argument("replay capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return storage_.size(); }

  void push(JointTransition transition) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(transition));
    } else {
      storage_[next_slot_] = std::move(transition);
      next_slot_ = (next_slot_ + 1) % capacity_;
    }
  }

  /// Oldest-first view position: index 0 is the transition that will be
  /// evicted next.
  const JointTransition& oldest(std::size_t offset = 0) const {
    if (offset >= storage_.size())
      throw std::out_of_range("replay offset out of range");
    if (storage_.size() < capacity_) return storage_[offset];
    return storage_[(next_slot_ + offset) % capacity_];
  }

  /// Uniform sample of `count` distinct stored transitions.
  std::vector<const JointTransition*> sample(std::size_t count,
                                             std::mt19937_64& rng) const {
    if (count > storage_.size())
      throw std::invalid_argument("not enough transitions to sample");
    // Selection sampling over storage slots; slot order does not matter for
    // uniformity.
    std::vector<const JointTransition*> batch;
    batch.reserve(count);
    std::size_t remaining_pool = storage_.size();
    std::size_t still_needed = count;
    for (std::size_t slot = 0; slot < storage_.size() && still_needed > 0;
         ++slot) {
      std::uniform_int_distribution<std::size_t> pick(0, remaining_pool - 1);
      if (pick(rng) < still_needed) {
        batch.push_back(&storage_[slot]);
        --still_needed;
      }
      --remaining_pool;
    }
    return batch;
  }

 private:
  std::size_t capacity_;
  std::size_t next_slot_ = 0;
  std::vector<JointTransition> storage_;
};

}  // namespace seda

#pragma once

#include <algorithm>
#include <stdexcept>

namespace seda {

/// Linear exploration-rate schedule over environment steps. The rate starts at
/// `epsilon_start` for step 0, decays linearly, reaches `epsilon_end` exactly
/// at `decay_steps`, and stays there afterwards.
struct ExplorationSchedule {
  double epsilon_start = 1.0;
  double epsilon_end = 0.0;
  long decay_steps = 1;

  void validate() const {
    if (decay_steps <= 0)
      throw std::invalid_argument("decay_steps must be positive");
    if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 ||
        epsilon_end > 1.0)
      throw std::invalid_argument("exploration rates must lie in [0, 1]");
  }

  double value(long step) const {
    if (step <= 0) return epsilon_start;
    if (step >= decay_steps) return epsilon_end;
    const double fraction =
        static_cast<double>(step) / static_cast<double>(decay_steps);
    return epsilon_start + (epsilon_end - epsilon_start) * fraction;
  }
};

}  // namespace seda

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Solvers for the single-shot assignment problem: maximize the summed benefit
// of matching n agents to m tasks (n <= m), each agent taking exactly one task
// and each task taken by at most one agent.
//
// All solvers break ties by returning the lexicographically smallest
// task_of_agent vector among the optimal assignments, so results are
// deterministic and directly comparable across solvers.

namespace seda {

/// One task index per agent (0-based). Valid iff all indices are in range and
/// no task appears twice.
struct JointAssignment {
  std::vector<int> task_of_agent;

  int n_agents() const { return static_cast<int>(task_of_agent.size()); }

  bool operator==(const JointAssignment& other) const = default;
};

struct AuctionConfig {
  double epsilon_bid = 0.01;  // minimum bid increment, benefit units
  int max_rounds = 100000;
};

inline bool is_valid_assignment(const JointAssignment& x, int n_tasks) {
  std::vector<char> seen(n_tasks, 0);
  for (int t : x.task_of_agent) {
    if (t < 0 || t >= n_tasks) return false;
    if (seen[t]) return false;
    seen[t] = 1;
  }
  return true;
}

inline void validate_benefits(const Eigen::MatrixXd& benefits) {
  if (benefits.rows() < 1 || benefits.cols() < 1)
    throw std::invalid_argument("benefit matrix must be non-empty");
  if (benefits.rows() > benefits.cols())
    throw std::invalid_argument(
        "benefit matrix needs n_agents <= n_tasks, got " +
        std::to_string(benefits.rows()) + "x" + std::to_string(benefits.cols()));
  if (!benefits.allFinite())
    throw std::invalid_argument("benefit matrix contains non-finite entries");
}

inline double objective_value(const Eigen::MatrixXd& benefits,
                              const JointAssignment& x) {
  if (x.n_agents() != benefits.rows())
    throw std::invalid_argument("assignment length does not match agent count");
  double total = 0.0;
  for (int i = 0; i < x.n_agents(); ++i) {
    const int t = x.task_of_agent[i];
    if (t < 0 || t >= benefits.cols())
      throw std::out_of_range("task index out of range in assignment");
    total += benefits(i, t);
  }
  return total;
}

namespace detail {

struct JvSolution {
  std::vector<int> col_of_row;  // matched column per row
  std::vector<double> u, v;     // dual potentials, cost(i,j) >= u[i] + v[j]
};

// Shortest-augmenting-path solver for the square min-cost assignment problem
// (Jonker-Volgenant / Hungarian with potentials), O(n^3).
inline JvSolution jv_min_square(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);  // 1-based, 0 = unmatched
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  JvSolution out;
  out.col_of_row.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (match[j] != 0) out.col_of_row[match[j] - 1] = j - 1;
  out.u.assign(n, 0.0);
  out.v.assign(n, 0.0);
  for (int i = 0; i < n; ++i) out.u[i] = u[i + 1];
  for (int j = 0; j < n; ++j) out.v[j] = v[j + 1];
  return out;
}

// Maximum total benefit achievable by matching the given rows injectively into
// the given columns. Rows are padded with zero-benefit dummies to square.
inline double best_completion(const Eigen::MatrixXd& benefits,
                              const std::vector<int>& rows,
                              const std::vector<int>& cols) {
  if (rows.empty()) return 0.0;
  const int side = static_cast<int>(cols.size());
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(side, side);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < side; ++c) cost(static_cast<int>(r), c) = -benefits(rows[r], cols[c]);
  const JvSolution sol = jv_min_square(cost);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r)
    total += benefits(rows[r], cols[sol.col_of_row[r]]);
  return total;
}

}  // namespace detail

/// Exact solver for the assignment problem, maximization convention.
/// Rectangular inputs (n < m) are padded internally to square. Among all
/// optimal assignments, returns the lexicographically smallest task_of_agent.
inline JointAssignment solve_exact(const Eigen::MatrixXd& benefits) {
  validate_benefits(benefits);
  const int n = static_cast<int>(benefits.rows());
  const int m = static_cast<int>(benefits.cols());

  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(m, m);
  cost.topRows(n) = -benefits;
  const detail::JvSolution sol = detail::jv_min_square(cost);

  JointAssignment best;
  best.task_of_agent.assign(n, -1);
  for (int i = 0; i < n; ++i) best.task_of_agent[i] = sol.col_of_row[i];
  const double optimum = objective_value(benefits, best);

  const double scale = std::max(1.0, benefits.cwiseAbs().maxCoeff());
  const double rc_tol = 1e-7 * scale;
  const double obj_tol = 1e-9 * std::max(1.0, std::abs(optimum));

  // Complementary slackness: every optimal assignment uses only arcs with zero
  // reduced cost. If each agent has a unique zero arc, the optimum is unique.
  bool unique = true;
  std::vector<char> col_hit(m, 0);
  for (int i = 0; i < n && unique; ++i) {
    int zero_col = -1;
    for (int j = 0; j < m; ++j) {
      const double rc = cost(i, j) - sol.u[i] - sol.v[j];
      if (rc <= rc_tol) {
        if (zero_col >= 0) {
          unique = false;
          break;
        }
        zero_col = j;
      }
    }
    if (zero_col < 0 || col_hit[zero_col]) unique = false;
    else col_hit[zero_col] = 1;
  }
  if (unique) return best;

  // Ties exist: rebuild the assignment agent by agent, always taking the
  // smallest task that still admits an optimal completion.
  std::vector<char> taken(m, 0);
  double prefix = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> tail_rows;
    for (int r = i + 1; r < n; ++r) tail_rows.push_back(r);
    int chosen = -1;
    double fallback_value = -std::numeric_limits<double>::infinity();
    int fallback = -1;
    for (int t = 0; t < m; ++t) {
      if (taken[t]) continue;
      const double rc = cost(i, t) - sol.u[i] - sol.v[t];
      if (rc > rc_tol) continue;
      std::vector<int> tail_cols;
      for (int c = 0; c < m; ++c)
        if (!taken[c] && c != t) tail_cols.push_back(c);
      const double rest = detail::best_completion(benefits, tail_rows, tail_cols);
      const double total = prefix + benefits(i, t) + rest;
      if (total >= optimum - obj_tol) {
        chosen = t;
        break;
      }
      if (total > fallback_value) {
        fallback_value = total;
        fallback = t;
      }
    }
    if (chosen < 0) chosen = fallback;  // numerical slack exhausted; stay deterministic
    best.task_of_agent[i] = chosen;
    taken[chosen] = 1;
    prefix += benefits(i, chosen);
  }
  return best;
}

/// Test oracle: exhaustive search over all injective agent->task maps.
/// Enumeration order makes the result lexicographically smallest among optima.
inline JointAssignment solve_brute_force(const Eigen::MatrixXd& benefits) {
  validate_benefits(benefits);
  const int n = static_cast<int>(benefits.rows());
  const int m = static_cast<int>(benefits.cols());
  if (m > 8)
    throw std::invalid_argument("solve_brute_force limited to n <= m <= 8");

  JointAssignment best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<int> current(n, -1);
  std::vector<char> taken(m, 0);
  auto recurse = [&](auto&& self, int agent, double value) -> void {
    if (agent == n) {
      if (value > best_value) {
        best_value = value;
        best.task_of_agent = current;
      }
      return;
    }
    for (int t = 0; t < m; ++t) {
      if (taken[t]) continue;
      taken[t] = 1;
      current[agent] = t;
      self(self, agent + 1, value + benefits(agent, t));
      taken[t] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

/// Forward auction (Bertsekas) with a fixed bid increment. Each round the
/// still-unassigned agents bid on their most valuable task at current prices;
/// the highest bidder per task wins and unseats any previous owner. The final
/// objective is within n * epsilon_bid of the exact optimum.
inline JointAssignment solve_auction(const Eigen::MatrixXd& benefits,
                                     const AuctionConfig& cfg) {
  validate_benefits(benefits);
  if (!(cfg.epsilon_bid > 0.0))
    throw std::invalid_argument("epsilon_bid must be positive");
  if (cfg.max_rounds < 1)
    throw std::invalid_argument("max_rounds must be positive");
  const int n = static_cast<int>(benefits.rows());
  const int m = static_cast<int>(benefits.cols());

  std::vector<double> price(m, 0.0);
  std::vector<int> owner(m, -1);
  std::vector<int> task_of(n, -1);
  std::vector<double> bid(m);
  std::vector<int> bidder(m);

  int unassigned = n;
  for (int round = 0; unassigned > 0; ++round) {
    if (round >= cfg.max_rounds)
      throw std::runtime_error(
          "auction did not converge within max_rounds; epsilon_bid is too "
          "small for the benefit scale");
    std::fill(bid.begin(), bid.end(), -std::numeric_limits<double>::infinity());
    std::fill(bidder.begin(), bidder.end(), -1);
    for (int i = 0; i < n; ++i) {
      if (task_of[i] >= 0) continue;
      int best_t = 0;
      double best_v = -std::numeric_limits<double>::infinity();
      double second_v = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        const double v = benefits(i, j) - price[j];
        if (v > best_v) {
          second_v = best_v;
          best_v = v;
          best_t = j;
        } else if (v > second_v) {
          second_v = v;
        }
      }
      if (m == 1) second_v = best_v;
      const double offer = price[best_t] + (best_v - second_v) + cfg.epsilon_bid;
      if (offer > bid[best_t]) {
        bid[best_t] = offer;
        bidder[best_t] = i;
      }
    }
    for (int j = 0; j < m; ++j) {
      if (bidder[j] < 0) continue;
      if (owner[j] >= 0) {
        task_of[owner[j]] = -1;
        ++unassigned;
      }
      owner[j] = bidder[j];
      task_of[bidder[j]] = j;
      price[j] = bid[j];
      --unassigned;
    }
  }
  return JointAssignment{task_of};
}

}  // namespace seda

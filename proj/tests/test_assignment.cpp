#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "seda/assignment.hpp"

using seda::AuctionConfig;
using seda::JointAssignment;
using seda::is_valid_assignment;
using seda::objective_value;
using seda::solve_auction;
using seda::solve_brute_force;
using seda::solve_exact;

namespace {

Eigen::MatrixXd benefit_s1() {
  Eigen::MatrixXd b(3, 3);
  b << 2, 3, 0, 0, 2, 3, 3, 0, 2;
  return b;
}

Eigen::MatrixXd benefit_s2() {
  Eigen::MatrixXd b(3, 3);
  b << 0, 3, 0, 0, 0, 0.1, 0.1, 0, 0;
  return b;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int max_n, int max_m) {
  std::uniform_int_distribution<int> nd(1, max_n);
  std::uniform_real_distribution<double> vd(-10.0, 10.0);
  const int n = nd(rng);
  std::uniform_int_distribution<int> md(n, max_m);
  const int m = md(rng);
  Eigen::MatrixXd b(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) b(i, j) = vd(rng);
  return b;
}

}  // namespace

TEST_CASE("solve_exact matches hand-checked instances") {
  SECTION("dictator state-1 matrix") {
    const JointAssignment x = solve_exact(benefit_s1());
    CHECK(x.task_of_agent == std::vector<int>{1, 2, 0});
    CHECK(objective_value(benefit_s1(), x) == Catch::Approx(9.0));
  }
  SECTION("identity") {
    const JointAssignment x = solve_exact(Eigen::MatrixXd::Identity(3, 3));
    CHECK(x.task_of_agent == std::vector<int>{0, 1, 2});
    CHECK(objective_value(Eigen::MatrixXd::Identity(3, 3), x) == 3.0);
  }
  SECTION("all-zeros ties resolve lexicographically") {
    const JointAssignment x = solve_exact(Eigen::MatrixXd::Zero(3, 3));
    CHECK(x.task_of_agent == std::vector<int>{0, 1, 2});
  }
}

TEST_CASE("solve_exact input validation") {
  CHECK_THROWS_AS(solve_exact(Eigen::MatrixXd::Zero(3, 2)), std::invalid_argument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_exact(bad), std::invalid_argument);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_exact(bad), std::invalid_argument);
}

TEST_CASE("solve_brute_force matches hand-checked instances") {
  SECTION("dictator state-2 matrix") {
    const JointAssignment x = solve_brute_force(benefit_s2());
    CHECK(objective_value(benefit_s2(), x) == Catch::Approx(3.2));
    CHECK(x.task_of_agent == std::vector<int>{1, 2, 0});
  }
  SECTION("1x1") {
    Eigen::MatrixXd b(1, 1);
    b << 7;
    const JointAssignment x = solve_brute_force(b);
    CHECK(x.task_of_agent == std::vector<int>{0});
    CHECK(objective_value(b, x) == 7.0);
  }
  SECTION("rectangular all-zero") {
    const JointAssignment x = solve_brute_force(Eigen::MatrixXd::Zero(2, 3));
    CHECK(objective_value(Eigen::MatrixXd::Zero(2, 3), x) == 0.0);
    CHECK(is_valid_assignment(x, 3));
  }
  SECTION("size guard") {
    CHECK_THROWS_AS(solve_brute_force(Eigen::MatrixXd::Zero(9, 9)),
                    std::invalid_argument);
  }
}

TEST_CASE("objective_value") {
  const Eigen::MatrixXd b = benefit_s1();
  CHECK(objective_value(b, JointAssignment{{0, 1, 2}}) == Catch::Approx(6.0));
  CHECK(objective_value(b, JointAssignment{{1, 2, 0}}) == Catch::Approx(9.0));
  CHECK(objective_value(Eigen::MatrixXd::Zero(2, 3), JointAssignment{{2, 0}}) == 0.0);
  CHECK_THROWS_AS(objective_value(b, JointAssignment{{0, 1, 3}}), std::out_of_range);
  CHECK_THROWS_AS(objective_value(b, JointAssignment{{0, 1}}), std::invalid_argument);
}

TEST_CASE("solve_exact agrees with brute force on random instances") {
  std::mt19937_64 rng(12345);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::MatrixXd b = random_matrix(rng, 5, 7);
    const JointAssignment exact = solve_exact(b);
    const JointAssignment brute = solve_brute_force(b);
    REQUIRE(is_valid_assignment(exact, static_cast<int>(b.cols())));
    REQUIRE(objective_value(b, exact) ==
            Catch::Approx(objective_value(b, brute)).margin(1e-9));
    // identical tie-break rule: the assignments themselves should agree
    REQUIRE(exact.task_of_agent == brute.task_of_agent);
  }
}

TEST_CASE("auction objective is within n*epsilon of the optimum") {
  SECTION("dictator matrices") {
    const JointAssignment x1 = solve_auction(benefit_s1(), {0.01, 100000});
    CHECK(is_valid_assignment(x1, 3));
    CHECK(objective_value(benefit_s1(), x1) >= 9.0 - 3 * 0.01);
    const JointAssignment x2 = solve_auction(benefit_s2(), {0.001, 100000});
    CHECK(objective_value(benefit_s2(), x2) >= 3.2 - 3 * 0.001);
  }
  SECTION("identity with coarse epsilon") {
    const JointAssignment x = solve_auction(Eigen::MatrixXd::Identity(3, 3), {0.1, 100000});
    CHECK(objective_value(Eigen::MatrixXd::Identity(3, 3), x) >= 3.0 - 0.3);
  }
  SECTION("random instances") {
    std::mt19937_64 rng(999);
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::MatrixXd b = random_matrix(rng, 5, 7);
      const AuctionConfig cfg{0.01, 100000};
      const JointAssignment x = solve_auction(b, cfg);
      REQUIRE(is_valid_assignment(x, static_cast<int>(b.cols())));
      const double exact = objective_value(b, solve_exact(b));
      REQUIRE(objective_value(b, x) >= exact - b.rows() * cfg.epsilon_bid - 1e-12);
    }
  }
  SECTION("non-convergence is reported") {
    // three agents fighting over two equally good tasks: prices rise by
    // O(epsilon) per round, so a tiny epsilon exhausts the round budget
    Eigen::MatrixXd war(3, 3);
    war << 3, 3, 0, 3, 3, 0, 3, 3, 0;
    CHECK_THROWS_AS(solve_auction(war, {1e-9, 50}), std::runtime_error);
  }
  SECTION("config validation") {
    CHECK_THROWS_AS(solve_auction(benefit_s1(), {0.0, 10}), std::invalid_argument);
    CHECK_THROWS_AS(solve_auction(benefit_s1(), {0.1, 0}), std::invalid_argument);
  }
}

TEST_CASE("positive scaling leaves the argmax objective proportional") {
  std::mt19937_64 rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd b = random_matrix(rng, 5, 7);
    const double c = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const double base = objective_value(b, solve_exact(b));
    const double scaled = objective_value(b * c, solve_exact(b * c));
    REQUIRE(scaled == Catch::Approx(c * base).margin(1e-9 * std::max(1.0, std::abs(c * base))));
  }
}

TEST_CASE("solvers are deterministic") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::MatrixXd b = random_matrix(rng, 5, 7);
    CHECK(solve_exact(b) == solve_exact(b));
    CHECK(solve_auction(b, {0.01, 100000}) == solve_auction(b, {0.01, 100000}));
  }
}

TEST_CASE("degenerate duplicate-column matrices keep the lexicographic rule") {
  // columns 2..4 are identical, as happens when one shared value fills
  // every column outside an agent's candidate set
  Eigen::MatrixXd b(2, 5);
  b << 1, 0.5, 0.2, 0.2, 0.2,
       0.9, 0.5, 0.2, 0.2, 0.2;
  const JointAssignment x = solve_exact(b);
  CHECK(x.task_of_agent == solve_brute_force(b).task_of_agent);

  Eigen::MatrixXd all_same = Eigen::MatrixXd::Constant(3, 5, 0.7);
  CHECK(solve_exact(all_same).task_of_agent == std::vector<int>{0, 1, 2});
}

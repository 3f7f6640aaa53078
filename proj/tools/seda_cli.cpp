#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "seda/assignment.hpp"
#include "seda/csv.hpp"
#include "seda/experiment.hpp"
#include "seda/log.hpp"

namespace {

int run_solve(const std::string& input, const std::string& method,
              double epsilon) {
  Eigen::MatrixXd benefits;
  if (input == "-") {
    benefits = seda::read_benefit_matrix(std::cin);
  } else {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input: " + input);
    benefits = seda::read_benefit_matrix(in);
  }
  seda::JointAssignment assignment;
  if (method == "exact") {
    assignment = seda::solve_exact(benefits);
  } else if (method == "brute") {
    assignment = seda::solve_brute_force(benefits);
  } else {
    seda::AuctionConfig config;
    config.epsilon_bid = epsilon;
    assignment = seda::solve_auction(benefits, config);
  }
  // Wire format is 1-based for both agents and tasks.
  for (int i = 0; i < assignment.n_agents(); ++i)
    std::cout << (i + 1) << ',' << (assignment.task_of_agent[i] + 1) << '\n';
  std::cout << "objective,"
            << seda::format_double(seda::objective_value(benefits, assignment))
            << '\n';
  return 0;
}

int run_train(const std::string& config_path, long seed,
              const std::string& out_dir) {
  if (seed < 0) throw std::runtime_error("seed must be >= 0");
  const seda::ExperimentConfig config =
      seda::ExperimentConfig::from_file(config_path);
  const seda::RunRecord record = seda::run_experiment(
      config, static_cast<std::uint64_t>(seed), out_dir);
  seda::ordered_json summary;
  summary["out_dir"] = record.out_dir.string();
  summary["config_hash"] = record.config_hash;
  summary["seed"] = record.seed;
  summary["final_mean_return"] = record.metrics.back().mean_return;
  summary["wall_clock_seconds"] = record.wall_clock_seconds;
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_eval(const std::string& checkpoint_path, int episodes, long seed) {
  if (episodes <= 0) throw std::runtime_error("episodes must be positive");
  if (seed < 0) throw std::runtime_error("seed must be >= 0");
  seda::Checkpoint checkpoint = seda::read_checkpoint(checkpoint_path);
  std::unique_ptr<seda::SapEnv> env = seda::make_environment(checkpoint.config);
  const std::string algorithm =
      seda::algorithm_name(checkpoint.learner.algorithm());
  bool allow_duplicates = false;
  const seda::Policy policy = seda::evaluation_policy(
      algorithm, &checkpoint.learner, static_cast<std::uint64_t>(seed),
      &allow_duplicates);
  const seda::EvalResult result =
      seda::evaluate(*env, policy, episodes, static_cast<std::uint64_t>(seed),
                     allow_duplicates);
  seda::ordered_json out;
  out["algorithm"] = algorithm;
  out["episodes"] = result.episodes;
  out["mean_return"] = result.mean_return;
  out["std_return"] = result.std_return;
  out["conflict_rate"] = result.conflict_rate;
  out["power_out_fraction"] =
      result.power_out_fraction ? seda::ordered_json(*result.power_out_fraction)
                                : seda::ordered_json(nullptr);
  out["mean_assignment_duration"] =
      result.mean_assignment_duration
          ? seda::ordered_json(*result.mean_assignment_duration)
          : seda::ordered_json(nullptr);
  std::cout << out.dump() << '\n';
  return 0;
}

int run_aggregate(const std::vector<std::string>& run_dirs,
                  const std::string& out_dir) {
  std::vector<seda::LoadedRun> runs;
  runs.reserve(run_dirs.size());
  for (const std::string& dir : run_dirs) runs.push_back(seda::load_run(dir));
  const seda::AggregateSummary summary = seda::aggregate_runs(runs);
  seda::write_summary_csvs(summary, out_dir);
  seda::export_return_curve(
      summary, std::filesystem::path(out_dir) / "plot_return_curve.csv");
  seda::ordered_json out;
  out["out_dir"] = out_dir;
  out["config_hash"] = summary.config_hash;
  out["runs"] = summary.n_runs;
  std::cout << out.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential assignment training and evaluation toolkit"};
  app.require_subcommand(1);

  auto* solve = app.add_subcommand(
      "solve", "solve one assignment instance from a benefit CSV");
  std::string solve_input = "-";
  std::string solve_method = "exact";
  double solve_epsilon = 0.01;
  solve->add_option("--input", solve_input,
                    "benefit matrix CSV path, '-' for stdin");
  solve
      ->add_option("--method", solve_method,
                   "solver: exact, auction, or brute")
      ->check(CLI::IsMember({"exact", "auction", "brute"}));
  solve->add_option("--epsilon", solve_epsilon,
                    "bid increment for the auction solver");

  auto* train =
      app.add_subcommand("train", "run one training or baseline run");
  std::string train_config;
  long train_seed = 0;
  std::string train_out;
  train->add_option("--config", train_config, "experiment config file")
      ->required();
  train->add_option("--seed", train_seed, "run seed")->required();
  train->add_option("--out", train_out, "output run directory")->required();

  auto* eval =
      app.add_subcommand("eval", "evaluate a checkpoint greedily");
  std::string eval_checkpoint;
  int eval_episodes = 0;
  long eval_seed = 0;
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")
      ->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes")
      ->required();
  eval->add_option("--seed", eval_seed, "evaluation seed base");

  auto* aggregate = app.add_subcommand(
      "aggregate", "aggregate runs of one config across seeds");
  std::vector<std::string> aggregate_runs;
  std::string aggregate_out;
  aggregate->add_option("--runs", aggregate_runs, "run directories")
      ->required()
      ->expected(-1);
  aggregate->add_option("--out", aggregate_out, "summary output directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }

  try {
    if (solve->parsed())
      return run_solve(solve_input, solve_method, solve_epsilon);
    if (train->parsed()) return run_train(train_config, train_seed, train_out);
    if (eval->parsed())
      return run_eval(eval_checkpoint, eval_episodes, eval_seed);
    return run_aggregate(aggregate_runs, aggregate_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "seda/config.hpp"
#include "seda/csv.hpp"
#include "seda/learner.hpp"
#include "seda/log.hpp"
#include "seda/policy.hpp"

namespace seda {

using ordered_json = nlohmann::ordered_json;

/// One evaluation record of a run; serialized as one JSON line. Metrics that
/// do not apply (loss before training starts, power metrics outside the
/// constellation) are null.
struct MetricRow {
  long step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double epsilon = 0.0;
  std::optional<double> loss;
  double conflict_rate = 0.0;
  std::optional<double> power_out_fraction;
  std::optional<double> mean_assignment_duration;

  ordered_json to_json() const {
    ordered_json j;
    j["step"] = step;
    j["mean_return"] = mean_return;
    j["std_return"] = std_return;
    j["epsilon"] = epsilon;
    j["loss"] = loss ? ordered_json(*loss) : ordered_json(nullptr);
    j["conflict_rate"] = conflict_rate;
    j["power_out_fraction"] = power_out_fraction
                                  ? ordered_json(*power_out_fraction)
                                  : ordered_json(nullptr);
    j["mean_assignment_duration"] =
        mean_assignment_duration ? ordered_json(*mean_assignment_duration)
                                 : ordered_json(nullptr);
    return j;
  }

  static MetricRow from_json(const ordered_json& j) {
    MetricRow row;
    row.step = j.at("step").get<long>();
    row.mean_return = j.at("mean_return").get<double>();
    row.std_return = j.at("std_return").get<double>();
    row.epsilon = j.at("epsilon").get<double>();
    if (!j.at("loss").is_null()) row.loss = j.at("loss").get<double>();
    row.conflict_rate = j.at("conflict_rate").get<double>();
    if (!j.at("power_out_fraction").is_null())
      row.power_out_fraction = j.at("power_out_fraction").get<double>();
    if (!j.at("mean_assignment_duration").is_null())
      row.mean_assignment_duration =
          j.at("mean_assignment_duration").get<double>();
    return row;
  }

  /// Value of a metric by its JSON key, when present.
  std::optional<double> metric(const std::string& name) const {
    if (name == "mean_return") return mean_return;
    if (name == "std_return") return std_return;
    if (name == "epsilon") return epsilon;
    if (name == "loss") return loss;
    if (name == "conflict_rate") return conflict_rate;
    if (name == "power_out_fraction") return power_out_fraction;
    if (name == "mean_assignment_duration") return mean_assignment_duration;
    throw std::invalid_argument("unknown metric: " + name);
  }
};

/// The metric keys a run logs, in canonical order.
inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "mean_return",        "std_return",
      "epsilon",            "loss",
      "conflict_rate",      "power_out_fraction",
      "mean_assignment_duration"};
  return names;
}

/// Everything produced by one training (or baseline) run.
struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<MetricRow> metrics;
  double wall_clock_seconds = 0.0;
  std::filesystem::path out_dir;
  std::filesystem::path checkpoint_path;  // empty for non-learning baselines
};

/// Learner snapshot plus everything needed to rebuild its environment.
struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  long env_steps = 0;
  DqnLearner learner;
};

namespace detail {
constexpr std::int64_t kCheckpointMagic = 0x53454441434b5031;  // "SEDACKP1"
}

inline void write_checkpoint(const std::filesystem::path& path,
                             const std::string& config_text,
                             std::uint64_t seed, long env_steps,
                             const DqnLearner& learner) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  detail::write_i64(out, detail::kCheckpointMagic);
  detail::write_i64(out, 1);  // format version
  detail::write_i64(out, static_cast<std::int64_t>(config_text.size()));
  out.write(config_text.data(),
            static_cast<std::streamsize>(config_text.size()));
  detail::write_i64(out, static_cast<std::int64_t>(seed));
  detail::write_i64(out, env_steps);
  learner.save(out);
  if (!out)
    throw std::runtime_error("failed writing checkpoint: " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read checkpoint: " + path.string());
  if (detail::read_i64(in) != detail::kCheckpointMagic)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  if (detail::read_i64(in) != 1)
    throw std::runtime_error("unsupported checkpoint version");
  const std::int64_t text_len = detail::read_i64(in);
  std::string config_text(static_cast<std::size_t>(text_len), '\0');
  in.read(config_text.data(), text_len);
  if (!in) throw std::runtime_error("truncated checkpoint");
  const std::uint64_t seed =
      static_cast<std::uint64_t>(detail::read_i64(in));
  const long env_steps = static_cast<long>(detail::read_i64(in));
  return Checkpoint{ExperimentConfig::from_text(config_text), seed, env_steps,
                    DqnLearner::load(in)};
}

/// Builds the greedy-exploitation policy for an algorithm. The independent
/// variant needs duplicate tasks allowed when stepping.
inline Policy evaluation_policy(const std::string& algorithm,
                                const DqnLearner* learner,
                                std::uint64_t random_seed,
                                bool* allow_duplicates) {
  *allow_duplicates = false;
  if (algorithm == "reda") return learned_assignment_policy(learner->online());
  if (algorithm == "iql") {
    *allow_duplicates = true;
    return learned_independent_policy(learner->online());
  }
  if (algorithm == "greedy") return greedy_policy();
  if (algorithm == "random") return random_valid_policy(random_seed);
  throw std::invalid_argument("unknown algorithm: " + algorithm);
}

/// Trains (or replays a baseline) for config.total_steps environment steps,
/// evaluating on the step grid {0, eval_interval, 2*eval_interval, ...,
/// total_steps} with a separate environment instance and a dedicated
/// evaluation seed stream. Writes into out_dir: config.cfg (verbatim
/// snapshot), metrics.jsonl (bitwise reproducible for a fixed seed),
/// run.json (metadata; contains wall-clock time and is excluded from
/// reproducibility comparisons), and checkpoint.bin for learning algorithms.
inline RunRecord run_experiment(const ExperimentConfig& config,
                                std::uint64_t seed,
                                const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const auto t_start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  {
    std::ofstream snapshot(out_dir / "config.cfg", std::ios::binary);
    snapshot << config.raw_text;
    if (!snapshot) throw std::runtime_error("cannot write config snapshot");
  }

  std::unique_ptr<SapEnv> train_env = make_environment(config);
  std::unique_ptr<SapEnv> eval_env = make_environment(config);

  const bool trains =
      config.algorithm == "reda" || config.algorithm == "iql";
  std::optional<DqnLearner> learner;
  if (trains) {
    RedaConfig learner_config = config.learner;
    learner_config.seed = seed;
    learner.emplace(algorithm_from_name(config.algorithm),
                    train_env->obs_dim(), train_env->n_local_actions(),
                    learner_config);
  }

  RunRecord record;
  record.config_hash = hex64(config.config_hash());
  record.seed = seed;
  record.out_dir = out_dir;

  std::ofstream metrics_out(out_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics_out) throw std::runtime_error("cannot write metrics log");

  std::optional<double> latest_loss;
  long eval_ordinal = 0;
  auto run_eval = [&](long step) {
    const std::uint64_t eval_seed =
        seed * 1000003ull + static_cast<std::uint64_t>(eval_ordinal);
    bool allow_duplicates = false;
    const Policy policy =
        evaluation_policy(config.algorithm,
                          learner ? &*learner : nullptr, eval_seed,
                          &allow_duplicates);
    const EvalResult eval = evaluate(*eval_env, policy, config.eval_episodes,
                                     eval_seed, allow_duplicates);
    MetricRow row;
    row.step = step;
    row.mean_return = eval.mean_return;
    row.std_return = eval.std_return;
    row.epsilon = trains ? config.exploration.value(step) : 0.0;
    row.loss = latest_loss;
    row.conflict_rate = eval.conflict_rate;
    row.power_out_fraction = eval.power_out_fraction;
    row.mean_assignment_duration = eval.mean_assignment_duration;
    record.metrics.push_back(row);
    metrics_out << row.to_json().dump() << "\n" << std::flush;
    log_message(LogLevel::info,
                "seed " + std::to_string(seed) + " step " +
                    std::to_string(step) + " mean_return " +
                    format_double(eval.mean_return));
    ++eval_ordinal;
  };

  run_eval(0);
  if (trains) {
    train_env->reset(seed);
    for (long step = 1; step <= config.total_steps; ++step) {
      if (train_env->done()) train_env->reset(seed);
      const double epsilon = config.exploration.value(step - 1);
      const StepOutcome outcome =
          training_step(*train_env, *learner, epsilon, step);
      if (outcome.loss) latest_loss = outcome.loss;
      if (step % config.eval_interval == 0 || step == config.total_steps)
        run_eval(step);
    }
  } else {
    for (long step = config.eval_interval; step <= config.total_steps;
         step += config.eval_interval)
      run_eval(step);
    if (config.total_steps % config.eval_interval != 0)
      run_eval(config.total_steps);
  }
  metrics_out.close();
  if (!metrics_out) throw std::runtime_error("failed writing metrics log");

  if (trains) {
    record.checkpoint_path = out_dir / "checkpoint.bin";
    write_checkpoint(record.checkpoint_path, config.raw_text, seed,
                     config.total_steps, *learner);
  }

  const auto t_end = std::chrono::steady_clock::now();
  record.wall_clock_seconds =
      std::chrono::duration<double>(t_end - t_start).count();

  ordered_json meta;
  meta["config_hash"] = record.config_hash;
  meta["seed"] = seed;
  meta["algorithm"] = config.algorithm;
  meta["environment"] = config.environment;
  meta["total_steps"] = config.total_steps;
  meta["wall_clock_seconds"] = record.wall_clock_seconds;
  meta["checkpoint"] = trains ? ordered_json("checkpoint.bin")
                              : ordered_json(nullptr);
  std::ofstream meta_out(out_dir / "run.json", std::ios::binary);
  meta_out << meta.dump(2) << "\n";
  if (!meta_out) throw std::runtime_error("cannot write run metadata");
  return record;
}

/// A run directory loaded back for aggregation.
struct LoadedRun {
  std::string config_hash;
  std::string algorithm;
  std::vector<MetricRow> metrics;
};

inline LoadedRun load_run(const std::filesystem::path& run_dir) {
  LoadedRun run;
  {
    std::ifstream in(run_dir / "config.cfg", std::ios::binary);
    if (!in)
      throw std::runtime_error("missing config snapshot in " +
                               run_dir.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    run.config_hash = hex64(fnv1a64(buffer.str()));
  }
  {
    std::ifstream in(run_dir / "run.json", std::ios::binary);
    if (!in)
      throw std::runtime_error("missing run metadata in " + run_dir.string());
    const ordered_json meta = ordered_json::parse(in);
    if (meta.at("config_hash").get<std::string>() != run.config_hash)
      throw std::runtime_error(
          "config snapshot does not match its recorded hash in " +
          run_dir.string());
    run.algorithm = meta.at("algorithm").get<std::string>();
  }
  {
    std::ifstream in(run_dir / "metrics.jsonl", std::ios::binary);
    if (!in)
      throw std::runtime_error("missing metrics log in " + run_dir.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      run.metrics.push_back(MetricRow::from_json(ordered_json::parse(line)));
    }
  }
  if (run.metrics.empty())
    throw std::runtime_error("metrics log is empty in " + run_dir.string());
  return run;
}

/// Per-step mean and standard deviation of one metric across runs.
struct MetricSummary {
  std::vector<double> mean;
  std::vector<double> std_dev;
};

/// Cross-seed aggregation of runs sharing one config snapshot.
struct AggregateSummary {
  std::string config_hash;
  std::string algorithm;
  int n_runs = 0;
  std::vector<long> steps;
  std::map<std::string, MetricSummary> by_metric;
};

/// Aggregates runs of the same config: per-step mean and population standard
/// deviation across seeds for every metric that is present in every run at
/// every step. Refuses mixed config snapshots and misaligned eval grids.
inline AggregateSummary aggregate_runs(const std::vector<LoadedRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  AggregateSummary summary;
  summary.config_hash = runs.front().config_hash;
  summary.algorithm = runs.front().algorithm;
  summary.n_runs = static_cast<int>(runs.size());
  for (const LoadedRun& run : runs)
    if (run.config_hash != summary.config_hash)
      throw std::runtime_error(
          "mixed config snapshots: refusing to aggregate");
  for (const MetricRow& row : runs.front().metrics)
    summary.steps.push_back(row.step);
  for (const LoadedRun& run : runs) {
    if (run.metrics.size() != summary.steps.size())
      throw std::runtime_error("misaligned eval grids across runs");
    for (std::size_t k = 0; k < summary.steps.size(); ++k)
      if (run.metrics[k].step != summary.steps[k])
        throw std::runtime_error("misaligned eval grids across runs");
  }
  const double n = static_cast<double>(runs.size());
  for (const std::string& name : metric_names()) {
    bool complete = true;
    for (const LoadedRun& run : runs)
      for (const MetricRow& row : run.metrics)
        if (!row.metric(name)) complete = false;
    if (!complete) continue;
    MetricSummary metric;
    for (std::size_t k = 0; k < summary.steps.size(); ++k) {
      double mean = 0.0;
      for (const LoadedRun& run : runs) mean += *run.metrics[k].metric(name);
      mean /= n;
      double variance = 0.0;
      for (const LoadedRun& run : runs) {
        const double diff = *run.metrics[k].metric(name) - mean;
        variance += diff * diff;
      }
      variance /= n;
      metric.mean.push_back(mean);
      metric.std_dev.push_back(std::sqrt(variance));
    }
    summary.by_metric.emplace(name, std::move(metric));
  }
  return summary;
}

/// Writes one summary_<metric>.csv (columns step,mean,std) per aggregated
/// metric.
inline void write_summary_csvs(const AggregateSummary& summary,
                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [name, metric] : summary.by_metric) {
    CsvTable table;
    table.header = {"step", "mean", "std"};
    for (std::size_t k = 0; k < summary.steps.size(); ++k)
      table.rows.push_back({std::to_string(summary.steps[k]),
                            format_double(metric.mean[k]),
                            format_double(metric.std_dev[k])});
    write_csv_file(out_dir / ("summary_" + name + ".csv"), table);
  }
}

/// Learning-curve panel: step, cross-seed mean and spread of the evaluation
/// return. An aggregate without the return metric yields a header-only file.
inline void export_return_curve(const AggregateSummary& summary,
                                const std::filesystem::path& path) {
  CsvTable table;
  table.header = {"step", "mean_return", "std_return"};
  const auto it = summary.by_metric.find("mean_return");
  if (it != summary.by_metric.end())
    for (std::size_t k = 0; k < summary.steps.size(); ++k)
      table.rows.push_back({std::to_string(summary.steps[k]),
                            format_double(it->second.mean[k]),
                            format_double(it->second.std_dev[k])});
  write_csv_file(path, table);
}

/// Final-state comparison bars: one row per algorithm with the
/// constellation health metrics. Missing values render as empty fields.
struct AlgorithmBar {
  std::string algorithm;
  std::optional<double> power_out_fraction;
  double conflict_rate = 0.0;
  std::optional<double> mean_assignment_duration;
};

inline void export_final_bars(const std::vector<AlgorithmBar>& bars,
                              const std::filesystem::path& path) {
  CsvTable table;
  table.header = {"algorithm", "power_out_fraction", "conflict_rate",
                  "mean_assignment_duration"};
  for (const AlgorithmBar& bar : bars) {
    table.rows.push_back(
        {bar.algorithm,
         bar.power_out_fraction ? format_double(*bar.power_out_fraction) : "",
         format_double(bar.conflict_rate),
         bar.mean_assignment_duration
             ? format_double(*bar.mean_assignment_duration)
             : ""});
  }
  write_csv_file(path, table);
}

}  // namespace seda

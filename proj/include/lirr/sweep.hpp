#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lirr/config.hpp"

namespace lirr {

/// Seeds shared by every method and lambda pair of a (m, seed_index) cell, so
/// methods are compared on the same task, initialization and batch order.
std::uint64_t task_seed(std::uint64_t root, std::size_t m, std::int64_t seed_index);
std::uint64_t train_seed(std::uint64_t root, std::size_t m, std::int64_t seed_index);

struct CellResult {
  std::string method;
  double lambda_risk = 0.0;
  double lambda_rep = 0.0;
  std::size_t m = 0;
  double ratio = 0.0;
  std::int64_t seed_index = 0;
  std::uint64_t seed = 0;  // task seed
  double src_metric = 0.0;
  double tgt_metric = 0.0;
  std::string status = "ok";  // ok | diverged | error
  std::string diagnostic;
};

struct CellSummary {
  std::string method;
  double lambda_risk = 0.0;
  double lambda_rep = 0.0;
  std::size_t m = 0;
  double ratio = 0.0;
  std::size_t count = 0;  // successful runs
  std::size_t failed = 0;
  double mean_tgt = 0.0;
  double std_tgt = 0.0;  // n - 1 denominator; 0 for a single run
  double mean_src = 0.0;
};

struct SweepResult {
  std::vector<CellResult> rows;
  std::vector<CellSummary> summary;
  TaskKind task_kind = TaskKind::Classification;
};

using ProgressFn = std::function<void(const CellResult&, std::size_t done, std::size_t total)>;

/// Runs every (method, lambda pair, m, seed) cell on up to `jobs` threads.
/// Rows come back in configuration order whatever the completion order.
SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t jobs,
                      const ProgressFn& progress = {});

/// Groups rows by (method, lambdas, m) in first-seen order.
std::vector<CellSummary> aggregate(const std::vector<CellResult>& rows);

std::string results_csv(const std::vector<CellResult>& rows);
std::vector<CellResult> parse_results_csv(const std::string& text, const std::string& origin);
std::vector<CellResult> load_results_csv(const std::string& path);

std::string summary_csv(const std::vector<CellSummary>& summary);
/// Methods ranked per m by mean target metric.
std::string ranking_text(const std::vector<CellSummary>& summary, TaskKind kind);
/// One 3x3-style table per (method, m): rows lambda_rep, columns lambda_risk.
std::string lambda_table(const std::vector<CellSummary>& summary, TaskKind kind);

/// Writes results.csv, summary.csv, ranking.txt (and lambda_table.txt for a
/// lambda grid) under `dir`.
void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& cfg,
                         const std::string& dir);

/// Shortest decimal text that round-trips.
std::string short_double(double v);

}  // namespace lirr

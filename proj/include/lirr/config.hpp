#pragma once

// Experiment configuration files.
//
//   [experiment]  name, output_dir, root_seed, methods, seeds, m | ratios
//   [scenario]    kind plus any scenario parameter by name
//   [data]        n, k, test_size, require_small_m
//   [optim]       lr, momentum, weight_decay, total_iters, batch_size,
//                 decay_fraction, decay_multiplier, irm_penalty_weight,
//                 irm_warmup_fraction
//   [lirr]        lambda_risk, lambda_rep, rep_uses_labeled_target
//   [model]       encoder_hidden, feature_dim, head_hidden, activation,
//                 cosine_temperature
//   [grid]        lambda_risk, lambda_rep (lists; when present the sweep
//                 runs every pair for each method)

#include <cstdint>
#include <string>
#include <vector>

#include "lirr/keyvalue.hpp"
#include "lirr/models.hpp"
#include "lirr/objectives.hpp"
#include "lirr/scenario.hpp"
#include "lirr/trainer.hpp"

namespace lirr {

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir = "runs/experiment";
  std::uint64_t root_seed = 0;
  std::vector<Method> methods;
  std::vector<std::int64_t> seeds;
  /// Labeled target counts; filled from ratios when those are given.
  std::vector<std::size_t> m_values;
  /// Labeled target ratios m / k, when the config specifies ratios.
  std::vector<double> ratios;

  ScenarioSpec scenario;
  std::size_t n = 2000;
  std::size_t k = 2000;
  std::size_t test_size = 2000;
  bool require_small_m = true;

  OptimConfig optim;
  LirrConfig lirr;
  ModelConfig model;

  std::vector<double> grid_lambda_risk;
  std::vector<double> grid_lambda_rep;
  bool write_run_metrics = false;

  bool has_lambda_grid() const { return !grid_lambda_risk.empty(); }
  double ratio_of(std::size_t m) const {
    return static_cast<double>(m) / static_cast<double>(k);
  }
  /// `for_sweep` additionally requires methods, seeds and m values.
  void validate(bool for_sweep = true) const;
};

ExperimentConfig parse_experiment(const KeyValueFile& kv, bool for_sweep = true);
ExperimentConfig load_experiment(const std::string& path);

/// Scenario parameters given as "name = value" pairs under [scenario].
ScenarioSpec scenario_from(const KeyValueFile& kv, const std::string& default_kind);

}  // namespace lirr

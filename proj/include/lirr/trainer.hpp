#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lirr/data.hpp"
#include "lirr/models.hpp"
#include "lirr/objectives.hpp"

namespace lirr {

enum class Method { Lirr, LirrCosc, Dann, Irm, SPlusT, FullT };

const char* to_string(Method m);
Method parse_method(const std::string& s);

struct OptimConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t total_iters = 4000;
  double decay_fraction = 0.75;
  double decay_multiplier = 0.1;
  /// Size of each of the three sub-batches (S, labeled T, unlabeled T).
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  /// IRM penalty weight after warmup; 1 during warmup.
  double irm_penalty_weight = 100.0;
  double irm_warmup_fraction = 0.5;

  std::size_t decay_iter() const;
  double lr_at(std::size_t iter) const;
  void validate() const;
};

struct SgdState {
  std::vector<Tensor> velocity;
};

/// v <- momentum v + grad + weight_decay param;  param <- param - lr v.
void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              SgdState& state, double lr, double momentum, double weight_decay);

struct RunRecord {
  Method method = Method::Lirr;
  std::vector<LossReport> losses;
  std::vector<double> lrs;
  LirrModel model;
  double src_metric = 0.0;
  double tgt_metric = 0.0;
  double wall_seconds = 0.0;
  bool diverged = false;
  std::string diagnostic;

  std::size_t iterations() const { return losses.size(); }
};

/// Trains one method on a task. The model architecture comes from
/// `model_cfg`; its input width, output width, task kind and head type are
/// set from the task and method, and its seed from `optim.seed`.
RunRecord train(Method method, const SemiDaTask& task, const LirrConfig& lirr_cfg,
                const OptimConfig& optim, const ModelConfig& model_cfg = {});

/// Accuracy for classification, mean absolute error for regression.
double evaluate(const LirrModel& model, const LabeledSet& set, TaskKind kind);

void write_metrics_csv(const RunRecord& run, const std::string& path);

}  // namespace lirr

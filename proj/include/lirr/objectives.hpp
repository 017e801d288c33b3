#pragma once

// Training objectives. Every function records onto a caller-owned Graph and
// returns the node to differentiate.
//
// Adversarial terms are realized with gradient reversal so that a single
// backward pass and a single optimizer serve both sides of the min-max:
//
//   objective = (1 + λ_risk) L_i + L_d(f_d(GRL_{λ_risk}(z))) + BCE(C(GRL_{λ_rep}(z)))
//
// f_d and C descend on their own losses, while the encoder receives
// (1 + λ_risk)∇L_i − λ_risk∇L_d − λ_rep∇BCE, which is the encoder gradient of
// L_risk + λ_rep L_rep with L_rep in log-likelihood form. The value of the
// objective node is therefore not L_LIRR; the exact loss values are reported
// separately in LossReport.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lirr/graph.hpp"
#include "lirr/models.hpp"

namespace lirr {

struct LirrConfig {
  double lambda_risk = 1.0;
  double lambda_rep = 1.0;
  TaskKind task_kind = TaskKind::Classification;
  /// Whether the domain classifier also sees labeled target features.
  bool rep_uses_labeled_target = true;

  void validate() const;
};

struct LabeledBatch {
  Tensor x;
  std::vector<double> y;  // class indices (as doubles) or regression targets

  std::size_t size() const { return x.rows(); }
  bool empty() const { return x.rows() == 0; }
};

struct Batch {
  LabeledBatch source;
  LabeledBatch target;  // the few labeled target examples
  Tensor unlabeled;     // unlabeled target features
};

struct LossReport {
  double l_i = 0.0;
  double l_d = 0.0;
  double l_rep = 0.0;
  double l_risk = 0.0;
  double l_total = 0.0;
  std::size_t n_s = 0;
  std::size_t n_t_lab = 0;
  std::size_t n_t_unlab = 0;
};

struct Objective {
  Var loss;  // node to call backward() on
  LossReport report;
};

/// Encoder outputs for each part of a batch; absent parts are empty.
struct EncodedBatch {
  std::optional<Var> source;
  std::optional<Var> target;
  std::optional<Var> unlabeled;
};

EncodedBatch encode_batch(Graph& g, const BoundModel& m, const Batch& batch);

/// Cross-entropy for classification, mean absolute error for regression.
Var task_loss(Graph& g, Var output, std::span<const double> y, TaskKind kind);

/// Domain-classification BCE on z (source labeled 1, target 0), averaged per
/// domain and summed: uniform C gives 2 ln 2. The features pass through a
/// gradient reversal of `grl_lambda` before C.
Var loss_rep(Graph& g, const BoundModel& m, Var z_source, Var z_target, double grl_lambda);
Var loss_rep(Graph& g, const BoundModel& m, const Tensor& x_source, const Tensor& x_target,
             double grl_lambda = 1.0);

/// Task loss of f_i over the union of both labeled batches, equal weight per example.
Var loss_invariant(Graph& g, const BoundModel& m, const EncodedBatch& z, const Batch& batch,
                   TaskKind kind);
Var loss_invariant(Graph& g, const BoundModel& m, const LabeledBatch& source,
                   const LabeledBatch& target, TaskKind kind);

/// Task loss of f_d with each example's true domain channel. `grl_lambda`
/// reverses the gradient between the encoder and f_d (0 = f_d sees a
/// stop-gradient copy of z; pass std::nullopt for no reversal layer).
Var loss_dependent(Graph& g, const BoundModel& m, const EncodedBatch& z, const Batch& batch,
                   TaskKind kind, std::optional<double> grl_lambda);
Var loss_dependent(Graph& g, const BoundModel& m, const LabeledBatch& source,
                   const LabeledBatch& target, TaskKind kind);

Objective loss_risk(Graph& g, const BoundModel& m, const Batch& batch, const LirrConfig& cfg);
Objective loss_lirr_total(Graph& g, const BoundModel& m, const Batch& batch,
                          const LirrConfig& cfg);

/// L_i plus the adversarial domain term only.
Objective loss_dann(Graph& g, const BoundModel& m, const Batch& batch, const LirrConfig& cfg);

/// Squared derivative of an environment's risk with respect to a dummy
/// output scale s, at s = 1.
Var irm_penalty(Graph& g, Var output, std::span<const double> y, TaskKind kind);

/// L_i + penalty_weight * sum of per-environment penalties; empty
/// environments contribute no penalty.
Objective loss_irm_baseline(Graph& g, const BoundModel& m, const Batch& batch,
                            double penalty_weight, TaskKind kind);

/// Labeled source plus labeled target, unlabeled data ignored.
Objective loss_s_plus_t(Graph& g, const BoundModel& m, const Batch& batch, TaskKind kind);

}  // namespace lirr

#include "lirr/objectives.hpp"

#include <cmath>
#include <string>

#include "lirr/errors.hpp"

namespace lirr {

void LirrConfig::validate() const {
  if (!(lambda_risk >= 0.0) || !std::isfinite(lambda_risk)) {
    throw ConfigError("lambda_risk must be a finite nonnegative number, got " +
                      std::to_string(lambda_risk));
  }
  if (!(lambda_rep >= 0.0) || !std::isfinite(lambda_rep)) {
    throw ConfigError("lambda_rep must be a finite nonnegative number, got " +
                      std::to_string(lambda_rep));
  }
}

namespace {

std::vector<std::size_t> class_indices(std::span<const double> y) {
  std::vector<std::size_t> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0) || y[i] != std::floor(y[i])) {
      throw IndexError("class label " + std::to_string(y[i]) + " is not a nonnegative integer");
    }
    out[i] = static_cast<std::size_t>(y[i]);
  }
  return out;
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void check_labels(const LabeledBatch& b, const char* what) {
  if (b.y.size() != b.x.rows()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(b.y.size()) +
                         " labels for " + std::to_string(b.x.rows()) + " rows");
  }
}

Var maybe_reverse(Graph& g, Var z, std::optional<double> grl_lambda) {
  return grl_lambda ? g.grad_reverse(z, *grl_lambda) : z;
}

// Stacks per-domain head outputs and labels; at least one side must be present.
template <typename Head>
Var labeled_loss(Graph& g, const EncodedBatch& z, const Batch& batch, TaskKind kind,
                 Head&& head) {
  check_labels(batch.source, "source batch");
  check_labels(batch.target, "target batch");
  const bool has_s = !batch.source.empty();
  const bool has_t = !batch.target.empty();
  if (!has_s && !has_t) throw ContractError("no labeled examples in either domain");
  if (has_s && has_t) {
    Var out = g.concat_rows(head(*z.source, 0), head(*z.target, 1));
    return task_loss(g, out, concat(batch.source.y, batch.target.y), kind);
  }
  if (has_s) return task_loss(g, head(*z.source, 0), batch.source.y, kind);
  return task_loss(g, head(*z.target, 1), batch.target.y, kind);
}

Var target_side(Graph& g, const EncodedBatch& z, const Batch& batch, bool use_labeled) {
  const bool has_t = use_labeled && z.target;
  const bool has_u = z.unlabeled.has_value();
  (void)batch;
  if (has_t && has_u) return g.concat_rows(*z.target, *z.unlabeled);
  if (has_u) return *z.unlabeled;
  if (has_t) return *z.target;
  throw ContractError("loss_rep needs target features");
}

}  // namespace

EncodedBatch encode_batch(Graph& g, const BoundModel& m, const Batch& batch) {
  EncodedBatch z;
  if (!batch.source.empty()) z.source = encode(g, m, g.constant(batch.source.x));
  if (!batch.target.empty()) z.target = encode(g, m, g.constant(batch.target.x));
  if (batch.unlabeled.rows() > 0) z.unlabeled = encode(g, m, g.constant(batch.unlabeled));
  return z;
}

Var task_loss(Graph& g, Var output, std::span<const double> y, TaskKind kind) {
  if (kind == TaskKind::Classification) {
    auto labels = class_indices(y);
    return g.softmax_cross_entropy(output, labels);
  }
  const Tensor& out = g.value(output);
  if (out.cols() != 1 || out.rows() != y.size()) {
    throw DimensionError("regression output " + out.shape_str() + " vs " +
                         std::to_string(y.size()) + " targets");
  }
  return g.l1_loss(output, g.constant(Tensor::column(y)));
}

Var loss_rep(Graph& g, const BoundModel& m, Var z_source, Var z_target, double grl_lambda) {
  const std::size_t ns = g.value(z_source).rows();
  const std::size_t nt = g.value(z_target).rows();
  if (ns == 0 || nt == 0) throw ContractError("loss_rep needs nonempty batches from both domains");
  const std::vector<double> ones(ns, 1.0);
  const std::vector<double> zeros(nt, 0.0);
  Var src = g.sigmoid_bce(domain_logits(g, m, z_source, grl_lambda), ones);
  Var tgt = g.sigmoid_bce(domain_logits(g, m, z_target, grl_lambda), zeros);
  return g.add(src, tgt);
}

Var loss_rep(Graph& g, const BoundModel& m, const Tensor& x_source, const Tensor& x_target,
             double grl_lambda) {
  if (x_source.rows() == 0 || x_target.rows() == 0) {
    throw ContractError("loss_rep needs nonempty batches from both domains");
  }
  return loss_rep(g, m, encode(g, m, g.constant(x_source)), encode(g, m, g.constant(x_target)),
                  grl_lambda);
}

Var loss_invariant(Graph& g, const BoundModel& m, const EncodedBatch& z, const Batch& batch,
                   TaskKind kind) {
  return labeled_loss(g, z, batch, kind, [&](Var zz, int) { return forward_fi(g, m, zz); });
}

Var loss_invariant(Graph& g, const BoundModel& m, const LabeledBatch& source,
                   const LabeledBatch& target, TaskKind kind) {
  Batch b{source, target, Tensor()};
  return loss_invariant(g, m, encode_batch(g, m, b), b, kind);
}

Var loss_dependent(Graph& g, const BoundModel& m, const EncodedBatch& z, const Batch& batch,
                   TaskKind kind, std::optional<double> grl_lambda) {
  return labeled_loss(g, z, batch, kind, [&](Var zz, int domain) {
    return forward_fd(g, m, maybe_reverse(g, zz, grl_lambda), domain);
  });
}

Var loss_dependent(Graph& g, const BoundModel& m, const LabeledBatch& source,
                   const LabeledBatch& target, TaskKind kind) {
  Batch b{source, target, Tensor()};
  return loss_dependent(g, m, encode_batch(g, m, b), b, kind, std::nullopt);
}

namespace {

Objective risk_part(Graph& g, const BoundModel& m, const EncodedBatch& z, const Batch& batch,
                    const LirrConfig& cfg) {
  Var li = loss_invariant(g, m, z, batch, cfg.task_kind);
  Var ld = loss_dependent(g, m, z, batch, cfg.task_kind, cfg.lambda_risk);
  Objective obj;
  obj.loss = g.add(g.scale(li, 1.0 + cfg.lambda_risk), ld);
  obj.report.l_i = g.scalar(li);
  obj.report.l_d = g.scalar(ld);
  obj.report.l_risk = obj.report.l_i + cfg.lambda_risk * (obj.report.l_i - obj.report.l_d);
  obj.report.l_total = obj.report.l_risk;
  obj.report.n_s = batch.source.size();
  obj.report.n_t_lab = batch.target.size();
  obj.report.n_t_unlab = batch.unlabeled.rows();
  return obj;
}

}  // namespace

Objective loss_risk(Graph& g, const BoundModel& m, const Batch& batch, const LirrConfig& cfg) {
  cfg.validate();
  return risk_part(g, m, encode_batch(g, m, batch), batch, cfg);
}

Objective loss_lirr_total(Graph& g, const BoundModel& m, const Batch& batch,
                          const LirrConfig& cfg) {
  cfg.validate();
  EncodedBatch z = encode_batch(g, m, batch);
  Objective obj = risk_part(g, m, z, batch, cfg);
  if (!z.source) throw ContractError("loss_rep needs a nonempty source batch");
  Var rep = loss_rep(g, m, *z.source, target_side(g, z, batch, cfg.rep_uses_labeled_target),
                     cfg.lambda_rep);
  obj.loss = g.add(obj.loss, rep);
  obj.report.l_rep = g.scalar(rep);
  obj.report.l_total = obj.report.l_risk + cfg.lambda_rep * obj.report.l_rep;
  return obj;
}

Objective loss_dann(Graph& g, const BoundModel& m, const Batch& batch, const LirrConfig& cfg) {
  cfg.validate();
  EncodedBatch z = encode_batch(g, m, batch);
  Var li = loss_invariant(g, m, z, batch, cfg.task_kind);
  if (!z.source) throw ContractError("loss_rep needs a nonempty source batch");
  Var rep = loss_rep(g, m, *z.source, target_side(g, z, batch, cfg.rep_uses_labeled_target),
                     cfg.lambda_rep);
  Objective obj;
  obj.loss = g.add(li, rep);
  obj.report.l_i = g.scalar(li);
  obj.report.l_rep = g.scalar(rep);
  obj.report.l_risk = obj.report.l_i;
  obj.report.l_total = obj.report.l_i + cfg.lambda_rep * obj.report.l_rep;
  obj.report.n_s = batch.source.size();
  obj.report.n_t_lab = batch.target.size();
  obj.report.n_t_unlab = batch.unlabeled.rows();
  return obj;
}

Var irm_penalty(Graph& g, Var output, std::span<const double> y, TaskKind kind) {
  const Tensor& out = g.value(output);
  const std::size_t n = out.rows();
  if (n == 0 || y.size() != n) throw DimensionError("irm_penalty: label count mismatch");
  Var weighted;
  if (kind == TaskKind::Classification) {
    // d/ds CE(s * logits) at s = 1 is mean_rows sum_c (softmax - onehot)_c * logit_c.
    auto labels = class_indices(y);
    Tensor onehot(n, out.cols());
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] >= out.cols()) throw IndexError("label out of range in irm_penalty");
      onehot(i, labels[i]) = 1.0;
    }
    Var diff = g.sub(g.softmax(output), g.constant(std::move(onehot)));
    weighted = g.mul(diff, output);
  } else {
    // d/ds mean|s * pred - y| at s = 1 is mean(sign(pred - y) * pred).
    Tensor sign(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = out[i] - y[i];
      sign[i] = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    }
    weighted = g.mul(g.constant(std::move(sign)), output);
  }
  Var d = g.scale(g.sum(weighted), 1.0 / static_cast<double>(n));
  return g.mul(d, d);
}

Objective loss_irm_baseline(Graph& g, const BoundModel& m, const Batch& batch,
                            double penalty_weight, TaskKind kind) {
  if (!(penalty_weight >= 0.0)) throw ConfigError("IRM penalty weight must be nonnegative");
  check_labels(batch.source, "source batch");
  check_labels(batch.target, "target batch");
  EncodedBatch z = encode_batch(g, m, batch);
  std::optional<Var> out_s, out_t;
  if (z.source) out_s = forward_fi(g, m, *z.source);
  if (z.target) out_t = forward_fi(g, m, *z.target);
  Var li;
  if (out_s && out_t) {
    li = task_loss(g, g.concat_rows(*out_s, *out_t), concat(batch.source.y, batch.target.y),
                   kind);
  } else if (out_s) {
    li = task_loss(g, *out_s, batch.source.y, kind);
  } else if (out_t) {
    li = task_loss(g, *out_t, batch.target.y, kind);
  } else {
    throw ContractError("no labeled examples in either domain");
  }
  Var total = li;
  if (out_s) total = g.add(total, g.scale(irm_penalty(g, *out_s, batch.source.y, kind), penalty_weight));
  if (out_t) total = g.add(total, g.scale(irm_penalty(g, *out_t, batch.target.y, kind), penalty_weight));
  Objective obj;
  obj.loss = total;
  obj.report.l_i = g.scalar(li);
  obj.report.l_risk = obj.report.l_i;
  obj.report.l_total = g.scalar(total);
  obj.report.n_s = batch.source.size();
  obj.report.n_t_lab = batch.target.size();
  obj.report.n_t_unlab = batch.unlabeled.rows();
  return obj;
}

Objective loss_s_plus_t(Graph& g, const BoundModel& m, const Batch& batch, TaskKind kind) {
  Batch labeled{batch.source, batch.target, Tensor()};
  Var li = loss_invariant(g, m, encode_batch(g, m, labeled), labeled, kind);
  Objective obj;
  obj.loss = li;
  obj.report.l_i = g.scalar(li);
  obj.report.l_risk = obj.report.l_i;
  obj.report.l_total = obj.report.l_i;
  obj.report.n_s = batch.source.size();
  obj.report.n_t_lab = batch.target.size();
  return obj;
}

}  // namespace lirr

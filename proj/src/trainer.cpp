#include "lirr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lirr/errors.hpp"
#include "lirr/keyvalue.hpp"

namespace lirr {

const char* to_string(Method m) {
  switch (m) {
    case Method::Lirr: return "lirr";
    case Method::LirrCosc: return "lirr_cosc";
    case Method::Dann: return "dann";
    case Method::Irm: return "irm";
    case Method::SPlusT: return "s_plus_t";
    case Method::FullT: return "full_t";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::Lirr, Method::LirrCosc, Method::Dann, Method::Irm, Method::SPlusT,
                   Method::FullT}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + s + "'");
}

std::size_t OptimConfig::decay_iter() const {
  return static_cast<std::size_t>(std::floor(decay_fraction * static_cast<double>(total_iters)));
}

double OptimConfig::lr_at(std::size_t iter) const {
  return iter >= decay_iter() ? lr * decay_multiplier : lr;
}

void OptimConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (!(decay_fraction >= 0.0 && decay_fraction <= 1.0)) {
    throw ConfigError("decay point must lie within the run");
  }
  if (!(decay_multiplier > 0.0)) throw ConfigError("decay multiplier must be positive");
  if (total_iters == 0) throw ConfigError("total_iters must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(irm_penalty_weight >= 0.0)) throw ConfigError("IRM penalty weight must be nonnegative");
  if (!(irm_warmup_fraction >= 0.0 && irm_warmup_fraction <= 1.0)) {
    throw ConfigError("IRM warmup fraction must be in [0, 1]");
  }
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              SgdState& state, double lr, double momentum, double weight_decay) {
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.velocity.empty()) {
    for (const Tensor* p : params) state.velocity.emplace_back(p->rows(), p->cols());
  }
  if (state.velocity.size() != params.size()) {
    throw DimensionError("sgd_step: optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& v = state.velocity[i];
    if (!p.same_shape(g) || !p.same_shape(v)) {
      throw DimensionError("sgd_step: parameter " + p.shape_str() + " vs gradient " +
                           g.shape_str());
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = momentum * v[j] + g[j] + weight_decay * p[j];
      p[j] -= lr * v[j];
    }
  }
}

namespace {

LabeledBatch draw(const Tensor& x, const std::vector<double>& y, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(count);
  for (std::size_t& i : idx) i = rng.index(x.rows());
  LabeledBatch b{x.gather_rows(idx), {}};
  b.y.reserve(count);
  for (std::size_t i : idx) b.y.push_back(y[i]);
  return b;
}

Tensor draw_x(const Tensor& x, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(count);
  for (std::size_t& i : idx) i = rng.index(x.rows());
  return x.gather_rows(idx);
}

bool model_finite(const LirrModel& m) {
  for (const Tensor* t : m.parameters()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

}  // namespace

RunRecord train(Method method, const SemiDaTask& task, const LirrConfig& lirr_cfg,
                const OptimConfig& optim, const ModelConfig& model_cfg) {
  optim.validate();
  LirrConfig cfg = lirr_cfg;
  cfg.task_kind = task.scenario.task_kind();
  cfg.validate();
  if (task.n() == 0 || task.m() == 0 || task.k() == 0) {
    throw ContractError("train needs nonempty S, labeled T and unlabeled T");
  }
  if (method == Method::LirrCosc && cfg.task_kind != TaskKind::Classification) {
    throw ConfigError("lirr_cosc applies to classification only");
  }

  // The fully supervised reference trains on every labeled target example.
  Tensor full_x;
  std::vector<double> full_y;
  if (method == Method::FullT) {
    if (task.target_unlabeled_oracle.size() != task.k()) {
      throw ContractError("full_t needs the labels of the unlabeled target pool");
    }
    std::vector<double> xs = task.target_labeled.x.data();
    xs.insert(xs.end(), task.target_unlabeled.x.data().begin(), task.target_unlabeled.x.data().end());
    full_x = Tensor(task.m() + task.k(), task.target_labeled.x.cols(), std::move(xs));
    full_y = task.target_labeled.y;
    full_y.insert(full_y.end(), task.target_unlabeled_oracle.begin(),
                  task.target_unlabeled_oracle.end());
  }

  ModelConfig mc = model_cfg;
  mc.input_dim = task.scenario.feature_dim();
  mc.num_outputs = task.scenario.num_outputs();
  mc.task_kind = cfg.task_kind;
  mc.cosine_head = method == Method::LirrCosc;
  mc.seed = SeedSequence(optim.seed).add("model").value();

  RunRecord run;
  run.method = method;
  run.model = init_model(mc);
  run.losses.reserve(optim.total_iters);
  run.lrs.reserve(optim.total_iters);

  Rng rs(SeedSequence(optim.seed).add("batch").add("source").value());
  Rng rl(SeedSequence(optim.seed).add("batch").add("target_labeled").value());
  Rng ru(SeedSequence(optim.seed).add("batch").add("target_unlabeled").value());

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t warmup = static_cast<std::size_t>(
      std::floor(optim.irm_warmup_fraction * static_cast<double>(optim.total_iters)));
  SgdState state;
  auto named = run.model.parameters();
  std::vector<Tensor*> params;
  for (auto& p : named) params.push_back(p.tensor);

  for (std::size_t it = 0; it < optim.total_iters; ++it) {
    Batch batch;
    batch.source = draw(task.source.x, task.source.y, optim.batch_size, rs);
    batch.target = draw(task.target_labeled.x, task.target_labeled.y, optim.batch_size, rl);
    batch.unlabeled = draw_x(task.target_unlabeled.x, optim.batch_size, ru);
    if (method == Method::FullT) {
      batch.source = LabeledBatch{};
      batch.target = draw(full_x, full_y, optim.batch_size, rl);
    }

    Graph g;
    BoundModel bm = bind(g, run.model);
    Objective obj;
    switch (method) {
      case Method::Lirr:
      case Method::LirrCosc:
        obj = loss_lirr_total(g, bm, batch, cfg);
        break;
      case Method::Dann:
        obj = loss_dann(g, bm, batch, cfg);
        break;
      case Method::Irm:
        obj = loss_irm_baseline(g, bm, batch, it < warmup ? 1.0 : optim.irm_penalty_weight,
                                cfg.task_kind);
        break;
      case Method::SPlusT:
      case Method::FullT:
        obj = loss_s_plus_t(g, bm, batch, cfg.task_kind);
        break;
    }
    const double lr = optim.lr_at(it);
    const double loss_value = g.scalar(obj.loss);
    if (!std::isfinite(loss_value) || loss_value > 1e6 || !std::isfinite(obj.report.l_total)) {
      run.diverged = true;
      run.diagnostic = "diverged at iteration " + std::to_string(it) + ": loss " +
                       format_double(loss_value);
      break;
    }
    run.losses.push_back(obj.report);
    run.lrs.push_back(lr);

    const Gradients grads = g.backward(obj.loss);
    std::vector<const Tensor*> gs;
    gs.reserve(bm.params.size());
    for (Var v : bm.params) gs.push_back(&grads[v]);
    sgd_step(params, gs, state, lr, optim.momentum, optim.weight_decay);
  }
  if (!run.diverged && !model_finite(run.model)) {
    run.diverged = true;
    run.diagnostic = "non-finite parameters after training";
  }
  run.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!run.diverged) {
    run.src_metric = evaluate(run.model, task.source, cfg.task_kind);
    run.tgt_metric = evaluate(run.model, task.test_target, cfg.task_kind);
  }
  return run;
}

double evaluate(const LirrModel& model, const LabeledSet& set, TaskKind kind) {
  if (set.size() == 0) throw ContractError("evaluate on an empty set");
  const Tensor out = predict(model, set.x);
  double acc = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (kind == TaskKind::Classification) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < out.cols(); ++c) {
        if (out(i, c) > out(i, best)) best = c;
      }
      acc += static_cast<double>(best) == set.y[i] ? 1.0 : 0.0;
    } else {
      acc += std::fabs(out(i, 0) - set.y[i]);
    }
  }
  return acc / static_cast<double>(set.size());
}

void write_metrics_csv(const RunRecord& run, const std::string& path) {
  std::ostringstream os;
  os << "iter,l_i,l_d,l_rep,l_risk,l_total,lr\n";
  for (std::size_t i = 0; i < run.losses.size(); ++i) {
    const LossReport& r = run.losses[i];
    os << i << ',' << format_double(r.l_i) << ',' << format_double(r.l_d) << ','
       << format_double(r.l_rep) << ',' << format_double(r.l_risk) << ','
       << format_double(r.l_total) << ',' << format_double(run.lrs[i]) << '\n';
  }
  if (run.diverged) {
    os << "final,nan,nan\n";
  } else {
    os << "final," << format_double(run.src_metric) << ',' << format_double(run.tgt_metric) << '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << os.str();
}

}  // namespace lirr

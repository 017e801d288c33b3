#include "lirr/models.hpp"

#include <cmath>

#include "lirr/errors.hpp"
#include "lirr/rng.hpp"

namespace lirr {

const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

const char* to_string(TaskKind k) {
  return k == TaskKind::Classification ? "classification" : "regression";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "classification") return TaskKind::Classification;
  if (s == "regression") return TaskKind::Regression;
  throw ConfigError("unknown task kind '" + s + "'");
}

Mlp Mlp::init(const MlpSpec& spec) {
  if (spec.layer_sizes.size() < 2) {
    throw DimensionError("an MLP needs at least one layer (input and output widths)");
  }
  for (std::size_t w : spec.layer_sizes) {
    if (w == 0) throw DimensionError("MLP layer widths must be positive");
  }
  Rng rng(spec.seed);
  Mlp mlp;
  mlp.activation = spec.activation;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Linear layer{Tensor(fan_in, fan_out), Tensor(1, fan_out)};
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

ModelSpecs make_specs(const ModelConfig& cfg) {
  auto child = [&](const char* name) { return SeedSequence(cfg.seed).add(name).value(); };
  ModelSpecs s;
  s.task_kind = cfg.task_kind;
  s.encoder.layer_sizes.push_back(cfg.input_dim);
  for (std::size_t h : cfg.encoder_hidden) s.encoder.layer_sizes.push_back(h);
  s.encoder.layer_sizes.push_back(cfg.feature_dim);
  s.encoder.activation = cfg.activation;
  s.encoder.seed = child("encoder");
  s.invariant = {{cfg.feature_dim, cfg.head_hidden, cfg.num_outputs}, cfg.activation,
                 child("invariant")};
  s.dependent = {{cfg.feature_dim + 1, cfg.head_hidden, cfg.num_outputs}, cfg.activation,
                 child("dependent")};
  s.domain = {{cfg.feature_dim, cfg.head_hidden, 1}, cfg.activation, child("domain")};
  if (cfg.cosine_head) s.cosine_classes = cfg.num_outputs;
  s.cosine_temperature = cfg.cosine_temperature;
  s.cosine_seed = child("cosine");
  return s;
}

LirrModel init_model(const ModelSpecs& specs) {
  auto widths = [](const MlpSpec& s, std::size_t i) {
    if (s.layer_sizes.size() < 2) {
      throw DimensionError("an MLP needs at least one layer (input and output widths)");
    }
    return i == 0 ? s.layer_sizes.front() : s.layer_sizes.back();
  };
  const std::size_t z = widths(specs.encoder, 1);
  if (widths(specs.invariant, 0) != z) {
    throw DimensionError("f_i input width " + std::to_string(widths(specs.invariant, 0)) +
                         " != encoder output width " + std::to_string(z));
  }
  if (widths(specs.dependent, 0) != z + 1) {
    throw DimensionError("f_d input width " + std::to_string(widths(specs.dependent, 0)) +
                         " != encoder output width + 1 (" + std::to_string(z + 1) + ")");
  }
  if (widths(specs.domain, 0) != z || widths(specs.domain, 1) != 1) {
    throw DimensionError("domain classifier must map width " + std::to_string(z) + " to 1");
  }
  if (widths(specs.invariant, 1) != widths(specs.dependent, 1)) {
    throw DimensionError("f_i and f_d output widths differ");
  }
  if (specs.task_kind == TaskKind::Regression && widths(specs.invariant, 1) != 1) {
    throw DimensionError("regression heads must have a single output");
  }
  if (specs.task_kind == TaskKind::Classification && widths(specs.invariant, 1) < 2) {
    throw DimensionError("classification heads need at least two outputs");
  }

  LirrModel m;
  m.task_kind = specs.task_kind;
  m.encoder = Mlp::init(specs.encoder);
  m.invariant = Mlp::init(specs.invariant);
  m.dependent = Mlp::init(specs.dependent);
  m.domain = Mlp::init(specs.domain);
  if (specs.cosine_classes) {
    if (specs.task_kind != TaskKind::Classification) {
      throw ConfigError("the cosine head only applies to classification");
    }
    if (!(specs.cosine_temperature > 0.0)) {
      throw ParameterError("cosine temperature must be positive");
    }
    Rng rng(specs.cosine_seed);
    CosineHead head{Tensor(*specs.cosine_classes, z), specs.cosine_temperature};
    for (double& w : head.weight.data()) w = rng.normal();
    m.cosine = std::move(head);
  }
  return m;
}

LirrModel init_model(const ModelConfig& cfg) {
  LirrModel m = init_model(make_specs(cfg));
  m.config = cfg;
  return m;
}

namespace {

template <typename Fn>
void for_each_param(Mlp& mlp, const std::string& prefix, Fn&& fn) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    fn(prefix + "." + std::to_string(l) + ".weight", mlp.layers[l].weight);
    fn(prefix + "." + std::to_string(l) + ".bias", mlp.layers[l].bias);
  }
}

BoundMlp bind_mlp(Graph& g, const Mlp& mlp, bool trainable, std::vector<Var>& all) {
  BoundMlp b;
  b.activation = mlp.activation;
  for (const Linear& l : mlp.layers) {
    Var w = trainable ? g.parameter(l.weight) : g.constant(l.weight);
    Var bias = trainable ? g.parameter(l.bias) : g.constant(l.bias);
    all.push_back(w);
    all.push_back(bias);
    b.layers.emplace_back(w, bias);
  }
  return b;
}

BoundModel bind_impl(Graph& g, const LirrModel& m, bool trainable) {
  BoundModel b;
  b.encoder = bind_mlp(g, m.encoder, trainable, b.params);
  b.invariant = bind_mlp(g, m.invariant, trainable, b.params);
  b.dependent = bind_mlp(g, m.dependent, trainable, b.params);
  b.domain = bind_mlp(g, m.domain, trainable, b.params);
  if (m.cosine) {
    Var w = trainable ? g.parameter(m.cosine->weight) : g.constant(m.cosine->weight);
    b.params.push_back(w);
    b.cosine_weight = w;
    b.cosine_temperature = m.cosine->temperature;
  }
  return b;
}

}  // namespace

std::vector<NamedTensor> LirrModel::parameters() {
  std::vector<NamedTensor> out;
  auto push = [&](const std::string& name, Tensor& t) { out.push_back({name, &t}); };
  for_each_param(encoder, "encoder", push);
  for_each_param(invariant, "invariant", push);
  for_each_param(dependent, "dependent", push);
  for_each_param(domain, "domain", push);
  if (cosine) out.push_back({"cosine.weight", &cosine->weight});
  return out;
}

std::vector<const Tensor*> LirrModel::parameters() const {
  std::vector<const Tensor*> out;
  for (auto& p : const_cast<LirrModel*>(this)->parameters()) out.push_back(p.tensor);
  return out;
}

BoundModel bind(Graph& g, const LirrModel& model) { return bind_impl(g, model, true); }

BoundModel bind_frozen(Graph& g, const LirrModel& model) { return bind_impl(g, model, false); }

Var forward_mlp(Graph& g, const BoundMlp& mlp, Var x) {
  Var h = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    h = g.add_row(g.matmul(h, mlp.layers[l].first), mlp.layers[l].second);
    if (l + 1 < mlp.layers.size()) {
      h = mlp.activation == Activation::Relu ? g.relu(h) : g.tanh(h);
    }
  }
  return h;
}

Var encode(Graph& g, const BoundModel& m, Var x) {
  // The representation itself passes through the activation so heads see a
  // nonlinear feature map.
  Var z = forward_mlp(g, m.encoder, x);
  return m.encoder.activation == Activation::Relu ? g.relu(z) : g.tanh(z);
}

Var forward_fi(Graph& g, const BoundModel& m, Var z) {
  if (m.cosine_weight) return cosine_logits(g, *m.cosine_weight, m.cosine_temperature, z);
  return forward_mlp(g, m.invariant, z);
}

Var forward_fd(Graph& g, const BoundModel& m, Var z, int domain) {
  if (domain != 0 && domain != 1) {
    throw ParameterError("domain flag must be 0 (source) or 1 (target), got " +
                         std::to_string(domain));
  }
  const std::size_t n = g.value(z).rows();
  Var channel = g.constant(Tensor(n, 1, static_cast<double>(domain)));
  return forward_mlp(g, m.dependent, g.concat_cols(z, channel));
}

Var domain_logits(Graph& g, const BoundModel& m, Var z, double lambda) {
  return forward_mlp(g, m.domain, g.grad_reverse(z, lambda));
}

Var forward_domain_classifier(Graph& g, const BoundModel& m, Var z, double lambda) {
  return g.sigmoid(domain_logits(g, m, z, lambda));
}

Var cosine_logits(Graph& g, Var weight, double temperature, Var z) {
  if (!(temperature > 0.0)) throw ParameterError("cosine temperature must be positive");
  const Tensor& w = g.value(weight);
  const Tensor& zv = g.value(z);
  if (w.cols() != zv.cols()) {
    throw DimensionError("cosine_logits: feature width " + std::to_string(zv.cols()) +
                         " != weight width " + std::to_string(w.cols()));
  }
  Var zn = g.normalize_rows(z);
  Var wn = g.normalize_rows(weight);
  return g.scale(g.matmul(zn, g.transpose(wn)), 1.0 / temperature);
}

Tensor features(const LirrModel& model, const Tensor& x) {
  Graph g;
  BoundModel b = bind_frozen(g, model);
  return g.value(encode(g, b, g.constant(x)));
}

Tensor predict(const LirrModel& model, const Tensor& x) {
  Graph g;
  BoundModel b = bind_frozen(g, model);
  return g.value(forward_fi(g, b, encode(g, b, g.constant(x))));
}

}  // namespace lirr

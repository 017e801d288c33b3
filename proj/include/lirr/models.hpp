#pragma once

// Networks of the LIRR setup: encoder g, invariant predictor f_i, domain
// dependent predictor f_d (fed z plus a constant domain channel) and the
// domain classifier C. f_i may be replaced by a cosine classification head.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lirr/graph.hpp"
#include "lirr/tensor.hpp"

namespace lirr {

enum class Activation { Relu, Tanh };
enum class TaskKind { Classification, Regression };

const char* to_string(Activation a);
const char* to_string(TaskKind k);
Activation parse_activation(const std::string& s);
TaskKind parse_task_kind(const std::string& s);

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // input width first, output width last
  Activation activation = Activation::Relu;
  std::uint64_t seed = 0;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

/// Fully connected stack; the activation is applied between layers, not after the last.
struct Mlp {
  std::vector<Linear> layers;
  Activation activation = Activation::Relu;

  static Mlp init(const MlpSpec& spec);
  std::size_t in_width() const { return layers.front().weight.rows(); }
  std::size_t out_width() const { return layers.back().weight.cols(); }
};

struct CosineHead {
  Tensor weight;  // classes x dim
  double temperature = 0.05;
};

/// Widths and seeds for a whole model.
struct ModelConfig {
  std::size_t input_dim = 2;
  std::vector<std::size_t> encoder_hidden = {64, 64};
  std::size_t feature_dim = 16;
  std::size_t head_hidden = 32;
  std::size_t num_outputs = 2;  // classes, or 1 for regression
  Activation activation = Activation::Relu;
  TaskKind task_kind = TaskKind::Classification;
  bool cosine_head = false;
  double cosine_temperature = 0.05;
  std::uint64_t seed = 0;
};

struct ModelSpecs {
  MlpSpec encoder;
  MlpSpec invariant;
  MlpSpec dependent;
  MlpSpec domain;
  std::optional<std::size_t> cosine_classes;
  double cosine_temperature = 0.05;
  std::uint64_t cosine_seed = 0;
  TaskKind task_kind = TaskKind::Classification;
};

ModelSpecs make_specs(const ModelConfig& cfg);

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct LirrModel {
  Mlp encoder;
  Mlp invariant;
  Mlp dependent;
  Mlp domain;
  std::optional<CosineHead> cosine;
  TaskKind task_kind = TaskKind::Classification;
  ModelConfig config;  // provenance for checkpoints

  /// All trainable tensors in a fixed order with stable names.
  std::vector<NamedTensor> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t num_outputs() const { return invariant.out_width(); }
};

/// Validates widths and initializes deterministically from the seeds in `specs`.
LirrModel init_model(const ModelSpecs& specs);
LirrModel init_model(const ModelConfig& cfg);

/// Parameter leaves of one model recorded on a Graph.
struct BoundMlp {
  std::vector<std::pair<Var, Var>> layers;
  Activation activation = Activation::Relu;
};

struct BoundModel {
  BoundMlp encoder;
  BoundMlp invariant;
  BoundMlp dependent;
  BoundMlp domain;
  std::optional<Var> cosine_weight;
  double cosine_temperature = 0.05;
  /// Same order as LirrModel::parameters().
  std::vector<Var> params;
};

BoundModel bind(Graph& g, const LirrModel& model);
/// Records the model's tensors as constants (no gradients needed).
BoundModel bind_frozen(Graph& g, const LirrModel& model);

Var forward_mlp(Graph& g, const BoundMlp& mlp, Var x);
Var encode(Graph& g, const BoundModel& m, Var x);
/// f_i(z): logits, or a single regression output.
Var forward_fi(Graph& g, const BoundModel& m, Var z);
/// f_d(concat(z, domain channel)); domain must be 0 (source) or 1 (target).
Var forward_fd(Graph& g, const BoundModel& m, Var z, int domain);
/// Logit of C(z) = P(source | z), computed behind a gradient reversal of `lambda`.
Var domain_logits(Graph& g, const BoundModel& m, Var z, double lambda);
/// Sigmoid probability of the source domain.
Var forward_domain_classifier(Graph& g, const BoundModel& m, Var z, double lambda);
/// (normalize(z) . normalize(W)^T) / temperature
Var cosine_logits(Graph& g, Var weight, double temperature, Var z);

/// Plain inference: f_i(g(x)).
Tensor predict(const LirrModel& model, const Tensor& x);
/// Encoder features g(x).
Tensor features(const LirrModel& model, const Tensor& x);

}  // namespace lirr

#pragma once

// Synthetic source/target generative laws with closed-form Bayes predictors.
//
// Kinds and their parameters (all reals, overridable by name):
//
//   covariate_shift       y = 1[x1 + x2 > 0] flipped w.p. label_noise in both
//                         domains; x ~ N(mean_d, input_std^2 I).
//   label_shift           x | y ~ N(±class_offset (1,1), class_std^2 I); only the
//                         class prior differs (source_prior1 vs target_prior1).
//   conditional_shift     x1 | y ~ N(±invariant_mean, 1) in both domains;
//                         x2 | y ~ N(±spurious_mean * s_d, spurious_std^2) with
//                         s_S = 1 and s_T = target_spurious_scale.
//   two_moons_rotation    interleaved half circles with Gaussian noise, centred
//                         at the origin; the target is rotated by rotation_deg.
//   regression_sine_shift y = sin(x) + offset_d + N(0, noise_std^2), x scalar
//                         ~ N(x_mean_d, x_std^2); offset_S = 0, offset_T = offset.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lirr/models.hpp"
#include "lirr/rng.hpp"
#include "lirr/tensor.hpp"

namespace lirr {

enum class ScenarioKind {
  CovariateShift,
  LabelShift,
  ConditionalShift,
  TwoMoonsRotation,
  RegressionSineShift,
};

enum class Domain { Source = 0, Target = 1 };

const char* to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);
const char* to_string(Domain d);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::CovariateShift;
  std::map<std::string, double> params;
  /// E|Y - f_d(X)| for each domain under the generative law.
  double noise_source = 0.0;
  double noise_target = 0.0;

  double param(const std::string& name) const;
  TaskKind task_kind() const;
  std::size_t feature_dim() const;
  std::size_t num_outputs() const { return task_kind() == TaskKind::Classification ? 2 : 1; }
};

/// Default parameters for a kind merged with overrides; unknown names are
/// rejected. Noise levels are filled in.
ScenarioSpec make_scenario(ScenarioKind kind, const std::map<std::string, double>& overrides = {});

/// P(y = 1 | x) for classification; the conditional median for regression.
double bayes_predict(const ScenarioSpec& spec, Domain domain, std::span<const double> x);

struct DomainSample {
  Tensor x;
  std::vector<double> y;
};

DomainSample sample_domain(const ScenarioSpec& spec, Domain domain, std::size_t count, Rng& rng);

/// Noise level computed from the law: exact where closed form exists,
/// otherwise E_x[2 f(x)(1 - f(x))] over a fixed large draw.
double noise_level(const ScenarioSpec& spec, Domain domain);

}  // namespace lirr

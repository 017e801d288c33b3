#include "lirr/scenario.hpp"

#include <cmath>
#include <numbers>

#include "lirr/errors.hpp"

namespace lirr {

namespace {

using Params = std::map<std::string, double>;

Params defaults(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::CovariateShift:
      return {{"source_mean_x1", -1.0}, {"source_mean_x2", 1.0}, {"target_mean_x1", 1.0},
              {"target_mean_x2", -1.0}, {"input_std", 1.0},      {"label_noise", 0.02}};
    case ScenarioKind::LabelShift:
      return {{"class_offset", 0.75}, {"class_std", 1.0}, {"source_prior1", 0.5},
              {"target_prior1", 0.1}};
    case ScenarioKind::ConditionalShift:
      return {{"invariant_mean", 1.0}, {"spurious_mean", 1.5}, {"spurious_std", 0.5},
              {"target_spurious_scale", -1.0}};
    case ScenarioKind::TwoMoonsRotation:
      return {{"noise_std", 0.15}, {"rotation_deg", 30.0}};
    case ScenarioKind::RegressionSineShift:
      return {{"source_x_mean", 0.0}, {"target_x_mean", 1.0}, {"x_std", 1.5},
              {"offset", 0.5},        {"noise_std", 0.1}};
  }
  return {};
}

double sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

constexpr double kMoonShiftX = 0.5;
constexpr double kMoonShiftY = 0.25;

// Point on the class-y arc at angle t, centred.
std::array<double, 2> moon_point(int y, double t) {
  if (y == 0) return {std::cos(t) - kMoonShiftX, std::sin(t) - kMoonShiftY};
  return {1.0 - std::cos(t) - kMoonShiftX, 0.5 - std::sin(t) - kMoonShiftY};
}

// p(x | y) up to the shared Gaussian normaliser: the arc-uniform mixture
// integrated with the midpoint rule.
double moon_density(int y, double x1, double x2, double sd) {
  constexpr int kSteps = 400;
  const double inv = 1.0 / (2.0 * sd * sd);
  double acc = 0.0;
  for (int i = 0; i < kSteps; ++i) {
    const double t = std::numbers::pi * (i + 0.5) / kSteps;
    const auto c = moon_point(y, t);
    const double d1 = x1 - c[0];
    const double d2 = x2 - c[1];
    acc += std::exp(-(d1 * d1 + d2 * d2) * inv);
  }
  return acc / kSteps;
}

std::array<double, 2> rotate(double x1, double x2, double deg) {
  const double r = deg * std::numbers::pi / 180.0;
  return {std::cos(r) * x1 - std::sin(r) * x2, std::sin(r) * x1 + std::cos(r) * x2};
}

}  // namespace

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::CovariateShift: return "covariate_shift";
    case ScenarioKind::LabelShift: return "label_shift";
    case ScenarioKind::ConditionalShift: return "conditional_shift";
    case ScenarioKind::TwoMoonsRotation: return "two_moons_rotation";
    case ScenarioKind::RegressionSineShift: return "regression_sine_shift";
  }
  return "unknown";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  for (auto k : {ScenarioKind::CovariateShift, ScenarioKind::LabelShift,
                 ScenarioKind::ConditionalShift, ScenarioKind::TwoMoonsRotation,
                 ScenarioKind::RegressionSineShift}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown scenario kind '" + s + "'");
}

const char* to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

double ScenarioSpec::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ConfigError(std::string("scenario ") + to_string(kind) + " has no parameter '" +
                      name + "'");
  }
  return it->second;
}

TaskKind ScenarioSpec::task_kind() const {
  return kind == ScenarioKind::RegressionSineShift ? TaskKind::Regression
                                                    : TaskKind::Classification;
}

std::size_t ScenarioSpec::feature_dim() const {
  return kind == ScenarioKind::RegressionSineShift ? 1 : 2;
}

ScenarioSpec make_scenario(ScenarioKind kind, const std::map<std::string, double>& overrides) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.params = defaults(kind);
  for (const auto& [k, v] : overrides) {
    if (!spec.params.contains(k)) {
      throw ConfigError(std::string("scenario ") + to_string(kind) + " has no parameter '" +
                        k + "'");
    }
    if (!std::isfinite(v)) throw ConfigError("scenario parameter '" + k + "' is not finite");
    spec.params[k] = v;
  }
  auto positive = [&](const char* name) {
    if (!(spec.param(name) > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  auto probability = [&](const char* name, bool open) {
    const double p = spec.param(name);
    const bool ok = open ? (p > 0.0 && p < 1.0) : (p >= 0.0 && p <= 1.0);
    if (!ok) throw ConfigError(std::string(name) + " must be a probability");
  };
  switch (kind) {
    case ScenarioKind::CovariateShift:
      positive("input_std");
      probability("label_noise", false);
      break;
    case ScenarioKind::LabelShift:
      positive("class_std");
      probability("source_prior1", true);
      probability("target_prior1", true);
      break;
    case ScenarioKind::ConditionalShift:
      positive("spurious_std");
      break;
    case ScenarioKind::TwoMoonsRotation:
      positive("noise_std");
      break;
    case ScenarioKind::RegressionSineShift:
      positive("x_std");
      positive("noise_std");
      break;
  }
  spec.noise_source = noise_level(spec, Domain::Source);
  spec.noise_target = noise_level(spec, Domain::Target);
  return spec;
}

double bayes_predict(const ScenarioSpec& spec, Domain domain, std::span<const double> x) {
  if (x.size() != spec.feature_dim()) {
    throw DimensionError("bayes_predict: expected " + std::to_string(spec.feature_dim()) +
                         " features, got " + std::to_string(x.size()));
  }
  const bool target = domain == Domain::Target;
  switch (spec.kind) {
    case ScenarioKind::CovariateShift: {
      const double rho = spec.param("label_noise");
      return x[0] + x[1] > 0.0 ? 1.0 - rho : rho;
    }
    case ScenarioKind::LabelShift: {
      const double prior = spec.param(target ? "target_prior1" : "source_prior1");
      const double a = spec.param("class_offset");
      const double s = spec.param("class_std");
      const double logit = std::log(prior / (1.0 - prior)) + 2.0 * a * (x[0] + x[1]) / (s * s);
      return sigmoid(logit);
    }
    case ScenarioKind::ConditionalShift: {
      const double a = spec.param("invariant_mean");
      const double b = spec.param("spurious_mean") *
                       (target ? spec.param("target_spurious_scale") : 1.0);
      const double s2 = spec.param("spurious_std");
      return sigmoid(2.0 * a * x[0] + 2.0 * b * x[1] / (s2 * s2));
    }
    case ScenarioKind::TwoMoonsRotation: {
      auto p = target ? rotate(x[0], x[1], -spec.param("rotation_deg"))
                      : std::array<double, 2>{x[0], x[1]};
      const double sd = spec.param("noise_std");
      const double p0 = moon_density(0, p[0], p[1], sd);
      const double p1 = moon_density(1, p[0], p[1], sd);
      const double z = p0 + p1;
      return z > 0.0 ? p1 / z : 0.5;
    }
    case ScenarioKind::RegressionSineShift:
      return std::sin(x[0]) + (target ? spec.param("offset") : 0.0);
  }
  throw ConfigError("unsupported scenario kind");
}

DomainSample sample_domain(const ScenarioSpec& spec, Domain domain, std::size_t count, Rng& rng) {
  const std::size_t d = spec.feature_dim();
  const bool target = domain == Domain::Target;
  DomainSample out{Tensor(count, d), std::vector<double>(count)};
  for (std::size_t i = 0; i < count; ++i) {
    auto x = out.x.row(i);
    double& y = out.y[i];
    switch (spec.kind) {
      case ScenarioKind::CovariateShift: {
        const double sd = spec.param("input_std");
        x[0] = rng.normal(spec.param(target ? "target_mean_x1" : "source_mean_x1"), sd);
        x[1] = rng.normal(spec.param(target ? "target_mean_x2" : "source_mean_x2"), sd);
        const bool clean = x[0] + x[1] > 0.0;
        const bool flip = rng.bernoulli(spec.param("label_noise"));
        y = (clean != flip) ? 1.0 : 0.0;
        break;
      }
      case ScenarioKind::LabelShift: {
        const double prior = spec.param(target ? "target_prior1" : "source_prior1");
        const int label = rng.bernoulli(prior) ? 1 : 0;
        const double a = label ? spec.param("class_offset") : -spec.param("class_offset");
        const double s = spec.param("class_std");
        x[0] = rng.normal(a, s);
        x[1] = rng.normal(a, s);
        y = label;
        break;
      }
      case ScenarioKind::ConditionalShift: {
        const int label = rng.bernoulli(0.5) ? 1 : 0;
        const double sign = label ? 1.0 : -1.0;
        const double b = spec.param("spurious_mean") *
                         (target ? spec.param("target_spurious_scale") : 1.0);
        x[0] = rng.normal(sign * spec.param("invariant_mean"), 1.0);
        x[1] = rng.normal(sign * b, spec.param("spurious_std"));
        y = label;
        break;
      }
      case ScenarioKind::TwoMoonsRotation: {
        const int label = rng.bernoulli(0.5) ? 1 : 0;
        const double t = rng.uniform(0.0, std::numbers::pi);
        const auto c = moon_point(label, t);
        const double sd = spec.param("noise_std");
        double a = c[0] + rng.normal(0.0, sd);
        double b = c[1] + rng.normal(0.0, sd);
        if (target) {
          const auto r = rotate(a, b, spec.param("rotation_deg"));
          a = r[0];
          b = r[1];
        }
        x[0] = a;
        x[1] = b;
        y = label;
        break;
      }
      case ScenarioKind::RegressionSineShift: {
        x[0] = rng.normal(spec.param(target ? "target_x_mean" : "source_x_mean"),
                          spec.param("x_std"));
        y = std::sin(x[0]) + (target ? spec.param("offset") : 0.0) +
            rng.normal(0.0, spec.param("noise_std"));
        break;
      }
    }
  }
  return out;
}

double noise_level(const ScenarioSpec& spec, Domain domain) {
  switch (spec.kind) {
    case ScenarioKind::CovariateShift: {
      const double rho = spec.param("label_noise");
      return 2.0 * rho * (1.0 - rho);
    }
    case ScenarioKind::RegressionSineShift:
      // Gaussian residual around the median: E|e| = sigma * sqrt(2 / pi).
      return spec.param("noise_std") * std::sqrt(2.0 / std::numbers::pi);
    default:
      break;
  }
  constexpr std::size_t kDraws = 50000;
  Rng rng(SeedSequence(0x6e6f697365ULL).add(to_string(spec.kind)).add(static_cast<std::uint64_t>(domain)).value());
  const DomainSample s = sample_domain(spec, domain, kDraws, rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < kDraws; ++i) {
    const double f = bayes_predict(spec, domain, s.x.row(i));
    acc += 2.0 * f * (1.0 - f);
  }
  return acc / static_cast<double>(kDraws);
}

}  // namespace lirr

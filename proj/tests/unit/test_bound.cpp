#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lirr/bound.hpp"
#include "lirr/errors.hpp"
#include "support/random.hpp"

using namespace lirr;
using lirr::testing::random_tensor;

namespace {

std::vector<double> random_dist(std::size_t k, Rng& rng) {
  std::vector<double> v(k);
  double t = 0.0;
  for (double& x : v) t += (x = rng.uniform() + 1e-3);
  for (double& x : v) x /= t;
  return v;
}

// max_A |P(A) - Q(A)| over every subset of cells, enumerated directly.
double powerset_distance(const std::vector<double>& p, const std::vector<double>& q) {
  double best = 0.0;
  for (std::uint32_t bits = 0; bits < (1u << p.size()); ++bits) {
    double gap = 0.0;
    for (std::size_t z = 0; z < p.size(); ++z) {
      if ((bits >> z) & 1u) gap += p[z] - q[z];
    }
    best = std::max(best, std::fabs(gap));
  }
  return best;
}

double normal_pdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Noiseless joint whose labeling, shared by both domains, is an arbitrary
// cell subset rather than a mixture of stumps.
DiscreteJoint random_free_joint(std::size_t nz, Rng& rng) {
  std::vector<double> table(4 * nz);
  std::vector<double> label(nz);
  for (double& f : label) f = rng.bernoulli(0.5) ? 1.0 : 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    const auto pz = random_dist(nz, rng);
    for (std::size_t z = 0; z < nz; ++z) {
      const double f = label[z];
      table[(d * 2 + 0) * nz + z] = 0.5 * pz[z] * (1 - f);
      table[(d * 2 + 1) * nz + z] = 0.5 * pz[z] * f;
    }
  }
  double t = 0.0;
  for (double v : table) t += v;
  for (double& v : table) v /= t;
  return DiscreteJoint(2, nz, table);
}

}  // namespace

TEST(Bound, EmpiricalRisk) {
  const std::vector<double> y = {0, 1, 1, 0};
  EXPECT_EQ(empirical_risk(y, y, LossKind::ZeroOne), 0.0);
  const std::vector<double> ones = {1, 1, 1, 1};
  EXPECT_EQ(empirical_risk(ones, y, LossKind::ZeroOne), 0.5);
  Rng rng(1);
  std::vector<double> p(50), t(50);
  double manual = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    p[i] = rng.normal();
    t[i] = rng.normal();
    manual += std::fabs(p[i] - t[i]);
  }
  EXPECT_NEAR(empirical_risk(p, t, LossKind::Absolute), manual / 50.0, 1e-15);
  EXPECT_THROW(empirical_risk(std::vector<double>{1.0}, y, LossKind::ZeroOne), DimensionError);
}

TEST(Bound, StumpClassSize) {
  const FiniteHypothesisClass cls = stump_class(32, 32);
  EXPECT_EQ(cls.size(), 2u * 33u * 2u);
  EXPECT_EQ(cls.dimension, 3);
}

TEST(Bound, DistanceOfIdenticalSamplesIsZero) {
  Rng rng(2);
  const Tensor x = random_tensor(300, 2, rng);
  const CellGrid grid = CellGrid::fit(x, x, 16);
  const FiniteHypothesisClass cls = stump_class(grid);
  EXPECT_EQ(d_h(cls, grid, x, x), 0.0);
  EXPECT_EQ(d_h_delta_h(cls, grid, x, x), 0.0);
}

TEST(Bound, SeparatedSupportsGiveOne) {
  Rng rng(3);
  Tensor a = random_tensor(200, 2, rng, 0.1);
  Tensor b = random_tensor(200, 2, rng, 0.1);
  for (std::size_t i = 0; i < 200; ++i) {
    a(i, 0) -= 5.0;
    b(i, 0) += 5.0;
  }
  const CellGrid grid = CellGrid::fit(a, b, 32);
  const FiniteHypothesisClass cls = stump_class(grid);
  EXPECT_DOUBLE_EQ(d_h(cls, grid, a, b), 1.0);
}

TEST(Bound, AllSubsetsMatchesPowersetOracle) {
  Rng rng(4);
  for (std::size_t nz : {3u, 7u, 12u}) {
    const auto p = random_dist(nz, rng);
    const auto q = random_dist(nz, rng);
    EXPECT_NEAR(d_h(all_subsets_class(nz), p, q), powerset_distance(p, q), 1e-15);
  }
}

TEST(Bound, DeltaClassMatchesXorEnumeration) {
  Rng rng(5);
  FiniteHypothesisClass cls;
  cls.name = "random";
  cls.num_cells = 20;
  for (int i = 0; i < 50; ++i) {
    Mask m(20);
    for (auto& v : m) v = rng.bernoulli(0.5);
    cls.hypotheses.push_back(m);
  }
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_dist(20, rng);
    const auto q = random_dist(20, rng);
    const double direct = d_h_delta_h(cls, p, q);
    EXPECT_NEAR(direct, d_h(xor_class(cls), p, q), 1e-15);
    EXPECT_GE(direct, 0.0);
  }
}

TEST(Bound, DisagreementTerm) {
  const ScenarioSpec cov = make_scenario(ScenarioKind::CovariateShift);
  Rng rng(6);
  const Tensor xs = random_tensor(500, 2, rng);
  const Tensor xt = random_tensor(500, 2, rng);
  EXPECT_EQ(disagreement_term(cov, xs, xt), 0.0);
  const Predictor fs = [](std::span<const double> x) { return 0.3 * std::tanh(x[0]); };
  const Predictor ft = [](std::span<const double> x) { return 0.3 * std::tanh(x[0]) + 0.125; };
  EXPECT_NEAR(disagreement_term(fs, ft, xs, xt), 0.125, 1e-15);
}

TEST(Bound, DisagreementMatchesQuadrature) {
  // Label shift: f_d depends on u = x1 + x2, u | y ~ N(+-2a, 2 s^2).
  const ScenarioSpec spec = make_scenario(ScenarioKind::LabelShift);
  const double a = spec.param("class_offset"), s = spec.param("class_std");
  const double ps = spec.param("source_prior1"), pt = spec.param("target_prior1");
  auto f = [&](double u, double prior) {
    return sigmoid(std::log(prior / (1 - prior)) + 2 * a * u / (s * s));
  };
  auto expect_under = [&](double prior) {
    double acc = 0.0;
    const double h = 1e-3;
    for (double u = -20; u <= 20; u += h) {
      const double dens = prior * normal_pdf(u, 2 * a, 2 * s * s) +
                          (1 - prior) * normal_pdf(u, -2 * a, 2 * s * s);
      acc += h * dens * std::fabs(f(u, ps) - f(u, pt));
    }
    return acc;
  };
  const double oracle = std::min(expect_under(ps), expect_under(pt));
  Rng r1(7), r2(8);
  const DomainSample s1 = sample_domain(spec, Domain::Source, 1000000, r1);
  const DomainSample s2 = sample_domain(spec, Domain::Target, 1000000, r2);
  EXPECT_NEAR(disagreement_term(spec, s1.x, s2.x), oracle, 5e-3);
}

TEST(Bound, NoiseTerm) {
  Rng rng(9);
  const ScenarioSpec clean = make_scenario(ScenarioKind::CovariateShift, {{"label_noise", 0.0}});
  DomainSample s = sample_domain(clean, Domain::Source, 2000, rng);
  DomainSample t = sample_domain(clean, Domain::Target, 2000, rng);
  EXPECT_EQ(noise_term(clean, {s.x, s.y, Domain::Source}, {t.x, t.y, Domain::Target}), 0.0);
  // Flip rate 0.1: E|Y - E[Y|X]| = 2 * 0.1 * 0.9 per domain.
  const ScenarioSpec flip = make_scenario(ScenarioKind::CovariateShift, {{"label_noise", 0.1}});
  s = sample_domain(flip, Domain::Source, 200000, rng);
  t = sample_domain(flip, Domain::Target, 200000, rng);
  const double v = noise_term(flip, {s.x, s.y, Domain::Source}, {t.x, t.y, Domain::Target});
  EXPECT_NEAR(v, 0.36, 0.005);
  EXPECT_GE(v, 0.0);
}

TEST(Bound, ConcentrationTerm) {
  const double hand = std::sqrt(8.0 * 3 / 100 * (1 + std::log(100.0 / 3)) + 2.0 / 100 * std::log(20.0) +
                                8.0 * 3 / 2000 * (1 + std::log(2000.0 / 3)) + 2.0 / 2000 * std::log(20.0));
  EXPECT_NEAR(concentration_term(2000, 100, 3, 0.05), hand, 1e-12);
  EXPECT_LT(concentration_term(4000, 100, 3, 0.05), concentration_term(2000, 100, 3, 0.05));
  EXPECT_LT(concentration_term(2000, 200, 3, 0.05), concentration_term(2000, 100, 3, 0.05));
  EXPECT_LT(concentration_term(2000, 100, 3, 0.999), concentration_term(2000, 100, 3, 0.05));
  EXPECT_THROW(concentration_term(2000, 100, 3, 0.0), ParameterError);
  EXPECT_THROW(concentration_term(2, 100, 3, 0.05), ParameterError);
}

TEST(Bound, ReportWeightsAndAlignedCovariateTerms) {
  const ScenarioSpec spec = make_scenario(
      ScenarioKind::CovariateShift, {{"target_mean_x1", -1.0}, {"target_mean_x2", 1.0}});
  const SemiDaTask task = gen_task(spec, 2000, 100, 2000, 1);
  BoundOptions opts;
  opts.mode = BoundMode::Population;
  const BatchPredictor h = [](const Tensor& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = x(i, 0) + x(i, 1) > 0 ? 1.0 : 0.0;
    return out;
  };
  const BoundReport r = bound_report(h, task, opts);
  EXPECT_DOUBLE_EQ(r.weight_s + r.weight_t, 1.0);
  EXPECT_LT(r.distance_term, 0.05);
  EXPECT_LT(r.disagreement_term, 0.05);
  EXPECT_EQ(r.concentration_term, 0.0);
  EXPECT_DOUBLE_EQ(r.bound_total, r.assemble());
  opts.mode = BoundMode::FiniteSample;
  const BoundReport f = bound_report(h, task, opts);
  EXPECT_NEAR(f.concentration_term, concentration_term(2000, 100, 3, 0.05), 1e-15);
  EXPECT_NE(f.csv_row().find("finite_sample"), std::string::npos);
}

TEST(Bound, RegressionReportUsesThresholdClass) {
  const SemiDaTask task = gen_task(make_scenario(ScenarioKind::RegressionSineShift), 500, 20, 500, 2, {200, true});
  const BatchPredictor h = [](const Tensor& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = std::sin(x(i, 0));
    return out;
  };
  const BoundReport r = bound_report(h, task, {});
  EXPECT_EQ(r.dimension, 2);
  EXPECT_EQ(r.hypothesis_class, "regression_thresholds");
  EXPECT_GE(r.distance_term, 0.0);
  EXPECT_LE(r.distance_term, 1.0);
}

TEST(Bound, PopulationBoundCoversTargetRiskOnDiscreteTasks) {
  Rng rng(10);
  const FiniteHypothesisClass cls = stump_class(4, 4);
  for (int i = 0; i < 50; ++i) {
    const DiscreteJoint joint = random_stump_joint(4, 4, rng);
    const Mask& h = cls.hypotheses[rng.index(cls.size())];
    const BoundReport r = bound_report_exact(joint, cls, h, 2000, 100);
    EXPECT_GE(r.bound_total, *r.heldout_risk_t - 1e-12);
  }
}

TEST(Bound, RiskGapHoldsOnIdenticalDomains) {
  Rng rng(11);
  const DiscreteJoint base = random_stump_joint(3, 3, rng);
  std::vector<double> table = base.table();
  const std::size_t half = table.size() / 2;
  for (std::size_t i = 0; i < half; ++i) table[half + i] = table[i];
  double t = 0.0;
  for (double v : table) t += v;
  for (double& v : table) v /= t;
  const DiscreteJoint joint(2, 9, table);
  const RiskGapCheck c = risk_gap_check(joint, stump_class(3, 3));
  EXPECT_TRUE(c.holds);
  EXPECT_GE(c.rhs, 0.0);
  for (double v : c.lhs) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Bound, RiskGapHoldsOnStumpMixtures) {
  Rng rng(12);
  const FiniteHypothesisClass cls = stump_class(4, 3);
  for (int i = 0; i < 200; ++i) {
    const RiskGapCheck c = risk_gap_check(random_stump_joint(4, 3, rng), cls);
    EXPECT_TRUE(c.holds) << "instance " << i << " violation " << c.max_violation;
  }
}

TEST(Bound, ZeroNoiseRhsIsDistancePlusDisagreement) {
  // Deterministic labels from one stump per domain.
  const FiniteHypothesisClass cls = stump_class(3, 3);
  Rng rng(13);
  std::vector<double> table(4 * 9, 0.0);
  for (std::size_t d = 0; d < 2; ++d) {
    const auto pz = random_dist(9, rng);
    const Mask& f = cls.hypotheses[rng.index(cls.size())];
    for (std::size_t z = 0; z < 9; ++z) table[(d * 2 + f[z]) * 9 + z] = 0.5 * pz[z];
  }
  const DiscreteJoint joint(2, 9, table);
  const DiscreteTerms t = discrete_terms(joint, cls, cls.hypotheses[0]);
  EXPECT_EQ(t.noise_s, 0.0);
  EXPECT_EQ(t.noise_t, 0.0);
  const RiskGapCheck c = risk_gap_check(joint, cls);
  EXPECT_NEAR(c.rhs, t.distance + t.disagreement, 1e-15);
  EXPECT_TRUE(c.holds);
}

TEST(Bound, RiskGapCanFailWhenPosteriorsLeaveTheClassHull) {
  // With arbitrary posteriors the distance over stumps can miss the part of
  // the shift that matters, and the inequality is no longer guaranteed.
  Rng rng(14);
  const FiniteHypothesisClass cls = stump_class(3, 3);
  bool found = false;
  for (int i = 0; i < 20000 && !found; ++i) {
    found = !risk_gap_check(random_free_joint(9, rng), cls).holds;
  }
  EXPECT_TRUE(found);
}

TEST(Bound, MutualInformation) {
  // D independent of (Y, Z).
  Rng rng(15);
  const auto pyz = random_dist(2 * 4, rng);
  std::vector<double> table;
  for (double pd : {0.3, 0.7}) {
    for (double v : pyz) table.push_back(pd * v);
  }
  const MiDecomposition ind = mi_decomposition(DiscreteJoint(2, 4, table));
  EXPECT_NEAR(ind.i_dz, 0.0, 1e-15);
  EXPECT_NEAR(ind.i_dy_given_z, 0.0, 1e-15);
  EXPECT_NEAR(ind.i_d_yz, 0.0, 1e-15);
  // D == Y, Z constant, D uniform.
  const MiDecomposition cf = mi_decomposition(DiscreteJoint(2, 1, {0.5, 0.0, 0.0, 0.5}));
  EXPECT_NEAR(cf.i_d_yz, std::numbers::ln2, 1e-15);
  EXPECT_NEAR(cf.i_dz, 0.0, 1e-15);
  EXPECT_NEAR(cf.i_dy_given_z, std::numbers::ln2, 1e-15);
  for (int i = 0; i < 50; ++i) {
    const MiDecomposition mi = mi_decomposition(DiscreteJoint(3, 5, random_dist(30, rng)));
    EXPECT_NEAR(mi.i_d_yz, mi.i_dz + mi.i_dy_given_z, 1e-12);
  }
}

TEST(Bound, DiscreteJointValidation) {
  EXPECT_THROW(DiscreteJoint(2, 2, {0.5, 0.5}), DimensionError);
  EXPECT_THROW(DiscreteJoint(2, 1, {0.5, 0.5, 0.5, -0.5}), ParameterError);
  EXPECT_THROW(DiscreteJoint(2, 1, {0.5, 0.5, 0.5, 0.5}), ParameterError);
}

TEST(Bound, ProxyDistance) {
  Rng rng(16);
  const Tensor a = random_tensor(600, 4, rng);
  const Tensor b = random_tensor(600, 4, rng);
  EXPECT_LT(std::fabs(proxy_a_distance(a, b, 1)), 0.3);
  Tensor c = b;
  for (std::size_t i = 0; i < c.rows(); ++i) c(i, 0) += 8.0;
  EXPECT_GT(proxy_a_distance(a, c, 1), 1.9);
}

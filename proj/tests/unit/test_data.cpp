#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lirr/data.hpp"
#include "lirr/errors.hpp"
#include "lirr/scenario.hpp"
#include "support/tmpdir.hpp"

using namespace lirr;
using lirr::testing::TempDir;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  }
  return std::clamp(p, 0.0, 1.0);
}

std::vector<double> projection(const Tensor& x, const std::vector<double>* y, double label) {
  std::vector<double> out;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (y && (*y)[i] != label) continue;
    out.push_back(x(i, 0) + x(i, 1));
  }
  return out;
}

}  // namespace

TEST(Scenario, UnknownKindAndParameter) {
  EXPECT_THROW(parse_scenario_kind("nope"), ConfigError);
  EXPECT_THROW(make_scenario(ScenarioKind::LabelShift, {{"bogus", 1.0}}), ConfigError);
  EXPECT_THROW(make_scenario(ScenarioKind::LabelShift, {{"target_prior1", 1.5}}), ConfigError);
  EXPECT_THROW(make_scenario(ScenarioKind::RegressionSineShift, {{"x_std", 0.0}}), ConfigError);
}

TEST(Scenario, LabelShiftPriorsMatchConstruction) {
  const ScenarioSpec spec = make_scenario(ScenarioKind::LabelShift);
  EXPECT_EQ(spec.param("source_prior1"), 0.5);
  EXPECT_EQ(spec.param("target_prior1"), 0.1);
  Rng rng(1);
  const DomainSample t = sample_domain(spec, Domain::Target, 20000, rng);
  double ones = 0.0;
  for (double y : t.y) ones += y;
  EXPECT_NEAR(ones / 20000.0, 0.1, 0.01);
}

TEST(Scenario, LabelShiftConditionalsMatchMarginalsDiffer) {
  const ScenarioSpec spec = make_scenario(ScenarioKind::LabelShift);
  Rng rs(2), rt(3);
  const DomainSample s = sample_domain(spec, Domain::Source, 10000, rs);
  const DomainSample t = sample_domain(spec, Domain::Target, 10000, rt);
  EXPECT_GT(ks_pvalue(projection(s.x, &s.y, 0.0), projection(t.x, &t.y, 0.0)), 0.01);
  EXPECT_GT(ks_pvalue(projection(s.x, &s.y, 1.0), projection(t.x, &t.y, 1.0)), 0.01);
  EXPECT_LT(ks_pvalue(projection(s.x, nullptr, 0.0), projection(t.x, nullptr, 0.0)), 0.01);
}

TEST(Scenario, SymmetricMidpointPosteriorIsHalf) {
  const std::vector<double> origin = {0.0, 0.0};
  EXPECT_NEAR(bayes_predict(make_scenario(ScenarioKind::LabelShift), Domain::Source, origin), 0.5, 1e-15);
  EXPECT_NEAR(bayes_predict(make_scenario(ScenarioKind::ConditionalShift), Domain::Target, origin), 0.5, 1e-15);
}

TEST(Scenario, RegressionTargetIsShiftedSine) {
  const ScenarioSpec spec = make_scenario(ScenarioKind::RegressionSineShift, {{"offset", 0.7}});
  for (double x : {-2.0, 0.0, 0.3, 1.7}) {
    const std::vector<double> v = {x};
    EXPECT_EQ(bayes_predict(spec, Domain::Source, v), std::sin(x));
    EXPECT_EQ(bayes_predict(spec, Domain::Target, v), std::sin(x) + 0.7);
  }
}

TEST(Scenario, MoonsTargetIsRotatedSource) {
  const ScenarioSpec spec = make_scenario(ScenarioKind::TwoMoonsRotation);
  Rng a(4), b(4);
  const DomainSample s = sample_domain(spec, Domain::Source, 200, a);
  const DomainSample t = sample_domain(spec, Domain::Target, 200, b);
  const double th = 30.0 * std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < 200; ++i) {
    const double x = s.x(i, 0), y = s.x(i, 1);
    EXPECT_NEAR(t.x(i, 0), std::cos(th) * x - std::sin(th) * y, 1e-12);
    EXPECT_NEAR(t.x(i, 1), std::sin(th) * x + std::cos(th) * y, 1e-12);
    EXPECT_EQ(s.y[i], t.y[i]);
  }
}

TEST(Scenario, PosteriorMatchesSlabFrequency) {
  // Among draws whose posterior lies in a narrow band, the label frequency
  // matches the mean posterior.
  for (ScenarioKind kind : {ScenarioKind::LabelShift, ScenarioKind::ConditionalShift,
                            ScenarioKind::TwoMoonsRotation, ScenarioKind::CovariateShift}) {
    const ScenarioSpec spec = make_scenario(kind);
    for (Domain d : {Domain::Source, Domain::Target}) {
      Rng rng(5);
      const DomainSample s = sample_domain(spec, d, 100000, rng);
      for (double lo : {0.2, 0.45, 0.7}) {
        double freq = 0.0, post = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < s.x.rows(); ++i) {
          const double f = bayes_predict(spec, d, s.x.row(i));
          if (f < lo || f >= lo + 0.1) continue;
          freq += s.y[i];
          post += f;
          ++count;
        }
        if (count < 2000) continue;
        EXPECT_NEAR(freq / count, post / count, 0.02) << to_string(kind) << " " << lo;
      }
    }
  }
}

TEST(Scenario, NoiseLevels) {
  const ScenarioSpec clean = make_scenario(ScenarioKind::CovariateShift, {{"label_noise", 0.0}});
  EXPECT_EQ(clean.noise_source, 0.0);
  const ScenarioSpec flip = make_scenario(ScenarioKind::CovariateShift, {{"label_noise", 0.1}});
  EXPECT_NEAR(flip.noise_source + flip.noise_target, 0.36, 1e-12);
  const ScenarioSpec reg = make_scenario(ScenarioKind::RegressionSineShift);
  EXPECT_NEAR(reg.noise_source, 0.1 * std::sqrt(2.0 / std::numbers::pi), 1e-15);
}

TEST(Data, SameSeedSameTask) {
  TempDir a, b;
  const ScenarioSpec spec = make_scenario(ScenarioKind::ConditionalShift);
  save_task(gen_task(spec, 300, 20, 200, 9, {100, true}), a.str());
  save_task(gen_task(spec, 300, 20, 200, 9, {100, true}), b.str());
  for (const char* f : {"source.csv", "target_labeled.csv", "target_unlabeled.csv",
                        "test_target.csv", "scenario.txt"}) {
    EXPECT_EQ(slurp(a.str(f)), slurp(b.str(f))) << f;
  }
}

TEST(Data, SizesAndDomains) {
  const SemiDaTask t = gen_task(make_scenario(ScenarioKind::LabelShift), 500, 20, 300, 1, {50, true});
  EXPECT_EQ(t.n(), 500u);
  EXPECT_EQ(t.m(), 20u);
  EXPECT_EQ(t.k(), 300u);
  EXPECT_EQ(t.test_target.size(), 50u);
  EXPECT_EQ(t.target_unlabeled_oracle.size(), 300u);
  EXPECT_EQ(t.source.domain, Domain::Source);
  EXPECT_EQ(t.target_labeled.domain, Domain::Target);
}

TEST(Data, InvalidSizes) {
  const ScenarioSpec spec = make_scenario(ScenarioKind::LabelShift);
  EXPECT_THROW(gen_task(spec, 100, 20, 300, 1), ParameterError);  // m > n/10
  EXPECT_NO_THROW(gen_task(spec, 100, 20, 300, 1, {10, false}));
  EXPECT_THROW(gen_task(spec, 1000, 0, 300, 1), ParameterError);
  EXPECT_THROW(gen_task(spec, 1000, 40, 30, 1), ParameterError);
}

TEST(Data, SaveLoadSaveIsByteIdentical) {
  TempDir a, b;
  const SemiDaTask t = gen_task(make_scenario(ScenarioKind::TwoMoonsRotation), 400, 20, 300, 3, {80, true});
  save_task(t, a.str());
  const SemiDaTask back = load_task(a.str());
  save_task(back, b.str());
  for (const char* f : {"source.csv", "target_labeled.csv", "target_unlabeled.csv",
                        "test_target.csv", "scenario.txt"}) {
    EXPECT_EQ(slurp(a.str(f)), slurp(b.str(f))) << f;
  }
  EXPECT_TRUE(bit_identical(back.source.x, t.source.x));
  EXPECT_EQ(back.target_unlabeled_oracle, t.target_unlabeled_oracle);
}

TEST(Data, MissingLabelColumnIsParseError) {
  TempDir d;
  write(d.str("bad.csv"), "x1,x2,domain\n0.5,1.5,0\n");
  try {
    load_labeled_csv(d.str("bad.csv"), 2);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("y"), std::string::npos);
  }
}

TEST(Data, MalformedRowsReportLine) {
  TempDir d;
  write(d.str("bad.csv"), "x1,x2,y,domain\n0.5,1.5,1,0\n0.5,abc,1,0\n");
  try {
    load_labeled_csv(d.str("bad.csv"), 2);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write(d.str("short.csv"), "x1,x2,y,domain\n0.5,1\n");
  EXPECT_THROW(load_labeled_csv(d.str("short.csv"), 2), ParseError);
  write(d.str("mixed.csv"), "x1,x2,y,domain\n0.5,1,1,0\n0.5,1,1,1\n");
  EXPECT_THROW(load_labeled_csv(d.str("mixed.csv"), 2), ParseError);
}

TEST(Data, LargeTaskRoundTripIsFast) {
  TempDir d;
  const SemiDaTask t = gen_task(make_scenario(ScenarioKind::CovariateShift), 10000, 20, 2000, 4, {2000, true});
  const auto start = std::chrono::steady_clock::now();
  save_task(t, d.str());
  const SemiDaTask back = load_task(d.str());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(back.n(), 10000u);
  EXPECT_LT(secs, 1.0);
}

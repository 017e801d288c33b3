#pragma once

// Terms of the Semi-DA generalization bounds, computed exactly over finite
// hypothesis classes.
//
// Continuous inputs are binned onto a regular grid of cells; a hypothesis is
// then a 0/1 mask over cells and every distribution a histogram over cells.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lirr/data.hpp"
#include "lirr/tensor.hpp"

namespace lirr {

/// Regular grid over a box in 1 or 2 dimensions. Points outside the box
/// are clamped to the border cells.
class CellGrid {
 public:
  CellGrid(std::vector<double> lo, std::vector<double> hi, std::size_t bins);
  /// Box spanning both samples.
  static CellGrid fit(const Tensor& a, const Tensor& b, std::size_t bins = 32);

  std::size_t dims() const { return lo_.size(); }
  std::size_t bins() const { return bins_; }
  std::size_t cells() const;
  std::size_t bin(std::size_t axis, double v) const;
  std::size_t cell(std::span<const double> x) const;
  /// Bin index of `cell` along `axis`.
  std::size_t coord(std::size_t cell, std::size_t axis) const;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::size_t bins_;
};

/// Normalized histogram of the rows of x over the cells of the grid.
std::vector<double> histogram(const CellGrid& grid, const Tensor& x);

using Mask = std::vector<std::uint8_t>;

struct FiniteHypothesisClass {
  std::string name;
  std::size_t num_cells = 0;
  std::vector<Mask> hypotheses;
  /// Capacity used by the concentration term (VC or pseudo-dimension).
  int dimension = 1;

  std::size_t size() const { return hypotheses.size(); }
  void validate() const;
};

/// Axis-aligned threshold stumps with both polarities, thresholds on bin
/// boundaries (so both constants are included).
FiniteHypothesisClass stump_class(const CellGrid& grid);
/// Stumps on a bare `width` x `height` cell grid.
FiniteHypothesisClass stump_class(std::size_t width, std::size_t height);
/// Every subset of `num_cells` cells (num_cells <= 16).
FiniteHypothesisClass all_subsets_class(std::size_t num_cells);
/// {h xor h'} over all ordered pairs, duplicates removed.
FiniteHypothesisClass xor_class(const FiniteHypothesisClass& h);
/// The threshold class {1[|h - h'| > t]} for one-dimensional two-valued
/// stump regressors on the grid, t on {0, 0.05, ..., 1}; duplicates removed.
FiniteHypothesisClass regression_threshold_class(const CellGrid& grid);

/// Stump regressors underlying regression_threshold_class, as cell values.
std::vector<std::vector<double>> stump_regressors(const CellGrid& grid);

enum class LossKind { ZeroOne, Absolute };

/// Mean 0-1 disagreement or mean absolute error between predictions and labels.
double empirical_risk(std::span<const double> predictions, std::span<const double> labels,
                      LossKind kind);

/// sup over the class of |P(A) - P'(A)| for two cell distributions.
double d_h(const FiniteHypothesisClass& cls, std::span<const double> p, std::span<const double> q);
/// d_h over the pairwise xor class, enumerated directly over pairs.
double d_h_delta_h(const FiniteHypothesisClass& cls, std::span<const double> p,
                   std::span<const double> q);

/// Sample versions: the two samples are binned on `grid` first.
double d_h(const FiniteHypothesisClass& cls, const CellGrid& grid, const Tensor& xs,
           const Tensor& xt);
double d_h_delta_h(const FiniteHypothesisClass& cls, const CellGrid& grid, const Tensor& xs,
                   const Tensor& xt);

using Predictor = std::function<double(std::span<const double>)>;

/// min(E_S|f_S - f_T|, E_T|f_S - f_T|) with the expectations taken over the
/// rows of xs and xt.
double disagreement_term(const Predictor& f_s, const Predictor& f_t, const Tensor& xs,
                         const Tensor& xt);
double disagreement_term(const ScenarioSpec& spec, const Tensor& xs, const Tensor& xt);

/// |mean |y - f_S(x)| over S + mean |y - f_T(x)| over T|.
double noise_term(const Predictor& f_s, const Predictor& f_t, const LabeledSet& s,
                  const LabeledSet& t);
double noise_term(const ScenarioSpec& spec, const LabeledSet& s, const LabeledSet& t);

/// The combined radical
///   sqrt(8d/m log(em/d) + 2/m log(1/δ) + 8d/n log(en/d) + 2/n log(1/δ)).
double concentration_term(std::size_t n, std::size_t m, int d, double delta);

enum class BoundMode { Population, FiniteSample };

const char* to_string(BoundMode m);
BoundMode parse_bound_mode(const std::string& s);

struct BoundReport {
  std::size_t n = 0;
  std::size_t m = 0;
  double weight_t = 0.0;
  double weight_s = 0.0;
  double emp_risk_t = 0.0;
  double emp_risk_s = 0.0;
  double distance_term = 0.0;
  double disagreement_term = 0.0;
  double noise_term = 0.0;
  double concentration_term = 0.0;
  double delta = 0.05;
  int dimension = 0;
  double bound_total = 0.0;
  BoundMode mode = BoundMode::Population;
  std::string hypothesis_class;
  /// Proxy distance of learned features, reported alongside only.
  std::optional<double> proxy_a_distance;
  /// Target risk on held-out data, when available.
  std::optional<double> heldout_risk_t;

  /// weight_t * ê_T + weight_s * (ê_S + distance + disagreement + noise + concentration).
  double assemble() const;
  static std::string csv_header();
  std::string csv_row() const;
  std::string text() const;
};

struct BoundOptions {
  double delta = 0.05;
  BoundMode mode = BoundMode::FiniteSample;
  std::size_t bins = 32;
  /// Sample size per domain used to stand in for the population.
  std::size_t population_samples = 20000;
};

/// Predictions for every row of a feature matrix.
using BatchPredictor = std::function<std::vector<double>(const Tensor&)>;

/// Bound for a predictor on a task. `h` returns class labels (classification)
/// or real predictions (regression). Finite-sample mode uses the task's
/// samples; population mode draws fresh large samples from the scenario and
/// uses its analytic noise levels, and leaves out the concentration term.
BoundReport bound_report(const BatchPredictor& h, const SemiDaTask& task,
                         const BoundOptions& opts);

/// Proxy A-distance 2(1 - 2 err) of a logistic probe trained on half of each
/// feature sample and tested on the other half.
double proxy_a_distance(const Tensor& fs, const Tensor& ft, std::uint64_t seed);

/// Finite joint p(d, y, z) with d in {0, 1}.
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t ny, std::size_t nz, std::vector<double> table);

  std::size_t ny() const { return ny_; }
  std::size_t nz() const { return nz_; }
  double p(std::size_t d, std::size_t y, std::size_t z) const {
    return table_[(d * ny_ + y) * nz_ + z];
  }
  const std::vector<double>& table() const { return table_; }

  double p_d(std::size_t d) const;
  /// p(z | d).
  std::vector<double> marginal_z(std::size_t d) const;
  /// E[Y | Z = z, D = d] for binary Y; 0 where p(d, z) = 0.
  std::vector<double> conditional_mean(std::size_t d) const;

 private:
  std::size_t ny_;
  std::size_t nz_;
  std::vector<double> table_;
};

/// Random binary-label instance on a `width` x `height` grid: Dirichlet
/// feature marginals, and posteriors that are convex combinations of
/// stumps from stump_class(width, height).
DiscreteJoint random_stump_joint(std::size_t width, std::size_t height, Rng& rng);

/// Exact terms for a hypothesis (cell mask) under a discrete joint.
struct DiscreteTerms {
  double risk_s = 0.0;
  double risk_t = 0.0;
  double noise_s = 0.0;
  double noise_t = 0.0;
  double distance = 0.0;
  double disagreement = 0.0;
};

double discrete_risk(const DiscreteJoint& joint, std::size_t d, const Mask& h);
DiscreteTerms discrete_terms(const DiscreteJoint& joint, const FiniteHypothesisClass& cls,
                             const Mask& h);

struct RiskGapCheck {
  std::vector<double> lhs;  // |ε_S(h) - ε_T(h)| per hypothesis
  double rhs = 0.0;         // shared right-hand side
  double max_violation = 0.0;
  bool holds = true;
};

/// Checks |ε_S(h) - ε_T(h)| <= |n_S + n_T| + d_HΔH + disagreement for
/// every h in the class.
RiskGapCheck risk_gap_check(const DiscreteJoint& joint, const FiniteHypothesisClass& cls,
                            double tolerance = 1e-9);

/// Population bound for h given sample sizes n and m; the empirical risks
/// are replaced by exact ones.
BoundReport bound_report_exact(const DiscreteJoint& joint, const FiniteHypothesisClass& cls,
                               const Mask& h, std::size_t n, std::size_t m);

struct MiDecomposition {
  double i_dz = 0.0;
  double i_dy_given_z = 0.0;
  double i_d_yz = 0.0;
};

/// I(D; Z), I(D; Y | Z) and I(D; Y, Z) in nats, each from its own definition.
MiDecomposition mi_decomposition(const DiscreteJoint& joint);

}  // namespace lirr

#include "lirr/bound.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "lirr/errors.hpp"
#include "lirr/keyvalue.hpp"

namespace lirr {

// ---- grid ------------------------------------------------------------------

CellGrid::CellGrid(std::vector<double> lo, std::vector<double> hi, std::size_t bins)
    : lo_(std::move(lo)), hi_(std::move(hi)), bins_(bins) {
  if (lo_.empty() || lo_.size() > 2 || lo_.size() != hi_.size()) {
    throw DimensionError("CellGrid supports 1 or 2 dimensions");
  }
  if (bins_ == 0) throw ParameterError("CellGrid needs at least one bin");
  for (std::size_t a = 0; a < lo_.size(); ++a) {
    if (!(hi_[a] > lo_[a])) hi_[a] = lo_[a] + 1.0;
  }
}

CellGrid CellGrid::fit(const Tensor& a, const Tensor& b, std::size_t bins) {
  if (a.cols() != b.cols()) {
    throw DimensionError("CellGrid::fit: samples have widths " + a.shape_str() + " and " +
                         b.shape_str());
  }
  if (a.rows() + b.rows() == 0) throw ContractError("CellGrid::fit: both samples are empty");
  const std::size_t d = a.cols();
  std::vector<double> lo(d, INFINITY), hi(d, -INFINITY);
  for (const Tensor* t : {&a, &b}) {
    for (std::size_t i = 0; i < t->rows(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], (*t)(i, j));
        hi[j] = std::max(hi[j], (*t)(i, j));
      }
    }
  }
  return CellGrid(lo, hi, bins);
}

std::size_t CellGrid::cells() const {
  std::size_t c = 1;
  for (std::size_t a = 0; a < dims(); ++a) c *= bins_;
  return c;
}

std::size_t CellGrid::bin(std::size_t axis, double v) const {
  const double u = (v - lo_[axis]) / (hi_[axis] - lo_[axis]);
  if (!(u > 0.0)) return 0;
  const auto b = static_cast<std::size_t>(u * static_cast<double>(bins_));
  return std::min(b, bins_ - 1);
}

std::size_t CellGrid::cell(std::span<const double> x) const {
  if (x.size() != dims()) {
    throw DimensionError("CellGrid::cell: point has " + std::to_string(x.size()) +
                         " coordinates, grid has " + std::to_string(dims()));
  }
  std::size_t c = 0;
  for (std::size_t a = dims(); a-- > 0;) c = c * bins_ + bin(a, x[a]);
  return c;
}

std::size_t CellGrid::coord(std::size_t cell, std::size_t axis) const {
  for (std::size_t a = 0; a < axis; ++a) cell /= bins_;
  return cell % bins_;
}

std::vector<double> histogram(const CellGrid& grid, const Tensor& x) {
  if (x.rows() == 0) throw ContractError("histogram of an empty sample");
  std::vector<double> h(grid.cells(), 0.0);
  const double w = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) h[grid.cell(x.row(i))] += w;
  return h;
}

// ---- hypothesis classes ----------------------------------------------------

void FiniteHypothesisClass::validate() const {
  if (hypotheses.empty()) throw ContractError("hypothesis class '" + name + "' is empty");
  for (const Mask& h : hypotheses) {
    if (h.size() != num_cells) {
      throw DimensionError("hypothesis over " + std::to_string(h.size()) +
                           " cells in a class over " + std::to_string(num_cells));
    }
  }
}

namespace {

FiniteHypothesisClass stumps_impl(std::size_t cells, std::size_t dims,
                                  const std::function<std::size_t(std::size_t, std::size_t)>& coord,
                                  const std::vector<std::size_t>& bins) {
  FiniteHypothesisClass cls;
  cls.name = "stumps";
  cls.num_cells = cells;
  cls.dimension = 3;
  for (std::size_t a = 0; a < dims; ++a) {
    for (std::size_t t = 0; t <= bins[a]; ++t) {
      for (int polarity = 0; polarity < 2; ++polarity) {
        Mask m(cells);
        for (std::size_t z = 0; z < cells; ++z) {
          const bool above = coord(z, a) >= t;
          m[z] = static_cast<std::uint8_t>(polarity ? !above : above);
        }
        cls.hypotheses.push_back(std::move(m));
      }
    }
  }
  return cls;
}

std::string pack(const Mask& m) {
  std::string s((m.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) s[i / 8] = static_cast<char>(s[i / 8] | (1 << (i % 8)));
  }
  return s;
}

void check_distributions(const FiniteHypothesisClass& cls, std::span<const double> p,
                         std::span<const double> q) {
  cls.validate();
  if (p.size() != cls.num_cells || q.size() != cls.num_cells) {
    throw DimensionError("distributions over " + std::to_string(p.size()) + " and " +
                         std::to_string(q.size()) + " cells for a class over " +
                         std::to_string(cls.num_cells));
  }
}

double mask_gap(const Mask& m, std::span<const double> r) {
  double acc = 0.0;
  for (std::size_t z = 0; z < m.size(); ++z) {
    if (m[z]) acc += r[z];
  }
  return std::fabs(acc);
}

}  // namespace

FiniteHypothesisClass stump_class(const CellGrid& grid) {
  std::vector<std::size_t> bins(grid.dims(), grid.bins());
  return stumps_impl(grid.cells(), grid.dims(),
                     [&](std::size_t z, std::size_t a) { return grid.coord(z, a); }, bins);
}

FiniteHypothesisClass stump_class(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw ParameterError("stump grid needs positive sides");
  return stumps_impl(
      width * height, 2,
      [width](std::size_t z, std::size_t a) { return a == 0 ? z % width : z / width; },
      {width, height});
}

FiniteHypothesisClass all_subsets_class(std::size_t num_cells) {
  if (num_cells == 0 || num_cells > 16) {
    throw ParameterError("all_subsets_class supports 1..16 cells");
  }
  FiniteHypothesisClass cls;
  cls.name = "all_subsets";
  cls.num_cells = num_cells;
  cls.dimension = static_cast<int>(num_cells);
  for (std::uint32_t bits = 0; bits < (1u << num_cells); ++bits) {
    Mask m(num_cells);
    for (std::size_t z = 0; z < num_cells; ++z) m[z] = (bits >> z) & 1u;
    cls.hypotheses.push_back(std::move(m));
  }
  return cls;
}

FiniteHypothesisClass xor_class(const FiniteHypothesisClass& h) {
  h.validate();
  FiniteHypothesisClass out;
  out.name = h.name + "_xor";
  out.num_cells = h.num_cells;
  out.dimension = h.dimension;
  std::unordered_set<std::string> seen;
  for (const Mask& a : h.hypotheses) {
    for (const Mask& b : h.hypotheses) {
      Mask m(h.num_cells);
      for (std::size_t z = 0; z < m.size(); ++z) m[z] = a[z] ^ b[z];
      if (seen.insert(pack(m)).second) out.hypotheses.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<std::vector<double>> stump_regressors(const CellGrid& grid) {
  static constexpr double kValues[] = {0.25, 0.5, 0.75, 1.0};
  std::vector<std::vector<double>> out;
  std::unordered_set<std::string> seen;
  for (std::size_t a = 0; a < grid.dims(); ++a) {
    for (std::size_t t = 0; t <= grid.bins(); ++t) {
      for (double lo : kValues) {
        for (double hi : kValues) {
          std::vector<double> h(grid.cells());
          for (std::size_t z = 0; z < h.size(); ++z) h[z] = grid.coord(z, a) >= t ? hi : lo;
          std::string key(reinterpret_cast<const char*>(h.data()), h.size() * sizeof(double));
          if (seen.insert(std::move(key)).second) out.push_back(std::move(h));
        }
      }
    }
  }
  return out;
}

FiniteHypothesisClass regression_threshold_class(const CellGrid& grid) {
  const auto regs = stump_regressors(grid);
  // Only the set of differences above t matters, so thresholds that select
  // the same differences give the same masks.
  std::vector<double> diffs;
  for (double a : {0.25, 0.5, 0.75, 1.0}) {
    for (double b : {0.25, 0.5, 0.75, 1.0}) diffs.push_back(std::fabs(a - b));
  }
  std::vector<double> thresholds;
  std::unordered_set<std::string> signatures;
  for (int i = 0; i <= 20; ++i) {
    const double t = 0.05 * i;
    std::string sig;
    for (double d : diffs) sig.push_back(d > t ? '1' : '0');
    if (signatures.insert(sig).second) thresholds.push_back(t);
  }
  FiniteHypothesisClass cls;
  cls.name = "regression_thresholds";
  cls.num_cells = grid.cells();
  cls.dimension = 2;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < regs.size(); ++i) {
    for (std::size_t j = i; j < regs.size(); ++j) {
      for (double t : thresholds) {
        Mask m(cls.num_cells);
        for (std::size_t z = 0; z < m.size(); ++z) {
          m[z] = std::fabs(regs[i][z] - regs[j][z]) > t ? 1 : 0;
        }
        if (seen.insert(pack(m)).second) cls.hypotheses.push_back(std::move(m));
      }
    }
  }
  return cls;
}

// ---- terms -----------------------------------------------------------------

double empirical_risk(std::span<const double> predictions, std::span<const double> labels,
                      LossKind kind) {
  if (predictions.empty()) throw ContractError("empirical_risk of an empty set");
  if (predictions.size() != labels.size()) {
    throw DimensionError("empirical_risk: " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(labels.size()) + " labels");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    acc += kind == LossKind::ZeroOne ? (predictions[i] != labels[i] ? 1.0 : 0.0)
                                     : std::fabs(predictions[i] - labels[i]);
  }
  return acc / static_cast<double>(labels.size());
}

double d_h(const FiniteHypothesisClass& cls, std::span<const double> p, std::span<const double> q) {
  check_distributions(cls, p, q);
  std::vector<double> r(p.size());
  for (std::size_t z = 0; z < r.size(); ++z) r[z] = p[z] - q[z];
  double best = 0.0;
  for (const Mask& m : cls.hypotheses) best = std::max(best, mask_gap(m, r));
  return std::min(best, 1.0);
}

double d_h_delta_h(const FiniteHypothesisClass& cls, std::span<const double> p,
                   std::span<const double> q) {
  check_distributions(cls, p, q);
  std::vector<double> r(p.size());
  for (std::size_t z = 0; z < r.size(); ++z) r[z] = p[z] - q[z];
  double best = 0.0;
  const std::size_t n = cls.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Mask& a = cls.hypotheses[i];
    // xor is symmetric, so each unordered pair is visited once.
    for (std::size_t j = i + 1; j < n; ++j) {
      const Mask& b = cls.hypotheses[j];
      double acc = 0.0;
      for (std::size_t z = 0; z < r.size(); ++z) {
        if (a[z] != b[z]) acc += r[z];
      }
      best = std::max(best, std::fabs(acc));
    }
  }
  return std::min(best, 1.0);
}

double d_h(const FiniteHypothesisClass& cls, const CellGrid& grid, const Tensor& xs,
           const Tensor& xt) {
  return d_h(cls, histogram(grid, xs), histogram(grid, xt));
}

double d_h_delta_h(const FiniteHypothesisClass& cls, const CellGrid& grid, const Tensor& xs,
                   const Tensor& xt) {
  return d_h_delta_h(cls, histogram(grid, xs), histogram(grid, xt));
}

double disagreement_term(const Predictor& f_s, const Predictor& f_t, const Tensor& xs,
                         const Tensor& xt) {
  if (!f_s || !f_t) throw ContractError("disagreement_term needs both labeling functions");
  if (xs.rows() == 0 || xt.rows() == 0) throw ContractError("disagreement_term: empty sample");
  auto mean_gap = [&](const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) acc += std::fabs(f_s(x.row(i)) - f_t(x.row(i)));
    return acc / static_cast<double>(x.rows());
  };
  return std::min(mean_gap(xs), mean_gap(xt));
}

namespace {

Predictor bayes(const ScenarioSpec& spec, Domain d) {
  return [&spec, d](std::span<const double> x) { return bayes_predict(spec, d, x); };
}

}  // namespace

double disagreement_term(const ScenarioSpec& spec, const Tensor& xs, const Tensor& xt) {
  return disagreement_term(bayes(spec, Domain::Source), bayes(spec, Domain::Target), xs, xt);
}

double noise_term(const Predictor& f_s, const Predictor& f_t, const LabeledSet& s,
                  const LabeledSet& t) {
  if (!f_s || !f_t) throw ContractError("noise_term needs both labeling functions");
  if (s.size() == 0 || t.size() == 0) throw ContractError("noise_term: empty sample");
  auto mean_noise = [](const Predictor& f, const LabeledSet& set) {
    double acc = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) acc += std::fabs(set.y[i] - f(set.x.row(i)));
    return acc / static_cast<double>(set.size());
  };
  return std::fabs(mean_noise(f_s, s) + mean_noise(f_t, t));
}

double noise_term(const ScenarioSpec& spec, const LabeledSet& s, const LabeledSet& t) {
  return noise_term(bayes(spec, Domain::Source), bayes(spec, Domain::Target), s, t);
}

double concentration_term(std::size_t n, std::size_t m, int d, double delta) {
  if (d < 1) throw ParameterError("concentration_term: d must be at least 1");
  if (n < static_cast<std::size_t>(d) || m < static_cast<std::size_t>(d)) {
    throw ParameterError("concentration_term: need n, m >= d (n=" + std::to_string(n) +
                         ", m=" + std::to_string(m) + ", d=" + std::to_string(d) + ")");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("concentration_term: need 0 < delta < 1");
  const double dd = d;
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  const double e = std::numbers::e;
  const double l = std::log(1.0 / delta);
  return std::sqrt(8.0 * dd / mm * std::log(e * mm / dd) + 2.0 / mm * l +
                   8.0 * dd / nn * std::log(e * nn / dd) + 2.0 / nn * l);
}

// ---- report ----------------------------------------------------------------

const char* to_string(BoundMode m) {
  return m == BoundMode::Population ? "population" : "finite_sample";
}

BoundMode parse_bound_mode(const std::string& s) {
  if (s == "population") return BoundMode::Population;
  if (s == "finite_sample") return BoundMode::FiniteSample;
  throw ConfigError("unknown bound mode '" + s + "'");
}

double BoundReport::assemble() const {
  return weight_t * emp_risk_t +
         weight_s * (emp_risk_s + distance_term + disagreement_term + noise_term +
                     concentration_term);
}

std::string BoundReport::csv_header() {
  return "mode,class,n,m,weight_t,weight_s,emp_risk_t,emp_risk_s,distance_term,"
         "disagreement_term,noise_term,concentration_term,delta,dimension,bound_total,"
         "proxy_a_distance,heldout_risk_t";
}

std::string BoundReport::csv_row() const {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  os << to_string(mode) << ',' << hypothesis_class << ',' << n << ',' << m << ','
     << format_double(weight_t) << ',' << format_double(weight_s) << ','
     << format_double(emp_risk_t) << ',' << format_double(emp_risk_s) << ','
     << format_double(distance_term) << ',' << format_double(disagreement_term) << ','
     << format_double(noise_term) << ',' << format_double(concentration_term) << ','
     << format_double(delta) << ',' << dimension << ',' << format_double(bound_total) << ','
     << opt(proxy_a_distance) << ',' << opt(heldout_risk_t);
  return os.str();
}

std::string BoundReport::text() const {
  std::ostringstream os;
  char buf[96];
  auto line = [&](const char* label, double v) {
    std::snprintf(buf, sizeof(buf), "  %-22s %.6f\n", label, v);
    os << buf;
  };
  os << "bound report (" << to_string(mode) << ", class " << hypothesis_class << ", d=" << dimension
     << ")\n";
  os << "  n = " << n << ", m = " << m << "\n";
  line("weight_t m/(n+m)", weight_t);
  line("weight_s n/(n+m)", weight_s);
  line("empirical risk T", emp_risk_t);
  line("empirical risk S", emp_risk_s);
  line("distance", distance_term);
  line("disagreement", disagreement_term);
  line("noise", noise_term);
  if (mode == BoundMode::FiniteSample) {
    std::snprintf(buf, sizeof(buf), "  %-22s %.6f (explicit radical, delta=%g)\n", "concentration",
                  concentration_term, delta);
    os << buf;
  }
  line("bound total", bound_total);
  if (heldout_risk_t) line("held-out target risk", *heldout_risk_t);
  if (proxy_a_distance) line("proxy A-distance", *proxy_a_distance);
  return os.str();
}

namespace {

std::vector<double> predict_all(const BatchPredictor& h, const Tensor& x) {
  std::vector<double> out = h(x);
  if (out.size() != x.rows()) {
    throw DimensionError("predictor returned " + std::to_string(out.size()) + " values for " +
                         std::to_string(x.rows()) + " rows");
  }
  return out;
}

}  // namespace

BoundReport bound_report(const BatchPredictor& h, const SemiDaTask& task,
                         const BoundOptions& opts) {
  if (!h) throw ContractError("bound_report needs a hypothesis");
  const ScenarioSpec& spec = task.scenario;
  const bool classification = spec.task_kind() == TaskKind::Classification;
  const LossKind loss = classification ? LossKind::ZeroOne : LossKind::Absolute;

  BoundReport r;
  r.mode = opts.mode;
  r.delta = opts.delta;
  r.n = task.n();
  r.m = task.m();
  if (r.n == 0 || r.m == 0) throw ContractError("bound_report needs n, m >= 1");
  const double total = static_cast<double>(r.n + r.m);
  r.weight_t = static_cast<double>(r.m) / total;
  r.weight_s = static_cast<double>(r.n) / total;

  Tensor xs, xt;
  if (opts.mode == BoundMode::FiniteSample) {
    xs = task.source.x;
    xt = task.target_unlabeled.x;
    r.emp_risk_s = empirical_risk(predict_all(h, task.source.x), task.source.y, loss);
    r.emp_risk_t =
        empirical_risk(predict_all(h, task.target_labeled.x), task.target_labeled.y, loss);
    r.noise_term = noise_term(spec, task.source, task.target_labeled);
  } else {
    Rng rs(SeedSequence(task.seed).add("population").add("source").value());
    Rng rt(SeedSequence(task.seed).add("population").add("target").value());
    DomainSample ps = sample_domain(spec, Domain::Source, opts.population_samples, rs);
    DomainSample pt = sample_domain(spec, Domain::Target, opts.population_samples, rt);
    r.emp_risk_s = empirical_risk(predict_all(h, ps.x), ps.y, loss);
    r.emp_risk_t = empirical_risk(predict_all(h, pt.x), pt.y, loss);
    r.noise_term = std::fabs(spec.noise_source + spec.noise_target);
    xs = std::move(ps.x);
    xt = std::move(pt.x);
  }

  const CellGrid grid = CellGrid::fit(xs, xt, opts.bins);
  if (classification) {
    const FiniteHypothesisClass cls = stump_class(grid);
    r.distance_term = d_h_delta_h(cls, grid, xs, xt);
    r.hypothesis_class = "stumps_xor";
    r.dimension = cls.dimension;
  } else {
    const FiniteHypothesisClass cls = regression_threshold_class(grid);
    r.distance_term = d_h(cls, grid, xs, xt);
    r.hypothesis_class = cls.name;
    r.dimension = cls.dimension;
  }
  r.disagreement_term = disagreement_term(spec, xs, xt);
  if (opts.mode == BoundMode::FiniteSample) {
    r.concentration_term = concentration_term(r.n, r.m, r.dimension, r.delta);
  }
  if (task.test_target.size() > 0) {
    r.heldout_risk_t =
        empirical_risk(predict_all(h, task.test_target.x), task.test_target.y, loss);
  }
  r.bound_total = r.assemble();
  return r;
}

double proxy_a_distance(const Tensor& fs, const Tensor& ft, std::uint64_t seed) {
  if (fs.cols() != ft.cols()) throw DimensionError("proxy_a_distance: feature widths differ");
  if (fs.rows() < 2 || ft.rows() < 2) {
    throw ContractError("proxy_a_distance needs at least two rows per domain");
  }
  const std::size_t d = fs.cols();
  struct Row {
    const double* x;
    double label;
  };
  Rng rng(seed);
  auto split_rows = [&](const Tensor& t, double label, std::vector<Row>& train,
                        std::vector<Row>& test) {
    std::vector<std::size_t> idx(t.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < idx.size() / 2 ? train : test).push_back({t.row(idx[i]).data(), label});
    }
  };
  std::vector<Row> train, test;
  split_rows(fs, 1.0, train, test);
  split_rows(ft, 0.0, train, test);

  // Standardize with training statistics.
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (const Row& r : train) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += r.x[j];
  }
  for (double& v : mu) v /= static_cast<double>(train.size());
  for (const Row& r : train) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (r.x[j] - mu[j]) * (r.x[j] - mu[j]);
  }
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(train.size())) + 1e-12;

  std::vector<double> w(d, 0.0);
  double b = 0.0;
  const double lr = 0.5;
  const double l2 = 1e-4;
  std::vector<double> gw(d);
  for (int it = 0; it < 300; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (const Row& r : train) {
      double s = b;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * (r.x[j] - mu[j]) / sd[j];
      const double p = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
      const double e = p - r.label;
      for (std::size_t j = 0; j < d; ++j) gw[j] += e * (r.x[j] - mu[j]) / sd[j];
      gb += e;
    }
    const double inv = 1.0 / static_cast<double>(train.size());
    for (std::size_t j = 0; j < d; ++j) w[j] -= lr * (gw[j] * inv + l2 * w[j]);
    b -= lr * gb * inv;
  }
  std::size_t wrong = 0;
  for (const Row& r : test) {
    double s = b;
    for (std::size_t j = 0; j < d; ++j) s += w[j] * (r.x[j] - mu[j]) / sd[j];
    if ((s > 0.0 ? 1.0 : 0.0) != r.label) ++wrong;
  }
  const double err = static_cast<double>(wrong) / static_cast<double>(test.size());
  return 2.0 * (1.0 - 2.0 * err);
}

// ---- discrete instances ----------------------------------------------------

DiscreteJoint::DiscreteJoint(std::size_t ny, std::size_t nz, std::vector<double> table)
    : ny_(ny), nz_(nz), table_(std::move(table)) {
  if (ny_ == 0 || nz_ == 0) throw ParameterError("DiscreteJoint needs nonempty supports");
  if (table_.size() != 2 * ny_ * nz_) {
    throw DimensionError("DiscreteJoint table has " + std::to_string(table_.size()) +
                         " entries, expected " + std::to_string(2 * ny_ * nz_));
  }
  double total = 0.0;
  for (double v : table_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ParameterError("DiscreteJoint entries must be finite and nonnegative");
    }
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    throw ParameterError("DiscreteJoint table sums to " + format_double(total) + ", not 1");
  }
}

double DiscreteJoint::p_d(std::size_t d) const {
  double acc = 0.0;
  for (std::size_t y = 0; y < ny_; ++y) {
    for (std::size_t z = 0; z < nz_; ++z) acc += p(d, y, z);
  }
  return acc;
}

std::vector<double> DiscreteJoint::marginal_z(std::size_t d) const {
  std::vector<double> out(nz_, 0.0);
  const double pd = p_d(d);
  if (pd <= 0.0) return out;
  for (std::size_t y = 0; y < ny_; ++y) {
    for (std::size_t z = 0; z < nz_; ++z) out[z] += p(d, y, z);
  }
  for (double& v : out) v /= pd;
  return out;
}

std::vector<double> DiscreteJoint::conditional_mean(std::size_t d) const {
  std::vector<double> out(nz_, 0.0);
  for (std::size_t z = 0; z < nz_; ++z) {
    double mass = 0.0, first = 0.0;
    for (std::size_t y = 0; y < ny_; ++y) {
      mass += p(d, y, z);
      first += static_cast<double>(y) * p(d, y, z);
    }
    out[z] = mass > 0.0 ? first / mass : 0.0;
  }
  return out;
}

namespace {

std::vector<double> dirichlet(std::size_t k, Rng& rng) {
  std::vector<double> v(k);
  double total = 0.0;
  for (double& x : v) {
    x = -std::log(1.0 - rng.uniform());
    total += x;
  }
  for (double& x : v) x /= total;
  return v;
}

}  // namespace

DiscreteJoint random_stump_joint(std::size_t width, std::size_t height, Rng& rng) {
  const FiniteHypothesisClass cls = stump_class(width, height);
  const std::size_t nz = width * height;
  std::vector<double> table(2 * 2 * nz, 0.0);
  for (std::size_t d = 0; d < 2; ++d) {
    const std::vector<double> pz = dirichlet(nz, rng);
    const std::size_t parts = 1 + rng.index(4);
    const std::vector<double> alpha = dirichlet(parts, rng);
    std::vector<double> f(nz, 0.0);
    for (std::size_t k = 0; k < parts; ++k) {
      const Mask& h = cls.hypotheses[rng.index(cls.size())];
      for (std::size_t z = 0; z < nz; ++z) f[z] += alpha[k] * h[z];
    }
    for (std::size_t z = 0; z < nz; ++z) {
      const double fz = std::clamp(f[z], 0.0, 1.0);
      table[(d * 2 + 0) * nz + z] = 0.5 * pz[z] * (1.0 - fz);
      table[(d * 2 + 1) * nz + z] = 0.5 * pz[z] * fz;
    }
  }
  double total = 0.0;
  for (double v : table) total += v;
  for (double& v : table) v /= total;
  return DiscreteJoint(2, nz, std::move(table));
}

double discrete_risk(const DiscreteJoint& joint, std::size_t d, const Mask& h) {
  if (h.size() != joint.nz()) throw DimensionError("hypothesis and joint cell counts differ");
  const double pd = joint.p_d(d);
  if (pd <= 0.0) throw ContractError("domain has zero probability");
  double acc = 0.0;
  for (std::size_t y = 0; y < joint.ny(); ++y) {
    for (std::size_t z = 0; z < joint.nz(); ++z) {
      acc += joint.p(d, y, z) * std::fabs(static_cast<double>(h[z]) - static_cast<double>(y));
    }
  }
  return acc / pd;
}

DiscreteTerms discrete_terms(const DiscreteJoint& joint, const FiniteHypothesisClass& cls,
                             const Mask& h) {
  if (cls.num_cells != joint.nz()) {
    throw DimensionError("class over " + std::to_string(cls.num_cells) + " cells, joint over " +
                         std::to_string(joint.nz()));
  }
  DiscreteTerms t;
  t.risk_s = discrete_risk(joint, 0, h);
  t.risk_t = discrete_risk(joint, 1, h);
  const auto ps = joint.marginal_z(0);
  const auto pt = joint.marginal_z(1);
  const auto fs = joint.conditional_mean(0);
  const auto ft = joint.conditional_mean(1);
  auto noise = [&](std::size_t d, const std::vector<double>& f) {
    double acc = 0.0;
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      for (std::size_t z = 0; z < joint.nz(); ++z) {
        acc += joint.p(d, y, z) * std::fabs(static_cast<double>(y) - f[z]);
      }
    }
    return acc / joint.p_d(d);
  };
  t.noise_s = noise(0, fs);
  t.noise_t = noise(1, ft);
  t.distance = d_h_delta_h(cls, ps, pt);
  double es = 0.0, et = 0.0;
  for (std::size_t z = 0; z < joint.nz(); ++z) {
    es += ps[z] * std::fabs(fs[z] - ft[z]);
    et += pt[z] * std::fabs(fs[z] - ft[z]);
  }
  t.disagreement = std::min(es, et);
  return t;
}

RiskGapCheck risk_gap_check(const DiscreteJoint& joint, const FiniteHypothesisClass& cls,
                            double tolerance) {
  cls.validate();
  if (joint.ny() != 2) throw ContractError("risk_gap_check needs binary labels");
  RiskGapCheck out;
  const DiscreteTerms base = discrete_terms(joint, cls, cls.hypotheses.front());
  out.rhs = std::fabs(base.noise_s + base.noise_t) + base.distance + base.disagreement;
  for (const Mask& h : cls.hypotheses) {
    const double lhs = std::fabs(discrete_risk(joint, 0, h) - discrete_risk(joint, 1, h));
    out.lhs.push_back(lhs);
    out.max_violation = std::max(out.max_violation, lhs - out.rhs);
    if (lhs > out.rhs + tolerance) out.holds = false;
  }
  return out;
}

BoundReport bound_report_exact(const DiscreteJoint& joint, const FiniteHypothesisClass& cls,
                               const Mask& h, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw ContractError("bound_report_exact needs n, m >= 1");
  const DiscreteTerms t = discrete_terms(joint, cls, h);
  BoundReport r;
  r.mode = BoundMode::Population;
  r.n = n;
  r.m = m;
  r.weight_t = static_cast<double>(m) / static_cast<double>(n + m);
  r.weight_s = static_cast<double>(n) / static_cast<double>(n + m);
  r.emp_risk_t = t.risk_t;
  r.emp_risk_s = t.risk_s;
  r.distance_term = t.distance;
  r.disagreement_term = t.disagreement;
  r.noise_term = std::fabs(t.noise_s + t.noise_t);
  r.hypothesis_class = cls.name + "_xor";
  r.dimension = cls.dimension;
  r.heldout_risk_t = t.risk_t;
  r.bound_total = r.assemble();
  return r;
}

MiDecomposition mi_decomposition(const DiscreteJoint& joint) {
  const std::size_t ny = joint.ny(), nz = joint.nz();
  std::vector<double> pd(2, 0.0), pz(nz, 0.0), pdz(2 * nz, 0.0), pyz(ny * nz, 0.0);
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t z = 0; z < nz; ++z) {
        const double v = joint.p(d, y, z);
        pd[d] += v;
        pz[z] += v;
        pdz[d * nz + z] += v;
        pyz[y * nz + z] += v;
      }
    }
  }
  MiDecomposition out;
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t z = 0; z < nz; ++z) {
      const double v = pdz[d * nz + z];
      if (v > 0.0) out.i_dz += v * std::log(v / (pd[d] * pz[z]));
    }
  }
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t z = 0; z < nz; ++z) {
        const double v = joint.p(d, y, z);
        if (v <= 0.0) continue;
        out.i_d_yz += v * std::log(v / (pd[d] * pyz[y * nz + z]));
        out.i_dy_given_z += v * std::log(v * pz[z] / (pdz[d * nz + z] * pyz[y * nz + z]));
      }
    }
  }
  return out;
}

}  // namespace lirr

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "lirr/bound.hpp"
#include "lirr/config.hpp"
#include "lirr/graph.hpp"
#include "lirr/svg.hpp"
#include "lirr/sweep.hpp"
#include "lirr/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/lirr_oracle.hpp"
#include "support/random.hpp"

using namespace lirr;
namespace fs = std::filesystem;
using lirr::testing::random_tensor;

namespace {

// Pinned thresholds.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr int kGradInstances = 20;
constexpr double kGradSeconds = 10.0;
constexpr double kGrlTol = 1e-12;
constexpr double kGrlSeconds = 1.0;
constexpr int kMiTables = 1000;
constexpr double kMiTol = 1e-12;
constexpr double kMiSeconds = 5.0;
constexpr int kRiskGapInstances = 1000;
constexpr double kRiskGapTol = 1e-9;
constexpr double kRiskGapSeconds = 60.0;
constexpr std::size_t kDegeneracyIters = 4000;
constexpr double kOrderingMargin = 0.02;
constexpr double kOrderingSeconds = 15 * 60.0;
constexpr double kCurveInversion = 0.01;
constexpr double kCurveSeconds = 20 * 60.0;
constexpr int kBoundTasks = 50;
constexpr double kConcentrationTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// 1 ---------------------------------------------------------------------------

struct OpCase {
  std::string name;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  testing::LossBuilder loss;
};

std::vector<OpCase> op_cases() {
  using V = const std::vector<Var>&;
  static const std::vector<std::size_t> labels = {0, 2, 1, 1};
  static const std::vector<double> targets = {1.0, 0.0, 0.25, 1.0};
  return {
      {"matmul", {{4, 3}, {3, 2}}, [](Graph& g, V v) { return g.sum(g.tanh(g.matmul(v[0], v[1]))); }},
      {"add", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.tanh(g.add(v[0], v[1]))); }},
      {"add_row", {{4, 3}, {1, 3}}, [](Graph& g, V v) { return g.sum(g.tanh(g.add_row(v[0], v[1]))); }},
      {"sub", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.tanh(g.sub(v[0], v[1]))); }},
      {"mul", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.mul(v[0], v[1])); }},
      {"scale", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.mul(g.scale(v[0], -1.7), v[1])); }},
      {"relu", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.mul(g.relu(v[0]), v[1])); }},
      {"tanh", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.mul(g.tanh(v[0]), v[1])); }},
      {"sigmoid", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.mul(g.sigmoid(v[0]), v[1])); }},
      {"softmax", {{4, 3}, {4, 3}}, [](Graph& g, V v) { return g.sum(g.mul(g.softmax(v[0]), v[1])); }},
      {"concat_cols", {{4, 2}, {4, 1}, {4, 3}},
       [](Graph& g, V v) { return g.sum(g.mul(g.concat_cols(v[0], v[1]), v[2])); }},
      {"concat_rows", {{2, 3}, {2, 3}, {4, 3}},
       [](Graph& g, V v) { return g.sum(g.mul(g.concat_rows(v[0], v[1]), v[2])); }},
      {"transpose", {{4, 3}, {3, 4}}, [](Graph& g, V v) { return g.sum(g.mul(g.transpose(v[0]), v[1])); }},
      {"normalize_rows", {{4, 3}, {4, 3}},
       [](Graph& g, V v) { return g.sum(g.mul(g.normalize_rows(v[0]), v[1])); }},
      {"sum", {{4, 3}}, [](Graph& g, V v) { return g.sum(g.mul(v[0], v[0])); }},
      {"mean", {{4, 3}}, [](Graph& g, V v) { return g.mean(g.tanh(v[0])); }},
      {"row_sum", {{4, 3}, {4, 1}}, [](Graph& g, V v) { return g.sum(g.mul(g.row_sum(v[0]), v[1])); }},
      {"softmax_cross_entropy", {{4, 3}},
       [](Graph& g, V v) { return g.softmax_cross_entropy(v[0], labels); }},
      {"sigmoid_bce", {{4, 1}}, [](Graph& g, V v) { return g.sigmoid_bce(v[0], targets); }},
      {"l1_loss", {{4, 1}, {4, 1}}, [](Graph& g, V v) { return g.l1_loss(v[0], v[1]); }},
  };
}

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (const OpCase& c : op_cases()) {
    for (int s = 0; s < kGradInstances; ++s) {
      Rng rng(1000 + static_cast<std::uint64_t>(s));
      std::vector<Tensor> in;
      for (auto [r, k] : c.shapes) in.push_back(random_tensor(r, k, rng));
      const auto res = testing::grad_check(in, c.loss, kGradStep);
      checked += res.checked;
      if (res.max_rel_error > worst) worst = res.max_rel_error, worst_name = c.name;
    }
  }
  // The reversal layer is the identity forward, so its oracle is -λ times the
  // finite difference of the same graph without it, for the input below it.
  for (int s = 0; s < kGradInstances; ++s) {
    Rng rng(1500 + static_cast<std::uint64_t>(s));
    const double lambda = rng.uniform(0.1, 2.0);
    const Tensor w = random_tensor(4, 3, rng);
    auto build = [&](bool reverse) {
      return [&, reverse](Graph& g, const std::vector<Var>& v) {
        Var h = g.tanh(v[0]);
        if (reverse) h = g.grad_reverse(h, lambda);
        return g.sum(g.mul(h, g.constant(w)));
      };
    };
    const auto res = testing::grad_check_against({random_tensor(4, 3, rng)}, build(true),
                                                 build(false), -lambda, kGradStep);
    checked += res.checked;
    if (res.max_rel_error > worst) worst = res.max_rel_error, worst_name = "grad_reverse";
  }
  for (int s = 0; s < kGradInstances; ++s) {
    const TaskKind kind = s % 2 == 0 ? TaskKind::Classification : TaskKind::Regression;
    auto inst = testing::random_lirr_instance(static_cast<std::uint64_t>(s), kind);
    const auto res = testing::lirr_grad_check(inst.model, inst.batch, inst.cfg, kGradStep);
    checked += res.checked;
    if (res.max_rel_error > worst) worst = res.max_rel_error, worst_name = "lirr_total";
  }
  const double secs = seconds_since(t0);
  return {worst < kGradRelTol && secs < kGradSeconds && checked > 0,
          "max rel error " + fmt(worst) + " (" + worst_name + "), " + std::to_string(checked) +
              " entries, " + fmt(secs) + " s"};
}

// 2 ---------------------------------------------------------------------------

Outcome criterion_grl() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    Rng rng(2000 + static_cast<std::uint64_t>(s));
    const Tensor x = random_tensor(5, 4, rng);
    const Tensor w = random_tensor(4, 3, rng);
    const Tensor b = random_tensor(1, 3, rng);
    const double lambda = rng.uniform(0.0, 3.0);
    std::vector<std::size_t> labels(5);
    for (auto& l : labels) l = rng.index(3);
    auto run = [&](bool reverse) {
      Graph g;
      Var xv = g.parameter(x);
      Var h = g.tanh(xv);
      if (reverse) h = g.grad_reverse(h, lambda);
      Var logits = g.add_row(g.matmul(h, g.constant(w)), g.constant(b));
      const Gradients grads = g.backward(g.softmax_cross_entropy(logits, labels));
      return grads[xv];
    };
    const Tensor plain = run(false);
    const Tensor rev = run(true);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      worst = std::max(worst, std::fabs(rev[i] - (-lambda) * plain[i]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kGrlTol && secs < kGrlSeconds,
          "max |g_rev + λ g| " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 3 ---------------------------------------------------------------------------

DiscreteJoint random_joint(Rng& rng) {
  const std::size_t ny = 2 + rng.index(3);
  const std::size_t nz = 1 + rng.index(6);
  std::vector<double> t(2 * ny * nz);
  double total = 0.0;
  for (double& v : t) {
    v = rng.uniform() < 0.15 ? 0.0 : -std::log(1.0 - rng.uniform());
    total += v;
  }
  if (total == 0.0) t[0] = total = 1.0;
  for (double& v : t) v /= total;
  return DiscreteJoint(ny, nz, t);
}

Outcome criterion_mi() {
  const auto t0 = Clock::now();
  Rng rng(3000);
  double worst = 0.0;
  for (int i = 0; i < kMiTables; ++i) {
    const MiDecomposition mi = mi_decomposition(random_joint(rng));
    worst = std::max(worst, std::fabs(mi.i_d_yz - mi.i_dz - mi.i_dy_given_z));
  }
  // D == Y uniform, Z constant.
  const MiDecomposition c = mi_decomposition(DiscreteJoint(2, 1, {0.5, 0.0, 0.0, 0.5}));
  const double closed = std::max({std::fabs(c.i_d_yz - std::numbers::ln2), std::fabs(c.i_dz),
                                  std::fabs(c.i_dy_given_z - std::numbers::ln2)});
  const double secs = seconds_since(t0);
  return {worst <= kMiTol && closed <= kMiTol && secs < kMiSeconds,
          "max chain-rule gap " + fmt(worst) + ", closed form (" + fmt(c.i_d_yz) + ", " +
              fmt(c.i_dz) + ", " + fmt(c.i_dy_given_z) + "), " + fmt(secs) + " s"};
}

// 4 ---------------------------------------------------------------------------

Outcome criterion_risk_gap() {
  const auto t0 = Clock::now();
  Rng rng(4000);
  int violations = 0;
  double worst = -1e300;
  std::size_t hypotheses = 0;
  for (int i = 0; i < kRiskGapInstances; ++i) {
    const std::size_t w = 2 + rng.index(4);
    const std::size_t h = 1 + rng.index(4);
    const FiniteHypothesisClass cls = stump_class(w, h);
    const RiskGapCheck c = risk_gap_check(random_stump_joint(w, h, rng), cls, kRiskGapTol);
    hypotheses += c.lhs.size();
    worst = std::max(worst, c.max_violation);
    if (!c.holds) ++violations;
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < kRiskGapSeconds,
          std::to_string(violations) + " violating instances, " + std::to_string(hypotheses) +
              " hypotheses, max lhs - rhs " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 5 ---------------------------------------------------------------------------

bool same_group(const LirrModel& a, const LirrModel& b, const std::string& prefix) {
  auto pa = const_cast<LirrModel&>(a).parameters();
  auto pb = const_cast<LirrModel&>(b).parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].name.starts_with(prefix) && !bit_identical(*pa[i].tensor, *pb[i].tensor)) return false;
  }
  return true;
}

Outcome criterion_degeneracy() {
  const auto t0 = Clock::now();
  const SemiDaTask task =
      gen_task(make_scenario(ScenarioKind::ConditionalShift), 2000, 20, 2000, 5000, {});
  LirrConfig zero;
  zero.lambda_risk = 0.0;
  zero.lambda_rep = 0.0;
  OptimConfig oc;
  oc.total_iters = kDegeneracyIters;
  oc.seed = 5001;
  const RunRecord a = train(Method::Lirr, task, zero, oc);
  const RunRecord b = train(Method::SPlusT, task, zero, oc);
  bool stream = a.iterations() == kDegeneracyIters && a.iterations() == b.iterations();
  for (std::size_t i = 0; stream && i < a.iterations(); ++i) {
    stream = a.losses[i].l_i == b.losses[i].l_i && a.losses[i].l_risk == b.losses[i].l_i;
  }
  const bool params = same_group(a.model, b.model, "encoder") && same_group(a.model, b.model, "invariant");
  const bool metrics = a.src_metric == b.src_metric && a.tgt_metric == b.tgt_metric;
  return {stream && params && metrics,
          std::string("loss stream ") + (stream ? "identical" : "differs") + ", parameters " +
              (params ? "identical" : "differ") + ", target metric " + fmt(a.tgt_metric) + " vs " +
              fmt(b.tgt_metric) + ", " + fmt(seconds_since(t0)) + " s"};
}

// 6 ---------------------------------------------------------------------------

SweepResult sweep_text(const std::string& text, const fs::path& out) {
  ExperimentConfig cfg = parse_experiment(KeyValueFile::parse(text));
  cfg.output_dir = out.string();
  SweepResult res = run_sweep(cfg, jobs());
  write_sweep_outputs(res, cfg, cfg.output_dir);
  return res;
}

double mean_of(const SweepResult& r, const std::string& method) {
  for (const CellSummary& s : r.summary) {
    if (s.method == method) return s.count ? s.mean_tgt : std::nan("");
  }
  return std::nan("");
}

Outcome criterion_ordering(const fs::path& out) {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  for (const char* kind : {"conditional_shift", "label_shift", "regression_sine_shift"}) {
    const SweepResult r = sweep_text(std::string("[experiment]\nmethods = lirr, dann, irm, s_plus_t\n"
                                                 "seeds = 0, 1, 2, 3, 4\nm = 20\n[scenario]\nkind = ") +
                                         kind + "\n",
                                     out / "ordering" / kind);
    const double lirr = mean_of(r, "lirr"), dann = mean_of(r, "dann"), irm = mean_of(r, "irm"),
                 st = mean_of(r, "s_plus_t");
    bool ok;
    if (r.task_kind == TaskKind::Regression) {
      ok = lirr <= std::min({dann, irm, st});
    } else {
      ok = lirr >= dann && lirr >= irm && lirr >= st + kOrderingMargin;
    }
    pass = pass && ok;
    detail += std::string(kind) + (ok ? " ok" : " violated") + " (lirr " + fmt(lirr) + ", dann " +
              fmt(dann) + ", irm " + fmt(irm) + ", s+t " + fmt(st) + "); ";
  }
  const double secs = seconds_since(t0);
  return {pass && secs < kOrderingSeconds, detail + fmt(secs) + " s"};
}

// 7 ---------------------------------------------------------------------------

Outcome criterion_curve(const fs::path& out) {
  const auto t0 = Clock::now();
  const SweepResult r = sweep_text(
      "[experiment]\nmethods = lirr\nseeds = 0, 1, 2, 3, 4\nratios = 0.01, 0.05, 0.1, 0.25, 0.5\n"
      "[scenario]\nkind = conditional_shift\n[data]\nrequire_small_m = false\n",
      out / "curve");
  std::vector<double> acc;
  for (const CellSummary& s : r.summary) acc.push_back(s.mean_tgt);
  int inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < acc.size(); ++i) {
    if (acc[i] < acc[i - 1]) {
      ++inversions;
      small = small && acc[i - 1] - acc[i] <= kCurveInversion;
    }
  }
  const SvgCurve curve = emit_curve_svg(r.summary, r.task_kind);
  write_text_file((out / "curve" / "curve.svg").string(), curve.svg);
  std::size_t vertices = 0;
  const std::regex line(R"re(<polyline[^>]*data-method="lirr"[^>]*points="([^"]*)")re");
  const std::regex line2(R"re(<polyline[^>]*points="([^"]*)"[^>]*data-method="lirr")re");
  std::smatch m;
  if (std::regex_search(curve.svg, m, line) || std::regex_search(curve.svg, m, line2)) {
    std::istringstream ss(m[1].str());
    std::string p;
    while (ss >> p) ++vertices;
  }
  const double secs = seconds_since(t0);
  std::string series;
  for (double a : acc) series += fmt(a) + " ";
  return {acc.size() == 5 && inversions <= 1 && small && vertices == 5 && secs < kCurveSeconds,
          "accuracy " + series + "(" + std::to_string(inversions) + " inversions), polyline with " +
              std::to_string(vertices) + " vertices, " + fmt(secs) + " s"};
}

// 8 ---------------------------------------------------------------------------

Outcome criterion_bound() {
  Rng rng(8000);
  int below = 0;
  double min_gap = 1e300;
  for (int i = 0; i < kBoundTasks; ++i) {
    const std::size_t w = 2 + rng.index(4), h = 1 + rng.index(4);
    const FiniteHypothesisClass cls = stump_class(w, h);
    const DiscreteJoint joint = random_stump_joint(w, h, rng);
    const Mask& hyp = cls.hypotheses[rng.index(cls.size())];
    const BoundReport r = bound_report_exact(joint, cls, hyp, 2000, 100);
    min_gap = std::min(min_gap, r.bound_total - *r.heldout_risk_t);
    if (r.bound_total < *r.heldout_risk_t) ++below;
  }
  // Hand evaluation of the radical at (n=2000, m=100, d=3, δ=0.05).
  const double n = 2000, m = 100, d = 3, delta = 0.05;
  const double direct = std::sqrt(8 * d / m * std::log(std::numbers::e * m / d) +
                                  2 / m * std::log(1 / delta) +
                                  8 * d / n * std::log(std::numbers::e * n / d) +
                                  2 / n * std::log(1 / delta));
  const double got = concentration_term(2000, 100, 3, 0.05);
  const double err = std::fabs(got - direct);
  return {below == 0 && err <= kConcentrationTol,
          std::to_string(below) + " of " + std::to_string(kBoundTasks) +
              " tasks below target risk (min margin " + fmt(min_gap) + "), concentration " +
              fmt(got) + " (|diff| " + fmt(err) + ")"};
}

// 9 ---------------------------------------------------------------------------

Outcome criterion_lambda_grid(const fs::path& out) {
  const auto t0 = Clock::now();
  const SweepResult r = sweep_text(
      "[experiment]\nmethods = lirr\nseeds = 0\nm = 20\n[scenario]\nkind = label_shift\n"
      "[grid]\nlambda_risk = 1, 0.1, 0.01\nlambda_rep = 1, 0.1, 0.01\n",
      out / "lambda_grid");
  std::set<std::pair<double, double>> cells;
  bool all_ok = true;
  for (const CellSummary& s : r.summary) {
    cells.insert({s.lambda_risk, s.lambda_rep});
    all_ok = all_ok && s.count == 1;
  }
  const std::string table = lambda_table(r.summary, r.task_kind);
  std::istringstream ss(table);
  std::string line;
  int body = 0;
  while (std::getline(ss, line)) {
    if (std::count(line.begin(), line.end(), '|') == 3 && line.find("lambda") == std::string::npos &&
        !line.starts_with("rep\\risk")) {
      ++body;
    }
  }
  const bool file = fs::exists(out / "lambda_grid" / "lambda_table.txt");
  std::cout << table;
  return {cells.size() == 9 && all_ok && body == 3 && file,
          std::to_string(cells.size()) + " cells, " + std::to_string(body) + " table rows, " +
              fmt(seconds_since(t0)) + " s"};
}

// 10 --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_determinism(const fs::path& out) {
  const std::string text =
      "[experiment]\nmethods = lirr, dann, irm, s_plus_t\nseeds = 0, 1\nm = 20, 40\n"
      "[scenario]\nkind = two_moons_rotation\n[data]\nn = 1000\nk = 1000\ntest_size = 500\n"
      "[optim]\ntotal_iters = 300\n";
  ExperimentConfig cfg = parse_experiment(KeyValueFile::parse(text));
  std::string files[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = out / "determinism" / ("run" + std::to_string(run));
    cfg.output_dir = dir.string();
    const SweepResult r = run_sweep(cfg, run == 0 ? 1 : std::max<std::size_t>(2, jobs()));
    write_sweep_outputs(r, cfg, cfg.output_dir);
    files[run] = slurp(dir / "results.csv");
  }
  const bool same = !files[0].empty() && files[0] == files[1];
  return {same, std::string("results.csv ") + (same ? "byte-identical" : "differs") + " (" +
                    std::to_string(files[0].size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string out = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--out", out, "Directory for sweep outputs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion_gradients},
      {2, criterion_grl},
      {3, criterion_mi},
      {4, criterion_risk_gap},
      {5, criterion_degeneracy},
      {6, [&] { return criterion_ordering(out); }},
      {7, [&] { return criterion_curve(out); }},
      {8, criterion_bound},
      {9, [&] { return criterion_lambda_grid(out); }},
      {10, [&] { return criterion_determinism(out); }},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

#include "lirr/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "lirr/data.hpp"
#include "lirr/errors.hpp"

namespace lirr {

std::string short_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return format_double(v);
  return std::string(buf, ptr);
}

std::uint64_t task_seed(std::uint64_t root, std::size_t m, std::int64_t seed_index) {
  return SeedSequence(root).add("task").add(m).add(static_cast<std::uint64_t>(seed_index)).value();
}

std::uint64_t train_seed(std::uint64_t root, std::size_t m, std::int64_t seed_index) {
  return SeedSequence(root).add("train").add(m).add(static_cast<std::uint64_t>(seed_index)).value();
}

namespace {

struct CellPlan {
  Method method;
  double lambda_risk;
  double lambda_rep;
  std::size_t m;
  std::int64_t seed_index;
};

std::vector<CellPlan> plan(const ExperimentConfig& cfg) {
  std::vector<std::pair<double, double>> lambdas;
  if (cfg.has_lambda_grid()) {
    for (double r : cfg.grid_lambda_risk) {
      for (double p : cfg.grid_lambda_rep) lambdas.emplace_back(r, p);
    }
  } else {
    lambdas.emplace_back(cfg.lirr.lambda_risk, cfg.lirr.lambda_rep);
  }
  std::vector<CellPlan> out;
  for (Method method : cfg.methods) {
    for (const auto& [r, p] : lambdas) {
      for (std::size_t m : cfg.m_values) {
        for (std::int64_t s : cfg.seeds) out.push_back({method, r, p, m, s});
      }
    }
  }
  return out;
}

std::string run_file_name(const CellPlan& c) {
  return std::string(to_string(c.method)) + "_lrisk" + short_double(c.lambda_risk) + "_lrep" +
         short_double(c.lambda_rep) + "_m" + std::to_string(c.m) + "_s" +
         std::to_string(c.seed_index) + ".csv";
}

CellResult run_cell(const ExperimentConfig& cfg, const CellPlan& c) {
  CellResult r;
  r.method = to_string(c.method);
  r.lambda_risk = c.lambda_risk;
  r.lambda_rep = c.lambda_rep;
  r.m = c.m;
  r.ratio = cfg.ratio_of(c.m);
  r.seed_index = c.seed_index;
  r.seed = task_seed(cfg.root_seed, c.m, c.seed_index);
  try {
    GenOptions gen;
    gen.test_size = cfg.test_size;
    gen.require_small_m = cfg.require_small_m;
    const SemiDaTask task = gen_task(cfg.scenario, cfg.n, c.m, cfg.k, r.seed, gen);
    LirrConfig lc = cfg.lirr;
    lc.lambda_risk = c.lambda_risk;
    lc.lambda_rep = c.lambda_rep;
    OptimConfig oc = cfg.optim;
    oc.seed = train_seed(cfg.root_seed, c.m, c.seed_index);
    const RunRecord run = train(c.method, task, lc, oc, cfg.model);
    if (cfg.write_run_metrics) {
      const auto dir = std::filesystem::path(cfg.output_dir) / "runs";
      std::filesystem::create_directories(dir);
      write_metrics_csv(run, (dir / run_file_name(c)).string());
    }
    if (run.diverged) {
      r.status = "diverged";
      r.diagnostic = run.diagnostic;
    } else {
      r.src_metric = run.src_metric;
      r.tgt_metric = run.tgt_metric;
    }
  } catch (const std::exception& e) {
    r.status = "error";
    r.diagnostic = e.what();
  }
  return r;
}

bool lower_is_better(TaskKind k) { return k == TaskKind::Regression; }

const char* metric_name(TaskKind k) { return k == TaskKind::Regression ? "MAE" : "accuracy"; }

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t jobs, const ProgressFn& progress) {
  cfg.validate();
  const std::vector<CellPlan> cells = plan(cfg);
  SweepResult result;
  result.task_kind = cfg.scenario.task_kind();
  result.rows.resize(cells.size());

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      result.rows[i] = run_cell(cfg, cells[i]);
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(result.rows[i], d, cells.size());
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.summary = aggregate(result.rows);
  return result;
}

std::vector<CellSummary> aggregate(const std::vector<CellResult>& rows) {
  std::vector<CellSummary> out;
  std::vector<std::vector<double>> tgt, src;
  for (const CellResult& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& s) {
      return s.method == r.method && s.lambda_risk == r.lambda_risk &&
             s.lambda_rep == r.lambda_rep && s.m == r.m;
    });
    std::size_t idx;
    if (it == out.end()) {
      CellSummary s;
      s.method = r.method;
      s.lambda_risk = r.lambda_risk;
      s.lambda_rep = r.lambda_rep;
      s.m = r.m;
      s.ratio = r.ratio;
      out.push_back(s);
      tgt.emplace_back();
      src.emplace_back();
      idx = out.size() - 1;
    } else {
      idx = static_cast<std::size_t>(it - out.begin());
    }
    if (r.status == "ok") {
      tgt[idx].push_back(r.tgt_metric);
      src[idx].push_back(r.src_metric);
    } else {
      ++out[idx].failed;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    CellSummary& s = out[i];
    s.count = tgt[i].size();
    if (s.count == 0) {
      s.mean_tgt = s.std_tgt = s.mean_src = std::nan("");
      continue;
    }
    double sum = 0.0, sum_src = 0.0;
    for (std::size_t j = 0; j < s.count; ++j) {
      sum += tgt[i][j];
      sum_src += src[i][j];
    }
    s.mean_tgt = sum / static_cast<double>(s.count);
    s.mean_src = sum_src / static_cast<double>(s.count);
    double ss = 0.0;
    for (double v : tgt[i]) ss += (v - s.mean_tgt) * (v - s.mean_tgt);
    s.std_tgt = s.count > 1 ? std::sqrt(ss / static_cast<double>(s.count - 1)) : 0.0;
  }
  return out;
}

std::string results_csv(const std::vector<CellResult>& rows) {
  std::ostringstream os;
  os << "method,lambda_risk,lambda_rep,m,ratio,seed_index,seed,src_metric,tgt_metric,status\n";
  for (const CellResult& r : rows) {
    os << r.method << ',' << short_double(r.lambda_risk) << ',' << short_double(r.lambda_rep)
       << ',' << r.m << ',' << short_double(r.ratio) << ',' << r.seed_index << ',' << r.seed
       << ',' << format_double(r.src_metric) << ',' << format_double(r.tgt_metric) << ','
       << r.status << '\n';
  }
  return os.str();
}

std::vector<CellResult> parse_results_csv(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) ||
      trim(line) !=
          "method,lambda_risk,lambda_rep,m,ratio,seed_index,seed,src_metric,tgt_metric,status") {
    throw ParseError(origin, 1, "not a results.csv header");
  }
  std::vector<CellResult> rows;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) throw ParseError(origin, lineno, "expected 10 fields");
    try {
      CellResult r;
      r.method = f[0];
      r.lambda_risk = parse_double(f[1], "lambda_risk");
      r.lambda_rep = parse_double(f[2], "lambda_rep");
      r.m = static_cast<std::size_t>(parse_int(f[3], "m"));
      r.ratio = parse_double(f[4], "ratio");
      r.seed_index = parse_int(f[5], "seed_index");
      r.seed = std::stoull(f[6]);
      r.src_metric = parse_double(f[7], "src_metric");
      r.tgt_metric = parse_double(f[8], "tgt_metric");
      r.status = f[9];
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError(origin, lineno, e.what());
    }
  }
  return rows;
}

std::vector<CellResult> load_results_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_results_csv(ss.str(), path);
}

std::string summary_csv(const std::vector<CellSummary>& summary) {
  std::ostringstream os;
  os << "method,lambda_risk,lambda_rep,m,ratio,count,failed,mean_tgt,std_tgt,mean_src\n";
  for (const CellSummary& s : summary) {
    os << s.method << ',' << short_double(s.lambda_risk) << ',' << short_double(s.lambda_rep)
       << ',' << s.m << ',' << short_double(s.ratio) << ',' << s.count << ',' << s.failed << ','
       << format_double(s.mean_tgt) << ',' << format_double(s.std_tgt) << ','
       << format_double(s.mean_src) << '\n';
  }
  return os.str();
}

std::string ranking_text(const std::vector<CellSummary>& summary, TaskKind kind) {
  std::ostringstream os;
  std::vector<std::size_t> ms;
  for (const CellSummary& s : summary) {
    if (std::find(ms.begin(), ms.end(), s.m) == ms.end()) ms.push_back(s.m);
  }
  char buf[160];
  for (std::size_t m : ms) {
    std::vector<const CellSummary*> cells;
    for (const CellSummary& s : summary) {
      if (s.m == m) cells.push_back(&s);
    }
    std::stable_sort(cells.begin(), cells.end(), [&](const CellSummary* a, const CellSummary* b) {
      if (std::isnan(a->mean_tgt)) return false;
      if (std::isnan(b->mean_tgt)) return true;
      return lower_is_better(kind) ? a->mean_tgt < b->mean_tgt : a->mean_tgt > b->mean_tgt;
    });
    os << "m = " << m << " (target " << metric_name(kind) << ", "
       << (lower_is_better(kind) ? "lower" : "higher") << " is better)\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const CellSummary& s = *cells[i];
      std::string label = s.method;
      if (s.method == "lirr" || s.method == "lirr_cosc" || s.method == "dann") {
        label += " (risk " + short_double(s.lambda_risk) + ", rep " + short_double(s.lambda_rep) + ")";
      }
      std::snprintf(buf, sizeof(buf), "  %2zu. %-36s %.4f +- %.4f  (n=%zu%s)\n", i + 1,
                    label.c_str(), s.mean_tgt, s.std_tgt, s.count,
                    s.failed ? ", some runs failed" : "");
      os << buf;
    }
  }
  return os.str();
}

std::string lambda_table(const std::vector<CellSummary>& summary, TaskKind kind) {
  std::ostringstream os;
  std::vector<std::pair<std::string, std::size_t>> groups;
  for (const CellSummary& s : summary) {
    auto key = std::make_pair(s.method, s.m);
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  char buf[64];
  for (const auto& [method, m] : groups) {
    std::vector<double> risks, reps;
    for (const CellSummary& s : summary) {
      if (s.method != method || s.m != m) continue;
      if (std::find(risks.begin(), risks.end(), s.lambda_risk) == risks.end()) {
        risks.push_back(s.lambda_risk);
      }
      if (std::find(reps.begin(), reps.end(), s.lambda_rep) == reps.end()) {
        reps.push_back(s.lambda_rep);
      }
    }
    os << method << ", m = " << m << ": target " << metric_name(kind)
       << " (mean +- std); rows lambda_rep, columns lambda_risk\n";
    std::snprintf(buf, sizeof(buf), "%-10s", "rep\\risk");
    os << buf;
    for (double r : risks) {
      std::snprintf(buf, sizeof(buf), " | %-17s", short_double(r).c_str());
      os << buf;
    }
    os << '\n';
    for (double p : reps) {
      std::snprintf(buf, sizeof(buf), "%-10s", short_double(p).c_str());
      os << buf;
      for (double r : risks) {
        auto it = std::find_if(summary.begin(), summary.end(), [&](const CellSummary& s) {
          return s.method == method && s.m == m && s.lambda_risk == r && s.lambda_rep == p;
        });
        if (it == summary.end()) {
          std::snprintf(buf, sizeof(buf), " | %-17s", "-");
        } else {
          std::snprintf(buf, sizeof(buf), " | %.4f +- %.4f  ", it->mean_tgt, it->std_tgt);
        }
        os << buf;
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& cfg,
                         const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    os << text;
  };
  write("results.csv", results_csv(result.rows));
  write("summary.csv", summary_csv(result.summary));
  write("ranking.txt", ranking_text(result.summary, result.task_kind));
  if (cfg.has_lambda_grid()) write("lambda_table.txt", lambda_table(result.summary, result.task_kind));
  std::string failures;
  for (const CellResult& r : result.rows) {
    if (r.status != "ok") {
      failures += r.method + " m=" + std::to_string(r.m) + " seed_index=" +
                  std::to_string(r.seed_index) + ": " + r.status + ": " + r.diagnostic + "\n";
    }
  }
  if (!failures.empty()) write("failures.txt", failures);
}

}  // namespace lirr

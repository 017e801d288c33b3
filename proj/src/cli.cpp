#include "lirr/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <thread>

#include "lirr/bound.hpp"
#include "lirr/checkpoint.hpp"
#include "lirr/config.hpp"
#include "lirr/data.hpp"
#include "lirr/errors.hpp"
#include "lirr/svg.hpp"
#include "lirr/sweep.hpp"
#include "lirr/trainer.hpp"

namespace lirr {

namespace {

namespace fs = std::filesystem;

KeyValueFile load_optional(const std::string& path) {
  return path.empty() ? KeyValueFile{} : KeyValueFile::load(path);
}

void apply_params(KeyValueFile& kv, const std::vector<std::string>& params) {
  for (const std::string& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ConfigError("--param expects name=value, got '" + p + "'");
    kv.set("scenario." + trim(p.substr(0, eq)), trim(p.substr(eq + 1)));
  }
}

BatchPredictor model_predictor(const LirrModel& model, TaskKind kind) {
  return [&model, kind](const Tensor& x) {
    const Tensor out = predict(model, x);
    std::vector<double> y(x.rows());
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (kind == TaskKind::Regression) {
        y[i] = out(i, 0);
        continue;
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < out.cols(); ++c) {
        if (out(i, c) > out(i, best)) best = c;
      }
      y[i] = static_cast<double>(best);
    }
    return y;
  };
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Semi-supervised domain adaptation laboratory"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a task and write it to a directory");
  std::string gen_config, gen_scenario, gen_out;
  std::vector<std::string> gen_params;
  std::uint64_t gen_seed = 0;
  std::size_t gen_n = 0, gen_m = 20, gen_k = 0, gen_test = 0;
  bool gen_allow_large_m = false;
  gen->add_option("--config", gen_config, "Configuration file ([scenario] and [data])");
  gen->add_option("--scenario", gen_scenario, "Scenario kind");
  gen->add_option("--param", gen_params, "Scenario parameter override name=value");
  gen->add_option("--seed", gen_seed, "Task seed");
  gen->add_option("--n", gen_n, "Labeled source size");
  gen->add_option("--m", gen_m, "Labeled target size");
  gen->add_option("--k", gen_k, "Unlabeled target size");
  gen->add_option("--test-size", gen_test, "Held-out target size");
  gen->add_flag("--allow-large-m", gen_allow_large_m, "Do not enforce m <= n/10");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one method on a task directory");
  std::string tr_task, tr_config, tr_method = "lirr", tr_out;
  std::uint64_t tr_seed = 0;
  std::size_t tr_iters = 0;
  std::optional<double> tr_lrisk, tr_lrep;
  tr->add_option("--task", tr_task, "Task directory")->required();
  tr->add_option("--config", tr_config, "Configuration file ([optim], [lirr], [model])");
  tr->add_option("--method", tr_method, "lirr, lirr_cosc, dann, irm, s_plus_t or full_t");
  tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--iters", tr_iters, "Override total iterations");
  tr->add_option("--lambda-risk", tr_lrisk, "Override lambda_risk");
  tr->add_option("--lambda-rep", tr_lrep, "Override lambda_rep");
  tr->add_option("--out", tr_out, "Run directory")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a task");
  std::string ev_task, ev_model;
  ev->add_option("--task", ev_task, "Task directory")->required();
  ev->add_option("--model", ev_model, "Checkpoint file")->required();

  // bound
  auto* bd = app.add_subcommand("bound", "Compute the bound terms for a trained model");
  std::string bd_task, bd_model, bd_mode = "finite_sample", bd_out;
  double bd_delta = 0.05;
  std::size_t bd_bins = 32;
  bool bd_proxy = false;
  bd->add_option("--task", bd_task, "Task directory")->required();
  bd->add_option("--model", bd_model, "Checkpoint file")->required();
  bd->add_option("--mode", bd_mode, "population or finite_sample");
  bd->add_option("--delta", bd_delta, "Confidence parameter");
  bd->add_option("--bins", bd_bins, "Grid bins per axis");
  bd->add_flag("--proxy", bd_proxy, "Also report the proxy A-distance of learned features");
  bd->add_option("--out", bd_out, "Also write the report as a CSV row to this file");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Run a multi-seed experiment sweep");
  std::string sw_config, sw_out;
  std::size_t sw_jobs = std::max(1u, std::thread::hardware_concurrency());
  bool sw_quiet = false;
  sw->add_option("--config", sw_config, "Experiment configuration")->required();
  sw->add_option("--jobs", sw_jobs, "Parallel runs");
  sw->add_option("--out", sw_out, "Output directory (default: experiment.output_dir)");
  sw->add_flag("--quiet", sw_quiet, "No per-run progress");

  // plot
  auto* pl = app.add_subcommand("plot", "Labeled-ratio curve from a results.csv");
  std::string pl_results, pl_out;
  bool pl_regression = false;
  pl->add_option("--results", pl_results, "results.csv from a sweep")->required();
  pl->add_option("--out", pl_out, "SVG output path")->required();
  pl->add_flag("--regression", pl_regression, "Label the metric axis as MAE");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      KeyValueFile kv = load_optional(gen_config);
      if (!gen_scenario.empty()) kv.set("scenario.kind", gen_scenario);
      apply_params(kv, gen_params);
      const ScenarioSpec spec = scenario_from(kv, "covariate_shift");
      GenOptions opts;
      opts.test_size = gen_test ? gen_test : static_cast<std::size_t>(kv.get_int("data.test_size", 2000));
      opts.require_small_m = !gen_allow_large_m && kv.get_bool("data.require_small_m", true);
      const std::size_t n = gen_n ? gen_n : static_cast<std::size_t>(kv.get_int("data.n", 2000));
      const std::size_t k = gen_k ? gen_k : static_cast<std::size_t>(kv.get_int("data.k", 2000));
      const SemiDaTask task = gen_task(spec, n, gen_m, k, gen_seed, opts);
      save_task(task, gen_out);
      std::cout << "wrote " << to_string(spec.kind) << " task (n=" << n << ", m=" << gen_m
                << ", k=" << k << ") to " << gen_out << "\n";
      return 0;
    }
    if (*tr) {
      const ExperimentConfig cfg = parse_experiment(load_optional(tr_config), false);
      const SemiDaTask task = load_task(tr_task);
      LirrConfig lc = cfg.lirr;
      if (tr_lrisk) lc.lambda_risk = *tr_lrisk;
      if (tr_lrep) lc.lambda_rep = *tr_lrep;
      OptimConfig oc = cfg.optim;
      oc.seed = tr_seed;
      if (tr_iters) oc.total_iters = tr_iters;
      const RunRecord run = train(parse_method(tr_method), task, lc, oc, cfg.model);
      fs::create_directories(tr_out);
      write_metrics_csv(run, (fs::path(tr_out) / "metrics.csv").string());
      if (run.diverged) {
        std::cerr << "training aborted: " << run.diagnostic << "\n";
        return 1;
      }
      save_checkpoint(run.model, (fs::path(tr_out) / "model.ckpt").string());
      std::cout << "method " << tr_method << ": source " << short_double(run.src_metric)
                << ", target " << short_double(run.tgt_metric) << " (" << run.iterations()
                << " iterations, " << run.wall_seconds << " s)\n";
      return 0;
    }
    if (*ev) {
      const SemiDaTask task = load_task(ev_task);
      const LirrModel model = load_checkpoint(ev_model);
      const TaskKind kind = task.scenario.task_kind();
      const char* metric = kind == TaskKind::Regression ? "mae" : "accuracy";
      std::cout << "source_" << metric << " " << short_double(evaluate(model, task.source, kind))
                << "\n"
                << "target_" << metric << " "
                << short_double(evaluate(model, task.test_target, kind)) << "\n";
      return 0;
    }
    if (*bd) {
      const SemiDaTask task = load_task(bd_task);
      const LirrModel model = load_checkpoint(bd_model);
      BoundOptions opts;
      opts.mode = parse_bound_mode(bd_mode);
      opts.delta = bd_delta;
      opts.bins = bd_bins;
      BoundReport r =
          bound_report(model_predictor(model, task.scenario.task_kind()), task, opts);
      if (bd_proxy) {
        r.proxy_a_distance = proxy_a_distance(features(model, task.source.x),
                                              features(model, task.target_unlabeled.x), task.seed);
      }
      std::cout << r.text();
      if (!bd_out.empty()) {
        write_text_file(bd_out, BoundReport::csv_header() + "\n" + r.csv_row() + "\n");
      }
      return 0;
    }
    if (*sw) {
      ExperimentConfig cfg = load_experiment(sw_config);
      if (!sw_out.empty()) cfg.output_dir = sw_out;
      ProgressFn progress;
      if (!sw_quiet) {
        progress = [](const CellResult& r, std::size_t done, std::size_t total) {
          std::cerr << "[" << done << "/" << total << "] " << r.method << " m=" << r.m
                    << " seed_index=" << r.seed_index << " " << r.status << " target "
                    << short_double(r.tgt_metric) << "\n";
        };
      }
      const SweepResult res = run_sweep(cfg, sw_jobs, progress);
      write_sweep_outputs(res, cfg, cfg.output_dir);
      std::cout << ranking_text(res.summary, res.task_kind);
      if (cfg.has_lambda_grid()) std::cout << "\n" << lambda_table(res.summary, res.task_kind);
      if (cfg.m_values.size() >= 2) {
        const SvgCurve curve = emit_curve_svg(res.summary, res.task_kind);
        write_text_file((fs::path(cfg.output_dir) / "curve.svg").string(), curve.svg);
        if (!curve.warning.empty()) std::cerr << "warning: " << curve.warning << "\n";
      }
      std::cout << "results written to " << cfg.output_dir << "\n";
      return 0;
    }
    if (*pl) {
      const auto rows = load_results_csv(pl_results);
      const SvgCurve curve = emit_curve_svg(
          aggregate(rows), pl_regression ? TaskKind::Regression : TaskKind::Classification);
      if (!curve.warning.empty()) std::cerr << "warning: " << curve.warning << "\n";
      write_text_file(pl_out, curve.svg);
      std::cout << "wrote " << pl_out << " (" << curve.polylines << " polylines)\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace lirr

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "lirr/bound.hpp"
#include "lirr/config.hpp"
#include "lirr/data.hpp"
#include "lirr/errors.hpp"
#include "lirr/sweep.hpp"
#include "lirr/trainer.hpp"

namespace py = pybind11;
using namespace lirr;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  py::array_t<double> a({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

py::array_t<double> to_numpy(const std::vector<double>& v) {
  py::array_t<double> a(v.size());
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Tensor(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

struct RunResult {
  RunRecord record;
};

BatchPredictor predictor_for(const LirrModel& model) {
  return [&model](const Tensor& x) {
    const Tensor out = predict(model, x);
    std::vector<double> y(x.rows());
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (model.task_kind == TaskKind::Regression) {
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

PYBIND11_MODULE(_lirr, m) {
  m.doc() = "Semi-supervised domain adaptation with invariant representations and risks";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  py::class_<SemiDaTask>(m, "Task")
      .def_property_readonly("n", &SemiDaTask::n)
      .def_property_readonly("m", &SemiDaTask::m)
      .def_property_readonly("k", &SemiDaTask::k)
      .def_readonly("seed", &SemiDaTask::seed)
      .def_property_readonly("kind", [](const SemiDaTask& t) { return to_string(t.scenario.kind); })
      .def_property_readonly("source_x", [](const SemiDaTask& t) { return to_numpy(t.source.x); })
      .def_property_readonly("source_y", [](const SemiDaTask& t) { return to_numpy(t.source.y); })
      .def_property_readonly("target_x",
                             [](const SemiDaTask& t) { return to_numpy(t.target_labeled.x); })
      .def_property_readonly("target_y",
                             [](const SemiDaTask& t) { return to_numpy(t.target_labeled.y); })
      .def_property_readonly("unlabeled_x",
                             [](const SemiDaTask& t) { return to_numpy(t.target_unlabeled.x); })
      .def_property_readonly("test_x", [](const SemiDaTask& t) { return to_numpy(t.test_target.x); })
      .def_property_readonly("test_y", [](const SemiDaTask& t) { return to_numpy(t.test_target.y); })
      .def("save", [](const SemiDaTask& t, const std::string& dir) { save_task(t, dir); })
      .def_static("load", &load_task);

  py::class_<LossReport>(m, "LossReport")
      .def_readonly("l_i", &LossReport::l_i)
      .def_readonly("l_d", &LossReport::l_d)
      .def_readonly("l_rep", &LossReport::l_rep)
      .def_readonly("l_risk", &LossReport::l_risk)
      .def_readonly("l_total", &LossReport::l_total);

  py::class_<BoundReport>(m, "BoundReport")
      .def_readonly("n", &BoundReport::n)
      .def_readonly("m", &BoundReport::m)
      .def_readonly("emp_risk_s", &BoundReport::emp_risk_s)
      .def_readonly("emp_risk_t", &BoundReport::emp_risk_t)
      .def_readonly("distance_term", &BoundReport::distance_term)
      .def_readonly("disagreement_term", &BoundReport::disagreement_term)
      .def_readonly("noise_term", &BoundReport::noise_term)
      .def_readonly("concentration_term", &BoundReport::concentration_term)
      .def_readonly("bound_total", &BoundReport::bound_total)
      .def("__str__", &BoundReport::text);

  py::class_<RunResult>(m, "RunResult")
      .def_property_readonly("method", [](const RunResult& r) { return to_string(r.record.method); })
      .def_property_readonly("src_metric", [](const RunResult& r) { return r.record.src_metric; })
      .def_property_readonly("tgt_metric", [](const RunResult& r) { return r.record.tgt_metric; })
      .def_property_readonly("diverged", [](const RunResult& r) { return r.record.diverged; })
      .def_property_readonly("losses", [](const RunResult& r) { return r.record.losses; })
      .def("predict",
           [](const RunResult& r, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
             return to_numpy(predict(r.record.model, from_numpy(x)));
           })
      .def("features",
           [](const RunResult& r, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
             return to_numpy(features(r.record.model, from_numpy(x)));
           })
      .def(
          "bound",
          [](const RunResult& r, const SemiDaTask& task, const std::string& mode, double delta) {
            BoundOptions opts;
            opts.mode = parse_bound_mode(mode);
            opts.delta = delta;
            return bound_report(predictor_for(r.record.model), task, opts);
          },
          py::arg("task"), py::arg("mode") = "finite_sample", py::arg("delta") = 0.05);

  m.def(
      "gen_task",
      [](const std::string& kind, std::size_t n, std::size_t m_, std::size_t k, std::uint64_t seed,
         const std::map<std::string, double>& params, std::size_t test_size) {
        GenOptions opts;
        opts.test_size = test_size;
        return gen_task(make_scenario(parse_scenario_kind(kind), params), n, m_, k, seed, opts);
      },
      py::arg("kind"), py::arg("n") = 2000, py::arg("m") = 20, py::arg("k") = 2000,
      py::arg("seed") = 0, py::arg("params") = std::map<std::string, double>{},
      py::arg("test_size") = 2000);

  m.def(
      "train",
      [](const SemiDaTask& task, const std::string& method, std::size_t iters, std::uint64_t seed,
         double lambda_risk, double lambda_rep) {
        LirrConfig lc;
        lc.lambda_risk = lambda_risk;
        lc.lambda_rep = lambda_rep;
        OptimConfig oc;
        oc.total_iters = iters;
        oc.seed = seed;
        RunResult r;
        {
          py::gil_scoped_release release;
          r.record = train(parse_method(method), task, lc, oc);
        }
        return r;
      },
      py::arg("task"), py::arg("method") = "lirr", py::arg("iters") = 4000, py::arg("seed") = 0,
      py::arg("lambda_risk") = 1.0, py::arg("lambda_rep") = 1.0);

  m.def(
      "evaluate_task",
      [](const RunResult& r, const SemiDaTask& task) {
        return evaluate(r.record.model, task.test_target, task.scenario.task_kind());
      },
      "Accuracy or MAE of a trained run on the task's held-out target set.");

  m.def("concentration_term", &concentration_term, py::arg("n"), py::arg("m"), py::arg("d"),
        py::arg("delta"));

  m.def(
      "mi_decomposition",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& table) {
        if (table.ndim() != 3 || table.shape(0) != 2) {
          throw DimensionError("expected a (2, ny, nz) probability table");
        }
        const auto ny = static_cast<std::size_t>(table.shape(1));
        const auto nz = static_cast<std::size_t>(table.shape(2));
        DiscreteJoint joint(ny, nz,
                            std::vector<double>(table.data(), table.data() + 2 * ny * nz));
        const MiDecomposition mi = mi_decomposition(joint);
        return py::make_tuple(mi.i_d_yz, mi.i_dz, mi.i_dy_given_z);
      },
      "(I(D;Y,Z), I(D;Z), I(D;Y|Z)) in nats for a table indexed [d, y, z].");

  m.def(
      "run_sweep_config",
      [](const std::string& path, std::size_t jobs) {
        const ExperimentConfig cfg = load_experiment(path);
        SweepResult res;
        {
          py::gil_scoped_release release;
          res = run_sweep(cfg, jobs);
        }
        return results_csv(res.rows);
      },
      py::arg("path"), py::arg("jobs") = 1, "Runs a sweep and returns results.csv as text.");
}

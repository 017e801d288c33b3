#include "lirr/config.hpp"

#include <cmath>
#include <set>

#include "lirr/errors.hpp"

namespace lirr {

namespace {

const std::set<std::string> kKnownKeys = {
    "experiment.name",          "experiment.output_dir",
    "experiment.root_seed",     "experiment.methods",
    "experiment.seeds",         "experiment.m",
    "experiment.ratios",        "experiment.write_run_metrics",
    "scenario.kind",            "data.n",
    "data.k",                   "data.test_size",
    "data.require_small_m",     "optim.lr",
    "optim.momentum",           "optim.weight_decay",
    "optim.total_iters",        "optim.batch_size",
    "optim.decay_fraction",     "optim.decay_multiplier",
    "optim.irm_penalty_weight", "optim.irm_warmup_fraction",
    "lirr.lambda_risk",         "lirr.lambda_rep",
    "lirr.rep_uses_labeled_target", "model.encoder_hidden",
    "model.feature_dim",        "model.head_hidden",
    "model.activation",         "model.cosine_temperature",
    "grid.lambda_risk",         "grid.lambda_rep",
};

std::size_t positive_size(std::int64_t v, const char* what) {
  if (v < 1) throw ConfigError(std::string(what) + " must be at least 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

ScenarioSpec scenario_from(const KeyValueFile& kv, const std::string& default_kind) {
  const ScenarioKind kind = parse_scenario_kind(kv.get_string("scenario.kind", default_kind));
  std::map<std::string, double> params;
  for (const std::string& key : kv.keys()) {
    if (key.rfind("scenario.", 0) != 0 || key == "scenario.kind") continue;
    params[key.substr(9)] = parse_double(*kv.get(key), key);
  }
  return make_scenario(kind, params);
}

ExperimentConfig parse_experiment(const KeyValueFile& kv, bool for_sweep) {
  for (const std::string& key : kv.keys()) {
    if (key.rfind("scenario.", 0) == 0) continue;
    if (!kKnownKeys.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
  ExperimentConfig c;
  c.name = kv.get_string("experiment.name", c.name);
  c.output_dir = kv.get_string("experiment.output_dir", "runs/" + c.name);
  c.root_seed = static_cast<std::uint64_t>(kv.get_int("experiment.root_seed", 0));
  for (const std::string& m : kv.get_list("experiment.methods")) c.methods.push_back(parse_method(m));
  c.seeds = kv.get_int_list("experiment.seeds");
  c.write_run_metrics = kv.get_bool("experiment.write_run_metrics", false);

  c.scenario = scenario_from(kv, "covariate_shift");
  c.n = positive_size(kv.get_int("data.n", 2000), "data.n");
  c.k = positive_size(kv.get_int("data.k", 2000), "data.k");
  c.test_size = positive_size(kv.get_int("data.test_size", 2000), "data.test_size");
  c.require_small_m = kv.get_bool("data.require_small_m", true);

  if (kv.has("experiment.m") && kv.has("experiment.ratios")) {
    throw ConfigError("give either experiment.m or experiment.ratios, not both");
  }
  for (std::int64_t m : kv.get_int_list("experiment.m")) {
    c.m_values.push_back(positive_size(m, "experiment.m"));
  }
  c.ratios = kv.get_double_list("experiment.ratios");
  for (double r : c.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("experiment.ratios must lie in (0, 1]");
    const auto m = static_cast<std::size_t>(std::llround(r * static_cast<double>(c.k)));
    c.m_values.push_back(std::max<std::size_t>(m, 1));
  }

  OptimConfig& o = c.optim;
  o.lr = kv.get_double("optim.lr", o.lr);
  o.momentum = kv.get_double("optim.momentum", o.momentum);
  o.weight_decay = kv.get_double("optim.weight_decay", o.weight_decay);
  o.total_iters = positive_size(kv.get_int("optim.total_iters", 4000), "optim.total_iters");
  o.batch_size = positive_size(kv.get_int("optim.batch_size", 64), "optim.batch_size");
  o.decay_fraction = kv.get_double("optim.decay_fraction", o.decay_fraction);
  o.decay_multiplier = kv.get_double("optim.decay_multiplier", o.decay_multiplier);
  o.irm_penalty_weight = kv.get_double("optim.irm_penalty_weight", o.irm_penalty_weight);
  o.irm_warmup_fraction = kv.get_double("optim.irm_warmup_fraction", o.irm_warmup_fraction);

  c.lirr.lambda_risk = kv.get_double("lirr.lambda_risk", c.lirr.lambda_risk);
  c.lirr.lambda_rep = kv.get_double("lirr.lambda_rep", c.lirr.lambda_rep);
  c.lirr.rep_uses_labeled_target =
      kv.get_bool("lirr.rep_uses_labeled_target", c.lirr.rep_uses_labeled_target);
  c.lirr.task_kind = c.scenario.task_kind();

  if (kv.has("model.encoder_hidden")) {
    c.model.encoder_hidden.clear();
    for (std::int64_t w : kv.get_int_list("model.encoder_hidden")) {
      c.model.encoder_hidden.push_back(positive_size(w, "model.encoder_hidden"));
    }
  }
  c.model.feature_dim = positive_size(kv.get_int("model.feature_dim", 16), "model.feature_dim");
  c.model.head_hidden = positive_size(kv.get_int("model.head_hidden", 32), "model.head_hidden");
  c.model.activation = parse_activation(kv.get_string("model.activation", "relu"));
  c.model.cosine_temperature =
      kv.get_double("model.cosine_temperature", c.model.cosine_temperature);

  c.grid_lambda_risk = kv.get_double_list("grid.lambda_risk");
  c.grid_lambda_rep = kv.get_double_list("grid.lambda_rep");
  c.validate(for_sweep);
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  return parse_experiment(KeyValueFile::load(path));
}

void ExperimentConfig::validate(bool for_sweep) const {
  if (for_sweep) {
    if (methods.empty()) throw ConfigError("experiment.methods must list at least one method");
    if (seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
    if (m_values.empty()) throw ConfigError("give experiment.m or experiment.ratios");
  }
  for (std::int64_t s : seeds) {
    if (s < 0) throw ConfigError("seed indices must be nonnegative");
  }
  for (std::size_t m : m_values) {
    if (m > k) throw ConfigError("m=" + std::to_string(m) + " exceeds k=" + std::to_string(k));
    if (require_small_m && m * 10 > n) {
      throw ConfigError("m=" + std::to_string(m) + " exceeds n/10; set data.require_small_m = false");
    }
  }
  if (grid_lambda_risk.empty() != grid_lambda_rep.empty()) {
    throw ConfigError("grid.lambda_risk and grid.lambda_rep must be given together");
  }
  for (double v : grid_lambda_risk) {
    if (!(v >= 0.0)) throw ConfigError("grid lambdas must be nonnegative");
  }
  for (double v : grid_lambda_rep) {
    if (!(v >= 0.0)) throw ConfigError("grid lambdas must be nonnegative");
  }
  optim.validate();
  lirr.validate();
  for (Method mth : methods) {
    if (mth == Method::LirrCosc && scenario.task_kind() != TaskKind::Classification) {
      throw ConfigError("lirr_cosc applies to classification scenarios only");
    }
  }
}

}  // namespace lirr

#include "lirr/data.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lirr/errors.hpp"
#include "lirr/keyvalue.hpp"

namespace lirr {

namespace {

constexpr int kFormatVersion = 1;

LabeledSet to_labeled(DomainSample s, Domain d) { return {std::move(s.x), std::move(s.y), d}; }

std::string header(std::size_t dim, bool labeled) {
  std::string h;
  for (std::size_t j = 0; j < dim; ++j) h += "x" + std::to_string(j + 1) + ",";
  if (labeled) h += "y,";
  return h + "domain";
}

void write_rows(std::ostream& os, const Tensor& x, const std::vector<double>* y, Domain d) {
  const int tag = static_cast<int>(d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) os << format_double(x(i, j)) << ',';
    if (y) os << format_double((*y)[i]) << ',';
    os << tag << '\n';
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path);
}

double parse_field(const std::string& path, std::size_t line, const std::string& field) {
  double v = 0.0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw ParseError(path, line, "invalid number '" + field + "'");
  }
  if (!std::isfinite(v)) throw ParseError(path, line, "non-finite value '" + field + "'");
  return v;
}

struct CsvContent {
  Tensor x;
  std::vector<double> y;
  Domain domain = Domain::Source;
};

CsvContent read_csv(const std::string& path, std::size_t dim, bool labeled) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path, 1, "empty file, expected a header");
  const std::string expected = header(dim, labeled);
  if (trim(line) != expected) {
    if (labeled && trim(line) == header(dim, false)) {
      throw ParseError(path, 1, "missing label column 'y'");
    }
    throw ParseError(path, 1, "expected header '" + expected + "', got '" + trim(line) + "'");
  }
  const std::size_t width = dim + (labeled ? 2 : 1);
  std::vector<double> xs;
  CsvContent out;
  bool domain_seen = false;
  std::size_t lineno = 1;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != width) {
      throw ParseError(path, lineno, "expected " + std::to_string(width) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < dim; ++j) xs.push_back(parse_field(path, lineno, fields[j]));
    if (labeled) out.y.push_back(parse_field(path, lineno, fields[dim]));
    const std::string& tag = fields.back();
    if (tag != "0" && tag != "1") {
      throw ParseError(path, lineno, "domain must be 0 or 1, got '" + tag + "'");
    }
    const Domain d = tag == "0" ? Domain::Source : Domain::Target;
    if (domain_seen && d != out.domain) throw ParseError(path, lineno, "mixed domain tags");
    out.domain = d;
    domain_seen = true;
    ++rows;
  }
  out.x = Tensor(rows, dim, std::move(xs));
  return out;
}

void check_labels(const LabeledSet& s, const ScenarioSpec& spec, const std::string& path) {
  if (spec.task_kind() != TaskKind::Classification) return;
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    if (s.y[i] != 0.0 && s.y[i] != 1.0) {
      // +2: header line plus one-based numbering.
      throw ParseError(path, i + 2, "classification label must be 0 or 1");
    }
  }
}

}  // namespace

SemiDaTask gen_task(const ScenarioSpec& spec, std::size_t n, std::size_t m, std::size_t k,
                    std::uint64_t seed, const GenOptions& opts) {
  if (n < 1 || k < 1) throw ParameterError("gen_task: n and k must be at least 1");
  if (m < 1 || m > k) {
    throw ParameterError("gen_task: need 1 <= m <= k, got m=" + std::to_string(m) +
                         ", k=" + std::to_string(k));
  }
  if (opts.require_small_m && m * 10 > n) {
    throw ParameterError("gen_task: m=" + std::to_string(m) + " exceeds n/10 (n=" +
                         std::to_string(n) + ")");
  }
  if (opts.test_size < 1) throw ParameterError("gen_task: test_size must be at least 1");

  auto stream = [&](const char* name) { return Rng(SeedSequence(seed).add(name).value()); };
  Rng rs = stream("source");
  Rng rl = stream("target_labeled");
  Rng ru = stream("target_unlabeled");
  Rng rt = stream("test_target");

  SemiDaTask task;
  task.scenario = spec;
  task.seed = seed;
  task.source = to_labeled(sample_domain(spec, Domain::Source, n, rs), Domain::Source);
  task.target_labeled = to_labeled(sample_domain(spec, Domain::Target, m, rl), Domain::Target);
  DomainSample pool = sample_domain(spec, Domain::Target, k, ru);
  task.target_unlabeled = {std::move(pool.x), Domain::Target};
  task.target_unlabeled_oracle = std::move(pool.y);
  task.test_target =
      to_labeled(sample_domain(spec, Domain::Target, opts.test_size, rt), Domain::Target);
  return task;
}

void save_labeled_csv(const LabeledSet& set, const std::string& path) {
  std::ostringstream os;
  os << header(set.x.cols(), true) << '\n';
  write_rows(os, set.x, &set.y, set.domain);
  write_file(path, os.str());
}

void save_unlabeled_csv(const UnlabeledSet& set, const std::string& path) {
  std::ostringstream os;
  os << header(set.x.cols(), false) << '\n';
  write_rows(os, set.x, nullptr, set.domain);
  write_file(path, os.str());
}

LabeledSet load_labeled_csv(const std::string& path, std::size_t feature_dim) {
  CsvContent c = read_csv(path, feature_dim, true);
  return {std::move(c.x), std::move(c.y), c.domain};
}

UnlabeledSet load_unlabeled_csv(const std::string& path, std::size_t feature_dim) {
  CsvContent c = read_csv(path, feature_dim, false);
  return {std::move(c.x), c.domain};
}

void save_task(const SemiDaTask& task, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  save_labeled_csv(task.source, (root / "source.csv").string());
  save_labeled_csv(task.target_labeled, (root / "target_labeled.csv").string());
  save_unlabeled_csv(task.target_unlabeled, (root / "target_unlabeled.csv").string());
  save_labeled_csv(task.test_target, (root / "test_target.csv").string());

  KeyValueFile kv;
  kv.set("format_version", std::to_string(kFormatVersion));
  kv.set("kind", to_string(task.scenario.kind));
  kv.set("seed", std::to_string(task.seed));
  kv.set("n", std::to_string(task.n()));
  kv.set("m", std::to_string(task.m()));
  kv.set("k", std::to_string(task.k()));
  kv.set("test_size", std::to_string(task.test_target.size()));
  kv.set("noise_source", format_double(task.scenario.noise_source));
  kv.set("noise_target", format_double(task.scenario.noise_target));
  for (const auto& [name, v] : task.scenario.params) kv.set("params." + name, format_double(v));
  kv.save((root / "scenario.txt").string());
}

SemiDaTask load_task(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const std::string sidecar = (root / "scenario.txt").string();
  if (!fs::exists(sidecar)) throw std::runtime_error("missing task sidecar " + sidecar);
  const KeyValueFile kv = KeyValueFile::load(sidecar);
  const auto version = kv.get_int("format_version", -1);
  if (version != kFormatVersion) {
    throw ConfigError(sidecar + ": unsupported format_version " + std::to_string(version));
  }
  const auto kind_name = kv.get("kind");
  if (!kind_name) throw ConfigError(sidecar + ": missing 'kind'");
  std::map<std::string, double> params;
  for (const std::string& key : kv.keys()) {
    if (key.rfind("params.", 0) == 0) {
      params[key.substr(7)] = parse_double(*kv.get(key), key);
    }
  }
  SemiDaTask task;
  task.scenario = make_scenario(parse_scenario_kind(*kind_name), params);
  task.seed = static_cast<std::uint64_t>(std::stoull(kv.get_string("seed", "0")));
  const std::size_t dim = task.scenario.feature_dim();

  const auto path = [&](const char* f) { return (root / f).string(); };
  task.source = load_labeled_csv(path("source.csv"), dim);
  task.target_labeled = load_labeled_csv(path("target_labeled.csv"), dim);
  task.target_unlabeled = load_unlabeled_csv(path("target_unlabeled.csv"), dim);
  task.test_target = load_labeled_csv(path("test_target.csv"), dim);
  check_labels(task.source, task.scenario, path("source.csv"));
  check_labels(task.target_labeled, task.scenario, path("target_labeled.csv"));
  check_labels(task.test_target, task.scenario, path("test_target.csv"));
  if (task.source.domain != Domain::Source) {
    throw ParseError(path("source.csv"), 2, "source rows must carry domain 0");
  }

  // Regenerate the pool labels for the fully supervised reference.
  try {
    GenOptions opts;
    opts.test_size = task.test_target.size();
    opts.require_small_m = false;
    if (task.n() > 0 && task.m() > 0 && task.k() >= task.m() && opts.test_size > 0) {
      SemiDaTask regen = gen_task(task.scenario, task.n(), task.m(), task.k(), task.seed, opts);
      if (bit_identical(regen.target_unlabeled.x, task.target_unlabeled.x)) {
        task.target_unlabeled_oracle = std::move(regen.target_unlabeled_oracle);
      }
    }
  } catch (const ParameterError&) {
  }
  return task;
}

}  // namespace lirr

#pragma once

// Semi-DA tasks: n labeled source, m labeled target, k unlabeled target
// examples plus a held-out labeled target test set, all drawn from a scenario.
//
// On disk a task is a directory with source.csv, target_labeled.csv,
// target_unlabeled.csv, test_target.csv and a scenario.txt sidecar. Labeled
// files have the header x1,..,xd,y,domain; the unlabeled file drops y.

#include <cstdint>
#include <string>
#include <vector>

#include "lirr/objectives.hpp"
#include "lirr/scenario.hpp"
#include "lirr/tensor.hpp"

namespace lirr {

struct LabeledSet {
  Tensor x;
  std::vector<double> y;
  Domain domain = Domain::Source;

  std::size_t size() const { return x.rows(); }
  LabeledBatch as_batch() const { return {x, y}; }
};

struct UnlabeledSet {
  Tensor x;
  Domain domain = Domain::Target;

  std::size_t size() const { return x.rows(); }
};

struct GenOptions {
  std::size_t test_size = 2000;
  /// Enforce m <= n / 10.
  bool require_small_m = true;
};

struct SemiDaTask {
  LabeledSet source;
  LabeledSet target_labeled;
  UnlabeledSet target_unlabeled;
  LabeledSet test_target;
  ScenarioSpec scenario;
  std::uint64_t seed = 0;
  /// Labels of the unlabeled pool, kept only for the fully supervised
  /// reference run. Empty when unavailable.
  std::vector<double> target_unlabeled_oracle;

  std::size_t n() const { return source.size(); }
  std::size_t m() const { return target_labeled.size(); }
  std::size_t k() const { return target_unlabeled.size(); }
};

SemiDaTask gen_task(const ScenarioSpec& spec, std::size_t n, std::size_t m, std::size_t k,
                    std::uint64_t seed, const GenOptions& opts = {});

void save_labeled_csv(const LabeledSet& set, const std::string& path);
void save_unlabeled_csv(const UnlabeledSet& set, const std::string& path);
LabeledSet load_labeled_csv(const std::string& path, std::size_t feature_dim);
UnlabeledSet load_unlabeled_csv(const std::string& path, std::size_t feature_dim);

void save_task(const SemiDaTask& task, const std::string& dir);
/// Loads a task directory. The oracle labels of the unlabeled pool are
/// regenerated from the sidecar when the stored features match exactly.
SemiDaTask load_task(const std::string& dir);

}  // namespace lirr

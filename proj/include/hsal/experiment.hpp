#pragma once

// Dataset -> split -> graphs -> train -> evaluate, as one call.

#include <cstdint>
#include <optional>
#include <vector>

#include "hsal/data.hpp"
#include "hsal/eval.hpp"
#include "hsal/graph.hpp"
#include "hsal/model.hpp"
#include "hsal/train.hpp"

namespace hsal {

/// Everything derived from one dataset that training and evaluation need.
/// Validation runs on a graph of training rows only; the test graph adds the
/// validation rows.
struct PreparedData {
  Split split;
  SequelAwareGraph train_graph;
  SequelAwareGraph test_graph;
  std::vector<TrainingExample> examples;
  std::vector<EvalCase> validation;
  std::vector<EvalCase> test;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
};

/// With `use_sequels` false the series catalog is dropped (sequel ablation).
PreparedData prepare(const Dataset& ds, bool use_sequels = true, std::size_t targets_per_user = 0);

struct ExperimentConfig {
  ModelConfig model;  // n_users / n_items are taken from the data
  TrainConfig train;
  EvalConfig eval;
  bool train_model = true;
};

struct ExperimentResult {
  ModelParams params;
  TrainResult training;
  RankingReport test;
};

ExperimentResult run_experiment(const PreparedData& data, const ExperimentConfig& cfg,
                                std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace hsal

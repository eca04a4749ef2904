#pragma once

// Mini-batch training with Adam, validation-based early stopping and
// per-thread gradient accumulation.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hsal/adam.hpp"
#include "hsal/eval.hpp"
#include "hsal/graph.hpp"
#include "hsal/model.hpp"
#include "hsal/sampling.hpp"

namespace hsal {

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 50;
  std::size_t epochs = 50;
  bool early_stopping = true;
  std::size_t patience = 5;
  /// Cutoff of the validation metric that drives early stopping.
  std::size_t monitor_k = 10;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  SamplingConfig sampling;

  void validate() const;
};

/// Predict `target` for `user` from the graph as of `t`.
struct TrainingExample {
  UserId user = 0;
  ItemId target = 0;
  Timestamp t = 0;
};

/// Every training interaction after a user's first becomes one example;
/// `targets_per_user` > 0 keeps only each user's most recent ones.
std::vector<TrainingExample> make_examples(std::span<const Interaction> train,
                                           std::size_t targets_per_user = 0);

struct BatchResult {
  double loss_sum = 0.0;
  std::size_t used = 0;     // examples that contributed
  std::size_t skipped = 0;  // no history before t
};

/// Sums loss gradients of `batch` into `grads` (not averaged).
BatchResult batch_gradient_serial(ModelParams& params, const SequelAwareGraph& graph,
                                  std::span<const TrainingExample> batch,
                                  const SamplingConfig& sampling, GradientBuffer& grads);
/// Same sum, examples split statically over `threads` workers, each with a
/// private buffer; buffers are added in worker order.
BatchResult batch_gradient_parallel(ModelParams& params, const SequelAwareGraph& graph,
                                    std::span<const TrainingExample> batch,
                                    const SamplingConfig& sampling, GradientBuffer& grads,
                                    std::size_t threads);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean over used examples
  std::size_t examples = 0;
  std::size_t skipped = 0;
  std::optional<double> val_hit;
  std::optional<double> val_ndcg;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochLog&, const ModelParams&)>;

/// Trains in place. With validation cases and early stopping on, training
/// stops after `patience` epochs without a better validation Hit@K and the
/// best parameters are restored. Throws NumericError on a non-finite loss or
/// gradient; parameters then hold the last completed update.
TrainResult train(ModelParams& params, const SequelAwareGraph& graph,
                  std::span<const TrainingExample> examples,
                  std::span<const EvalCase> validation, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace hsal

#include "hsal/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <string>

#include <omp.h>

#include "hsal/data.hpp"
#include "hsal/errors.hpp"

namespace hsal {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (monitor_k == 0) throw ConfigError("monitored cutoff must be at least 1");
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(adam.weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  sampling.validate();
}

std::vector<TrainingExample> make_examples(std::span<const Interaction> train,
                                           std::size_t targets_per_user) {
  std::vector<TrainingExample> out;
  for (std::size_t b = 0; b < train.size();) {
    std::size_t e = b;
    while (e < train.size() && train[e].user == train[b].user) ++e;
    std::size_t first = b + 1;
    if (targets_per_user > 0 && e - first > targets_per_user) first = e - targets_per_user;
    for (std::size_t k = first; k < e; ++k) {
      out.push_back({train[k].user, train[k].item, train[k].timestamp});
    }
    b = e;
  }
  return out;
}

namespace {

// nullopt when the user has no visible history at t
std::optional<double> accumulate_example(ModelParams& params, const SequelAwareGraph& graph,
                                         const TrainingExample& ex,
                                         const SamplingConfig& sampling, GradientBuffer& grads) {
  auto view = snapshot(graph, ex.t);
  if (view.user_edges(ex.user).empty()) return std::nullopt;
  auto sg = sample_subgraph(view, ex.user, sampling);
  auto index = SubGraphIndex::build(sg, graph, params.config().max_order);
  Tape tape;
  auto bound = bind(tape, params, GradMode::Track, &grads);
  auto fwd = forward(tape, bound, params.config(), index);
  auto l = loss(score(fwd.user_final, bound), ex.target);
  const double value = l.value()[0];
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss for user " + std::to_string(ex.user) + " at time " +
                       std::to_string(ex.t));
  }
  tape.backward(l);
  return value;
}

}  // namespace

BatchResult batch_gradient_serial(ModelParams& params, const SequelAwareGraph& graph,
                                  std::span<const TrainingExample> batch,
                                  const SamplingConfig& sampling, GradientBuffer& grads) {
  BatchResult r;
  for (const auto& ex : batch) {
    if (auto v = accumulate_example(params, graph, ex, sampling, grads)) {
      r.loss_sum += *v;
      ++r.used;
    } else {
      ++r.skipped;
    }
  }
  return r;
}

BatchResult batch_gradient_parallel(ModelParams& params, const SequelAwareGraph& graph,
                                    std::span<const TrainingExample> batch,
                                    const SamplingConfig& sampling, GradientBuffer& grads,
                                    std::size_t threads) {
  if (threads <= 1 || batch.size() <= 1) {
    return batch_gradient_serial(params, graph, batch, sampling, grads);
  }
  const std::size_t workers = std::min(threads, batch.size());
  std::vector<GradientBuffer> local(workers, GradientBuffer(params.tensors()));
  std::vector<BatchResult> partial(workers);
  std::vector<std::exception_ptr> errors(workers);
#pragma omp parallel num_threads(static_cast<int>(workers))
  {
    const auto w = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t n_threads = static_cast<std::size_t>(omp_get_num_threads());
    // contiguous chunk per worker, independent of scheduling
    for (std::size_t slot = w; slot < workers; slot += n_threads) {
      const std::size_t begin = batch.size() * slot / workers;
      const std::size_t end = batch.size() * (slot + 1) / workers;
      try {
        partial[slot] = batch_gradient_serial(params, graph, batch.subspan(begin, end - begin),
                                              sampling, local[slot]);
      } catch (...) {
        errors[slot] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  BatchResult r;
  for (std::size_t w = 0; w < workers; ++w) {
    grads.accumulate(local[w]);
    r.loss_sum += partial[w].loss_sum;
    r.used += partial[w].used;
    r.skipped += partial[w].skipped;
  }
  return r;
}

TrainResult train(ModelParams& params, const SequelAwareGraph& graph,
                  std::span<const TrainingExample> examples,
                  std::span<const EvalCase> validation, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (examples.empty()) throw DataError("no training examples");
  auto& tensors = params.tensors();
  Adam optimizer(tensors, cfg.adam);
  std::mt19937_64 order_rng(cfg.seed ^ 0x5eed0fba7c4e5ULL);
  std::vector<TrainingExample> order(examples.begin(), examples.end());
  GradientBuffer grads(tensors);

  EvalConfig eval_cfg;
  eval_cfg.ks = {cfg.monitor_k};
  eval_cfg.sampling = cfg.sampling;
  const bool monitor = !validation.empty();

  TrainResult result;
  std::optional<ModelParams> best;
  double best_hit = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    EpochLog log;
    log.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - b);
      grads.zero();
      auto batch = std::span<const TrainingExample>(order).subspan(b, n);
      auto br = batch_gradient_parallel(params, graph, batch, cfg.sampling, grads, cfg.threads);
      log.skipped += br.skipped;
      if (br.used == 0) continue;
      log.examples += br.used;
      loss_sum += br.loss_sum;
      const double inv = 1.0 / static_cast<double>(br.used);
      for (std::size_t p = 0; p < tensors.size(); ++p) {
        auto dst = tensors.tensor(p).mutable_grad();
        auto src = grads[p];
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = src[k] * inv;
      }
      optimizer.step(tensors);
    }
    if (log.examples == 0) throw DataError("every training example lacks history");
    log.loss = loss_sum / static_cast<double>(log.examples);
    if (!std::isfinite(log.loss)) throw NumericError("non-finite epoch loss");

    if (monitor) {
      auto report = evaluate(validation, model_scorer(params, graph, cfg.sampling), eval_cfg);
      log.val_hit = report.hit[0];
      log.val_ndcg = report.ndcg[0];
      if (*log.val_hit > best_hit) {
        best_hit = *log.val_hit;
        result.best_epoch = epoch;
        since_best = 0;
        log.improved = true;
        if (cfg.early_stopping) best = params;
      } else {
        ++since_best;
      }
    } else {
      result.best_epoch = epoch;
      log.improved = true;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log, params);
    if (monitor && cfg.early_stopping && since_best >= cfg.patience) {
      result.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  if (best) {
    for (std::size_t p = 0; p < tensors.size(); ++p) {
      auto src = best->tensors().tensor(p).values();
      auto dst = tensors.tensor(p).values();
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  tensors.zero_grad();
  return result;
}

}  // namespace hsal

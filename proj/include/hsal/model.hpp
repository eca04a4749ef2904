#pragma once

// Sequel-aware heterogeneous GNN: message propagation, fusion, node updates,
// scoring and loss.
//
// Everything is vectorized over a sub-graph: node states are [n x d]
// matrices indexed by local node ids, and neighbor aggregations are segment
// reductions over edge lists. Weight matrices are stored [out x in] and
// applied as X * W^T, except W_P, which is [(L+1)d x d] and applied as
// h_u * W_P.

#include <cstdint>
#include <string_view>
#include <vector>

#include "hsal/autodiff.hpp"
#include "hsal/encoding.hpp"
#include "hsal/graph.hpp"
#include "hsal/sampling.hpp"
#include "hsal/tensor.hpp"

namespace hsal {

enum class FusionStrategy { Sum, Mean, Concat, SemanticAttention };
enum class Propagation { Hsal, GcnBaseline };

FusionStrategy parse_fusion(std::string_view name);
std::string_view to_string(FusionStrategy f);
Propagation parse_propagation(std::string_view name);
std::string_view to_string(Propagation p);

struct ModelConfig {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t dim = 50;
  std::size_t layers = 3;
  /// Rows of each relative-order table; ranks beyond it share the last row.
  std::size_t max_order = 50;
  FusionStrategy fusion = FusionStrategy::Sum;
  PositionalKind positional = PositionalKind::Sinusoidal;
  Propagation propagation = Propagation::Hsal;
  double init_std = 0.01;

  void validate() const;
};

/// All learnable tensors. Only the tensors the configured fusion strategy
/// and propagation mode use are created.
class ModelParams {
 public:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  struct LayerSlots {
    std::size_t W1 = kAbsent, W2 = kAbsent;      // long-term transforms [d x d]
    std::size_t W3 = kAbsent;                    // item update [d x 2d]
    std::size_t W4u = kAbsent;                   // user update [d x 3d]
    std::size_t W_agg = kAbsent, b_agg = kAbsent;  // MLP over [h_L || h_S]: [d x 2d], [d]
    std::size_t W4c = kAbsent;                   // concat fusion [d x 3d]
    std::size_t W_sem = kAbsent, q_sem = kAbsent;  // semantic attention [d x d], [d]
  };

  /// Draws every weight i.i.d. from Normal(0, init_std^2) in registration order.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& tensors() { return params_; }
  const ParameterSet& tensors() const { return params_; }

  std::size_t E_U = kAbsent, E_I = kAbsent;
  std::size_t P_iu = kAbsent, P_ui = kAbsent;  // relative-order tables [max_order x d]
  std::size_t W_P = kAbsent;
  std::vector<LayerSlots> layers;

 private:
  ModelConfig config_;
  ParameterSet params_;
};

/// Parameters as leaves of one tape.
struct BoundParams {
  struct Layer {
    Var W1, W2, W3, W4u, W_agg, b_agg, W4c, W_sem, q_sem;
  };
  Var E_U, E_I, P_iu, P_ui, W_P;
  std::vector<Layer> layers;
};

enum class GradMode { Track, None };

/// Binds parameters onto `tape`. With GradMode::Track gradients go to `sink`
/// when given, else into each tensor's own grad buffer.
BoundParams bind(Tape& tape, ModelParams& params, GradMode mode = GradMode::Track,
                 GradientBuffer* sink = nullptr);

// ---- sub-graph indexing -------------------------------------------------

/// Edge list seen from one side of the bipartite graph.
struct Neighborhood {
  std::size_t n_targets = 0;
  std::vector<std::uint32_t> target;  // per edge: aggregating node (local id)
  std::vector<std::uint32_t> source;  // per edge: neighbor (local id)
  std::vector<std::uint32_t> order;   // per edge: recency rank in target, 1 = latest
  std::vector<std::int64_t> latest;   // per target: most recent neighbor, -1 if none

  bool isolated(std::size_t t) const { return latest[t] < 0; }
};

/// (item, later series member) pairs restricted to the sub-graph.
struct SequelPairs {
  std::vector<std::uint32_t> target;  // local item receiving the message
  std::vector<std::uint32_t> source;  // local successor item
  std::vector<double> position;       // series position of the successor
};

struct SubGraphIndex {
  std::vector<UserId> users;
  std::vector<ItemId> items;
  std::uint32_t anchor = 0;  // local id of the anchor user
  Neighborhood user_side;    // users aggregating items
  Neighborhood item_side;    // items aggregating users
  SequelPairs sequels;

  /// Edges are put in a canonical order first, so the index (and therefore
  /// the forward pass) does not depend on how the sub-graph lists them.
  static SubGraphIndex build(const SubGraph& sg, const SequelAwareGraph& graph,
                             std::size_t max_order);
};

// ---- building blocks ------------------------------------------------------

/// Mean over sequel successors of h_j * P(j); zero rows for items without any.
Var sequel_message(Var h_items, const SequelPairs& pairs, PositionalKind kind);
/// Same with explicit per-pair multiplicative masks [pairs x d].
Var sequel_message_masked(Var h_items, const SequelPairs& pairs, const Tensor& masks);

/// sum_e alpha_e (W h_source + p_order) with alpha = softmax over each
/// target's edges of <h_target, message> / sqrt(d). Isolated targets get zero.
/// When `weights` is given it receives alpha per edge.
Var long_term(Var h_targets, Var h_sources, Var W, Var order_table, const Neighborhood& nb,
              std::vector<double>* weights = nullptr);

/// sum_e alpha_e h_source with alpha = softmax of <h_latest, h_source> / sqrt(d),
/// where h_latest is the target's most recent neighbor.
Var short_term(Var h_sources, const Neighborhood& nb, std::vector<double>* weights = nullptr);

/// ReLU(W_agg [h_L || h_S] + b_agg)
Var mlp_aggregate(Var h_long, Var h_short, Var W_agg, Var b_agg);

struct FusionWeights {
  Var W_agg, b_agg, W4c, W_sem, q_sem;
};
Var fuse(Var h_long, Var h_short, Var h_seq, FusionStrategy strategy, const FusionWeights& w);

/// tanh(W3 [fused || prev])
Var update_item(Var fused, Var prev, Var W3);
/// tanh(W4u [h_L || h_S || prev])
Var update_user(Var h_long, Var h_short, Var prev, Var W4u);

// ---- forward --------------------------------------------------------------

struct LayerState {
  std::vector<UserId> users;
  std::vector<ItemId> items;
  Tensor h_u;  // [users x d]
  Tensor h_i;  // [items x d], left empty for the last layer unless requested
};

struct ForwardResult {
  Var user_final;  // [1 x (L+1)d]
  std::vector<LayerState> layers;
};

/// Layer 0 comes from the embedding tables; each later layer is computed
/// from the previous one. With `full_states` false the final layer skips
/// item updates, which nothing downstream reads.
ForwardResult forward(Tape& tape, const BoundParams& params, const ModelConfig& config,
                      const SubGraphIndex& index, bool full_states = false);

/// s_i = h_u W_P e_i for every item in the vocabulary: [1 x |I|].
Var score(Var user_final, const BoundParams& params);

/// Softmax + binary cross-entropy against the one-hot target.
Var loss(Var scores, ItemId target);

/// Highest-scoring item; ties go to the lowest id.
ItemId argmax_item(std::span<const double> scores);

/// Scores of every item for the anchor of `sg`, without gradient tracking.
std::vector<double> predict_scores(ModelParams& params, const SubGraph& sg,
                                   const SequelAwareGraph& graph);

}  // namespace hsal

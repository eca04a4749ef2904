#include "hsal/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <tuple>

#include "hsal/errors.hpp"

namespace hsal {

FusionStrategy parse_fusion(std::string_view name) {
  if (name == "sum") return FusionStrategy::Sum;
  if (name == "mean") return FusionStrategy::Mean;
  if (name == "concat") return FusionStrategy::Concat;
  if (name == "semantic" || name == "sehgnn") return FusionStrategy::SemanticAttention;
  throw ConfigError("unknown fusion strategy '" + std::string(name) +
                    "' (expected sum, mean, concat or semantic)");
}

std::string_view to_string(FusionStrategy f) {
  switch (f) {
    case FusionStrategy::Sum: return "sum";
    case FusionStrategy::Mean: return "mean";
    case FusionStrategy::Concat: return "concat";
    case FusionStrategy::SemanticAttention: return "semantic";
  }
  return "?";
}

Propagation parse_propagation(std::string_view name) {
  if (name == "hsal") return Propagation::Hsal;
  if (name == "gcn") return Propagation::GcnBaseline;
  throw ConfigError("unknown propagation '" + std::string(name) + "' (expected hsal or gcn)");
}

std::string_view to_string(Propagation p) {
  return p == Propagation::GcnBaseline ? "gcn" : "hsal";
}

void ModelConfig::validate() const {
  if (n_users == 0 || n_items == 0) throw ConfigError("model needs at least one user and one item");
  if (dim < 2 || dim % 2 != 0) throw ConfigError("embedding dimension must be even and >= 2");
  if (max_order == 0) throw ConfigError("max_order must be at least 1");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
}

// ---- parameters -----------------------------------------------------------

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config_ = config;
  const std::size_t d = config.dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config.init_std);
  auto make = [&](std::string name, Shape shape) {
    auto t = Tensor::zeros(std::move(shape));
    for (auto& v : t.values()) v = normal(rng);
    return p.params_.add(std::move(name), std::move(t));
  };

  p.E_U = make("E_U", {config.n_users, d});
  p.E_I = make("E_I", {config.n_items, d});
  const bool hsal = config.propagation == Propagation::Hsal;
  if (hsal) {
    p.P_iu = make("P_iu", {config.max_order, d});
    p.P_ui = make("P_ui", {config.max_order, d});
  }
  for (std::size_t l = 1; l <= config.layers; ++l) {
    const auto prefix = "layer" + std::to_string(l) + ".";
    LayerSlots s;
    s.W1 = make(prefix + "W1", {d, d});
    s.W2 = make(prefix + "W2", {d, d});
    if (hsal) {
      s.W3 = make(prefix + "W3", {d, 2 * d});
      s.W4u = make(prefix + "W4u", {d, 3 * d});
      switch (config.fusion) {
        case FusionStrategy::Sum:
        case FusionStrategy::Mean:
          s.W_agg = make(prefix + "W_agg", {d, 2 * d});
          s.b_agg = make(prefix + "b_agg", {d});
          break;
        case FusionStrategy::Concat:
          s.W4c = make(prefix + "W4c", {d, 3 * d});
          break;
        case FusionStrategy::SemanticAttention:
          s.W_sem = make(prefix + "W_sem", {d, d});
          s.q_sem = make(prefix + "q_sem", {d});
          break;
      }
    }
    p.layers.push_back(s);
  }
  p.W_P = make("W_P", {(config.layers + 1) * d, d});
  return p;
}

BoundParams bind(Tape& tape, ModelParams& params, GradMode mode, GradientBuffer* sink) {
  auto& set = params.tensors();
  auto leaf = [&](std::size_t slot) -> Var {
    if (slot == ModelParams::kAbsent) return Var{};
    auto& t = set.tensor(slot);
    if (mode == GradMode::None) return tape.reference(t);
    if (sink) return tape.parameter(t, (*sink)[slot]);
    return tape.parameter(t);
  };
  BoundParams b;
  b.E_U = leaf(params.E_U);
  b.E_I = leaf(params.E_I);
  b.P_iu = leaf(params.P_iu);
  b.P_ui = leaf(params.P_ui);
  for (const auto& s : params.layers) {
    b.layers.push_back({leaf(s.W1), leaf(s.W2), leaf(s.W3), leaf(s.W4u), leaf(s.W_agg),
                        leaf(s.b_agg), leaf(s.W4c), leaf(s.W_sem), leaf(s.q_sem)});
  }
  b.W_P = leaf(params.W_P);
  return b;
}

// ---- indexing -------------------------------------------------------------

namespace {

template <typename T>
std::uint32_t local_id(const std::vector<T>& sorted, T id) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
  if (it == sorted.end() || *it != id) throw LookupError("node " + std::to_string(id) + " not in sub-graph");
  return static_cast<std::uint32_t>(it - sorted.begin());
}

// Edges must arrive grouped by target and ascending in time within a group.
void finish_neighborhood(Neighborhood& nb, std::size_t max_order) {
  nb.order.assign(nb.target.size(), 0);
  nb.latest.assign(nb.n_targets, -1);
  std::size_t begin = 0;
  while (begin < nb.target.size()) {
    std::size_t end = begin;
    while (end < nb.target.size() && nb.target[end] == nb.target[begin]) ++end;
    for (std::size_t e = begin; e < end; ++e) {
      nb.order[e] = static_cast<std::uint32_t>(std::min(end - e, max_order));
    }
    nb.latest[nb.target[begin]] = nb.source[end - 1];
    begin = end;
  }
}

}  // namespace

SubGraphIndex SubGraphIndex::build(const SubGraph& sg, const SequelAwareGraph& graph,
                                   std::size_t max_order) {
  SubGraphIndex idx;
  idx.users = sg.users;
  idx.items = sg.items;
  std::sort(idx.users.begin(), idx.users.end());
  std::sort(idx.items.begin(), idx.items.end());
  idx.anchor = local_id(idx.users, sg.anchor);

  auto edges = sg.edges;
  std::sort(edges.begin(), edges.end(), [](const UserItemEdge& a, const UserItemEdge& b) {
    return std::tie(a.user, a.timestamp, a.item) < std::tie(b.user, b.timestamp, b.item);
  });
  idx.user_side.n_targets = idx.users.size();
  for (const auto& e : edges) {
    idx.user_side.target.push_back(local_id(idx.users, e.user));
    idx.user_side.source.push_back(local_id(idx.items, e.item));
  }
  finish_neighborhood(idx.user_side, max_order);

  std::sort(edges.begin(), edges.end(), [](const UserItemEdge& a, const UserItemEdge& b) {
    return std::tie(a.item, a.timestamp, a.user) < std::tie(b.item, b.timestamp, b.user);
  });
  idx.item_side.n_targets = idx.items.size();
  for (const auto& e : edges) {
    idx.item_side.target.push_back(local_id(idx.items, e.item));
    idx.item_side.source.push_back(local_id(idx.users, e.user));
  }
  finish_neighborhood(idx.item_side, max_order);

  for (std::uint32_t li = 0; li < idx.items.size(); ++li) {
    for (auto next : graph.sequel_successors(idx.items[li])) {
      auto it = std::lower_bound(idx.items.begin(), idx.items.end(), next);
      if (it == idx.items.end() || *it != next) continue;
      idx.sequels.target.push_back(li);
      idx.sequels.source.push_back(static_cast<std::uint32_t>(it - idx.items.begin()));
      idx.sequels.position.push_back(graph.kind(next).position);
    }
  }
  return idx;
}

// ---- building blocks ------------------------------------------------------

namespace {

Var zeros(Tape& tape, std::size_t rows, std::size_t d) {
  return tape.constant(Tensor::zeros({rows, d}));
}

std::vector<std::uint32_t> zero_rows(std::size_t n) { return std::vector<std::uint32_t>(n, 0); }

Var rowwise_dot(Var a, Var b) { return reduce(Reduction::Sum, mul(a, b), 1); }

void export_weights(Var alpha, std::vector<double>* weights) {
  if (!weights) return;
  auto v = alpha.value().values();
  weights->assign(v.begin(), v.end());
}

}  // namespace

Var sequel_message_masked(Var h_items, const SequelPairs& pairs, const Tensor& masks) {
  auto& tape = *h_items.tape;
  const std::size_t n = h_items.value().rows(), d = h_items.value().cols();
  if (pairs.target.empty()) return zeros(tape, n, d);
  auto values = gather(h_items, pairs.source);
  auto masked = mul(values, tape.constant(masks));
  return segment_mean(masked, pairs.target, n);
}

Var sequel_message(Var h_items, const SequelPairs& pairs, PositionalKind kind) {
  auto& tape = *h_items.tape;
  const std::size_t n = h_items.value().rows(), d = h_items.value().cols();
  if (pairs.target.empty()) return zeros(tape, n, d);
  if (kind == PositionalKind::Sinusoidal) {
    auto masks = Tensor::zeros({pairs.source.size(), d});
    for (std::size_t k = 0; k < pairs.source.size(); ++k) {
      auto enc = encode_sinusoidal(pairs.position[k], d);
      std::copy(enc.begin(), enc.end(), masks.values().begin() + k * d);
    }
    return sequel_message_masked(h_items, pairs, masks);
  }
  auto rotated = rotary(gather(h_items, pairs.source), pairs.position);
  return segment_mean(rotated, pairs.target, n);
}

Var long_term(Var h_targets, Var h_sources, Var W, Var order_table, const Neighborhood& nb,
              std::vector<double>* weights) {
  auto& tape = *h_targets.tape;
  const std::size_t d = h_targets.value().cols();
  if (nb.target.empty()) {
    if (weights) weights->clear();
    return zeros(tape, nb.n_targets, d);
  }
  const std::size_t table_rows = order_table.value().rows();
  std::vector<std::uint32_t> order_rows(nb.order.size());
  for (std::size_t e = 0; e < nb.order.size(); ++e) {
    order_rows[e] = static_cast<std::uint32_t>(std::min<std::size_t>(nb.order[e], table_rows) - 1);
  }
  auto transformed = matmul_nt(h_sources, W);
  auto messages = add(gather(transformed, nb.source), gather(order_table, order_rows));
  auto queries = gather(h_targets, nb.target);
  auto logits = scale(rowwise_dot(queries, messages), 1.0 / std::sqrt(static_cast<double>(d)));
  auto alpha = segment_softmax(logits, nb.target, nb.n_targets);
  export_weights(alpha, weights);
  return segment_sum(scale_rows(messages, alpha), nb.target, nb.n_targets);
}

Var short_term(Var h_sources, const Neighborhood& nb, std::vector<double>* weights) {
  auto& tape = *h_sources.tape;
  const std::size_t d = h_sources.value().cols();
  if (nb.target.empty()) {
    if (weights) weights->clear();
    return zeros(tape, nb.n_targets, d);
  }
  std::vector<std::uint32_t> query_rows(nb.target.size());
  for (std::size_t e = 0; e < nb.target.size(); ++e) {
    query_rows[e] = static_cast<std::uint32_t>(nb.latest[nb.target[e]]);
  }
  auto queries = gather(h_sources, query_rows);
  auto keys = gather(h_sources, nb.source);
  auto logits = scale(rowwise_dot(queries, keys), 1.0 / std::sqrt(static_cast<double>(d)));
  auto alpha = segment_softmax(logits, nb.target, nb.n_targets);
  export_weights(alpha, weights);
  return segment_sum(scale_rows(keys, alpha), nb.target, nb.n_targets);
}

Var mlp_aggregate(Var h_long, Var h_short, Var W_agg, Var b_agg) {
  const std::size_t n = h_long.value().rows();
  auto pre = matmul_nt(concat({h_long, h_short}), W_agg);
  auto bias = gather(b_agg, zero_rows(n));
  return relu(add(pre, bias));
}

Var fuse(Var h_long, Var h_short, Var h_seq, FusionStrategy strategy, const FusionWeights& w) {
  const auto& ls = h_long.shape();
  if (h_short.shape() != ls || h_seq.shape() != ls) {
    throw ContractError("fuse: inputs " + shape_str(ls) + ", " + shape_str(h_short.shape()) +
                        ", " + shape_str(h_seq.shape()) + " must share one shape");
  }
  switch (strategy) {
    case FusionStrategy::Sum:
      return add(mlp_aggregate(h_long, h_short, w.W_agg, w.b_agg), h_seq);
    case FusionStrategy::Mean:
      return scale(add(mlp_aggregate(h_long, h_short, w.W_agg, w.b_agg), h_seq), 0.5);
    case FusionStrategy::Concat:
      return relu(matmul_nt(concat({h_long, h_short, h_seq}), w.W4c));
    case FusionStrategy::SemanticAttention: {
      const std::size_t n = h_long.value().rows();
      const Var inputs[3] = {h_long, h_short, h_seq};
      std::vector<Var> projected;
      std::vector<Var> logits;
      auto query = gather(w.q_sem, zero_rows(n));
      for (const auto& x : inputs) {
        projected.push_back(matmul_nt(x, w.W_sem));
        logits.push_back(rowwise_dot(tanh(projected.back()), query));
      }
      // logits laid out [semantic k][node i]; softmax per node
      std::vector<std::uint32_t> node_of(3 * n);
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < n; ++i) node_of[k * n + i] = static_cast<std::uint32_t>(i);
      auto beta = reshape(segment_softmax(concat(logits), node_of, n), {3, n});
      Var out{};
      for (std::uint32_t k = 0; k < 3; ++k) {
        const std::uint32_t row[1] = {k};
        auto weight = reshape(gather(beta, row), {n});
        auto term = scale_rows(projected[k], weight);
        out = k == 0 ? term : add(out, term);
      }
      return out;
    }
  }
  throw ContractError("unknown fusion strategy");
}

Var update_item(Var fused, Var prev, Var W3) { return tanh(matmul_nt(concat({fused, prev}), W3)); }

Var update_user(Var h_long, Var h_short, Var prev, Var W4u) {
  return tanh(matmul_nt(concat({h_long, h_short, prev}), W4u));
}

// ---- forward --------------------------------------------------------------

ForwardResult forward(Tape& tape, const BoundParams& params, const ModelConfig& config,
                      const SubGraphIndex& index, bool full_states) {
  if (params.E_U.tape != &tape) throw ContractError("parameters are bound to another tape");
  if (index.user_side.isolated(index.anchor)) {
    throw ContractError("anchor user has no item neighbors in the sub-graph");
  }
  const std::size_t n_users = index.users.size();
  const std::size_t n_items = index.items.size();
  const std::uint32_t anchor_row[1] = {index.anchor};

  auto h_u = gather(params.E_U, index.users);
  auto h_i = gather(params.E_I, index.items);

  ForwardResult result;
  result.layers.push_back({index.users, index.items, h_u.value(), h_i.value()});
  std::vector<Var> finals{gather(h_u, anchor_row)};

  for (std::size_t l = 1; l <= config.layers; ++l) {
    const auto& w = params.layers[l - 1];
    const bool skip_items = l == config.layers && !full_states;
    Var next_u{}, next_i{};
    if (config.propagation == Propagation::GcnBaseline) {
      next_u = segment_mean(gather(matmul_nt(h_i, w.W1), index.user_side.source),
                            index.user_side.target, n_users);
      if (!skip_items) {
        next_i = segment_mean(gather(matmul_nt(h_u, w.W2), index.item_side.source),
                              index.item_side.target, n_items);
      }
    } else {
      auto u_long = long_term(h_u, h_i, w.W1, params.P_iu, index.user_side);
      auto u_short = short_term(h_i, index.user_side);
      next_u = update_user(u_long, u_short, h_u, w.W4u);
      if (!skip_items) {
        auto i_long = long_term(h_i, h_u, w.W2, params.P_ui, index.item_side);
        auto i_short = short_term(h_u, index.item_side);
        auto i_seq = sequel_message(h_i, index.sequels, config.positional);
        auto fused = fuse(i_long, i_short, i_seq, config.fusion,
                          {w.W_agg, w.b_agg, w.W4c, w.W_sem, w.q_sem});
        next_i = update_item(fused, h_i, w.W3);
      }
    }
    h_u = next_u;
    LayerState state{index.users, index.items, h_u.value(), {}};
    if (!skip_items) {
      h_i = next_i;
      state.h_i = h_i.value();
    }
    result.layers.push_back(std::move(state));
    finals.push_back(gather(h_u, anchor_row));
  }
  result.user_final = finals.size() == 1 ? finals[0] : concat(finals);
  return result;
}

Var score(Var user_final, const BoundParams& params) {
  return matmul_nt(matmul(user_final, params.W_P), params.E_I);
}

Var loss(Var scores, ItemId target) { return softmax_bce(scores, target); }

ItemId argmax_item(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("argmax over an empty vocabulary");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<ItemId>(best);
}

std::vector<double> predict_scores(ModelParams& params, const SubGraph& sg,
                                   const SequelAwareGraph& graph) {
  Tape tape;
  auto bound = bind(tape, params, GradMode::None);
  auto index = SubGraphIndex::build(sg, graph, params.config().max_order);
  auto fwd = forward(tape, bound, params.config(), index);
  auto s = score(fwd.user_final, bound);
  auto v = s.value().values();
  return {v.begin(), v.end()};
}

}  // namespace hsal

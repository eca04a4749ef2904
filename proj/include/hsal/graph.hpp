#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace hsal {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using SeriesId = std::uint32_t;
using Timestamp = std::int64_t;

inline constexpr Timestamp kEndOfTime = std::numeric_limits<Timestamp>::max();

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  Timestamp timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Ordered run of items (position 1 first).
struct Series {
  SeriesId id = 0;
  std::vector<ItemId> items;

  friend bool operator==(const Series&, const Series&) = default;
};

struct ItemKind {
  bool sequel = false;
  SeriesId series = 0;
  std::uint32_t position = 0;  // 1-based; 0 for standalone items

  static ItemKind standalone() { return {}; }
  static ItemKind in_series(SeriesId s, std::uint32_t pos) { return {true, s, pos}; }
  friend bool operator==(const ItemKind&, const ItemKind&) = default;
};

struct UserItemEdge {
  UserId user = 0;
  ItemId item = 0;
  Timestamp timestamp = 0;
  std::uint32_t p_iu = 0;  // position of the item in the user's sequence
  std::uint32_t p_ui = 0;  // position of the user among the item's users

  friend bool operator==(const UserItemEdge&, const UserItemEdge&) = default;
};

/// Forward link between consecutive series members; `position` is the
/// position of `to_item`.
struct SequelEdge {
  ItemId from_item = 0;
  ItemId to_item = 0;
  SeriesId series = 0;
  std::uint32_t position = 0;

  friend bool operator==(const SequelEdge&, const SequelEdge&) = default;
};

struct NodeRef {
  enum class Kind : std::uint8_t { User, Item };
  Kind kind = Kind::User;
  std::uint32_t id = 0;

  static NodeRef user(UserId u) { return {Kind::User, u}; }
  static NodeRef item(ItemId i) { return {Kind::Item, i}; }
};

struct Neighbor {
  std::uint32_t node = 0;  // item id for a user node, user id for an item node
  const UserItemEdge* edge = nullptr;
};

/// Heterogeneous user/item graph with timestamped interaction edges and
/// forward sequel edges. Immutable after build().
class SequelAwareGraph {
 public:
  /// `n_users` / `n_items` size the id universes; pass 0 to use max id + 1.
  /// Interactions of one user with equal timestamps keep their input order.
  static SequelAwareGraph build(std::span<const Interaction> interactions,
                                std::span<const Series> catalog, std::size_t n_users = 0,
                                std::size_t n_items = 0);

  std::size_t num_users() const { return user_offsets_.size() - 1; }
  std::size_t num_items() const { return kinds_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  /// Edges grouped by user, each group ascending in time.
  std::span<const UserItemEdge> edges() const { return edges_; }
  const UserItemEdge& edge(std::uint32_t id) const { return edges_[id]; }
  std::span<const SequelEdge> sequel_edges() const { return sequel_edges_; }
  std::span<const Series> series_catalog() const { return catalog_; }

  const ItemKind& kind(ItemId item) const;
  const Series& series(SeriesId id) const;
  /// Items after `item` in its series, in series order. Empty for standalone items.
  std::span<const ItemId> sequel_successors(ItemId item) const;
  /// The forward edge leaving `item`, if any.
  std::optional<SequelEdge> sequel_edge_from(ItemId item) const;

  /// Edge ids of a user / item, ascending by timestamp.
  std::span<const std::uint32_t> user_adjacency(UserId user) const;
  std::span<const std::uint32_t> item_adjacency(ItemId item) const;

  /// Line-oriented dump for inspection (not a stable format).
  void write_text(std::ostream& out) const;

 private:
  std::vector<UserItemEdge> edges_;
  std::vector<std::uint32_t> user_offsets_{0};
  std::vector<std::uint32_t> user_edge_ids_;
  std::vector<std::uint32_t> item_offsets_{0};
  std::vector<std::uint32_t> item_edge_ids_;
  std::vector<ItemKind> kinds_;
  std::vector<Series> catalog_;
  std::vector<std::uint32_t> series_index_;  // series id -> catalog slot
  std::vector<SequelEdge> sequel_edges_;
  std::vector<std::int32_t> sequel_out_;  // item -> index into sequel_edges_, -1 if none
};

/// The graph as of time t_k: interaction edges strictly before t_k plus every
/// sequel edge. Shares storage with the graph.
class GraphView {
 public:
  GraphView(const SequelAwareGraph& graph, Timestamp t_k = kEndOfTime)
      : graph_(&graph), t_k_(t_k) {}

  const SequelAwareGraph& graph() const { return *graph_; }
  Timestamp time() const { return t_k_; }

  /// Visible edge ids of a user (or item), ascending in time. `limit` keeps
  /// only the most recent ones.
  std::span<const std::uint32_t> user_edges(UserId user,
                                            std::optional<std::size_t> limit = {}) const;
  std::span<const std::uint32_t> item_edges(ItemId item,
                                            std::optional<std::size_t> limit = {}) const;

  std::vector<Neighbor> neighbors(NodeRef node, std::optional<std::size_t> limit = {}) const;
  std::size_t num_edges() const;

 private:
  std::span<const std::uint32_t> visible(std::span<const std::uint32_t> adjacency,
                                         std::optional<std::size_t> limit) const;

  const SequelAwareGraph* graph_;
  Timestamp t_k_;
};

inline GraphView snapshot(const SequelAwareGraph& graph, Timestamp t_k) {
  return GraphView(graph, t_k);
}

}  // namespace hsal

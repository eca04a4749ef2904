#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "hsal/graph.hpp"

namespace hsal {

struct SamplingConfig {
  /// Number of user -> item expansion rounds after the anchor's history.
  std::size_t m = 4;
  /// Most recent first-order interactions kept for the anchor user.
  std::size_t recent_n = 50;
  /// Apply the same recency limit to users reached during expansion.
  bool truncate_expanded_users = true;
  /// Most recent users pulled in per item during expansion (0 = no limit).
  std::size_t item_fanout = 0;

  void validate() const;
};

/// m-order neighborhood of one user at one point in time.
struct SubGraph {
  UserId anchor = 0;
  Timestamp t_k = kEndOfTime;
  std::vector<UserId> users;          // ascending ids
  std::vector<ItemId> items;          // ascending ids
  std::vector<UserItemEdge> edges;    // induced, ascending (user, timestamp)
  std::vector<SequelEdge> sequel_edges;  // induced, ascending from_item
  std::vector<ItemId> history;        // anchor's truncated history, ascending in time

  bool has_user(UserId u) const;
  bool has_item(ItemId i) const;
  friend bool operator==(const SubGraph&, const SubGraph&) = default;
};

/// The anchor's last `recent_n` items visible in `view`, oldest first.
std::vector<ItemId> recent_history(const GraphView& view, UserId user, std::size_t recent_n);

/// Sequel-aware sub-graph sampling.
///
/// Starting from the anchor and its history, alternates item -> user and
/// user -> item frontier expansion for up to `cfg.m` rounds. Every item that
/// enters the item frontier brings all of its later series members with it.
/// Stops early once a frontier comes back empty.
SubGraph sample_subgraph(const GraphView& view, UserId user, std::span<const ItemId> history,
                         const SamplingConfig& cfg);

/// Same, with the history taken from the view.
SubGraph sample_subgraph(const GraphView& view, UserId user, const SamplingConfig& cfg);

struct PredictionPoint {
  UserId user = 0;
  Timestamp t_k = 0;
};

/// Snapshot + sample for every point, in order.
std::vector<SubGraph> batch_sample(const SequelAwareGraph& graph,
                                   std::span<const PredictionPoint> points,
                                   const SamplingConfig& cfg);

/// Edge-list text dump of a sub-graph.
void write_subgraph(std::ostream& out, const SubGraph& sg);

}  // namespace hsal

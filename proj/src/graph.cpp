#include "hsal/graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>

#include "hsal/errors.hpp"

namespace hsal {

SequelAwareGraph SequelAwareGraph::build(std::span<const Interaction> interactions,
                                         std::span<const Series> catalog,
                                         std::size_t n_users, std::size_t n_items) {
  std::size_t max_user = 0, max_item = 0;
  for (const auto& x : interactions) {
    max_user = std::max<std::size_t>(max_user, std::size_t{x.user} + 1);
    max_item = std::max<std::size_t>(max_item, std::size_t{x.item} + 1);
  }
  for (const auto& s : catalog) {
    for (auto i : s.items) max_item = std::max<std::size_t>(max_item, std::size_t{i} + 1);
  }
  if (n_users == 0) n_users = max_user;
  if (n_items == 0) n_items = max_item;
  if (max_user > n_users) {
    throw DataError("interaction references user " + std::to_string(max_user - 1) +
                    " outside a universe of " + std::to_string(n_users));
  }
  if (max_item > n_items) {
    throw DataError("item " + std::to_string(max_item - 1) + " outside a universe of " +
                    std::to_string(n_items));
  }

  SequelAwareGraph g;

  // Series catalog and item kinds.
  g.kinds_.assign(n_items, ItemKind::standalone());
  g.catalog_.assign(catalog.begin(), catalog.end());
  std::sort(g.catalog_.begin(), g.catalog_.end(),
            [](const Series& a, const Series& b) { return a.id < b.id; });
  SeriesId max_series = 0;
  for (std::size_t c = 0; c < g.catalog_.size(); ++c) {
    const auto& s = g.catalog_[c];
    if (c > 0 && g.catalog_[c - 1].id == s.id) {
      throw DataError("series id " + std::to_string(s.id) + " listed twice");
    }
    if (s.items.size() < 2) {
      throw DataError("series " + std::to_string(s.id) + " has fewer than two items");
    }
    for (std::size_t p = 0; p < s.items.size(); ++p) {
      auto& kind = g.kinds_[s.items[p]];
      if (kind.sequel) {
        throw DataError("item " + std::to_string(s.items[p]) + " appears in series " +
                        std::to_string(kind.series) + " and series " + std::to_string(s.id));
      }
      kind = ItemKind::in_series(s.id, static_cast<std::uint32_t>(p + 1));
    }
    max_series = std::max(max_series, s.id);
  }
  g.series_index_.assign(g.catalog_.empty() ? 0 : std::size_t{max_series} + 1, 0);
  for (std::size_t c = 0; c < g.catalog_.size(); ++c) {
    g.series_index_[g.catalog_[c].id] = static_cast<std::uint32_t>(c);
  }
  g.sequel_out_.assign(n_items, -1);
  for (const auto& s : g.catalog_) {
    for (std::size_t p = 0; p + 1 < s.items.size(); ++p) {
      g.sequel_out_[s.items[p]] = static_cast<std::int32_t>(g.sequel_edges_.size());
      g.sequel_edges_.push_back(
          {s.items[p], s.items[p + 1], s.id, static_cast<std::uint32_t>(p + 2)});
    }
  }

  // Interaction edges: canonical order is (user, timestamp, input order).
  std::vector<std::uint32_t> order(interactions.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto& x = interactions[a];
    const auto& y = interactions[b];
    return std::tie(x.user, x.timestamp) < std::tie(y.user, y.timestamp);
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& x = interactions[order[k - 1]];
    const auto& y = interactions[order[k]];
    if (x.user == y.user && x.timestamp == y.timestamp) {
      // Equal timestamps are legal; the exact same triple is not.
      for (std::size_t j = k; j-- > 0;) {
        const auto& z = interactions[order[j]];
        if (z.user != y.user || z.timestamp != y.timestamp) break;
        if (z.item == y.item) {
          throw DataError("duplicate interaction (user " + std::to_string(y.user) + ", item " +
                          std::to_string(y.item) + ", t " + std::to_string(y.timestamp) + ")");
        }
      }
    }
  }

  g.edges_.reserve(order.size());
  g.user_offsets_.assign(n_users + 1, 0);
  for (auto idx : order) {
    const auto& x = interactions[idx];
    g.edges_.push_back({x.user, x.item, x.timestamp, 0, 0});
    ++g.user_offsets_[std::size_t{x.user} + 1];
  }
  for (std::size_t u = 0; u < n_users; ++u) g.user_offsets_[u + 1] += g.user_offsets_[u];
  g.user_edge_ids_.resize(g.edges_.size());
  std::iota(g.user_edge_ids_.begin(), g.user_edge_ids_.end(), 0u);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (auto e = g.user_offsets_[u]; e < g.user_offsets_[u + 1]; ++e) {
      g.edges_[e].p_iu = e - g.user_offsets_[u] + 1;
    }
  }

  // Per-item adjacency, ascending by (timestamp, user, edge id).
  g.item_offsets_.assign(n_items + 1, 0);
  for (const auto& e : g.edges_) ++g.item_offsets_[std::size_t{e.item} + 1];
  for (std::size_t i = 0; i < n_items; ++i) g.item_offsets_[i + 1] += g.item_offsets_[i];
  g.item_edge_ids_.resize(g.edges_.size());
  {
    auto cursor = g.item_offsets_;
    for (std::uint32_t e = 0; e < g.edges_.size(); ++e) {
      g.item_edge_ids_[cursor[g.edges_[e].item]++] = e;
    }
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    auto first = g.item_edge_ids_.begin() + g.item_offsets_[i];
    auto last = g.item_edge_ids_.begin() + g.item_offsets_[i + 1];
    std::sort(first, last, [&](std::uint32_t a, std::uint32_t b) {
      const auto& x = g.edges_[a];
      const auto& y = g.edges_[b];
      return std::tie(x.timestamp, x.user, a) < std::tie(y.timestamp, y.user, b);
    });
    // p_ui ranks users by their first interaction with the item. The
    // adjacency is ascending in (timestamp, user), so first sight order is
    // exactly that ranking.
    std::unordered_map<UserId, std::uint32_t> rank;
    for (auto it = first; it != last; ++it) {
      auto& e = g.edges_[*it];
      auto [pos, inserted] = rank.try_emplace(e.user, static_cast<std::uint32_t>(rank.size() + 1));
      e.p_ui = pos->second;
    }
  }
  return g;
}

const ItemKind& SequelAwareGraph::kind(ItemId item) const {
  if (item >= kinds_.size()) throw LookupError("unknown item " + std::to_string(item));
  return kinds_[item];
}

const Series& SequelAwareGraph::series(SeriesId id) const {
  if (id >= series_index_.size() || catalog_[series_index_[id]].id != id) {
    throw LookupError("unknown series " + std::to_string(id));
  }
  return catalog_[series_index_[id]];
}

std::span<const ItemId> SequelAwareGraph::sequel_successors(ItemId item) const {
  const auto& k = kind(item);
  if (!k.sequel) return {};
  const auto& items = series(k.series).items;
  return std::span<const ItemId>(items).subspan(k.position);
}

std::optional<SequelEdge> SequelAwareGraph::sequel_edge_from(ItemId item) const {
  kind(item);
  if (sequel_out_[item] < 0) return std::nullopt;
  return sequel_edges_[static_cast<std::size_t>(sequel_out_[item])];
}

std::span<const std::uint32_t> SequelAwareGraph::user_adjacency(UserId user) const {
  if (user >= num_users()) throw LookupError("unknown user " + std::to_string(user));
  return std::span<const std::uint32_t>(user_edge_ids_)
      .subspan(user_offsets_[user], user_offsets_[user + 1] - user_offsets_[user]);
}

std::span<const std::uint32_t> SequelAwareGraph::item_adjacency(ItemId item) const {
  if (item >= num_items()) throw LookupError("unknown item " + std::to_string(item));
  return std::span<const std::uint32_t>(item_edge_ids_)
      .subspan(item_offsets_[item], item_offsets_[item + 1] - item_offsets_[item]);
}

void SequelAwareGraph::write_text(std::ostream& out) const {
  out << "# sequel-aware graph v1\n";
  out << "users " << num_users() << "\nitems " << num_items() << "\n";
  for (const auto& s : catalog_) {
    out << "series " << s.id;
    for (auto i : s.items) out << ' ' << i;
    out << '\n';
  }
  for (const auto& e : sequel_edges_) {
    out << "sq " << e.from_item << ' ' << e.to_item << ' ' << e.series << ' ' << e.position
        << '\n';
  }
  for (const auto& e : edges_) {
    out << "ui " << e.user << ' ' << e.item << ' ' << e.timestamp << ' ' << e.p_iu << ' '
        << e.p_ui << '\n';
  }
}

// ---- GraphView ------------------------------------------------------------

std::span<const std::uint32_t> GraphView::visible(std::span<const std::uint32_t> adjacency,
                                                  std::optional<std::size_t> limit) const {
  auto cut = std::partition_point(adjacency.begin(), adjacency.end(), [&](std::uint32_t e) {
    return graph_->edge(e).timestamp < t_k_;
  });
  auto n = static_cast<std::size_t>(cut - adjacency.begin());
  auto visible = adjacency.first(n);
  if (limit && *limit < n) return visible.last(*limit);
  return visible;
}

std::span<const std::uint32_t> GraphView::user_edges(UserId user,
                                                     std::optional<std::size_t> limit) const {
  return visible(graph_->user_adjacency(user), limit);
}

std::span<const std::uint32_t> GraphView::item_edges(ItemId item,
                                                     std::optional<std::size_t> limit) const {
  return visible(graph_->item_adjacency(item), limit);
}

std::vector<Neighbor> GraphView::neighbors(NodeRef node, std::optional<std::size_t> limit) const {
  const bool user = node.kind == NodeRef::Kind::User;
  auto ids = user ? user_edges(node.id, limit) : item_edges(node.id, limit);
  std::vector<Neighbor> out;
  out.reserve(ids.size());
  for (auto e : ids) {
    const auto& edge = graph_->edge(e);
    out.push_back({user ? edge.item : edge.user, &edge});
  }
  return out;
}

std::size_t GraphView::num_edges() const {
  std::size_t n = 0;
  for (UserId u = 0; u < graph_->num_users(); ++u) n += user_edges(u).size();
  return n;
}

}  // namespace hsal

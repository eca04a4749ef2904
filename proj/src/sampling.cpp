#include "hsal/sampling.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <set>
#include <string>

#include "hsal/errors.hpp"

namespace hsal {

void SamplingConfig::validate() const {
  if (recent_n < 1) throw ConfigError("recent_n must be at least 1");
}

bool SubGraph::has_user(UserId u) const {
  return std::binary_search(users.begin(), users.end(), u);
}

bool SubGraph::has_item(ItemId i) const {
  return std::binary_search(items.begin(), items.end(), i);
}

std::vector<ItemId> recent_history(const GraphView& view, UserId user, std::size_t recent_n) {
  std::vector<ItemId> out;
  for (auto e : view.user_edges(user, recent_n)) out.push_back(view.graph().edge(e).item);
  return out;
}

namespace {

void add_with_sequels(const SequelAwareGraph& g, ItemId item, std::set<ItemId>& into) {
  into.insert(item);
  if (!g.kind(item).sequel) return;
  for (auto next : g.sequel_successors(item)) into.insert(next);
}

}  // namespace

SubGraph sample_subgraph(const GraphView& view, UserId user, std::span<const ItemId> history,
                         const SamplingConfig& cfg) {
  cfg.validate();
  const auto& g = view.graph();
  if (user >= g.num_users()) throw LookupError("anchor user " + std::to_string(user) + " not in graph");
  if (history.empty()) {
    throw ContractError("user " + std::to_string(user) + " has no interactions before t=" +
                        std::to_string(view.time()));
  }
  {
    std::set<ItemId> visible;
    for (auto e : view.user_edges(user)) visible.insert(g.edge(e).item);
    for (auto i : history) {
      if (!visible.count(i)) {
        throw ContractError("history item " + std::to_string(i) + " has no edge from user " +
                            std::to_string(user) + " before t=" + std::to_string(view.time()));
      }
    }
  }

  const std::optional<std::size_t> user_limit =
      cfg.truncate_expanded_users ? std::optional<std::size_t>(cfg.recent_n) : std::nullopt;
  const std::optional<std::size_t> item_limit =
      cfg.item_fanout ? std::optional<std::size_t>(cfg.item_fanout) : std::nullopt;

  std::set<UserId> users{user};
  std::set<UserId> user_frontier{user};
  std::set<ItemId> item_frontier;
  for (auto i : history) add_with_sequels(g, i, item_frontier);
  std::set<ItemId> items = item_frontier;

  for (std::size_t round = 0; round < cfg.m; ++round) {
    for (auto i : item_frontier) {
      for (auto e : view.item_edges(i, item_limit)) user_frontier.insert(g.edge(e).user);
    }
    std::erase_if(user_frontier, [&](UserId u) { return users.count(u) > 0; });
    if (user_frontier.empty()) break;
    users.insert(user_frontier.begin(), user_frontier.end());

    for (auto u : user_frontier) {
      for (auto e : view.user_edges(u, user_limit)) add_with_sequels(g, g.edge(e).item, item_frontier);
    }
    std::erase_if(item_frontier, [&](ItemId i) { return items.count(i) > 0; });
    if (item_frontier.empty()) break;
    items.insert(item_frontier.begin(), item_frontier.end());
  }

  SubGraph sg;
  sg.anchor = user;
  sg.t_k = view.time();
  sg.users.assign(users.begin(), users.end());
  sg.items.assign(items.begin(), items.end());
  sg.history.assign(history.begin(), history.end());
  for (auto u : sg.users) {
    for (auto e : view.user_edges(u)) {
      const auto& edge = g.edge(e);
      if (sg.has_item(edge.item)) sg.edges.push_back(edge);
    }
  }
  for (auto i : sg.items) {
    if (auto se = g.sequel_edge_from(i); se && sg.has_item(se->to_item)) {
      sg.sequel_edges.push_back(*se);
    }
  }
  return sg;
}

SubGraph sample_subgraph(const GraphView& view, UserId user, const SamplingConfig& cfg) {
  cfg.validate();
  if (user >= view.graph().num_users()) {
    throw LookupError("anchor user " + std::to_string(user) + " not in graph");
  }
  auto history = recent_history(view, user, cfg.recent_n);
  return sample_subgraph(view, user, history, cfg);
}

std::vector<SubGraph> batch_sample(const SequelAwareGraph& graph,
                                   std::span<const PredictionPoint> points,
                                   const SamplingConfig& cfg) {
  std::vector<SubGraph> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    try {
      out.push_back(sample_subgraph(snapshot(graph, p.t_k), p.user, cfg));
    } catch (const ContractError& e) {
      throw ContractError("point (user " + std::to_string(p.user) + ", t " +
                          std::to_string(p.t_k) + "): " + e.what());
    } catch (const LookupError& e) {
      throw LookupError("point (user " + std::to_string(p.user) + ", t " +
                        std::to_string(p.t_k) + "): " + e.what());
    }
  }
  return out;
}

void write_subgraph(std::ostream& out, const SubGraph& sg) {
  out << "# subgraph anchor=" << sg.anchor << " t_k=" << sg.t_k << " users=" << sg.users.size()
      << " items=" << sg.items.size() << " edges=" << sg.edges.size()
      << " sequel_edges=" << sg.sequel_edges.size() << '\n';
  out << "# ui user item timestamp p_iu p_ui\n";
  for (const auto& e : sg.edges) {
    out << "ui " << e.user << ' ' << e.item << ' ' << e.timestamp << ' ' << e.p_iu << ' '
        << e.p_ui << '\n';
  }
  out << "# sq from_item to_item series position\n";
  for (const auto& e : sg.sequel_edges) {
    out << "sq " << e.from_item << ' ' << e.to_item << ' ' << e.series << ' ' << e.position
        << '\n';
  }
}

}  // namespace hsal

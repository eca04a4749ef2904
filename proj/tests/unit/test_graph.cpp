#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "hsal/data.hpp"
#include "hsal/errors.hpp"
#include "hsal/graph.hpp"

using namespace hsal;

namespace {

// u1 reads i1..i4 at t1<t2<t3<t4; A = (i2, i5, i7), B = (i3, i6).
// Dense ids: u1 -> 0, i_k -> k - 1, A -> 0, B -> 1.
SequelAwareGraph example_graph() {
  std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 2}, {0, 2, 3}, {0, 3, 4}};
  std::vector<Series> cat{{0, {1, 4, 6}}, {1, {2, 5}}};
  return SequelAwareGraph::build(xs, cat, 1, 7);
}

struct RandomGraph {
  std::vector<Interaction> xs;
  std::vector<Series> cat;
  std::size_t n_users, n_items;
};

RandomGraph random_graph(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RandomGraph g;
  g.n_users = 3 + rng() % 8;
  g.n_items = 4 + rng() % 12;
  std::vector<ItemId> perm(g.n_items);
  for (ItemId i = 0; i < g.n_items; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t cursor = 0;
  const std::size_t n_series = rng() % 4;
  for (SeriesId s = 0; s < n_series && cursor + 2 <= g.n_items; ++s) {
    std::size_t len = 2 + rng() % 3;
    len = std::min(len, g.n_items - cursor);
    g.cat.push_back({s, {perm.begin() + cursor, perm.begin() + cursor + len}});
    cursor += len;
  }
  for (UserId u = 0; u < g.n_users; ++u) {
    std::set<Timestamp> used;
    const std::size_t k = 1 + rng() % 6;
    for (std::size_t j = 0; j < k; ++j) {
      Timestamp t;
      do t = 1 + rng() % 50; while (!used.insert(t).second);
      g.xs.push_back({u, static_cast<ItemId>(rng() % g.n_items), t});
    }
  }
  return g;
}

std::vector<UserItemEdge> edge_list(const SequelAwareGraph& g) {
  return {g.edges().begin(), g.edges().end()};
}

}  // namespace

TEST(Graph, IllustrativeExampleEdges) {
  auto g = example_graph();
  std::vector<SequelEdge> seq(g.sequel_edges().begin(), g.sequel_edges().end());
  std::vector<SequelEdge> expect_seq{{1, 4, 0, 2}, {4, 6, 0, 3}, {2, 5, 1, 2}};
  std::sort(seq.begin(), seq.end(), [](auto& a, auto& b) { return a.from_item < b.from_item; });
  std::sort(expect_seq.begin(), expect_seq.end(),
            [](auto& a, auto& b) { return a.from_item < b.from_item; });
  EXPECT_EQ(seq, expect_seq);

  std::vector<UserItemEdge> expect_ui{
      {0, 0, 1, 1, 1}, {0, 1, 2, 2, 1}, {0, 2, 3, 3, 1}, {0, 3, 4, 4, 1}};
  EXPECT_EQ(edge_list(g), expect_ui);
}

TEST(Graph, ItemKinds) {
  auto g = example_graph();
  EXPECT_EQ(g.kind(0), ItemKind::standalone());
  EXPECT_EQ(g.kind(1), ItemKind::in_series(0, 1));
  EXPECT_EQ(g.kind(6), ItemKind::in_series(0, 3));
  EXPECT_EQ(g.kind(5), ItemKind::in_series(1, 2));
  EXPECT_THROW(g.kind(7), LookupError);
  EXPECT_THROW(g.series(9), LookupError);
}

TEST(Graph, SequelSuccessors) {
  auto g = example_graph();
  auto s = g.sequel_successors(1);
  EXPECT_EQ(std::vector<ItemId>(s.begin(), s.end()), (std::vector<ItemId>{4, 6}));
  EXPECT_TRUE(g.sequel_successors(6).empty());
  EXPECT_TRUE(g.sequel_successors(0).empty());
  EXPECT_THROW(g.sequel_successors(42), LookupError);
  EXPECT_EQ(g.sequel_edge_from(4)->to_item, 6u);
  EXPECT_FALSE(g.sequel_edge_from(6).has_value());
}

TEST(Graph, EmptyCatalogMeansAllStandalone) {
  std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 2}, {1, 2, 1}};
  auto g = SequelAwareGraph::build(xs, {});
  EXPECT_TRUE(g.sequel_edges().empty());
  for (ItemId i = 0; i < g.num_items(); ++i) EXPECT_FALSE(g.kind(i).sequel);
}

TEST(Graph, LaterUserGetsSecondItemPosition) {
  std::vector<Interaction> xs{{1, 0, 5}, {0, 0, 9}, {0, 1, 2}};
  auto g = SequelAwareGraph::build(xs, {});
  for (const auto& e : g.edges()) {
    if (e.item != 0) continue;
    EXPECT_EQ(e.p_ui, e.user == 1 ? 1u : 2u);
  }
  // user 0 saw item 1 first, item 0 second
  for (const auto& e : g.edges())
    if (e.user == 0) EXPECT_EQ(e.p_iu, e.item == 1 ? 1u : 2u);
}

TEST(Graph, CatalogAndInteractionErrors) {
  std::vector<Interaction> dup{{0, 0, 1}, {0, 0, 1}};
  EXPECT_THROW(SequelAwareGraph::build(dup, {}), DataError);
  std::vector<Interaction> ok{{0, 0, 1}, {0, 1, 1}};
  EXPECT_NO_THROW(SequelAwareGraph::build(ok, {}));

  std::vector<Series> overlap{{0, {0, 1}}, {1, {1, 2}}};
  EXPECT_THROW(SequelAwareGraph::build(ok, overlap), DataError);
  std::vector<Series> short_series{{0, {1}}};
  EXPECT_THROW(SequelAwareGraph::build(ok, short_series), DataError);
  std::vector<Series> twice{{0, {0, 1}}, {0, {2, 3}}};
  EXPECT_THROW(SequelAwareGraph::build(ok, twice), DataError);
  EXPECT_THROW(SequelAwareGraph::build(ok, {}, 1, 1), DataError);
}

TEST(Graph, EqualTimestampsKeepInputOrder) {
  std::vector<Interaction> xs{{0, 3, 1}, {0, 1, 1}, {0, 2, 1}};
  auto g = SequelAwareGraph::build(xs, {});
  std::vector<ItemId> items;
  for (const auto& e : g.edges()) items.push_back(e.item);
  EXPECT_EQ(items, (std::vector<ItemId>{3, 1, 2}));
}

TEST(Snapshot, StrictTimeFilter) {
  auto g = example_graph();
  auto v3 = snapshot(g, 3);
  std::vector<ItemId> seen;
  for (auto e : v3.user_edges(0)) seen.push_back(g.edge(e).item);
  EXPECT_EQ(seen, (std::vector<ItemId>{0, 1}));
  EXPECT_EQ(v3.num_edges(), 2u);

  auto v0 = snapshot(g, 1);
  EXPECT_EQ(v0.num_edges(), 0u);
  EXPECT_EQ(v0.graph().sequel_edges().size(), 3u);

  GraphView full(g);
  EXPECT_EQ(full.num_edges(), g.num_edges());
  EXPECT_EQ(full.user_edges(0).size(), 4u);
}

TEST(Snapshot, NeighborsLimitKeepsLatestAscending) {
  std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 5}, {0, 2, 3}};
  auto g = SequelAwareGraph::build(xs, {});
  GraphView v(g);
  auto nb = v.neighbors(NodeRef::user(0), 2);
  ASSERT_EQ(nb.size(), 2u);
  EXPECT_EQ(nb[0].node, 2u);
  EXPECT_EQ(nb[1].node, 1u);
  EXPECT_EQ(v.neighbors(NodeRef::user(0), 10).size(), 3u);
  EXPECT_EQ(v.neighbors(NodeRef::item(1)).at(0).node, 0u);
  EXPECT_THROW(v.neighbors(NodeRef::user(5)), LookupError);
  EXPECT_THROW(v.neighbors(NodeRef::item(9)), LookupError);
}

TEST(Snapshot, NeighborsMatchSortOracle) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto rg = random_graph(seed);
    auto g = SequelAwareGraph::build(rg.xs, rg.cat, rg.n_users, rg.n_items);
    const Timestamp t_k = 10 + static_cast<Timestamp>(seed % 40);
    GraphView v(g, t_k);
    for (std::size_t limit : {1, 2, 3, 100}) {
      for (UserId u = 0; u < rg.n_users; ++u) {
        std::vector<std::pair<Timestamp, ItemId>> oracle;
        for (const auto& x : rg.xs)
          if (x.user == u && x.timestamp < t_k) oracle.push_back({x.timestamp, x.item});
        std::sort(oracle.begin(), oracle.end(),
                  [](auto& a, auto& b) { return a.first < b.first; });
        if (oracle.size() > limit) oracle.erase(oracle.begin(), oracle.end() - limit);
        auto nb = v.neighbors(NodeRef::user(u), limit);
        ASSERT_EQ(nb.size(), oracle.size());
        for (std::size_t k = 0; k < nb.size(); ++k) {
          EXPECT_EQ(nb[k].node, oracle[k].second);
          EXPECT_EQ(nb[k].edge->timestamp, oracle[k].first);
        }
      }
      for (ItemId i = 0; i < rg.n_items; ++i) {
        std::vector<Timestamp> oracle;
        for (const auto& x : rg.xs)
          if (x.item == i && x.timestamp < t_k) oracle.push_back(x.timestamp);
        std::sort(oracle.begin(), oracle.end());
        if (oracle.size() > limit) oracle.erase(oracle.begin(), oracle.end() - limit);
        auto nb = v.neighbors(NodeRef::item(i), limit);
        ASSERT_EQ(nb.size(), oracle.size());
        for (std::size_t k = 0; k < nb.size(); ++k) EXPECT_EQ(nb[k].edge->timestamp, oracle[k]);
      }
    }
  }
}

TEST(GraphProperties, PermutationInvariant) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto rg = random_graph(seed);
    auto g1 = SequelAwareGraph::build(rg.xs, rg.cat, rg.n_users, rg.n_items);
    auto shuffled = rg.xs;
    std::mt19937_64 rng(seed + 1000);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto cat = rg.cat;
    std::reverse(cat.begin(), cat.end());
    auto g2 = SequelAwareGraph::build(shuffled, cat, rg.n_users, rg.n_items);
    EXPECT_EQ(edge_list(g1), edge_list(g2));
    EXPECT_TRUE(std::equal(g1.sequel_edges().begin(), g1.sequel_edges().end(),
                           g2.sequel_edges().begin(), g2.sequel_edges().end()));
    std::ostringstream a, b;
    g1.write_text(a);
    g2.write_text(b);
    EXPECT_EQ(a.str(), b.str());
  }
}

TEST(GraphProperties, CountsAndPositions) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rg = random_graph(seed);
    auto g = SequelAwareGraph::build(rg.xs, rg.cat, rg.n_users, rg.n_items);

    std::size_t expected_seq = 0;
    for (const auto& s : rg.cat) expected_seq += s.items.size() - 1;
    EXPECT_EQ(g.sequel_edges().size(), expected_seq);
    for (const auto& se : g.sequel_edges()) {
      EXPECT_EQ(g.kind(se.to_item).position, g.kind(se.from_item).position + 1);
      EXPECT_EQ(g.kind(se.to_item).series, se.series);
      EXPECT_EQ(se.position, g.kind(se.to_item).position);
    }

    std::size_t user_deg = 0, item_deg = 0;
    for (UserId u = 0; u < g.num_users(); ++u) {
      auto adj = g.user_adjacency(u);
      user_deg += adj.size();
      for (std::size_t k = 0; k < adj.size(); ++k) {
        EXPECT_EQ(g.edge(adj[k]).p_iu, k + 1);
        if (k) EXPECT_LT(g.edge(adj[k - 1]).timestamp, g.edge(adj[k]).timestamp);
      }
    }
    for (ItemId i = 0; i < g.num_items(); ++i) {
      auto adj = g.item_adjacency(i);
      item_deg += adj.size();
      std::set<UserId> users;
      std::uint32_t last_rank = 0;
      for (std::size_t k = 0; k < adj.size(); ++k) {
        const auto& e = g.edge(adj[k]);
        if (k) EXPECT_LE(g.edge(adj[k - 1]).timestamp, e.timestamp);
        if (users.insert(e.user).second) {
          EXPECT_EQ(e.p_ui, last_rank + 1);
          last_rank = e.p_ui;
        }
        EXPECT_LE(e.p_ui, users.size());
      }
    }
    EXPECT_EQ(user_deg, rg.xs.size());
    EXPECT_EQ(item_deg, rg.xs.size());
  }
}

TEST(GraphProperties, SnapshotsAreMonotone) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rg = random_graph(seed);
    auto g = SequelAwareGraph::build(rg.xs, rg.cat, rg.n_users, rg.n_items);
    for (Timestamp t = 0; t < 52; t += 3) {
      GraphView a(g, t), b(g, t + 3);
      EXPECT_LE(a.num_edges(), b.num_edges());
      for (UserId u = 0; u < g.num_users(); ++u) {
        auto ea = a.user_edges(u);
        auto eb = b.user_edges(u);
        std::set<std::uint32_t> later(eb.begin(), eb.end());
        for (auto e : ea) {
          EXPECT_TRUE(later.count(e));
          EXPECT_LT(g.edge(e).timestamp, t);
        }
      }
    }
  }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "hsal/errors.hpp"
#include "hsal/sampling.hpp"
#include "sampling_oracle.hpp"

using namespace hsal;
using namespace hsal::testing;

namespace {

void check_invariants(const SubGraph& sg, const SequelAwareGraph& g) {
  ASSERT_TRUE(sg.has_user(sg.anchor));
  for (auto i : sg.history) EXPECT_TRUE(sg.has_item(i));
  for (const auto& e : sg.edges) {
    EXPECT_LT(e.timestamp, sg.t_k);
    EXPECT_TRUE(sg.has_user(e.user));
    EXPECT_TRUE(sg.has_item(e.item));
  }
  for (const auto& e : sg.sequel_edges) {
    EXPECT_TRUE(sg.has_item(e.from_item));
    EXPECT_TRUE(sg.has_item(e.to_item));
  }
  for (auto i : sg.items)
    for (auto next : g.sequel_successors(i)) EXPECT_TRUE(sg.has_item(next)) << i << "->" << next;
}

}  // namespace

TEST(Sampling, MatchesFixpointOracleOnRandomGraphs) {
  int agree = 0, cases = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto w = random_world(seed);
    auto g = SequelAwareGraph::build(w.xs, w.cat, w.n_users, w.n_items);
    const Timestamp t_k = 15 + static_cast<Timestamp>(seed % 30);
    UserId anchor = static_cast<UserId>(seed % w.n_users);
    while (!has_history(w, anchor, t_k)) anchor = (anchor + 1) % w.n_users;
    auto view = snapshot(g, t_k);
    for (bool truncate : {false, true}) {
      for (std::size_t m = 0; m <= 3; ++m) {
        SamplingConfig cfg;
        cfg.m = m;
        cfg.recent_n = truncate ? 2 : 50;
        cfg.truncate_expanded_users = truncate;
        auto sg = sample_subgraph(view, anchor, cfg);
        auto [U, I] = Oracle{w, t_k, cfg.recent_n, truncate}.run(anchor, m);
        ++cases;
        bool same = std::vector<UserId>(U.begin(), U.end()) == sg.users &&
                    std::vector<ItemId>(I.begin(), I.end()) == sg.items;
        agree += same;
        EXPECT_TRUE(same) << "seed " << seed << " m " << m << " truncate " << truncate;
        check_invariants(sg, g);
      }
    }
  }
  EXPECT_EQ(agree, cases);
}

TEST(Sampling, MonotoneInOrder) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto w = random_world(seed);
    auto g = SequelAwareGraph::build(w.xs, w.cat, w.n_users, w.n_items);
    GraphView view(g);
    const UserId anchor = 0;
    SubGraph prev;
    for (std::size_t m = 0; m <= 4; ++m) {
      SamplingConfig cfg;
      cfg.m = m;
      auto sg = sample_subgraph(view, anchor, cfg);
      if (m > 0) {
        EXPECT_TRUE(std::includes(sg.users.begin(), sg.users.end(), prev.users.begin(), prev.users.end()));
        EXPECT_TRUE(std::includes(sg.items.begin(), sg.items.end(), prev.items.begin(), prev.items.end()));
      }
      prev = sg;
    }
  }
}

TEST(Sampling, OrderZeroIsHistoryWithSequels) {
  // items 0..6; series (1, 4, 6) and (2, 5)
  std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {1, 0, 1}};
  std::vector<Series> cat{{0, {1, 4, 6}}, {1, {2, 5}}};
  auto g = SequelAwareGraph::build(xs, cat, 2, 7);
  SamplingConfig cfg;
  cfg.m = 0;
  auto sg = sample_subgraph(GraphView(g), 0, cfg);
  EXPECT_EQ(sg.users, (std::vector<UserId>{0}));
  EXPECT_EQ(sg.items, (std::vector<ItemId>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(sg.sequel_edges.size(), 3u);
}

TEST(Sampling, IllustrativeExampleIncludesSequels) {
  std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 2}, {0, 2, 3}, {0, 3, 4}};
  std::vector<Series> cat{{0, {1, 4, 6}}, {1, {2, 5}}};
  auto g = SequelAwareGraph::build(xs, cat, 1, 7);
  SamplingConfig cfg;
  cfg.m = 1;
  cfg.recent_n = 10;
  auto sg = sample_subgraph(snapshot(g, 5), 0, cfg);
  for (ItemId i = 0; i < 7; ++i) EXPECT_TRUE(sg.has_item(i)) << i;
  EXPECT_EQ(sg.history, (std::vector<ItemId>{0, 1, 2, 3}));
}

TEST(Sampling, RecentHistoryTruncates) {
  std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 2}, {0, 2, 3}, {0, 3, 4}};
  auto g = SequelAwareGraph::build(xs, {});
  EXPECT_EQ(recent_history(GraphView(g), 0, 2), (std::vector<ItemId>{2, 3}));
  EXPECT_EQ(recent_history(snapshot(g, 3), 0, 5), (std::vector<ItemId>{0, 1}));
}

TEST(Sampling, Errors) {
  std::vector<Interaction> xs{{0, 0, 5}, {1, 1, 1}};
  auto g = SequelAwareGraph::build(xs, {});
  SamplingConfig cfg;
  EXPECT_THROW(sample_subgraph(snapshot(g, 5), 0, cfg), ContractError);
  EXPECT_THROW(sample_subgraph(GraphView(g), 7, cfg), LookupError);
  std::vector<ItemId> foreign{1};
  EXPECT_THROW(sample_subgraph(GraphView(g), 0, foreign, cfg), ContractError);
  cfg.recent_n = 0;
  EXPECT_THROW(sample_subgraph(GraphView(g), 0, cfg), ConfigError);
}

TEST(BatchSample, MatchesIndividualCalls) {
  auto w = random_world(77);
  auto g = SequelAwareGraph::build(w.xs, w.cat, w.n_users, w.n_items);
  std::vector<PredictionPoint> points;
  std::mt19937_64 rng(3);
  while (points.size() < 50) {
    UserId u = static_cast<UserId>(rng() % w.n_users);
    Timestamp t = 2 + static_cast<Timestamp>(rng() % 40);
    if (has_history(w, u, t)) points.push_back({u, t});
  }
  SamplingConfig cfg;
  cfg.m = 2;
  auto batch = batch_sample(g, points, cfg);
  ASSERT_EQ(batch.size(), points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    EXPECT_EQ(batch[k], sample_subgraph(snapshot(g, points[k].t_k), points[k].user, cfg));
  }
  EXPECT_TRUE(batch_sample(g, {}, cfg).empty());
  std::vector<PredictionPoint> twice{points[0], points[0]};
  auto again = batch_sample(g, twice, cfg);
  EXPECT_EQ(again[0], again[1]);
}

TEST(BatchSample, ErrorNamesThePoint) {
  std::vector<Interaction> xs{{0, 0, 5}};
  auto g = SequelAwareGraph::build(xs, {});
  std::vector<PredictionPoint> points{{0, 3}};
  try {
    batch_sample(g, points, SamplingConfig{});
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("user 0, t 3"), std::string::npos);
  }
}

TEST(Sampling, DumpListsEdges) {
  std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 2}};
  std::vector<Series> cat{{0, {0, 1}}};
  auto g = SequelAwareGraph::build(xs, cat);
  std::ostringstream out;
  write_subgraph(out, sample_subgraph(GraphView(g), 0, SamplingConfig{}));
  EXPECT_NE(out.str().find("ui 0 1 2 2 1"), std::string::npos);
  EXPECT_NE(out.str().find("sq 0 1 0 2"), std::string::npos);
}

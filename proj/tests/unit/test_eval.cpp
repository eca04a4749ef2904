#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "hsal/errors.hpp"
#include "hsal/eval.hpp"

using namespace hsal;

namespace {

// Sort the surviving candidates and read off the target's position.
std::size_t oracle_rank(const std::vector<double>& s, ItemId target,
                        const std::vector<std::uint8_t>& excluded) {
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (excluded.empty() || !excluded[j]) ids.push_back(j);
  std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), target) - ids.begin()) + 1;
}

double oracle_ndcg(std::size_t rank, std::size_t k) {
  // DCG with one relevant item over ideal DCG of 1
  double dcg = 0;
  for (std::size_t pos = 1; pos <= k; ++pos)
    if (pos == rank) dcg += 1.0 / (std::log(pos + 1.0) / std::log(2.0));
  return dcg;
}

Scorer table_scorer(std::vector<std::vector<double>> rows) {
  return [rows = std::move(rows)](const EvalCase& c) {
    if (c.user >= rows.size() || rows[c.user].empty()) throw ContractError("no history");
    return rows[c.user];
  };
}

}  // namespace

TEST(Rank, MatchesSortOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> s(n);
    // coarse values so ties are common
    for (auto& v : s) v = static_cast<double>(rng() % 7) - 3.0;
    const auto target = static_cast<ItemId>(rng() % n);
    std::vector<std::uint8_t> ex(n, 0);
    if (trial % 2) {
      for (std::size_t j = 0; j < n; ++j) ex[j] = j != target && rng() % 3 == 0;
    }
    ASSERT_EQ(rank_of_target(s, target, ex), oracle_rank(s, target, ex)) << "trial " << trial;
    if (trial % 2 == 0) ASSERT_EQ(rank_of_target(s, target), oracle_rank(s, target, {}));
  }
}

TEST(Rank, TiesGoToLowerId) {
  std::vector<double> s{1.0, 1.0, 1.0};
  EXPECT_EQ(rank_of_target(s, 0), 1u);
  EXPECT_EQ(rank_of_target(s, 2), 3u);
}

TEST(Rank, ExclusionRemovesCompetitors) {
  std::vector<double> s{5.0, 4.0, 3.0, 2.0};
  EXPECT_EQ(rank_of_target(s, 3), 4u);
  std::vector<std::uint8_t> ex{1, 1, 0, 0};
  EXPECT_EQ(rank_of_target(s, 3, ex), 2u);
}

TEST(Rank, Errors) {
  std::vector<double> s{1.0, 2.0};
  std::vector<std::uint8_t> ex{1, 0};
  EXPECT_THROW(rank_of_target(s, 0, ex), ContractError);
  EXPECT_THROW(rank_of_target(s, 5), ContractError);
  EXPECT_THROW(rank_of_target(s, 0, std::vector<std::uint8_t>{0}), ContractError);
  std::vector<double> bad{NAN, 1.0};
  EXPECT_THROW(rank_of_target(bad, 0), NumericError);
}

TEST(Metrics, Examples) {
  EXPECT_EQ(ndcg_at_k(3, 10), 0.5);
  EXPECT_EQ(ndcg_at_k(1, 10), 1.0);
  EXPECT_EQ(ndcg_at_k(11, 10), 0.0);
  EXPECT_EQ(hit_at_k(10, 10), 1);
  EXPECT_EQ(hit_at_k(11, 10), 0);
  EXPECT_EQ(hit_at_k(0, 10), 0);
  for (std::size_t r = 1; r <= 30; ++r)
    for (std::size_t k : {1u, 5u, 10u, 20u}) EXPECT_NEAR(ndcg_at_k(r, k), oracle_ndcg(r, k), 1e-12);
}

TEST(Metrics, MonotoneInK) {
  for (std::size_t r = 1; r <= 40; ++r) {
    for (std::size_t k = 1; k < 40; ++k) {
      EXPECT_LE(hit_at_k(r, k), hit_at_k(r, k + 1));
      EXPECT_LE(ndcg_at_k(r, k), ndcg_at_k(r, k + 1));
      EXPECT_LE(ndcg_at_k(r, k), hit_at_k(r, k));
    }
  }
}

TEST(MakeCases, SeenIsSortedUniqueContext) {
  std::vector<Interaction> ctx{{0, 3, 1}, {0, 1, 2}, {0, 3, 3}, {1, 2, 1}};
  std::vector<Interaction> held{{0, 4, 9}, {2, 0, 9}};
  auto cases = make_cases(held, ctx);
  ASSERT_EQ(cases.size(), 2u);
  EXPECT_EQ(cases[0].seen, (std::vector<ItemId>{1, 3}));
  EXPECT_EQ(cases[0].t, 9);
  EXPECT_TRUE(cases[1].seen.empty());
}

TEST(Evaluate, MeansArePerUserMeans) {
  std::mt19937_64 rng(3);
  const std::size_t n_items = 30, n_users = 40;
  std::vector<std::vector<double>> rows(n_users);
  std::vector<EvalCase> cases;
  for (std::size_t u = 0; u < n_users; ++u) {
    rows[u].resize(n_items);
    for (auto& v : rows[u]) v = unit_uniform(rng);
    EvalCase c{static_cast<UserId>(u), static_cast<ItemId>(rng() % n_items), 1, {}};
    for (int k = 0; k < 5; ++k) {
      auto i = static_cast<ItemId>(rng() % n_items);
      if (i != c.target) c.seen.push_back(i);
    }
    cases.push_back(c);
  }
  EvalConfig cfg;
  auto rep = evaluate_serial(cases, table_scorer(rows), cfg);
  ASSERT_EQ(rep.evaluated, n_users);
  for (std::size_t x = 0; x < cfg.ks.size(); ++x) {
    double h = 0, g = 0;
    for (std::size_t u = 0; u < n_users; ++u) {
      std::vector<std::uint8_t> ex(n_items, 0);
      for (auto i : cases[u].seen) ex[i] = 1;
      auto r = oracle_rank(rows[u], cases[u].target, ex);
      EXPECT_EQ(rep.per_user[u].rank, r);
      EXPECT_EQ(rep.per_user[u].candidates, n_items - std::count(ex.begin(), ex.end(), 1));
      h += r <= cfg.ks[x];
      g += oracle_ndcg(r, cfg.ks[x]);
    }
    EXPECT_NEAR(rep.hit[x], h / n_users, 1e-12);
    EXPECT_NEAR(rep.ndcg[x], g / n_users, 1e-12);
  }
  EXPECT_LE(rep.hit_at(5), rep.hit_at(10));
  EXPECT_LE(rep.hit_at(10), rep.hit_at(20));
  EXPECT_THROW(rep.hit_at(7), LookupError);

  cfg.exclude_seen = false;
  auto raw = evaluate_serial(cases, table_scorer(rows), cfg);
  for (std::size_t u = 0; u < n_users; ++u) {
    EXPECT_GE(raw.per_user[u].rank, rep.per_user[u].rank);
    EXPECT_EQ(raw.per_user[u].candidates, n_items);
  }
}

TEST(Evaluate, SerialEqualsParallel) {
  std::mt19937_64 rng(8);
  std::vector<std::vector<double>> rows(64);
  std::vector<EvalCase> cases;
  for (std::size_t u = 0; u < rows.size(); ++u) {
    if (u % 9 != 4) {
      rows[u].resize(50);
      for (auto& v : rows[u]) v = unit_uniform(rng);
    }
    cases.push_back({static_cast<UserId>(u), static_cast<ItemId>(rng() % 50), 1, {}});
  }
  EvalConfig cfg;
  cfg.sampled_negatives = 20;
  cfg.negative_seed = 5;
  auto a = evaluate_serial(cases, table_scorer(rows), cfg);
  auto b = evaluate_parallel(cases, table_scorer(rows), cfg);
  EXPECT_EQ(a.hit, b.hit);
  EXPECT_EQ(a.ndcg, b.ndcg);
  EXPECT_EQ(a.skipped, 7u);
  EXPECT_EQ(b.skipped, 7u);
  ASSERT_EQ(a.per_user.size(), b.per_user.size());
  for (std::size_t k = 0; k < a.per_user.size(); ++k) {
    EXPECT_EQ(a.per_user[k].rank, b.per_user[k].rank);
    EXPECT_EQ(a.per_user[k].candidates, 21u);
  }
}

TEST(Evaluate, ForcedFirstScoresOne) {
  std::vector<EvalCase> cases;
  std::vector<std::vector<double>> rows;
  for (UserId u = 0; u < 10; ++u) {
    std::vector<double> s(20, 0.0);
    s[u] = 1.0;
    rows.push_back(s);
    cases.push_back({u, u, 1, {}});
  }
  auto rep = evaluate_serial(cases, table_scorer(rows), EvalConfig{});
  for (std::size_t x = 0; x < rep.ks.size(); ++x) {
    EXPECT_EQ(rep.hit[x], 1.0);
    EXPECT_EQ(rep.ndcg[x], 1.0);
  }
}

TEST(Evaluate, BadCutoffs) {
  EvalConfig cfg;
  cfg.ks = {};
  EXPECT_THROW(evaluate_serial({}, table_scorer({}), cfg), ConfigError);
  cfg.ks = {0};
  EXPECT_THROW(evaluate_serial({}, table_scorer({}), cfg), ConfigError);
}

TEST(Report, TableAndCsv) {
  std::vector<EvalCase> cases{{0, 2, 1, {}}, {1, 0, 1, {}}, {2, 0, 1, {}}};
  std::vector<std::vector<double>> rows{{3, 2, 1}, {0, 1, 2}, {}};
  EvalConfig cfg;
  cfg.ks = {1, 2};
  auto rep = evaluate_serial(cases, table_scorer(rows), cfg);
  std::ostringstream t;
  write_table(t, rep, "toy");
  EXPECT_NE(t.str().find("Hit@1"), std::string::npos);
  EXPECT_NE(t.str().find("NDCG@2"), std::string::npos);
  EXPECT_NE(t.str().find("evaluated 2, skipped 1"), std::string::npos);

  std::ostringstream c;
  write_per_user_csv(c, rep);
  EXPECT_EQ(c.str(),
            "user,target,rank,candidates,hit@1,hit@2,ndcg@1,ndcg@2\n"
            "0,2,3,3,0,0,0,0\n"
            "1,0,3,3,0,0,0,0\n");
  auto users = IdDictionary({"ann", "bob", "cy"});
  auto items = IdDictionary({"x", "y", "z"});
  std::ostringstream named;
  write_per_user_csv(named, rep, &users, &items);
  EXPECT_NE(named.str().find("ann,z,3,3"), std::string::npos);
}

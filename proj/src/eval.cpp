#include "hsal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>

#include <omp.h>

#include "hsal/errors.hpp"

namespace hsal {

std::size_t rank_of_target(std::span<const double> scores, ItemId target,
                           std::span<const std::uint8_t> excluded) {
  if (target >= scores.size()) {
    throw ContractError("target item " + std::to_string(target) + " outside a vocabulary of " +
                        std::to_string(scores.size()));
  }
  if (!excluded.empty() && excluded.size() != scores.size()) {
    throw ContractError("exclusion mask does not match the score vector");
  }
  auto is_excluded = [&](std::size_t j) { return !excluded.empty() && excluded[j] != 0; };
  if (is_excluded(target)) throw ContractError("target item is in the excluded set");
  const double st = scores[target];
  if (!std::isfinite(st)) throw NumericError("target score is not finite");
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j == target || is_excluded(j)) continue;
    if (scores[j] > st || (scores[j] == st && j < target)) ++rank;
  }
  return rank;
}

double ndcg_at_k(std::size_t rank, std::size_t k) {
  if (rank < 1 || rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double RankingReport::hit_at(std::size_t k) const {
  for (std::size_t x = 0; x < ks.size(); ++x)
    if (ks[x] == k) return hit[x];
  throw LookupError("report has no Hit@" + std::to_string(k));
}

double RankingReport::ndcg_at(std::size_t k) const {
  for (std::size_t x = 0; x < ks.size(); ++x)
    if (ks[x] == k) return ndcg[x];
  throw LookupError("report has no NDCG@" + std::to_string(k));
}

std::vector<EvalCase> make_cases(std::span<const Interaction> held_out,
                                 std::span<const Interaction> context) {
  std::map<UserId, std::vector<ItemId>> seen;
  for (const auto& x : context) seen[x.user].push_back(x.item);
  std::vector<EvalCase> cases;
  cases.reserve(held_out.size());
  for (const auto& x : held_out) {
    EvalCase c{x.user, x.item, x.timestamp, {}};
    if (auto it = seen.find(x.user); it != seen.end()) c.seen = it->second;
    std::sort(c.seen.begin(), c.seen.end());
    c.seen.erase(std::unique(c.seen.begin(), c.seen.end()), c.seen.end());
    cases.push_back(std::move(c));
  }
  return cases;
}

Scorer model_scorer(ModelParams& params, const SequelAwareGraph& graph,
                    const SamplingConfig& sampling) {
  return [&params, &graph, sampling](const EvalCase& c) {
    if (c.user >= graph.num_users()) throw ContractError("user unknown to the evaluation graph");
    auto view = snapshot(graph, c.t);
    auto sg = sample_subgraph(view, c.user, sampling);
    return predict_scores(params, sg, graph);
  };
}

namespace {

std::optional<UserResult> evaluate_case(const EvalCase& c, const Scorer& scorer,
                                        const EvalConfig& cfg) {
  std::vector<double> scores;
  try {
    scores = scorer(c);
  } catch (const ContractError&) {
    return std::nullopt;
  }
  std::vector<std::uint8_t> excluded(scores.size(), 0);
  if (cfg.exclude_seen) {
    for (auto i : c.seen) {
      if (i < excluded.size() && i != c.target) excluded[i] = 1;
    }
  }
  if (cfg.sampled_negatives > 0) {
    std::vector<ItemId> pool;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (!excluded[j] && j != c.target) pool.push_back(static_cast<ItemId>(j));
    }
    std::seed_seq seq{cfg.negative_seed, std::uint64_t{c.user}, std::uint64_t{c.target},
                      static_cast<std::uint64_t>(c.t)};
    std::mt19937_64 rng(seq);
    const std::size_t take = std::min(cfg.sampled_negatives, pool.size());
    for (std::size_t k = 0; k < take; ++k) {
      std::swap(pool[k], pool[uniform_index(rng, k, pool.size() - 1)]);
    }
    std::fill(excluded.begin(), excluded.end(), 1);
    excluded[c.target] = 0;
    for (std::size_t k = 0; k < take; ++k) excluded[pool[k]] = 0;
  }
  UserResult r{c.user, c.target, rank_of_target(scores, c.target, excluded), 0};
  r.candidates = static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), 0));
  return r;
}

RankingReport reduce(std::vector<std::optional<UserResult>> results, const EvalConfig& cfg) {
  RankingReport report;
  report.ks = cfg.ks;
  report.hit.assign(cfg.ks.size(), 0.0);
  report.ndcg.assign(cfg.ks.size(), 0.0);
  for (auto& r : results) {
    if (!r) {
      ++report.skipped;
      continue;
    }
    for (std::size_t x = 0; x < cfg.ks.size(); ++x) {
      report.hit[x] += hit_at_k(r->rank, cfg.ks[x]);
      report.ndcg[x] += ndcg_at_k(r->rank, cfg.ks[x]);
    }
    report.per_user.push_back(*r);
  }
  report.evaluated = report.per_user.size();
  if (report.evaluated > 0) {
    for (std::size_t x = 0; x < cfg.ks.size(); ++x) {
      report.hit[x] /= static_cast<double>(report.evaluated);
      report.ndcg[x] /= static_cast<double>(report.evaluated);
    }
  }
  return report;
}

void check_config(const EvalConfig& cfg) {
  if (cfg.ks.empty()) throw ConfigError("no cutoffs K given");
  for (auto k : cfg.ks)
    if (k == 0) throw ConfigError("cutoff K must be at least 1");
}

}  // namespace

RankingReport evaluate_serial(std::span<const EvalCase> cases, const Scorer& scorer,
                              const EvalConfig& cfg) {
  check_config(cfg);
  std::vector<std::optional<UserResult>> results;
  results.reserve(cases.size());
  for (const auto& c : cases) results.push_back(evaluate_case(c, scorer, cfg));
  return reduce(std::move(results), cfg);
}

RankingReport evaluate_parallel(std::span<const EvalCase> cases, const Scorer& scorer,
                                const EvalConfig& cfg) {
  check_config(cfg);
  std::vector<std::optional<UserResult>> results(cases.size());
  std::vector<std::exception_ptr> errors(cases.size());
  const auto n = static_cast<std::int64_t>(cases.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t k = 0; k < n; ++k) {
    try {
      results[k] = evaluate_case(cases[k], scorer, cfg);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reduce(std::move(results), cfg);
}

RankingReport evaluate(std::span<const EvalCase> cases, const Scorer& scorer,
                       const EvalConfig& cfg) {
  if (omp_get_max_threads() > 1 && cases.size() > 1) return evaluate_parallel(cases, scorer, cfg);
  return evaluate_serial(cases, scorer, cfg);
}

void write_table(std::ostream& out, const RankingReport& report, const std::string& label) {
  const int label_w = std::max<int>(8, static_cast<int>(label.size()));
  out << std::left << std::setw(label_w) << "model";
  for (auto k : report.ks) out << std::right << std::setw(10) << ("Hit@" + std::to_string(k));
  for (auto k : report.ks) out << std::right << std::setw(10) << ("NDCG@" + std::to_string(k));
  out << '\n' << std::left << std::setw(label_w) << label << std::fixed << std::setprecision(4);
  for (auto v : report.hit) out << std::right << std::setw(10) << v;
  for (auto v : report.ndcg) out << std::right << std::setw(10) << v;
  out << '\n';
  out.unsetf(std::ios::floatfield);
  out << "evaluated " << report.evaluated << ", skipped " << report.skipped << '\n';
}

void write_per_user_csv(std::ostream& out, const RankingReport& report, const IdDictionary* users,
                        const IdDictionary* items) {
  out << "user,target,rank,candidates";
  for (auto k : report.ks) out << ",hit@" << k;
  for (auto k : report.ks) out << ",ndcg@" << k;
  out << '\n' << std::setprecision(17);
  for (const auto& r : report.per_user) {
    if (users) out << users->name(r.user); else out << r.user;
    out << ',';
    if (items) out << items->name(r.target); else out << r.target;
    out << ',' << r.rank << ',' << r.candidates;
    for (auto k : report.ks) out << ',' << hit_at_k(r.rank, k);
    for (auto k : report.ks) out << ',' << ndcg_at_k(r.rank, k);
    out << '\n';
  }
}

}  // namespace hsal

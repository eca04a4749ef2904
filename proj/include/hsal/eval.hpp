#pragma once

// Full-ranking leave-one-out evaluation: Hit@K and NDCG@K.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hsal/data.hpp"
#include "hsal/graph.hpp"
#include "hsal/model.hpp"
#include "hsal/sampling.hpp"

namespace hsal {

/// 1-based rank of `target` among items whose `excluded` flag is clear (an
/// empty mask excludes nothing). Ties go to the lower item id.
std::size_t rank_of_target(std::span<const double> scores, ItemId target,
                           std::span<const std::uint8_t> excluded = {});

inline int hit_at_k(std::size_t rank, std::size_t k) { return rank >= 1 && rank <= k ? 1 : 0; }
double ndcg_at_k(std::size_t rank, std::size_t k);

/// One held-out interaction to rank.
struct EvalCase {
  UserId user = 0;
  ItemId target = 0;
  Timestamp t = 0;
  std::vector<ItemId> seen;  // removed from the candidates when excluding
};

struct EvalConfig {
  std::vector<std::size_t> ks{5, 10, 20};
  bool exclude_seen = true;
  /// Rank against this many sampled negatives instead of the full
  /// vocabulary (0 = full ranking).
  std::size_t sampled_negatives = 0;
  std::uint64_t negative_seed = 0;
  SamplingConfig sampling;
};

struct UserResult {
  UserId user = 0;
  ItemId target = 0;
  std::size_t rank = 0;
  std::size_t candidates = 0;
};

struct RankingReport {
  std::vector<std::size_t> ks;
  std::vector<double> hit;   // per K, mean over evaluated users
  std::vector<double> ndcg;  // per K
  std::size_t evaluated = 0;
  std::size_t skipped = 0;   // users without usable history before t
  std::vector<UserResult> per_user;

  double hit_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
};

/// Held-out cases: `held_out` rows against history `context` (the rows the
/// graph was built from). The seen set is every context item of the user.
std::vector<EvalCase> make_cases(std::span<const Interaction> held_out,
                                 std::span<const Interaction> context);

/// Scores every item for one case; throws ContractError when the user has
/// nothing to condition on (the case is then skipped).
using Scorer = std::function<std::vector<double>(const EvalCase&)>;

/// Scorer backed by a model: sample the sub-graph at the case time, forward,
/// score the whole vocabulary.
Scorer model_scorer(ModelParams& params, const SequelAwareGraph& graph,
                    const SamplingConfig& sampling);

RankingReport evaluate_serial(std::span<const EvalCase> cases, const Scorer& scorer,
                              const EvalConfig& cfg);
/// Same result as evaluate_serial, cases spread over OpenMP threads.
RankingReport evaluate_parallel(std::span<const EvalCase> cases, const Scorer& scorer,
                                const EvalConfig& cfg);
RankingReport evaluate(std::span<const EvalCase> cases, const Scorer& scorer,
                       const EvalConfig& cfg);

/// Aligned table: one row of Hit@K and NDCG@K columns.
void write_table(std::ostream& out, const RankingReport& report, const std::string& label);
/// Per-user CSV: user,target,rank,candidates,hit@K...,ndcg@K...
void write_per_user_csv(std::ostream& out, const RankingReport& report,
                        const IdDictionary* users = nullptr, const IdDictionary* items = nullptr);

}  // namespace hsal

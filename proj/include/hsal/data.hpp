#pragma once

// Datasets: synthetic generation, interaction/series ingestion, title-based
// series inference, leave-one-out splitting and the on-disk dataset layout.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hsal/graph.hpp"

namespace hsal {

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double unit_uniform(std::mt19937_64& rng);
/// Uniform integer in [lo, hi].
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi);
/// Fisher-Yates with the helpers above, so orderings do not depend on the
/// standard library's shuffle.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, 0, i - 1)]);
  }
}

/// External string id <-> dense id.
class IdDictionary {
 public:
  IdDictionary() = default;
  explicit IdDictionary(std::vector<std::string> names);

  /// Ids ordered numerically when both names are integers, numbers before
  /// other strings, otherwise lexicographically.
  static IdDictionary sorted(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::uint32_t id) const;
  std::optional<std::uint32_t> find(std::string_view name) const;
  /// Throws LookupError for an unknown name.
  std::uint32_t at(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Comparator behind IdDictionary::sorted.
bool natural_less(std::string_view a, std::string_view b);

struct Dataset {
  std::vector<Interaction> interactions;  // grouped by user, ascending in time
  std::vector<Series> series;
  IdDictionary users;
  IdDictionary items;
  IdDictionary series_names;

  std::size_t n_users() const { return users.size(); }
  std::size_t n_items() const { return items.size(); }
  /// Checks dense ids, per-user time order and the series catalog.
  void validate() const;
};

// ---- synthetic -------------------------------------------------------------

enum class SyntheticMode { Mixed, Sequential, Standalone };
SyntheticMode parse_mode(std::string_view name);
std::string_view to_string(SyntheticMode mode);

struct SyntheticConfig {
  std::size_t n_users = 10000;
  std::size_t n_items = 500;
  std::size_t items_per_user_min = 10;
  std::size_t items_per_user_max = 15;
  std::size_t n_sequential_items = 250;
  std::size_t n_series_min = 20;
  std::size_t n_series_max = 30;
  std::size_t max_interactions_per_user = 15;
  SyntheticMode mode = SyntheticMode::Mixed;
  double popularity_exponent = 1.5;
  /// Chance that a user who just consumed a series item takes the next one.
  double continuation = 0.8;
  /// Share of interactions on sequel items that Mixed mode steers towards.
  double sequel_share = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Draws ranks 0..n-1 with P(r) proportional to (r + 1)^-exponent.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent);

  std::size_t size() const { return cdf_.size(); }
  double probability(std::size_t rank) const;
  std::size_t sample(std::mt19937_64& rng) const;
  /// Draw restricted to ranks with allowed[rank] set; nullopt if none is.
  std::optional<std::size_t> sample(std::mt19937_64& rng, const std::vector<bool>& allowed) const;

 private:
  std::vector<double> weights_;
  std::vector<double> cdf_;
};

/// Sequel items are ids [0, n_sequential_items), split into contiguous
/// series of near-equal length; series 0 and item 0 are the most popular.
/// Standalone mode has no series at all.
Dataset generate_synthetic(const SyntheticConfig& cfg);

// ---- ingestion ---------------------------------------------------------------

enum class InteractionFormat { Csv, MovieLens };
InteractionFormat parse_format(std::string_view name);

struct LoadOptions {
  InteractionFormat format = InteractionFormat::Csv;
  /// Fraction of rows allowed to be malformed before loading fails.
  double tolerance = 0.0;
};

struct RawInteraction {
  std::string user;
  std::string item;
  Timestamp timestamp = 0;
};

struct RawSeries {
  std::string id;
  std::vector<std::string> items;
};

struct MalformedRow {
  std::size_t line = 0;  // 1-based
  std::string text;
  std::string reason;
};

struct LoadReport {
  std::size_t rows = 0;
  std::vector<MalformedRow> malformed;
};

/// Parses `user,item,timestamp` rows, or MovieLens `user item rating
/// timestamp` rows separated by tabs or "::". Blank lines are ignored.
std::vector<RawInteraction> parse_interactions(std::istream& in, const LoadOptions& opts,
                                               LoadReport& report);
/// `series_id,item_1,item_2,...` per line.
std::vector<RawSeries> parse_series(std::istream& in);

/// Dense ids are assigned in natural order of the external ids; items named
/// only by the series catalog or `extra_items` still get an id.
Dataset assemble(std::span<const RawInteraction> rows, std::span<const RawSeries> series,
                 std::span<const std::string> extra_items = {});

Dataset load_interactions(const std::filesystem::path& path, const LoadOptions& opts,
                          LoadReport* report = nullptr);
std::vector<RawSeries> load_series(const std::filesystem::path& path);
void write_malformed_report(const std::filesystem::path& path, const LoadReport& report);

/// External item id -> title. Lines are `id<sep>title[<sep>...]` with "::",
/// '|' or a tab as separator, else `id,title`.
std::map<std::string, std::string> load_titles(const std::filesystem::path& path);

/// Groups titles sharing a base name that carry part markers ("Part 2",
/// "Chapter 3", a trailing number up to 20 or roman numeral II-XX); an
/// unmarked base title counts as part 1. Groups with repeated part numbers
/// or fewer than two members are dropped. Series ids are the lowercase base
/// names; items appear in part order.
std::vector<RawSeries> infer_series_by_title(const std::map<std::string, std::string>& titles);

/// Keeps the `n` users with most interactions (ties to the smaller id) and
/// re-densifies ids. Series shrink to their surviving items; series left
/// with fewer than two items are dropped.
Dataset sample_users(const Dataset& ds, std::size_t n);

// ---- split -------------------------------------------------------------------

struct Split {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;  // one per evaluated user
  std::vector<Interaction> test;        // same users, same order
  std::size_t train_only_users = 0;
};

/// Per user with at least three interactions: last -> test, second to last
/// -> validation, the rest -> train. Shorter histories go wholly to train.
Split leave_one_out(const Dataset& ds);

// ---- dataset directory -----------------------------------------------------

/// interactions.csv, series.csv and items.csv under `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace hsal

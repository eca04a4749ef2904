#include "hsal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <tuple>

#include "hsal/errors.hpp"

namespace hsal {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw ContractError("uniform_index: empty range");
  const std::uint64_t span = hi - lo + 1;
  if (span == 0) return rng();
  // rejection keeps the draw exactly uniform
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return lo + x % span;
}

// ---- ids -------------------------------------------------------------------

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  s = trim(s);
  Timestamp v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool parses_as_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size();
}

}  // namespace

bool natural_less(std::string_view a, std::string_view b) {
  const bool na = all_digits(a), nb = all_digits(b);
  if (na && nb) {
    auto strip = [](std::string_view s) {
      auto p = s.find_first_not_of('0');
      return p == std::string_view::npos ? std::string_view{} : s.substr(p);
    };
    auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return a < b;
  }
  if (na != nb) return na;
  return a < b;
}

IdDictionary::IdDictionary(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::uint32_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second) throw DataError("duplicate id '" + names_[i] + "'");
  }
}

IdDictionary IdDictionary::sorted(std::vector<std::string> names) {
  std::sort(names.begin(), names.end(),
            [](const std::string& a, const std::string& b) { return natural_less(a, b); });
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return IdDictionary(std::move(names));
}

const std::string& IdDictionary::name(std::uint32_t id) const {
  if (id >= names_.size()) throw LookupError("dense id " + std::to_string(id) + " out of range");
  return names_[id];
}

std::optional<std::uint32_t> IdDictionary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t IdDictionary::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw LookupError("unknown id '" + std::string(name) + "'");
}

void Dataset::validate() const {
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    const auto& x = interactions[k];
    if (x.user >= n_users() || x.item >= n_items()) {
      throw DataError("interaction " + std::to_string(k) + " references an unknown user or item");
    }
    if (k > 0) {
      const auto& p = interactions[k - 1];
      if (std::tie(p.user, p.timestamp) > std::tie(x.user, x.timestamp)) {
        throw DataError("interactions are not grouped by user in time order at row " +
                        std::to_string(k));
      }
    }
  }
  std::vector<bool> seen(n_items(), false);
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].id >= series_names.size()) throw DataError("series id out of range");
    if (s > 0 && series[s - 1].id >= series[s].id) throw DataError("series not sorted by id");
    if (series[s].items.size() < 2) {
      throw DataError("series '" + series_names.name(series[s].id) + "' has fewer than 2 items");
    }
    for (auto i : series[s].items) {
      if (i >= n_items()) throw DataError("series item out of range");
      if (seen[i]) throw DataError("item '" + items.name(i) + "' belongs to more than one series");
      seen[i] = true;
    }
  }
}

// ---- synthetic -------------------------------------------------------------

SyntheticMode parse_mode(std::string_view name) {
  if (name == "mixed") return SyntheticMode::Mixed;
  if (name == "sequential") return SyntheticMode::Sequential;
  if (name == "standalone") return SyntheticMode::Standalone;
  throw ConfigError("unknown mode '" + std::string(name) +
                    "' (expected mixed, sequential or standalone)");
}

std::string_view to_string(SyntheticMode mode) {
  switch (mode) {
    case SyntheticMode::Mixed: return "mixed";
    case SyntheticMode::Sequential: return "sequential";
    case SyntheticMode::Standalone: return "standalone";
  }
  return "?";
}

void SyntheticConfig::validate() const {
  if (n_users == 0 || n_items == 0) throw ConfigError("synthetic: need users and items");
  if (items_per_user_min == 0 || items_per_user_min > items_per_user_max) {
    throw ConfigError("synthetic: items per user range must satisfy 1 <= min <= max");
  }
  if (max_interactions_per_user < items_per_user_min) {
    throw ConfigError("synthetic: max interactions per user is below the minimum per user");
  }
  if (!(popularity_exponent > 0.0)) throw ConfigError("synthetic: popularity exponent must be > 0");
  if (!(continuation >= 0.0 && continuation <= 1.0)) {
    throw ConfigError("synthetic: continuation probability must lie in [0, 1]");
  }
  if (!(sequel_share >= 0.0 && sequel_share <= 1.0)) {
    throw ConfigError("synthetic: sequel share must lie in [0, 1]");
  }
  const std::size_t per_user = std::min(items_per_user_max, max_interactions_per_user);
  if (mode == SyntheticMode::Standalone) {
    if (n_items < per_user) throw ConfigError("synthetic: fewer items than interactions per user");
    return;
  }
  if (n_sequential_items > n_items) {
    throw ConfigError("synthetic: more sequential items than items");
  }
  if (n_series_min == 0 || n_series_min > n_series_max) {
    throw ConfigError("synthetic: series count range must satisfy 1 <= min <= max");
  }
  if (2 * n_series_max > n_sequential_items) {
    throw ConfigError("synthetic: " + std::to_string(n_sequential_items) +
                      " sequential items cannot form " + std::to_string(n_series_max) +
                      " series of length >= 2");
  }
  const std::size_t pool = mode == SyntheticMode::Sequential ? n_sequential_items : n_items;
  if (pool < per_user) {
    throw ConfigError("synthetic: item pool of " + std::to_string(pool) +
                      " cannot fill " + std::to_string(per_user) + " distinct interactions");
  }
}

ZipfSampler::ZipfSampler(std::size_t n, double exponent) {
  if (n == 0) throw ContractError("ZipfSampler over zero ranks");
  weights_.resize(n);
  cdf_.resize(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    weights_[r] = std::pow(static_cast<double>(r + 1), -exponent);
    total += weights_[r];
    cdf_[r] = total;
  }
  for (auto& w : weights_) w /= total;
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double ZipfSampler::probability(std::size_t rank) const { return weights_.at(rank); }

std::size_t ZipfSampler::sample(std::mt19937_64& rng) const {
  const double u = unit_uniform(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
}

std::optional<std::size_t> ZipfSampler::sample(std::mt19937_64& rng,
                                               const std::vector<bool>& allowed) const {
  double total = 0.0;
  for (std::size_t r = 0; r < weights_.size(); ++r) {
    if (allowed[r]) total += weights_[r];
  }
  if (total <= 0.0) return std::nullopt;
  const double u = unit_uniform(rng) * total;
  double acc = 0.0;
  std::optional<std::size_t> last;
  for (std::size_t r = 0; r < weights_.size(); ++r) {
    if (!allowed[r]) continue;
    acc += weights_[r];
    last = r;
    if (u < acc) return r;
  }
  return last;
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const bool with_series = cfg.mode != SyntheticMode::Standalone;

  std::vector<Series> series;
  if (with_series) {
    const auto n_series =
        static_cast<std::size_t>(uniform_index(rng, cfg.n_series_min, cfg.n_series_max));
    const std::size_t base = cfg.n_sequential_items / n_series;
    const std::size_t extra = cfg.n_sequential_items % n_series;
    ItemId next = 0;
    for (std::size_t s = 0; s < n_series; ++s) {
      Series sr{static_cast<SeriesId>(s), {}};
      const std::size_t len = base + (s < extra ? 1 : 0);
      for (std::size_t k = 0; k < len; ++k) sr.items.push_back(next++);
      series.push_back(std::move(sr));
    }
  }
  const ItemId first_standalone = with_series ? static_cast<ItemId>(cfg.n_sequential_items) : 0;
  const std::size_t n_standalone = cfg.n_items - first_standalone;

  std::optional<ZipfSampler> series_pop, standalone_pop;
  if (!series.empty()) series_pop.emplace(series.size(), cfg.popularity_exponent);
  if (n_standalone > 0) standalone_pop.emplace(n_standalone, cfg.popularity_exponent);

  Dataset ds;
  std::size_t sequel_count = 0, total_count = 0;
  const std::size_t cap = std::min(cfg.items_per_user_max, cfg.max_interactions_per_user);

  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const auto k = uniform_index(rng, cfg.items_per_user_min, cap);
    std::vector<std::size_t> next_pos(series.size(), 0);
    std::vector<bool> used_standalone(n_standalone, false);
    std::optional<std::size_t> current;

    auto open_series = [&](bool exclude_current) -> std::optional<std::size_t> {
      if (!series_pop) return std::nullopt;
      std::vector<bool> allowed(series.size());
      for (std::size_t s = 0; s < series.size(); ++s) {
        allowed[s] = next_pos[s] < series[s].items.size() &&
                     !(exclude_current && current && *current == s);
      }
      auto s = series_pop->sample(rng, allowed);
      if (!s && exclude_current) return std::nullopt;
      return s;
    };
    auto open_standalone = [&]() -> std::optional<std::size_t> {
      if (!standalone_pop) return std::nullopt;
      std::vector<bool> allowed(n_standalone);
      for (std::size_t r = 0; r < n_standalone; ++r) allowed[r] = !used_standalone[r];
      return standalone_pop->sample(rng, allowed);
    };

    for (std::uint64_t step = 0; step < k; ++step) {
      std::optional<ItemId> item;
      if (current && next_pos[*current] < series[*current].items.size() &&
          unit_uniform(rng) < cfg.continuation) {
        item = series[*current].items[next_pos[*current]++];
      } else {
        bool want_sequel = cfg.mode == SyntheticMode::Sequential;
        if (cfg.mode == SyntheticMode::Mixed) {
          want_sequel = static_cast<double>(sequel_count) <
                        cfg.sequel_share * static_cast<double>(total_count + 1);
        }
        for (int attempt = 0; attempt < 2 && !item; ++attempt) {
          const bool sequel = attempt == 0 ? want_sequel : !want_sequel;
          if (sequel) {
            auto s = open_series(true);
            if (!s) s = open_series(false);
            if (s) {
              current = *s;
              item = series[*s].items[next_pos[*s]++];
            }
          } else if (cfg.mode != SyntheticMode::Sequential) {
            if (auto r = open_standalone()) {
              used_standalone[*r] = true;
              current.reset();
              item = static_cast<ItemId>(first_standalone + *r);
            }
          }
        }
      }
      if (!item) break;  // pool exhausted; validate() rules this out
      const bool is_sequel = with_series && *item < first_standalone;
      sequel_count += is_sequel ? 1 : 0;
      ++total_count;
      ds.interactions.push_back(
          {static_cast<UserId>(u), *item, static_cast<Timestamp>(step + 1)});
    }
  }

  std::vector<std::string> names;
  for (std::size_t u = 0; u < cfg.n_users; ++u) names.push_back(std::to_string(u));
  ds.users = IdDictionary(std::move(names));
  names.clear();
  for (std::size_t i = 0; i < cfg.n_items; ++i) names.push_back(std::to_string(i));
  ds.items = IdDictionary(std::move(names));
  names.clear();
  for (std::size_t s = 0; s < series.size(); ++s) names.push_back(std::to_string(s));
  ds.series_names = IdDictionary(std::move(names));
  ds.series = std::move(series);
  ds.validate();
  return ds;
}

// ---- ingestion ---------------------------------------------------------------

InteractionFormat parse_format(std::string_view name) {
  if (name == "csv") return InteractionFormat::Csv;
  if (name == "movielens") return InteractionFormat::MovieLens;
  throw ConfigError("unknown interaction format '" + std::string(name) +
                    "' (expected csv or movielens)");
}

std::vector<RawInteraction> parse_interactions(std::istream& in, const LoadOptions& opts,
                                               LoadReport& report) {
  if (!(opts.tolerance >= 0.0 && opts.tolerance <= 1.0)) {
    throw ConfigError("tolerance must lie in [0, 1]");
  }
  std::vector<RawInteraction> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view text = trim(line);
    if (text.empty()) continue;
    ++report.rows;
    std::vector<std::string_view> fields;
    std::size_t expected = 3;
    if (opts.format == InteractionFormat::Csv) {
      fields = split(text, ",");
    } else {
      expected = 4;
      fields = text.find("::") != std::string_view::npos ? split(text, "::") : split(text, "\t");
    }
    auto bad = [&](std::string reason) {
      report.malformed.push_back({lineno, std::string(text), std::move(reason)});
    };
    if (fields.size() != expected) {
      bad("expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
      continue;
    }
    auto user = trim(fields[0]), item = trim(fields[1]);
    if (user.empty() || item.empty()) {
      bad("empty user or item id");
      continue;
    }
    if (expected == 4 && !parses_as_double(fields[2])) {
      bad("rating is not a number");
      continue;
    }
    auto ts = parse_timestamp(fields.back());
    if (!ts) {
      bad("timestamp is not an integer");
      continue;
    }
    rows.push_back({std::string(user), std::string(item), *ts});
  }
  const double allowed = opts.tolerance * static_cast<double>(report.rows);
  if (!report.malformed.empty() && static_cast<double>(report.malformed.size()) > allowed) {
    std::ostringstream msg;
    msg << report.malformed.size() << " malformed row(s) out of " << report.rows
        << " exceed tolerance " << opts.tolerance << "; line(s)";
    const std::size_t shown = std::min<std::size_t>(report.malformed.size(), 20);
    for (std::size_t k = 0; k < shown; ++k) {
      msg << (k ? ", " : " ") << report.malformed[k].line;
    }
    if (shown < report.malformed.size()) msg << ", ...";
    msg << " (line " << report.malformed[0].line << ": " << report.malformed[0].reason << ")";
    throw DataError(msg.str());
  }
  return rows;
}

std::vector<RawSeries> parse_series(std::istream& in) {
  std::vector<RawSeries> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = trim(line);
    if (text.empty()) continue;
    auto fields = split(text, ",");
    RawSeries s{std::string(trim(fields[0])), {}};
    for (std::size_t k = 1; k < fields.size(); ++k) {
      auto item = trim(fields[k]);
      if (item.empty()) throw DataError("series line " + std::to_string(lineno) + ": empty item id");
      s.items.emplace_back(item);
    }
    if (s.id.empty()) throw DataError("series line " + std::to_string(lineno) + ": empty series id");
    if (s.items.size() < 2) {
      throw DataError("series line " + std::to_string(lineno) + ": series '" + s.id +
                      "' needs at least 2 items");
    }
    out.push_back(std::move(s));
  }
  return out;
}

Dataset assemble(std::span<const RawInteraction> rows, std::span<const RawSeries> series,
                 std::span<const std::string> extra_items) {
  std::vector<std::string> user_names, item_names, series_names;
  for (const auto& r : rows) {
    user_names.push_back(r.user);
    item_names.push_back(r.item);
  }
  for (const auto& s : series) {
    series_names.push_back(s.id);
    for (const auto& i : s.items) item_names.push_back(i);
  }
  for (const auto& i : extra_items) item_names.push_back(i);

  Dataset ds;
  ds.users = IdDictionary::sorted(std::move(user_names));
  ds.items = IdDictionary::sorted(std::move(item_names));
  if (std::set<std::string>(series_names.begin(), series_names.end()).size() !=
      series_names.size()) {
    throw DataError("series catalog repeats a series id");
  }
  ds.series_names = IdDictionary::sorted(std::move(series_names));

  std::vector<std::uint32_t> owner(ds.n_items(), std::numeric_limits<std::uint32_t>::max());
  for (const auto& s : series) {
    Series sr{ds.series_names.at(s.id), {}};
    if (s.items.size() < 2) throw DataError("series '" + s.id + "' needs at least 2 items");
    for (const auto& name : s.items) {
      const auto i = ds.items.at(name);
      if (owner[i] != std::numeric_limits<std::uint32_t>::max()) {
        const auto& other = ds.series_names.name(owner[i]);
        throw DataError("item '" + name + "' appears in series '" + other + "'" +
                        (other == s.id ? " twice" : " and '" + s.id + "'"));
      }
      owner[i] = sr.id;
      sr.items.push_back(i);
    }
    ds.series.push_back(std::move(sr));
  }
  std::sort(ds.series.begin(), ds.series.end(),
            [](const Series& a, const Series& b) { return a.id < b.id; });

  ds.interactions.reserve(rows.size());
  for (const auto& r : rows) {
    ds.interactions.push_back({ds.users.at(r.user), ds.items.at(r.item), r.timestamp});
  }
  std::stable_sort(ds.interactions.begin(), ds.interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     return std::tie(a.user, a.timestamp) < std::tie(b.user, b.timestamp);
                   });
  // duplicates (u, i, t) sit in the same (user, timestamp) run
  for (std::size_t b = 0; b < ds.interactions.size();) {
    std::size_t e = b;
    const auto& head = ds.interactions[b];
    while (e < ds.interactions.size() && ds.interactions[e].user == head.user &&
           ds.interactions[e].timestamp == head.timestamp) {
      ++e;
    }
    for (std::size_t x = b; x < e; ++x) {
      for (std::size_t y = x + 1; y < e; ++y) {
        if (ds.interactions[x].item == ds.interactions[y].item) {
          throw DataError("duplicate interaction (user '" + ds.users.name(head.user) +
                          "', item '" + ds.items.name(ds.interactions[x].item) + "', time " +
                          std::to_string(head.timestamp) + ")");
        }
      }
    }
    b = e;
  }
  ds.validate();
  return ds;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

Dataset load_interactions(const std::filesystem::path& path, const LoadOptions& opts,
                          LoadReport* report) {
  auto in = open_input(path);
  LoadReport local;
  auto& rep = report ? *report : local;
  auto rows = parse_interactions(in, opts, rep);
  return assemble(rows, {});
}

std::vector<RawSeries> load_series(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_series(in);
}

void write_malformed_report(const std::filesystem::path& path, const LoadReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# " << report.malformed.size() << " malformed of " << report.rows << " rows\n";
  for (const auto& m : report.malformed) {
    out << m.line << '\t' << m.reason << '\t' << m.text << '\n';
  }
}

std::map<std::string, std::string> load_titles(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::map<std::string, std::string> titles;
  std::string line;
  while (std::getline(in, line)) {
    auto text = trim(line);
    if (text.empty()) continue;
    std::vector<std::string_view> fields;
    if (text.find("::") != std::string_view::npos) {
      fields = split(text, "::");
    } else if (text.find('|') != std::string_view::npos) {
      fields = split(text, "|");
    } else if (text.find('\t') != std::string_view::npos) {
      fields = split(text, "\t");
    } else {
      auto comma = text.find(',');
      if (comma == std::string_view::npos) continue;
      fields = {text.substr(0, comma), text.substr(comma + 1)};
    }
    if (fields.size() < 2) continue;
    titles[std::string(trim(fields[0]))] = std::string(trim(fields[1]));
  }
  return titles;
}

// ---- title matching ----------------------------------------------------------

namespace {

constexpr std::string_view kRoman[] = {"I",    "II",  "III",  "IV",  "V",    "VI",  "VII",
                                       "VIII", "IX",  "X",    "XI",  "XII",  "XIII", "XIV",
                                       "XV",   "XVI", "XVII", "XVIII", "XIX", "XX"};

std::optional<int> roman_value(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  for (int k = 0; k < 20; ++k) {
    if (s == kRoman[k]) return k + 1;
  }
  return std::nullopt;
}

std::optional<int> part_number(const std::string& s) {
  if (all_digits(s)) {
    if (s.size() > 2) return std::nullopt;
    int v = std::stoi(s);
    return v >= 1 && v <= 20 ? std::optional<int>(v) : std::nullopt;
  }
  return roman_value(s);
}

std::string normalize_base(std::string s) {
  while (!s.empty() && std::string_view(" :-,").find(s.back()) != std::string_view::npos) {
    s.pop_back();
  }
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

struct ParsedTitle {
  std::string base;
  std::optional<int> part;
};

ParsedTitle parse_title(const std::string& title) {
  static const std::regex year(R"(\s*\(\d{4}\)\s*$)");
  static const std::regex article(R"(,\s*(The|A|An)\s*$)");
  static const std::regex paren_part(R"(^(.*\S)\s*\(\s*part\s+([0-9]+|[ivx]+)\s*\)$)",
                                     std::regex::icase);
  static const std::regex word_part(R"(^(.*\S)[\s:,\-]+(part|chapter)\s+([0-9]+|[ivx]+)$)",
                                    std::regex::icase);
  static const std::regex trailing(R"(^(.*\S)\s+([0-9]{1,2}|[ivx]+)$)", std::regex::icase);

  std::string t = std::regex_replace(std::string(trim(title)), year, "");
  t = std::regex_replace(t, article, "");
  t = std::string(trim(t));

  std::smatch m;
  if (std::regex_match(t, m, paren_part)) {
    if (auto p = part_number(m[2].str())) return {normalize_base(m[1].str()), p};
  }
  if (std::regex_match(t, m, word_part)) {
    if (auto p = part_number(m[3].str())) return {normalize_base(m[1].str()), p};
  }
  if (std::regex_match(t, m, trailing)) {
    const auto marker = m[2].str();
    // a lone "I" or "X" reads as a word more often than as a numeral
    const bool roman = !all_digits(marker);
    const auto upper = [&] {
      std::string s = marker;
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
      return s;
    }();
    if (!(roman && (upper == "I" || upper == "X"))) {
      if (auto p = part_number(marker)) return {normalize_base(m[1].str()), p};
    }
  }
  return {normalize_base(t), std::nullopt};
}

}  // namespace

std::vector<RawSeries> infer_series_by_title(const std::map<std::string, std::string>& titles) {
  std::map<std::string, std::vector<std::pair<int, std::string>>> groups;
  for (const auto& [item, title] : titles) {
    auto parsed = parse_title(title);
    if (parsed.base.empty()) continue;
    groups[parsed.base].emplace_back(parsed.part.value_or(1), item);
  }
  std::vector<RawSeries> out;
  for (auto& [base, members] : groups) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : natural_less(a.second, b.second);
    });
    bool distinct = true;
    for (std::size_t k = 1; k < members.size(); ++k) {
      distinct = distinct && members[k].first != members[k - 1].first;
    }
    if (!distinct) continue;
    RawSeries s{base, {}};
    for (auto& [part, item] : members) s.items.push_back(item);
    out.push_back(std::move(s));
  }
  return out;
}

Dataset sample_users(const Dataset& ds, std::size_t n) {
  std::vector<std::size_t> count(ds.n_users(), 0);
  for (const auto& x : ds.interactions) ++count[x.user];
  std::vector<UserId> order(ds.n_users());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](UserId a, UserId b) { return count[a] > count[b]; });
  order.resize(std::min(n, order.size()));
  std::vector<bool> keep(ds.n_users(), false);
  for (auto u : order) keep[u] = true;

  std::vector<RawInteraction> rows;
  std::vector<bool> used(ds.n_items(), false);
  for (const auto& x : ds.interactions) {
    if (!keep[x.user]) continue;
    rows.push_back({ds.users.name(x.user), ds.items.name(x.item), x.timestamp});
    used[x.item] = true;
  }
  std::vector<RawSeries> series;
  for (const auto& s : ds.series) {
    RawSeries rs{ds.series_names.name(s.id), {}};
    for (auto i : s.items) {
      if (used[i]) rs.items.push_back(ds.items.name(i));
    }
    if (rs.items.size() >= 2) series.push_back(std::move(rs));
  }
  return assemble(rows, series);
}

// ---- split -------------------------------------------------------------------

Split leave_one_out(const Dataset& ds) {
  Split split;
  const auto& xs = ds.interactions;
  for (std::size_t b = 0; b < xs.size();) {
    std::size_t e = b;
    while (e < xs.size() && xs[e].user == xs[b].user) ++e;
    if (e - b >= 3) {
      split.train.insert(split.train.end(), xs.begin() + b, xs.begin() + (e - 2));
      split.validation.push_back(xs[e - 2]);
      split.test.push_back(xs[e - 1]);
    } else {
      split.train.insert(split.train.end(), xs.begin() + b, xs.begin() + e);
      ++split.train_only_users;
    }
    b = e;
  }
  return split;
}

// ---- dataset directory -----------------------------------------------------

namespace {

const std::string& checked_name(const std::string& name) {
  if (name.empty() || name.find_first_of(",\n\r") != std::string::npos) {
    throw DataError("id '" + name + "' cannot be written to a CSV file");
  }
  return name;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  auto inter = open_output(dir / "interactions.csv");
  for (const auto& x : ds.interactions) {
    inter << checked_name(ds.users.name(x.user)) << ',' << checked_name(ds.items.name(x.item))
          << ',' << x.timestamp << '\n';
  }
  auto series = open_output(dir / "series.csv");
  for (const auto& s : ds.series) {
    series << checked_name(ds.series_names.name(s.id));
    for (auto i : s.items) series << ',' << ds.items.name(i);
    series << '\n';
  }
  auto items = open_output(dir / "items.csv");
  for (const auto& name : ds.items.names()) items << checked_name(name) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
  auto in = open_input(dir / "interactions.csv");
  LoadReport report;
  auto rows = parse_interactions(in, {}, report);
  std::vector<RawSeries> series;
  if (std::filesystem::exists(dir / "series.csv")) series = load_series(dir / "series.csv");
  std::vector<std::string> vocabulary;
  const bool has_vocabulary = std::filesystem::exists(dir / "items.csv");
  if (has_vocabulary) {
    auto items = open_input(dir / "items.csv");
    std::string line;
    while (std::getline(items, line)) {
      auto name = trim(line);
      if (!name.empty()) vocabulary.emplace_back(name);
    }
    const std::set<std::string> known(vocabulary.begin(), vocabulary.end());
    auto check = [&](const std::string& item, const char* where) {
      if (!known.count(item)) {
        throw DataError(std::string(where) + " item '" + item + "' missing from items.csv");
      }
    };
    for (const auto& r : rows) check(r.item, "interaction");
    for (const auto& s : series)
      for (const auto& i : s.items) check(i, "series");
  }
  return assemble(rows, series, vocabulary);
}

}  // namespace hsal

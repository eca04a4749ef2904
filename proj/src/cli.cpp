#include "hsal/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsal/checkpoint.hpp"
#include "hsal/data.hpp"
#include "hsal/errors.hpp"
#include "hsal/eval.hpp"
#include "hsal/experiment.hpp"
#include "hsal/kernels.hpp"

namespace hsal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Descriptions carry where each default comes from.
std::string published(const std::string& what) { return what + " (published setting)"; }
std::string repo_choice(const std::string& what) { return what + " (repo choice)"; }

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " entry '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
  return out;
}

std::vector<std::string> parse_word_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// ---- option groups ---------------------------------------------------------

struct SyntheticOpts {
  SyntheticConfig cfg;
  std::string mode = "mixed";

  void add(CLI::App* app) {
    app->add_option("--mode", mode, repo_choice("mixed | sequential | standalone; default mixed"));
    app->add_option("--users", cfg.n_users, published("number of users; default 10000"));
    app->add_option("--items", cfg.n_items, published("number of items; default 500"));
    app->add_option("--items-per-user-min", cfg.items_per_user_min,
                    published("fewest interactions per user; default 10"));
    app->add_option("--items-per-user-max", cfg.items_per_user_max,
                    published("most interactions per user; default 15"));
    app->add_option("--sequential-items", cfg.n_sequential_items,
                    published("items belonging to a series; default 250"));
    app->add_option("--series-min", cfg.n_series_min, published("fewest series; default 20"));
    app->add_option("--series-max", cfg.n_series_max, published("most series; default 30"));
    app->add_option("--max-interactions", cfg.max_interactions_per_user,
                    published("cap on interactions per user; default 15"));
    app->add_option("--popularity-exponent", cfg.popularity_exponent,
                    repo_choice("Zipf exponent of item popularity; default 1.5"));
    app->add_option("--continuation", cfg.continuation,
                    repo_choice("chance of taking the next series item; default 0.8"));
    app->add_option("--sequel-share", cfg.sequel_share,
                    published("mixed-mode share of sequel interactions; default 0.5"));
  }

  SyntheticConfig resolve(std::uint64_t seed) const {
    auto c = cfg;
    c.mode = parse_mode(mode);
    c.seed = seed;
    return c;
  }
};

void write_synthetic_echo(std::ostream& out, const SyntheticConfig& c) {
  out << "mode=" << to_string(c.mode) << '\n'
      << "users=" << c.n_users << '\n'
      << "items=" << c.n_items << '\n'
      << "items-per-user-min=" << c.items_per_user_min << '\n'
      << "items-per-user-max=" << c.items_per_user_max << '\n'
      << "sequential-items=" << c.n_sequential_items << '\n'
      << "series-min=" << c.n_series_min << '\n'
      << "series-max=" << c.n_series_max << '\n'
      << "max-interactions=" << c.max_interactions_per_user << '\n'
      << "popularity-exponent=" << c.popularity_exponent << '\n'
      << "continuation=" << c.continuation << '\n'
      << "sequel-share=" << c.sequel_share << '\n'
      << "seed=" << c.seed << '\n';
}

struct SamplingOpts {
  std::size_t m = 4;
  std::size_t recent_n = 50;
  std::size_t item_fanout = 0;
  bool no_truncate = false;

  void add(CLI::App* app) {
    app->add_option("--m", m, published("sub-graph sampling order; default 4"));
    app->add_option("--recent-n", recent_n,
                    published("most recent interactions kept per user; default 50"));
    app->add_option("--item-fanout", item_fanout,
                    repo_choice("most recent users pulled in per item, 0 = all; default 0"));
    app->add_flag("--no-truncate-expanded", no_truncate,
                  repo_choice("apply the recency limit to the anchor only; default off"));
  }

  SamplingConfig resolve() const {
    SamplingConfig s;
    s.m = m;
    s.recent_n = recent_n;
    s.item_fanout = item_fanout;
    s.truncate_expanded_users = !no_truncate;
    s.validate();
    return s;
  }
};

struct ModelOpts {
  std::size_t dim = 50;
  std::size_t layers = 3;
  std::size_t max_order = 0;
  std::string fusion = "sum";
  std::string positional = "sinusoidal";
  bool gcn = false;
  double init_std = 0.01;

  void add(CLI::App* app) {
    app->add_option("--dim", dim, published("embedding size d; default 50"));
    app->add_option("--layers", layers,
                    repo_choice("propagation layers L, tuned per dataset; default 3"));
    app->add_option("--max-order", max_order,
                    repo_choice("rows of the relative-order tables, 0 = recent-n; default 0"));
    app->add_option("--fusion", fusion,
                    published("sum | mean | concat | semantic; default sum"));
    app->add_option("--positional", positional,
                    published("sinusoidal | rotary; default sinusoidal"));
    app->add_flag("--gcn-baseline", gcn,
                  repo_choice("plain mean-aggregation propagation instead of attention"));
    app->add_option("--init-std", init_std,
                    repo_choice("std of the normal weight initialisation; default 0.01"));
  }

  ModelConfig resolve(const SamplingConfig& s) const {
    ModelConfig c;
    c.dim = dim;
    c.layers = layers;
    c.max_order = max_order == 0 ? s.recent_n : max_order;
    c.fusion = parse_fusion(fusion);
    c.positional = parse_positional(positional);
    c.propagation = gcn ? Propagation::GcnBaseline : Propagation::Hsal;
    c.init_std = init_std;
    return c;
  }
};

struct TrainOpts {
  double lr = 0.01;
  double weight_decay = 1e-4;
  std::size_t batch = 50;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  bool epochs_exact = false;
  std::size_t targets_per_user = 0;
  bool no_sequels = false;

  void add(CLI::App* app) {
    app->add_option("--lr", lr, published("Adam learning rate; default 0.01"));
    app->add_option("--weight-decay", weight_decay, published("L2 coefficient; default 1e-4"));
    app->add_option("--batch-size", batch, published("examples per update; default 50"));
    app->add_option("--epochs", epochs, repo_choice("epoch budget; default 50"));
    app->add_option("--patience", patience,
                    repo_choice("epochs without a better validation Hit@10; default 5"));
    app->add_flag("--epochs-exact", epochs_exact,
                  repo_choice("run the whole epoch budget, no early stopping"));
    app->add_option("--targets-per-user", targets_per_user,
                    repo_choice("most recent training targets per user, 0 = all; default 0"));
    app->add_flag("--no-sequels", no_sequels,
                  repo_choice("drop the series catalog (sequel ablation)"));
  }

  TrainConfig resolve(const SamplingConfig& s, std::size_t threads) const {
    TrainConfig t;
    t.adam.lr = lr;
    t.adam.weight_decay = weight_decay;
    t.batch_size = batch;
    t.epochs = epochs;
    t.patience = patience;
    t.early_stopping = !epochs_exact;
    t.threads = threads;
    t.sampling = s;
    return t;
  }
};

struct EvalOpts {
  std::string ks = "5,10,20";
  bool no_exclude_seen = false;
  std::size_t negatives = 0;

  void add(CLI::App* app) {
    app->add_option("--k", ks, published("cutoffs K; default 5,10,20"));
    app->add_flag("--no-exclude-seen", no_exclude_seen,
                  repo_choice("keep the user's earlier items among the candidates"));
    app->add_option("--negatives", negatives,
                    repo_choice("rank against this many sampled negatives, 0 = all items"));
  }

  EvalConfig resolve(const SamplingConfig& s, std::uint64_t seed) const {
    EvalConfig e;
    e.ks = parse_size_list(ks, "K");
    e.exclude_seen = !no_exclude_seen;
    e.sampled_negatives = negatives;
    e.negative_seed = seed;
    e.sampling = s;
    return e;
  }
};

json report_json(const RankingReport& r) {
  json j;
  j["ks"] = r.ks;
  for (std::size_t x = 0; x < r.ks.size(); ++x) {
    j["hit@" + std::to_string(r.ks[x])] = r.hit[x];
    j["ndcg@" + std::to_string(r.ks[x])] = r.ndcg[x];
  }
  j["evaluated"] = r.evaluated;
  j["skipped"] = r.skipped;
  return j;
}

void configure_threads(std::size_t threads) {
  if (threads == 0) throw ConfigError("threads must be at least 1");
  omp_set_num_threads(static_cast<int>(threads));
  kernels::set_num_threads(static_cast<int>(threads));
}

// ---- commands --------------------------------------------------------------

struct Common {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

void cmd_generate(const SyntheticOpts& syn, const std::string& out_dir, const Common& common,
                  std::ostream& out) {
  auto cfg = syn.resolve(common.seed);
  auto ds = generate_synthetic(cfg);
  write_dataset(out_dir, ds);
  auto echo = open_out(fs::path(out_dir) / "config.txt");
  write_synthetic_echo(echo, cfg);
  std::size_t sequel = 0;
  std::vector<bool> in_series(ds.n_items(), false);
  for (const auto& s : ds.series)
    for (auto i : s.items) in_series[i] = true;
  for (const auto& x : ds.interactions) sequel += in_series[x.item] ? 1 : 0;
  out << "users " << ds.n_users() << ", items " << ds.n_items() << ", interactions "
      << ds.interactions.size() << ", series " << ds.series.size() << ", sequel share "
      << (ds.interactions.empty() ? 0.0 : double(sequel) / double(ds.interactions.size()))
      << '\n';
}

struct IngestArgs {
  std::string interactions, format = "csv", series, titles, out_dir;
  double tolerance = 0.0;
  std::size_t sample = 0;
};

void cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.series.empty() && !a.titles.empty()) {
    throw ConfigError("give either --series or --titles, not both");
  }
  LoadOptions opts;
  opts.format = parse_format(a.format);
  opts.tolerance = a.tolerance;
  std::ifstream in(a.interactions);
  if (!in) throw DataError("cannot open " + a.interactions);
  LoadReport report;
  std::vector<RawInteraction> rows;
  try {
    rows = parse_interactions(in, opts, report);
  } catch (const DataError&) {
    if (!a.out_dir.empty() && !report.malformed.empty()) {
      fs::create_directories(a.out_dir);
      write_malformed_report(fs::path(a.out_dir) / "malformed.txt", report);
    }
    throw;
  }
  std::vector<RawSeries> series;
  if (!a.series.empty()) series = load_series(a.series);
  if (!a.titles.empty()) {
    std::set<std::string> present;
    for (const auto& r : rows) present.insert(r.item);
    for (auto& s : infer_series_by_title(load_titles(a.titles))) {
      std::erase_if(s.items, [&](const std::string& i) { return !present.count(i); });
      if (s.items.size() >= 2) series.push_back(std::move(s));
    }
  }
  auto ds = assemble(rows, series);
  if (a.sample > 0) ds = sample_users(ds, a.sample);
  write_dataset(a.out_dir, ds);
  if (!report.malformed.empty()) {
    write_malformed_report(fs::path(a.out_dir) / "malformed.txt", report);
    err << report.malformed.size() << " malformed row(s) skipped, see "
        << (fs::path(a.out_dir) / "malformed.txt").string() << '\n';
  }
  out << "users " << ds.n_users() << ", items " << ds.n_items() << ", interactions "
      << ds.interactions.size() << ", series " << ds.series.size() << '\n';
}

struct RunArgs {
  std::string data, out_dir, checkpoint, split = "test", label = "hsal-gnn";
  bool untrained = false;
};

void cmd_train(const RunArgs& a, const SamplingOpts& so, const ModelOpts& mo,
               const TrainOpts& to, const Common& common, std::ostream& out) {
  auto sampling = so.resolve();
  auto ds = read_dataset(a.data);
  auto data = prepare(ds, !to.no_sequels, to.targets_per_user);
  ExperimentConfig cfg;
  cfg.model = mo.resolve(sampling);
  cfg.train = to.resolve(sampling, common.threads);
  cfg.model.n_users = data.n_users;
  cfg.model.n_items = data.n_items;

  fs::create_directories(a.out_dir);
  const auto ckpt = fs::path(a.out_dir) / "checkpoint.bin";
  auto log = open_out(fs::path(a.out_dir) / "train_log.jsonl");
  auto params = ModelParams::init(cfg.model, common.seed);
  auto result = train(params, data.train_graph, data.examples, data.validation, cfg.train,
                      [&](const EpochLog& e, const ModelParams& p) {
                        json line{{"epoch", e.epoch},
                                  {"loss", e.loss},
                                  {"examples", e.examples},
                                  {"skipped", e.skipped},
                                  {"improved", e.improved}};
                        if (e.val_hit) line["val_hit@10"] = *e.val_hit;
                        if (e.val_ndcg) line["val_ndcg@10"] = *e.val_ndcg;
                        log << line.dump() << '\n' << std::flush;
                        if (e.improved) save_checkpoint(ckpt, p, common.seed);
                      });
  save_checkpoint(ckpt, params, common.seed);
  const auto& last = result.epochs.back();
  out << "trained " << result.epochs.size() << " epoch(s), best epoch " << result.best_epoch
      << (result.stopped_early ? " (early stop)" : "") << ", final loss " << last.loss << '\n'
      << "checkpoint " << ckpt.string() << '\n';
}

void cmd_eval(const RunArgs& a, const SamplingOpts& so, const ModelOpts& mo, const EvalOpts& eo,
              const TrainOpts& to, const Common& common, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  auto sampling = so.resolve();
  auto ds = read_dataset(a.data);
  auto data = prepare(ds, !to.no_sequels);
  std::optional<Checkpoint> ck;
  if (a.untrained != a.checkpoint.empty()) {
    if (a.untrained) throw ConfigError("--untrained and --checkpoint exclude each other");
    throw ConfigError("give --checkpoint PATH or --untrained");
  }
  if (a.untrained) {
    auto mc = mo.resolve(sampling);
    mc.n_users = data.n_users;
    mc.n_items = data.n_items;
    ck = Checkpoint{ModelParams::init(mc, common.seed), common.seed};
  } else {
    ck = load_checkpoint(a.checkpoint);
    const auto& mc = ck->params.config();
    if (mc.n_users != data.n_users || mc.n_items != data.n_items) {
      throw DataError("checkpoint was trained on " + std::to_string(mc.n_users) + " users / " +
                      std::to_string(mc.n_items) + " items, dataset has " +
                      std::to_string(data.n_users) + " / " + std::to_string(data.n_items));
    }
  }
  auto ecfg = eo.resolve(sampling, common.seed);
  const bool on_test = a.split == "test";
  if (!on_test && a.split != "validation") throw ConfigError("--split must be test or validation");
  const auto& graph = on_test ? data.test_graph : data.train_graph;
  const auto& cases = on_test ? data.test : data.validation;
  auto report = evaluate(cases, model_scorer(ck->params, graph, sampling), ecfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  write_table(out, report, a.label);
  if (!a.out_dir.empty()) {
    auto j = report_json(report);
    j["metadata"] = {{"data", a.data},
                     {"checkpoint", a.untrained ? "untrained" : a.checkpoint},
                     {"seed", ck->seed},
                     {"split", a.split},
                     {"exclude_seen", ecfg.exclude_seen},
                     {"negatives", ecfg.sampled_negatives},
                     {"m", sampling.m},
                     {"recent_n", sampling.recent_n},
                     {"label", a.label}};
    j["wall_seconds"] = seconds;
    auto dir = fs::path(a.out_dir);
    open_out(dir / "report.json") << j.dump(2) << '\n';
    auto table = open_out(dir / "report.txt");
    write_table(table, report, a.label);
    auto csv = open_out(dir / "per_user.csv");
    write_per_user_csv(csv, report, &ds.users, &ds.items);
  }
}

struct SweepArgs {
  std::string axis, grid, seeds = "1,2,3,4,5", data, out;
  std::uint64_t data_seed = 1;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

void cmd_sweep(const SweepArgs& a, const SyntheticOpts& syn, const SamplingOpts& so,
               const ModelOpts& mo, const TrainOpts& to, const Common& common,
               std::ostream& out, std::ostream& err) {
  static const std::set<std::string> axes{"layers", "n_sequences", "seq_length", "fusion",
                                          "positional"};
  if (!axes.count(a.axis)) {
    throw ConfigError("unknown sweep axis '" + a.axis +
                      "' (layers, n_sequences, seq_length, fusion, positional)");
  }
  auto grid = parse_word_list(a.grid);
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  auto seeds = parse_size_list(a.seeds, "seed");
  if (a.axis == "n_sequences" && !a.data.empty()) {
    throw ConfigError("the n_sequences axis regenerates synthetic data; drop --data");
  }
  // validate every grid value before spending time on training
  for (const auto& v : grid) {
    if (a.axis == "fusion") parse_fusion(v);
    else if (a.axis == "positional") parse_positional(v);
    else parse_size_list(v, a.axis.c_str());
  }

  std::optional<Dataset> fixed;
  if (!a.data.empty()) fixed = read_dataset(a.data);

  std::ostringstream csv;
  csv << "axis,value,seed,hit@10,ndcg@10,status\n" << std::setprecision(17);
  for (const auto& value : grid) {
    auto s_opts = so;
    auto m_opts = mo;
    auto syn_cfg = syn.resolve(a.data_seed);
    if (a.axis == "layers") m_opts.layers = parse_size_list(value, "layers")[0];
    if (a.axis == "seq_length") s_opts.recent_n = parse_size_list(value, "seq_length")[0];
    if (a.axis == "fusion") m_opts.fusion = value;
    if (a.axis == "positional") m_opts.positional = value;
    if (a.axis == "n_sequences") {
      syn_cfg.n_series_min = syn_cfg.n_series_max = parse_size_list(value, "n_sequences")[0];
    }
    double hit_sum = 0.0, ndcg_sum = 0.0;
    std::size_t ok = 0;
    std::optional<PreparedData> data;
    std::string data_error;
    try {
      auto ds = fixed ? *fixed : generate_synthetic(syn_cfg);
      data = prepare(ds, !to.no_sequels, to.targets_per_user);
    } catch (const Error& e) {
      data_error = e.what();
    }
    for (auto seed : seeds) {
      csv << a.axis << ',' << csv_field(value) << ',' << seed << ',';
      try {
        if (!data) throw DataError(data_error);
        ExperimentConfig cfg;
        auto sampling = s_opts.resolve();
        cfg.model = m_opts.resolve(sampling);
        cfg.train = to.resolve(sampling, common.threads);
        cfg.eval.ks = {10};
        cfg.eval.sampling = sampling;
        auto r = run_experiment(*data, cfg, seed);
        csv << r.test.hit[0] << ',' << r.test.ndcg[0] << ",ok\n";
        hit_sum += r.test.hit[0];
        ndcg_sum += r.test.ndcg[0];
        ++ok;
      } catch (const Error& e) {
        csv << ",," << csv_field(std::string("error: ") + e.what()) << '\n';
        err << "sweep point " << a.axis << "=" << value << " seed " << seed
            << " failed: " << e.what() << '\n';
      }
    }
    csv << a.axis << ',' << csv_field(value) << ",mean,";
    if (ok > 0) {
      csv << hit_sum / double(ok) << ',' << ndcg_sum / double(ok) << ",ok(" << ok << ")\n";
    } else {
      csv << ",,no successful seeds\n";
    }
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    open_out(a.out) << csv.str();
    out << "wrote " << a.out << '\n';
  }
}

struct DumpArgs {
  std::string data, user, out;
  Timestamp time = kEndOfTime;
};

void cmd_dump(const DumpArgs& a, const SamplingOpts& so, std::ostream& out) {
  auto sampling = so.resolve();
  auto ds = read_dataset(a.data);
  auto graph = SequelAwareGraph::build(ds.interactions, ds.series, ds.n_users(), ds.n_items());
  const auto user = ds.users.at(a.user);
  auto sg = sample_subgraph(snapshot(graph, a.time), user, sampling);
  std::ostringstream text;
  text << "# user '" << a.user << "' is dense id " << user << '\n';
  write_subgraph(text, sg);
  if (a.out.empty()) {
    out << text.str();
  } else {
    open_out(a.out) << text.str();
  }
}

// ---- config file ------------------------------------------------------------

std::vector<std::string> with_config(const std::vector<std::string>& args, CLI::App& app) {
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config") {
      if (k + 1 >= args.size()) throw ConfigError("--config needs a file");
      path = args[++k];
    } else if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
    } else {
      rest.push_back(args[k]);
    }
  }
  if (path.empty() || rest.empty()) return rest;
  auto* sub = app.get_subcommand_no_throw(rest[0]);
  if (!sub) return rest;
  std::vector<std::string> merged{rest[0]};
  for (auto& token : read_config_file(path)) {
    const auto name = token.substr(0, token.find('='));
    if (sub->get_option_no_throw(name) != nullptr) {
      merged.push_back(std::move(token));
      continue;
    }
    bool known = false;
    for (auto* other : app.get_subcommands({})) {
      known = known || other->get_option_no_throw(name) != nullptr;
    }
    if (!known) throw ConfigError("unknown key '" + name.substr(2) + "' in " + path);
  }
  merged.insert(merged.end(), rest.begin() + 1, rest.end());
  return merged;
}

}  // namespace

std::vector<std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sequel-aware heterogeneous GNN recommender: data generation, training, "
               "evaluation and sweeps.\nEvery subcommand accepts --config FILE with key=value "
               "lines named like its flags; flags on the command line win.",
               "hsal"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  Common common;
  SyntheticOpts syn;
  SamplingOpts so;
  ModelOpts mo;
  TrainOpts to;
  EvalOpts eo;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, repo_choice("random seed; default 1"));
    sub->add_option("--threads", common.threads,
                    repo_choice("worker threads; results are reproducible per count; default 1"));
  };

  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  syn.add(gen);
  add_common(gen);
  gen->add_option("--out", gen_out, "output directory")->required();

  IngestArgs ia;
  auto* ing = app.add_subcommand("ingest", "convert an interaction log into a dataset directory");
  ing->add_option("--interactions", ia.interactions, "interaction file")->required();
  ing->add_option("--format", ia.format, repo_choice("csv | movielens; default csv"));
  ing->add_option("--series", ia.series, "series catalog: series_id,item,item,...");
  ing->add_option("--titles", ia.titles, "item titles to infer series from");
  ing->add_option("--tolerance", ia.tolerance,
                  repo_choice("fraction of malformed rows tolerated; default 0"));
  ing->add_option("--sample-users", ia.sample, repo_choice("keep the N most active users"));
  ing->add_option("--out", ia.out_dir, "output directory")->required();
  add_common(ing);

  RunArgs ra;
  auto* tr = app.add_subcommand("train", "train a model, write checkpoint and JSON-lines log");
  tr->add_option("--data", ra.data, "dataset directory")->required();
  tr->add_option("--out", ra.out_dir, "output directory")->required();
  so.add(tr);
  mo.add(tr);
  to.add(tr);
  add_common(tr);

  auto* ev = app.add_subcommand("eval", "rank held-out items and report Hit@K / NDCG@K");
  ev->add_option("--data", ra.data, "dataset directory")->required();
  ev->add_option("--checkpoint", ra.checkpoint, "checkpoint from train");
  ev->add_flag("--untrained", ra.untrained, "evaluate a freshly initialised model");
  ev->add_option("--split", ra.split, "test | validation; default test");
  ev->add_option("--out", ra.out_dir, "write report.json, report.txt and per_user.csv here");
  ev->add_option("--label", ra.label, "row label of the text table");
  so.add(ev);
  mo.add(ev);
  eo.add(ev);
  ev->add_flag("--no-sequels", to.no_sequels, repo_choice("drop the series catalog"));
  add_common(ev);

  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "train and evaluate over a grid, CSV of Hit@10 / NDCG@10");
  sw->add_option("--axis", sa.axis, "layers | n_sequences | seq_length | fusion | positional")
      ->required();
  sw->add_option("--grid", sa.grid, "comma-separated axis values")->required();
  sw->add_option("--seeds", sa.seeds, published("seeds per point; default 1,2,3,4,5"));
  sw->add_option("--data", sa.data, "dataset directory (default: generate synthetic data)");
  sw->add_option("--data-seed", sa.data_seed, repo_choice("seed of generated data; default 1"));
  sw->add_option("--out", sa.out, "CSV path (default stdout)");
  syn.add(sw);
  so.add(sw);
  mo.add(sw);
  to.add(sw);
  sw->add_option("--threads", common.threads, repo_choice("worker threads; default 1"));

  DumpArgs da;
  auto* dump = app.add_subcommand("dump-subgraph", "write one user's sampled sub-graph");
  dump->add_option("--data", da.data, "dataset directory")->required();
  dump->add_option("--user", da.user, "external user id")->required();
  dump->add_option("--time", da.time, "snapshot time; edges strictly earlier are visible");
  dump->add_option("--out", da.out, "output file (default stdout)");
  so.add(dump);

  try {
    auto argv = with_config(args, app);
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err) == 0 ? kOk : kConfigError;
    }
    configure_threads(common.threads);
    if (gen->parsed()) cmd_generate(syn, gen_out, common, out);
    else if (ing->parsed()) cmd_ingest(ia, out, err);
    else if (tr->parsed()) cmd_train(ra, so, mo, to, common, out);
    else if (ev->parsed()) cmd_eval(ra, so, mo, eo, to, common, out);
    else if (sw->parsed()) cmd_sweep(sa, syn, so, mo, to, common, out, err);
    else if (dump->parsed()) cmd_dump(da, so, out);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ContractError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace hsal::cli

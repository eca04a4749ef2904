#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hsal/cli.hpp"
#include "hsal/data.hpp"
#include "hsal/errors.hpp"

namespace fs = std::filesystem;
using hsal::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("hsal_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  // small sequential dataset for train/eval runs
  void small_data(const std::string& name) {
    auto r = call({"generate", "--mode", "sequential", "--users", "30", "--items", "24",
                   "--sequential-items", "24", "--series-min", "4", "--series-max", "4",
                   "--items-per-user-min", "4", "--items-per-user-max", "5",
                   "--max-interactions", "5", "--seed", "3", "--out", p(name)});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::vector<std::string> small_model() const {
    return {"--dim", "8", "--layers", "1", "--m", "1", "--recent-n", "5", "--max-order", "5"};
  }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, GenerateIsByteIdenticalPerSeed) {
  std::vector<std::string> base{"generate", "--users", "50", "--items", "40",
                                "--sequential-items", "20", "--series-min", "3",
                                "--series-max", "5", "--seed", "9", "--out"};
  auto a = base, b = base;
  a.push_back(p("a"));
  b.push_back(p("b"));
  ASSERT_EQ(call(a).code, 0);
  ASSERT_EQ(call(b).code, 0);
  for (auto f : {"interactions.csv", "series.csv", "items.csv", "config.txt"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  auto ds = hsal::read_dataset(dir / "a");
  EXPECT_EQ(ds.n_users(), 50u);
  EXPECT_EQ(ds.n_items(), 40u);
}

TEST_F(Cli, StandaloneWritesEmptySeries) {
  auto r = call({"generate", "--mode", "standalone", "--users", "20", "--items", "30",
                 "--out", p("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(slurp(dir / "s" / "series.csv").empty());
  EXPECT_NE(r.out.find("series 0"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(call({"generate", "--users", "0", "--out", p("x")}).code, 2);
  EXPECT_EQ(call({"generate", "--mode", "hybrid", "--out", p("x")}).code, 2);
  EXPECT_EQ(call({"generate", "--bogus", "--out", p("x")}).code, 2);
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"eval", "--data", p("nowhere"), "--untrained"}).code, 3);

  {
    std::ofstream f(p("bad.csv"));
    f << "u,i,1\nu,i\n";
  }
  auto r = call({"ingest", "--interactions", p("bad.csv"), "--out", p("ing")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line(s) 2"), std::string::npos) << r.err;

  small_data("d");
  auto args = std::vector<std::string>{"train", "--data", p("d"), "--out", p("t"), "--epochs",
                                       "2", "--init-std", "1e200"};
  for (auto& s : small_model()) args.push_back(s);
  r = call(args);
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("numeric error"), std::string::npos);
}

TEST_F(Cli, IngestWithToleranceAndSeries) {
  {
    std::ofstream f(p("log.csv"));
    f << "u1,i1,1\nu1,i2,2\nu1,i3,3\nbroken\nu2,i2,5\n";
    std::ofstream s(p("series.csv"));
    s << "A,i2,i3\n";
  }
  auto r = call({"ingest", "--interactions", p("log.csv"), "--series", p("series.csv"),
                 "--tolerance", "0.3", "--out", p("ds")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "ds" / "malformed.txt"));
  auto ds = hsal::read_dataset(dir / "ds");
  EXPECT_EQ(ds.interactions.size(), 4u);
  EXPECT_EQ(ds.series.size(), 1u);
  EXPECT_EQ(call({"ingest", "--interactions", p("log.csv"), "--series", p("series.csv"),
                  "--titles", p("series.csv"), "--out", p("ds2")})
                .code,
            2);
}

TEST_F(Cli, ConfigFile) {
  {
    std::ofstream f(p("gen.cfg"));
    f << "# small\nusers = 25\nitems=30\nsequential-items=10\nseries-min=2\nseries-max=3\n"
         "lr=0.5   # belongs to train, ignored here\n";
  }
  auto r = call({"generate", "--config", p("gen.cfg"), "--items", "35", "--out", p("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ds = hsal::read_dataset(dir / "g");
  EXPECT_EQ(ds.n_users(), 25u);
  EXPECT_EQ(ds.n_items(), 35u);  // command line wins

  {
    std::ofstream f(p("bad.cfg"));
    f << "colour=blue\n";
  }
  r = call({"generate", "--config", p("bad.cfg"), "--out", p("g2")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
  {
    std::ofstream f(p("syntax.cfg"));
    f << "users 25\n";
  }
  EXPECT_EQ(call({"generate", "--config", p("syntax.cfg"), "--out", p("g3")}).code, 2);
  EXPECT_EQ(call({"generate", "--config", p("missing.cfg"), "--out", p("g4")}).code, 2);
}

TEST_F(Cli, HelpNamesProvenance) {
  auto r = call({"train", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("(published setting)"), std::string::npos);
  EXPECT_NE(r.out.find("(repo choice)"), std::string::npos);
  EXPECT_NE(r.out.find("--lr"), std::string::npos);
}

TEST_F(Cli, TrainThenEval) {
  small_data("d");
  auto args = std::vector<std::string>{"train", "--data", p("d"), "--out", p("run"),
                                       "--epochs", "2", "--seed", "4"};
  for (auto& s : small_model()) args.push_back(s);
  auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(dir / "run" / "checkpoint.bin"));
  std::ifstream log(dir / "run" / "train_log.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"].get<std::size_t>(), ++lines);
    EXPECT_TRUE(j.contains("loss"));
    EXPECT_TRUE(j.contains("val_hit@10"));
  }
  EXPECT_GE(lines, 1u);

  std::vector<std::string> ev{"eval", "--data", p("d"), "--checkpoint",
                              (dir / "run" / "checkpoint.bin").string(), "--m", "1",
                              "--recent-n", "5", "--out", p("rep")};
  r = call(ev);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Hit@10"), std::string::npos);
  auto j = nlohmann::json::parse(slurp(dir / "rep" / "report.json"));
  EXPECT_EQ(j["metadata"]["seed"].get<std::uint64_t>(), 4u);
  const double hit = j["hit@10"].get<double>();
  std::ostringstream expect;
  expect << std::fixed << std::setprecision(4) << hit;
  EXPECT_NE(slurp(dir / "rep" / "report.txt").find(expect.str()), std::string::npos);
  EXPECT_EQ(slurp(dir / "rep" / "report.txt"), r.out);
  EXPECT_TRUE(fs::exists(dir / "rep" / "per_user.csv"));

  EXPECT_EQ(call({"eval", "--data", p("d")}).code, 2);
  EXPECT_EQ(call({"eval", "--data", p("d"), "--untrained", "--checkpoint",
                  (dir / "run" / "checkpoint.bin").string()})
                .code,
            2);
  EXPECT_EQ(call({"eval", "--data", p("d"), "--untrained", "--split", "train"}).code, 2);

  small_data("other");
  auto gen = call({"generate", "--users", "31", "--items", "24", "--sequential-items", "10",
                   "--series-min", "2", "--series-max", "2", "--out", p("other2")});
  ASSERT_EQ(gen.code, 0);
  EXPECT_EQ(call({"eval", "--data", p("other2"), "--checkpoint",
                  (dir / "run" / "checkpoint.bin").string()})
                .code,
            3);
}

TEST_F(Cli, EvalUntrainedOnValidation) {
  small_data("d");
  auto args = std::vector<std::string>{"eval", "--data", p("d"), "--untrained", "--split",
                                       "validation", "--k", "1,5", "--label", "fresh"};
  for (auto& s : small_model()) args.push_back(s);
  auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fresh"), std::string::npos);
  EXPECT_NE(r.out.find("Hit@5"), std::string::npos);
  EXPECT_EQ(r.out.find("Hit@10"), std::string::npos);
}

TEST_F(Cli, SweepRows) {
  small_data("d");
  auto args = std::vector<std::string>{"sweep", "--axis", "layers", "--grid", "1,2",
                                       "--seeds", "1", "--data", p("d"), "--epochs", "1",
                                       "--out", p("sweep.csv")};
  for (auto s : {"--dim", "8", "--m", "1", "--recent-n", "5", "--max-order", "5"}) args.push_back(s);
  auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(dir / "sweep.csv"));
  std::vector<std::string> rows;
  for (std::string line; std::getline(csv, line);) rows.push_back(line);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "axis,value,seed,hit@10,ndcg@10,status");
  EXPECT_EQ(rows[1].rfind("layers,1,1,", 0), 0u);
  EXPECT_NE(rows[1].find(",ok"), std::string::npos);
  EXPECT_EQ(rows[2].rfind("layers,1,mean,", 0), 0u);
  EXPECT_EQ(rows[3].rfind("layers,2,1,", 0), 0u);

  EXPECT_EQ(call({"sweep", "--axis", "depth", "--grid", "1"}).code, 2);
  EXPECT_EQ(call({"sweep", "--axis", "n_sequences", "--grid", "2", "--data", p("d")}).code, 2);
  EXPECT_EQ(call({"sweep", "--axis", "fusion", "--grid", "sum,blend"}).code, 2);
}

TEST_F(Cli, SweepFusionAndPositionalGrids) {
  small_data("d");
  std::vector<std::string> base{"--seeds", "1,2", "--data", p("d"), "--epochs", "1", "--dim", "8",
                                "--layers", "1", "--m", "1", "--recent-n", "5", "--max-order", "5"};
  auto fusion = std::vector<std::string>{"sweep", "--axis", "fusion", "--grid",
                                         "sum,mean,concat,semantic"};
  fusion.insert(fusion.end(), base.begin(), base.end());
  auto r = call(fusion);
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t ok_rows = 0, mean_rows = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    ok_rows += line.size() > 3 && line.compare(line.size() - 3, 3, ",ok") == 0;
    // third column is the seed, or "mean" on the summary row
    std::istringstream fields(line);
    std::string axis, value, seed;
    std::getline(fields, axis, ',');
    std::getline(fields, value, ',');
    std::getline(fields, seed, ',');
    mean_rows += seed == "mean";
  }
  EXPECT_EQ(ok_rows, 8u);  // 4 strategies x 2 seeds
  EXPECT_EQ(mean_rows, 4u);

  auto positional = std::vector<std::string>{"sweep", "--axis", "positional", "--grid",
                                             "sinusoidal,rotary"};
  positional.insert(positional.end(), base.begin(), base.end());
  r = call(positional);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("positional,rotary,2,"), std::string::npos);
}

TEST_F(Cli, OneEpochOnTwentyUsers) {
  ASSERT_EQ(call({"generate", "--users", "20", "--items", "30", "--sequential-items", "10",
                  "--series-min", "2", "--series-max", "3", "--out", p("d")})
                .code,
            0);
  auto args = std::vector<std::string>{"train", "--data", p("d"), "--out", p("t"), "--epochs", "1"};
  for (auto& s : small_model()) args.push_back(s);
  auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(slurp(dir / "t" / "train_log.jsonl"));
  EXPECT_TRUE(std::isfinite(j["loss"].get<double>()));
}

TEST_F(Cli, DefaultCutoffColumns) {
  small_data("d");
  auto args = std::vector<std::string>{"eval", "--data", p("d"), "--untrained"};
  for (auto& s : small_model()) args.push_back(s);
  auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::vector<std::string> header;
  for (std::string w; in >> w && w != "hsal-gnn";) header.push_back(w);
  EXPECT_EQ(header, (std::vector<std::string>{"model", "Hit@5", "Hit@10", "Hit@20", "NDCG@5",
                                              "NDCG@10", "NDCG@20"}));
}

TEST_F(Cli, DumpSubgraph) {
  small_data("d");
  auto r = call({"dump-subgraph", "--data", p("d"), "--user", "0", "--m", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# user '0' is dense id 0"), std::string::npos);
  EXPECT_EQ(call({"dump-subgraph", "--data", p("d"), "--user", "nobody"}).code, 3);
}

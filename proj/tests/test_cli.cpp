#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "test_support.hpp"
#include "treefit/io.hpp"
#include "treefit/metric.hpp"
#include "treefit/optimizer.hpp"
#include "treefit/synthetic.hpp"

#ifndef TREEFIT_BIN
#error "TREEFIT_BIN must point at the treefit executable"
#endif

using namespace treefit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" TREEFIT_BIN "' " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json json_of(const std::string& text) { return nlohmann::json::parse(text); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("treefit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenCycleWritesFourLines) {
  ASSERT_EQ(run("gen cycle --n 4 -o " + path("c4.txt")).status, 0);
  EXPECT_EQ(slurp(path("c4.txt")), "0 1\n1 2\n2 3\n3 0\n");
}

TEST_F(Cli, GenIsReproducible) {
  ASSERT_EQ(run("gen er --n 10 --p 0.3 --seed 7 -o " + path("a.txt")).status, 0);
  ASSERT_EQ(run("gen er --n 10 --p 0.3 --seed 7 -o " + path("b.txt")).status, 0);
  EXPECT_EQ(slurp(path("a.txt")), slurp(path("b.txt")));
  EXPECT_FALSE(slurp(path("a.txt")).empty());
}

TEST_F(Cli, GenSbmWithSidecar) {
  ASSERT_EQ(run("gen sbm --sizes 50,50,50,50,50 --p-in 0.6 --p-out 0.2 --seed 2 -o " + path("sbm.txt")).status, 0);
  const auto g = load_edge_list(path("sbm.txt"));
  EXPECT_EQ(g.node_count(), 250u);
  const std::string blocks = slurp(path("sbm.txt.blocks.csv"));
  EXPECT_EQ(blocks.substr(0, 11), "node,block\n");
  EXPECT_NE(blocks.find("\n249,4\n"), std::string::npos);
}

TEST_F(Cli, GenRejectsBadParameters) {
  EXPECT_EQ(run("gen er --n 5 --p 0 -o " + path("x.txt")).status, 2);
  EXPECT_EQ(run("gen cycle --n 2 -o " + path("x.txt")).status, 2);
  EXPECT_EQ(run("gen star -o " + path("x.txt")).status, 2);
}

TEST_F(Cli, DeltaModes) {
  ASSERT_EQ(run("gen cycle --n 4 -o " + path("c4.txt")).status, 0);
  const auto exact = run("delta " + path("c4.txt"));
  ASSERT_EQ(exact.status, 0);
  EXPECT_EQ(json_of(exact.out)["delta"].get<double>(), 1.0);

  ASSERT_EQ(run("gen tree --n 20 --seed 3 --wmin 0.5 --wmax 2 -o " + path("t.txt")).status, 0);
  EXPECT_LE(json_of(run("delta " + path("t.txt")).out)["delta"].get<double>(), 1e-9);

  ASSERT_EQ(run("gen er --n 9 --p 0.4 --seed 1 -o " + path("er.txt")).status, 0);
  const double smooth = json_of(run("delta " + path("er.txt") + " --mode smooth --lambda 4").out)["delta"];
  const double batched =
      json_of(run("delta " + path("er.txt") + " --mode batched --lambda 4 --batches 1 --batch-size 9").out)["delta"];
  EXPECT_NEAR(smooth, batched, 1e-12);

  const auto csv = run("delta " + path("c4.txt") + " --format csv");
  EXPECT_EQ(csv.out, "dataset,n,mode,delta\nc4,4,exact,1\n");
}

TEST_F(Cli, DeltaSizeGuard) {
  ASSERT_EQ(run("gen cycle --n 1501 -o " + path("big.txt")).status, 0);
  EXPECT_EQ(run("delta " + path("big.txt")).status, 3);
  EXPECT_EQ(run("delta " + path("big.txt") + " --mode smooth").status, 3);
}

TEST_F(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(run("delta " + path("missing.txt")).status, 2);
  std::ofstream(path("bad.txt")) << "a a\n";
  EXPECT_EQ(run("delta " + path("bad.txt")).status, 2);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("delta").status, 2);
  EXPECT_EQ(run("--help").status, 0);
}

TEST_F(Cli, FitWithZeroLearningRateKeepsProjectedInput) {
  const auto d = treefit::testing::random_dissimilarity(8, 5, 0.2, 3.0);
  {
    std::ofstream out(path("w.csv"));
    write_matrix_csv(out, d);
  }
  ASSERT_EQ(run("fit " + path("w.csv") + " -o " + path("run") + " --lr 0 --patience 3 --batch-size 5").status, 0);
  EXPECT_EQ(load_dense_csv(path("run.matrix.csv")), project_metric(d));
  const auto report = json_of(slurp(path("run.report.json")));
  EXPECT_EQ(report["epochs_run"], 4);
  EXPECT_EQ(report["stopped_early"], true);
  EXPECT_EQ(report["config"]["m"], 5);
  EXPECT_EQ(slurp(path("run.trace.csv")).substr(0, 36), "epoch,loss,fidelity,delta_term,linf\n");
}

TEST_F(Cli, FitTraceIsByteStable) {
  ASSERT_EQ(run("gen er --n 20 --p 0.2 --seed 4 -o " + path("g.txt")).status, 0);
  const std::string flags = " --epochs 40 --seed 9 --batch-size 6 --batches 5";
  ASSERT_EQ(run("fit " + path("g.txt") + " -o " + path("a") + flags).status, 0);
  ASSERT_EQ(run("fit " + path("g.txt") + " -o " + path("b") + flags, "TREEFIT_THREADS=3").status, 0);
  EXPECT_EQ(slurp(path("a.trace.csv")), slurp(path("b.trace.csv")));
  EXPECT_EQ(slurp(path("a.matrix.csv")), slurp(path("b.matrix.csv")));
  EXPECT_EQ(slurp(path("a.labels.txt")).substr(0, 2), "0\n");
}

TEST_F(Cli, FitLowersDeltaOnSbm) {
  ASSERT_EQ(run("gen sbm --sizes 10,10,10,10,10 --p-in 0.6 --p-out 0.2 --seed 1 -o " + path("sbm.txt")).status, 0);
  ASSERT_EQ(run("fit " + path("sbm.txt") + " -o " + path("run") + " --epochs 300").status, 0);
  const auto report = json_of(slurp(path("run.report.json")));
  EXPECT_LT(report["delta_fitted"].get<double>(), report["delta_input"].get<double>());
  EXPECT_TRUE(report["theorem2_bound"].is_number());
}

TEST_F(Cli, FitConfigErrors) {
  ASSERT_EQ(run("gen cycle --n 6 -o " + path("c.txt")).status, 0);
  EXPECT_EQ(run("fit " + path("c.txt") + " -o " + path("r")).status, 2);  // m = 8 > n
  EXPECT_EQ(run("fit " + path("c.txt") + " -o " + path("r") + " --batch-size 4 --lambda 0").status, 2);
}

TEST_F(Cli, EmbedTreeInputHasZeroDistortion) {
  ASSERT_EQ(run("gen tree --n 15 --seed 2 --wmin 0.5 --wmax 2 -o " + path("t.txt")).status, 0);
  const auto r = run("embed " + path("t.txt") + " -o " + path("e") + " --roots 3");
  ASSERT_EQ(r.status, 0);
  const auto report = json_of(r.out);
  EXPECT_LE(report["roots"][0]["linf"].get<double>(), 1e-9);
  EXPECT_EQ(report["roots"][0]["root"], 3);
  EXPECT_TRUE(fs::exists(path("e.root3.nwk")));
  EXPECT_TRUE(fs::exists(path("e.root3.edges.tsv")));
  EXPECT_EQ(report, json_of(slurp(path("e.report.json"))));
}

TEST_F(Cli, EmbedSampledRootsAreStable) {
  ASSERT_EQ(run("gen er --n 120 --p 0.05 --seed 3 -o " + path("g.txt")).status, 0);
  const auto a = json_of(run("embed " + path("g.txt") + " -o " + path("a") + " --roots 100 --root-seed 5").out);
  const auto b = json_of(run("embed " + path("g.txt") + " -o " + path("b") + " --roots 100 --root-seed 5").out);
  ASSERT_EQ(a["roots"].size(), 100u);
  std::set<int> ids;
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a["roots"][i]["root"], b["roots"][i]["root"]);
    ids.insert(a["roots"][i]["root"].get<int>());
  }
  EXPECT_EQ(ids.size(), 100u);
}

TEST_F(Cli, EmbedFourCycleAllRootsSymmetric) {
  ASSERT_EQ(run("gen cycle --n 4 -o " + path("c4.txt")).status, 0);
  const auto report = json_of(run("embed " + path("c4.txt") + " -o " + path("e") + " --roots all").out);
  ASSERT_EQ(report["roots"].size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(report["roots"][i]["linf"], report["roots"][0]["linf"]);
  EXPECT_EQ(report["aggregate"]["linf"]["std"], 0.0);
}

TEST_F(Cli, EmbedRejectsBadRoots) {
  ASSERT_EQ(run("gen cycle --n 4 -o " + path("c4.txt")).status, 0);
  EXPECT_EQ(run("embed " + path("c4.txt") + " -o " + path("e") + " --roots 4").status, 2);
  EXPECT_EQ(run("embed " + path("c4.txt") + " -o " + path("e") + " --roots x").status, 2);
  EXPECT_EQ(run("embed " + path("c4.txt") + " -o " + path("e") + " --roots 0 --root-seed 1").status, 2);
}

TEST_F(Cli, Eval) {
  const auto a = treefit::testing::random_euclidean_metric(6, 1), b = treefit::testing::random_euclidean_metric(6, 2);
  for (const auto& [name, m] : {std::pair{"a.csv", a}, std::pair{"b.csv", b}}) {
    std::ofstream out(path(name));
    write_matrix_csv(out, m);
  }
  const auto same = json_of(run("eval " + path("a.csv") + " " + path("a.csv")).out);
  EXPECT_EQ(same["linf"], 0.0);
  EXPECT_EQ(same["l1_avg"], 0.0);
  const auto diff = json_of(run("eval " + path("a.csv") + " " + path("b.csv")).out);
  EXPECT_EQ(diff["linf"].get<double>(), distortion_linf(a, b));
  EXPECT_EQ(diff["l1_avg"].get<double>(), distortion_l1_avg(a, b));
  EXPECT_EQ(run("eval " + path("a.csv") + " " + path("missing.csv")).status, 2);
  {
    std::ofstream out(path("c.csv"));
    write_matrix_csv(out, treefit::testing::random_euclidean_metric(5, 3));
  }
  EXPECT_EQ(run("eval " + path("a.csv") + " " + path("c.csv")).status, 2);
}

TEST_F(Cli, PipelineReportsBaseline) {
  ASSERT_EQ(run("gen er --n 16 --p 0.25 --seed 8 -o " + path("g.txt")).status, 0);
  const auto r = run("pipeline " + path("g.txt") + " -o " + path("p") + " --roots 0,5 --epochs 50 --format csv");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "root,linf,l1_avg,baseline_linf,baseline_l1_avg");
  const auto report = json_of(slurp(path("p.report.json")));
  EXPECT_EQ(report["command"], "pipeline");
  EXPECT_TRUE(report["roots"][1]["baseline_linf"].is_number());
  EXPECT_TRUE(fs::exists(path("p.root5.nwk")));
  EXPECT_TRUE(fs::exists(path("p.matrix.csv")));
}

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nst/fbm.hpp"
#include "nst/report.hpp"

namespace fs = std::filesystem;
using nst::Json;

namespace {

struct CliResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nst_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args) const {
    const auto err_path = dir_ / "stderr.txt";
    const std::string cmd = std::string("'") + NST_CLI + "' " + args + " 2>'" + err_path.string() + "'";
    CliResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_path);
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const std::string cameraman = std::string(NST_TEST_DATA) + "/cameraman128.pgm";

}  // namespace

TEST_F(Cli, UsageErrorExitsWithTwo) {
  const auto r = run("synth-fbm --hurst 0.3");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error[usage]: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_EQ(run("synth-fbm --hurst 1.5 --size 8 --out " + path("x.txf")).code, 2);
  EXPECT_EQ(run("separate " + cameraman + " --out-texture " + path("t.txf") + " --dt 0.5").code, 2);
}

TEST_F(Cli, IoErrorExitsWithThree) {
  const auto r = run("stats gaussianity " + path("missing.pgm"));
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("error[io]: load: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(Cli, SynthSeparateStats) {
  ASSERT_EQ(run("synth-fbm --hurst 0.3 --size 32 --seed 4 --out " + path("f.txf")).code, 0);
  const auto field = nst::load_image(path("f.txf"));
  EXPECT_EQ(field.width(), 32u);
  EXPECT_EQ(field, nst::synth_field(nst::FbmParams{0.3, 1.0}, 32, 4).grid);

  const auto sep = run("separate " + path("f.txf") + " --out-texture " + path("t.txf") + " --out-structure " +
                       path("s.txf") + " --iters 10");
  ASSERT_EQ(sep.code, 0) << sep.err;
  EXPECT_EQ(sep.out.rfind("kappa ", 0), 0u);
  nst::DiffusionSettings ds;
  ds.iterations = 10;
  EXPECT_EQ(nst::load_image(path("t.txf")), nst::separate(field, ds).texture);

  const auto st = run("stats gaussianity " + path("f.txf") + " --json");
  ASSERT_EQ(st.code, 0) << st.err;
  const Json j = Json::parse(st.out);
  EXPECT_EQ(j["test"], "gaussianity");
  EXPECT_TRUE(j["raw"]["ks"].contains("accepted"));
  EXPECT_TRUE(j["texture"]["ks"].contains("statistic"));
}

TEST_F(Cli, CsvOutputs) {
  const auto scales = run("mi-scales " + cameraman + " --levels 3 --csv");
  ASSERT_EQ(scales.code, 0) << scales.err;
  EXPECT_EQ(scales.out.rfind("n,mi_bits,", 0), 0u);
  EXPECT_EQ(std::count(scales.out.begin(), scales.out.end(), '\n'), 3);

  ASSERT_EQ(run("glcm-mi " + cameraman + " --sweep diagonal --d-max 4 --csv -o " + path("g.csv")).code, 0);
  const auto g = slurp(path("g.csv"));
  EXPECT_EQ(g.rfind("dx,dy,mi_bits,pairs\n1,1,", 0), 0u) << g;
  EXPECT_EQ(std::count(g.begin(), g.end(), '\n'), 5);

  const auto p = run("mi-patches " + cameraman + " --patch 32 --levels 2 --csv --out-dir " + path("patches"));
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_TRUE(fs::exists(path("patches/level1_matrix.csv")));
  EXPECT_TRUE(fs::exists(path("patches/level2_hist.csv")));
  const auto m = slurp(path("patches/level1_matrix.csv"));
  EXPECT_EQ(std::count(m.begin(), m.end(), '\n'), 16);  // 4 x 4 patches
  EXPECT_EQ(Json::parse(p.out)["levels"].size(), 2u);
}

TEST_F(Cli, ReportFlagsOverrideConfigFile) {
  { std::ofstream(path("cfg.json")) << R"({"iterations": 5, "bins": 64, "d_max": 4, "patch": 32})"; }
  const auto r = run("report " + cameraman + " --config " + path("cfg.json") + " --bins 32 -o " + path("r.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Json doc = Json::parse(slurp(path("r.json")));
  EXPECT_EQ(doc["settings"]["bins"], 32);
  EXPECT_EQ(doc["settings"]["diffusion"]["iterations"], 5);
  EXPECT_EQ(doc["settings"]["d_max"], 4);
  EXPECT_EQ(doc["input"]["width"], 128);

  { std::ofstream(path("bad.json")) << R"({"itertions": 5})"; }
  const auto bad = run("report " + cameraman + " --config " + path("bad.json"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(bad.err.rfind("error[usage]: config: ", 0), 0u) << bad.err;
}

TEST_F(Cli, BatchWritesAggregate) {
  fs::create_directories(path("in"));
  for (int i = 0; i < 2; ++i)
    ASSERT_EQ(run("composite --hurst 0.3 --size 32 --structure disk --seed " + std::to_string(i) + " --out " +
                  path("in/c" + std::to_string(i) + ".txf"))
                  .code,
              0);
  const auto r = run("batch " + path("in") + " --out-dir " + path("out") +
                     " --workers 2 --patch 16 --patch-levels 1 --scale-levels 2 --d-max 5");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json agg = Json::parse(slurp(path("out/aggregate.json")));
  EXPECT_EQ(agg["images"], 2);
  EXPECT_EQ(agg["succeeded"], 2);
  EXPECT_EQ(agg["workers"], 2);
  EXPECT_TRUE(fs::exists(path("out/c0.txf.json")));
  EXPECT_EQ(Json::parse(r.out), agg);
}

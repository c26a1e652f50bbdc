#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("jamlab_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Result run(const std::string& args) const {
    const std::string err = path("stderr.txt");
    const std::string cmd = "cd '" + dir_.string() + "' && '" JAMLAB_CLI_PATH "' " + args + " > /dev/null 2> '" + err + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  json read(const std::string& name) const { return json::parse(slurp(path(name))); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  std::size_t lines(const std::string& name) const {
    std::ifstream in(path(name));
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) n += l.empty() ? 0 : 1;
    return n;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ExitCodesForUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("pack --bogus 1").code, 2);
  EXPECT_EQ(run("pack --dim 7 --solid 'ball d=1 r=0.5' --lambda 10").code, 2);
  EXPECT_EQ(run("pack --dim 1 --solid 'ball d=2 r=0.5' --lambda 10").code, 2);
  EXPECT_EQ(run("pack --dim 1 --solid 'ball d=1 r=0.5' --lambda ten").code, 2);
  EXPECT_EQ(run("pack --dim 2 --solid 'ball d=2 r=0.5' --lambda 10 --eps 0").code, 2);
  EXPECT_EQ(run("pack --dim 1 --solid 'ball d=1 r=0.5'").code, 2);  // lambda is required
  EXPECT_EQ(run("stabilize --dim 1 --solid 'ball d=1 r=0.5' --lambda 20 --method psychic").code, 2);
  EXPECT_EQ(run("covariance --dim 1 --solid 'ball d=1 r=0.5' --lambda 20 --reps 10").code, 2);
  EXPECT_EQ(run("replay missing.manifest.json").code, 2);
}

TEST_F(Cli, UnknownConfigKeysAreRejectedWithTheAcceptedList) {
  write("c.json", R"({"dim": 1, "solid": "ball d=1 r=0.5", "lambda": 10, "lamda": 20})");
  const Result r = run("pack --config c.json --out p");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("lamda"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("lambda"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("p.jsonl")));
}

TEST_F(Cli, FlagsOverrideTheConfigFileAndBothAreRecorded) {
  write("c.json", R"({"dim": 1, "solid": "ball d=1 r=0.5", "lambda": 50, "reps": 3, "seed": 5})");
  ASSERT_EQ(run("pack --config c.json --reps 2 --out p").code, 0);
  const json m = read("p.manifest.json");
  EXPECT_EQ(m["command"], "pack");
  EXPECT_EQ(m["config"]["reps"], 2);
  EXPECT_EQ(m["config"]["seed"], 5);
  EXPECT_EQ(m["config_file"]["reps"], 3);
  EXPECT_EQ(m["flags"]["reps"], "2");
  EXPECT_EQ(m["master_seed"], 5);
  EXPECT_EQ(m["complete"], true);
  EXPECT_TRUE(m.contains("engine_version"));
  EXPECT_TRUE(m.contains("wall_clock_ms"));
  EXPECT_EQ(lines("p.jsonl"), 2u);
  std::ifstream in(path("p.jsonl"));
  std::string l;
  std::getline(in, l);
  const json row = json::parse(l);
  for (const char* k : {"rep", "seed", "N", "virtual_time", "vacancy_bound", "extra_solids_bound", "probes", "guard_tripped"})
    EXPECT_TRUE(row.contains(k)) << k;
}

TEST_F(Cli, ReplayReproducesOutputsByteForByte) {
  ASSERT_EQ(run("sweep --dim 1 --solid 'ball d=1 r=0.5' --grid 40,80 --reps 6 --seed 11 --out s").code, 0);
  ASSERT_EQ(run("replay s.manifest.json --out r").code, 0);
  for (const char* ext : {".csv", ".reps.jsonl", ".summary.json"})
    EXPECT_EQ(slurp(path(std::string("s") + ext)), slurp(path(std::string("r") + ext))) << ext;
  // a different thread count gives the same data
  ASSERT_EQ(run("sweep --dim 1 --solid 'ball d=1 r=0.5' --grid 40,80 --reps 6 --seed 11 --threads 3 --out t").code, 0);
  EXPECT_EQ(slurp(path("s.csv")), slurp(path("t.csv")));
  ASSERT_EQ(run("replay s.manifest.json").code, 0);
  EXPECT_TRUE(fs::exists(path("s.replay.csv")));
}

TEST_F(Cli, SweepWritesOneRowPerLambdaAndEveryReplication) {
  ASSERT_EQ(run("sweep --dim 1 --solid 'ball d=1 r=0.5' --grid 30,60,120 --reps 4 --out s").code, 0);
  EXPECT_EQ(lines("s.csv"), 4u);  // header + 3 rows
  EXPECT_EQ(lines("s.reps.jsonl"), 12u);
  const json sum = read("s.summary.json");
  EXPECT_FALSE(sum.empty());
  const json m = read("s.manifest.json");
  EXPECT_EQ(m["replication_seeds"].size(), 3u);
  EXPECT_EQ(m["outputs"].size(), 3u);
}

TEST_F(Cli, RuntimeFailureLeavesAnIncompleteManifest) {
  const Result r = run("stabilize --dim 1 --solid 'ball d=1 r=0.5' --lambda 40 --reps 2 --horizon 0.01 --out st");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("horizon"), std::string::npos) << r.err;
  const json m = read("st.manifest.json");
  EXPECT_EQ(m["complete"], false);
  EXPECT_FALSE(m.contains("wall_clock_ms"));
}

TEST_F(Cli, OtherCommandsProduceTheirFiles) {
  ASSERT_EQ(run("measure --dim 2 --solid 'ball d=2 r=0.5' --lambda 30 --reps 2 --boxes '0,0:0.5,0.5' --out m").code, 0);
  EXPECT_EQ(lines("m.csv"), 1u + 2u * 2u);  // constant plus one box, per replication
  ASSERT_EQ(run("covariance --dim 1 --solid 'ball d=1 r=0.5' --lambda 50 --reps 30 --boxes '0:0.5;0.5:1' --out c").code, 0);
  EXPECT_EQ(lines("c.csv"), 1u + 9u);
  ASSERT_EQ(run("stabilize --dim 1 --solid 'ball d=1 r=0.5' --lambda 40 --reps 3 --lgrid 0:4:1 --resamples 3 --out st").code, 0);
  EXPECT_EQ(lines("st.csv"), 1u + 5u);
  EXPECT_EQ(lines("st.samples.jsonl"), 3u);
  ASSERT_EQ(run("variability --dim 1 --solid 'ball d=1 r=0.16666666666666666' --reps 4 --out v").code, 0);
  const json v = read("v.json");
  EXPECT_FALSE(v.empty());
}

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lransac_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  // Runs the binary with `args`; stdout and stderr land in files.
  int run(const std::string& args) {
    const std::string cmd = std::string(LRANSAC_BIN) + " " + args + " >" +
                            path("stdout").string() + " 2>" + path("stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string out() const { return slurp(path("stdout")); }
  std::string err() const { return slurp(path("stderr")); }

  nlohmann::json json_without_timing(const fs::path& p) const {
    auto j = nlohmann::json::parse(slurp(p));
    j.erase("timing_ms");
    return j;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SynthThenRunRecoversPlantedInliers) {
  const auto inst = path("h.txt").string();
  ASSERT_EQ(run("synth --problem homography --matches 300 --inlier-rate 0.5 --sigma 0.5 "
                "--seed 3 --out " + inst), 0) << err();
  ASSERT_TRUE(fs::exists(path("h.truth.json")));
  const auto truth = nlohmann::json::parse(slurp(path("h.truth.json")));
  EXPECT_EQ(truth.at("planted_inliers").get<int>(), 150);

  ASSERT_EQ(run("calibrate --problem homography --matches 300 --inlier-rate 0.5 --sigma 0.5 "
                "--seed 3 --samples 100"), 0) << err();
  const double t = std::stod(out());
  EXPECT_GT(t, 0.0);

  for (const std::string mode : {"vanilla", "latent"}) {
    const auto res = path(mode + ".json").string();
    ASSERT_EQ(run("run " + inst + " --mode " + mode + " --t " + std::to_string(t) +
                  " --table-bits 14 --seed 9 --out " + res), 0) << err();
    const auto j = nlohmann::json::parse(slurp(res));
    EXPECT_EQ(j.at("config").at("mode").get<std::string>(), mode);
    EXPECT_GE(j.at("best_inlier_count").get<int>(), 140) << mode;
    EXPECT_EQ(j.at("inlier_mask").size(), 300u);
  }
}

TEST_F(Cli, RunIsDeterministicUpToTiming) {
  const auto inst = path("r.txt").string();
  ASSERT_EQ(run("synth --problem rigid3d --matches 200 --inlier-rate 0.3 --sigma 0.5 --seed 4 "
                "--out " + inst), 0) << err();
  const std::string common = "run " + inst + " --t 0.1 --rho 100 --threshold 1.7 --table-bits 12 "
                             "--seed 5 --out ";
  ASSERT_EQ(run(common + path("a.json").string()), 0) << err();
  ASSERT_EQ(run(common + path("b.json").string()), 0) << err();
  EXPECT_EQ(json_without_timing(path("a.json")), json_without_timing(path("b.json")));
}

TEST_F(Cli, GeneratedSeedIsReported) {
  ASSERT_EQ(run("synth --matches 50 --inlier-rate 0.5 --out " + path("s.txt").string()), 0);
  EXPECT_NE(err().find("seed: "), std::string::npos);
  ASSERT_EQ(run("synth --matches 50 --inlier-rate 0.5 --seed 1 --out " + path("s.txt").string()),
            0);
  EXPECT_EQ(err().find("seed: "), std::string::npos);
}

TEST_F(Cli, MalformedInputExitsTwo) {
  std::ofstream(path("bad.txt")) << "# problem: homography\n1 2 3 4\n1 2 three 4\n";
  EXPECT_EQ(run("run " + path("bad.txt").string() + " --mode vanilla --seed 1"), 2);
  EXPECT_NE(err().find("line 3"), std::string::npos) << err();

  EXPECT_EQ(run("run " + path("missing.txt").string() + " --seed 1"), 2);
  EXPECT_EQ(run("frobnicate"), 2);

  std::ofstream(path("ok.txt")) << "1 2 3 4\n5 6 7 8\n9 1 2 3\n4 5 6 7\n8 9 1 3\n";
  EXPECT_EQ(run("run " + path("ok.txt").string() + " --seed 1"), 2) << "latent needs --t";
  EXPECT_EQ(run("run " + path("ok.txt").string() + " --mode vanilla --p0 1.5 --seed 1"), 2);
  EXPECT_EQ(run("run " + path("ok.txt").string() + " --mode vanilla --pr2 often --seed 1"), 2);
}

TEST_F(Cli, MinInliersRejectionExitsOne) {
  const auto inst = path("h.txt").string();
  ASSERT_EQ(run("synth --matches 100 --inlier-rate 0.5 --sigma 0 --seed 6 --out " + inst), 0);
  EXPECT_EQ(run("run " + inst + " --mode vanilla --seed 2 --min-inliers 101 --out " +
                path("r.json").string()), 1);
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_FALSE(j.at("accepted").get<bool>());
  EXPECT_EQ(j.at("best_inlier_count").get<int>(), 50);
}

TEST_F(Cli, StoppingTableCsv) {
  ASSERT_EQ(run("stopping-table --p0 0.99 --sample-size 4 --inlier-rates 0.1 0.3 0.1"), 0) << err();
  std::istringstream csv(out());
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "inlier_rate,sample_size,p0,n_vanilla,n_latent,ratio");
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("0.1,4,0.99,46050,", 0), 0u) << line;
  int rows = 1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST_F(Cli, BenchCsvHasTrialAndAggregateRows) {
  ASSERT_EQ(run("bench --problem rigid3d --matches 200 --inlier-rate 0.3 --sigma 0.5 --rho 100 "
                "--threshold 1.7 --table-bits 12 --trials 2 --seed 7 --out " +
                path("b.csv").string()), 0) << err();
  const std::string csv = slurp(path("b.csv"));
  EXPECT_EQ(csv.rfind("kind,mode,trial,success", 0), 0u);
  EXPECT_NE(csv.find("\ntrial,vanilla,1,"), std::string::npos);
  EXPECT_NE(csv.find("\ntrial,latent,1,"), std::string::npos);
  EXPECT_NE(csv.find("\naggregate,vanilla,2,"), std::string::npos);
  EXPECT_NE(csv.find("\naggregate,latent,2,"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(out().find("stopping-table"), std::string::npos);
}

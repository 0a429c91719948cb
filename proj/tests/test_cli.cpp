#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("skycatch_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliRun run(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + SKYCATCH_CLI_PATH + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream s;
  s << f.rdbuf();
  r.out = s.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST(Cli, HelpShowsDefaultsAndExitsZero) {
  const auto dir = scratch("help");
  const CliRun r = run("synth --help", dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--trials"), std::string::npos);
  EXPECT_NE(r.out.find("[data.trials]"), std::string::npos);
  EXPECT_NE(r.out.find("--data-seed"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run("", dir).code, 1);
  EXPECT_EQ(run("synth --no-such-flag 3", dir).code, 1);
  EXPECT_EQ(run("synth --trials banana", dir).code, 1);
  EXPECT_EQ(run("pds --dataset missing.jsonl", dir).code, 1);
  const CliRun bad_env = run("synth --objects 1 --trials 1", dir, "SKYCATCH_SEED=abc");
  EXPECT_EQ(bad_env.code, 1);
  EXPECT_NE(bad_env.out.find("SKYCATCH_SEED"), std::string::npos);
}

TEST(Cli, SynthWritesRequestedCountsAndIsReproducible) {
  const auto dir = scratch("synth");
  const CliRun a = run("synth --objects 2 --trials 3 --dataset a.jsonl --catalog a_catalog.json", dir);
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(count_lines(dir / "a.jsonl"), 6u);
  EXPECT_TRUE(fs::exists(dir / "a_catalog.json"));
  const CliRun b = run("synth --objects 2 --trials 3 --dataset b.jsonl --catalog b_catalog.json", dir);
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  const CliRun c = run("synth --objects 2 --trials 3 --data-seed 99 --dataset c.jsonl --catalog c_catalog.json", dir);
  ASSERT_EQ(c.code, 0) << c.out;
  EXPECT_NE(slurp(dir / "a.jsonl"), slurp(dir / "c.jsonl"));
}

TEST(Cli, ConfigFileAndEnvironmentOverrides) {
  const auto dir = scratch("config");
  {
    std::ofstream ini(dir / "run.ini");
    ini << "[data]\ntrials = 2\nobjects = 1\n";
  }
  const CliRun a = run("synth --config run.ini --dataset a.jsonl --catalog cat.json", dir);
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(count_lines(dir / "a.jsonl"), 2u);
  // A flag beats the file.
  const CliRun b = run("synth --config run.ini --trials 4 --dataset b.jsonl --catalog cat.json", dir);
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(count_lines(dir / "b.jsonl"), 4u);

  const CliRun e1 = run("synth --config run.ini --dataset e1.jsonl --catalog cat.json", dir, "SKYCATCH_SEED=5");
  const CliRun e2 = run("synth --config run.ini --dataset e2.jsonl --catalog cat.json", dir, "SKYCATCH_SEED=6");
  ASSERT_EQ(e1.code, 0) << e1.out;
  ASSERT_EQ(e2.code, 0) << e2.out;
  EXPECT_NE(slurp(dir / "e1.jsonl"), slurp(dir / "e2.jsonl"));

  const CliRun bad = run("synth --config absent.ini", dir);
  EXPECT_EQ(bad.code, 1);
}

TEST(Cli, PdsAndAugmentOutputs) {
  const auto dir = scratch("pds");
  ASSERT_EQ(run("synth --objects 2 --trials 2 --dataset d.jsonl --catalog cat.json", dir).code, 0);
  const CliRun p = run("pds --dataset d.jsonl --out-dir out", dir);
  ASSERT_EQ(p.code, 0) << p.out;
  EXPECT_EQ(count_lines(dir / "out" / "pds.csv"), 3u);
  EXPECT_TRUE(fs::exists(dir / "out" / "effective_config.ini"));
  const CliRun a = run("augment --dataset d.jsonl --factor 3", dir);
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(count_lines(dir / "d.x3.jsonl"), 12u);
}

TEST(Cli, FullSynthesisWritesTwoThousandThrows) {
  const auto dir = scratch("full");
  const CliRun r = run("synth --objects 20 --trials 100 --seed 7 --dataset d.jsonl --catalog c.json", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_lines(dir / "d.jsonl"), 2000u);
}

TEST(Cli, TrainDefaultsFollowTheRecipe) {
  const auto dir = scratch("train");
  ASSERT_EQ(run("synth --objects 2 --trials 10 --dataset d.jsonl --catalog c.json", dir).code, 0);
  const CliRun r = run("train --dataset d.jsonl --arch dipp_dpe --hidden 8 --epochs 1 --window-stride 20 "
                       "--checkpoint m.ckpt",
                       dir);
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string sidecar = slurp(dir / "m.ckpt.json");
  EXPECT_NE(sidecar.find("\"lr\": 3e-05"), std::string::npos) << sidecar;
  EXPECT_NE(sidecar.find("\"batch\": 512"), std::string::npos) << sidecar;
}

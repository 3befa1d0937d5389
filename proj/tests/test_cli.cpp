#include <gtest/gtest.h>

#include <fstream>

#include <json.hpp>

#include "cli_runner.hpp"
#include "readmem/container.hpp"

namespace readmem {
namespace {

using testing::run_cli;
using testing::ScratchDir;
using testing::slurp;

const std::string kCli = READMEM_CLI_PATH;
const std::string kFaultCli = READMEM_CLI_FAULT_PATH;

TEST(Cli, GenIsDeterministicAndSized) {
  ScratchDir dir("cli_gen");
  const std::string args =
      "gen --length 100 --channels-key 8 --spatial 16 --regime slow_drift --noise 0.1 --seed 7 --out ";
  ASSERT_EQ(run_cli(kCli, args + dir.str("a.rmem"), dir.path()).exit_code, 0);
  ASSERT_EQ(run_cli(kCli, args + dir.str("b.rmem"), dir.path()).exit_code, 0);
  const std::string a = slurp(dir.path() / "a.rmem");
  EXPECT_EQ(a, slurp(dir.path() / "b.rmem"));
  EXPECT_EQ(a.size(), 26u + 100u * (8u * 16u * 4u + 1u));
  EXPECT_EQ(slurp(dir.path() / "a.rmem.manifest"), slurp(dir.path() / "b.rmem.manifest"));
}

TEST(Cli, RunIsDeterministicAndEmitsContract) {
  ScratchDir dir("cli_run");
  ASSERT_EQ(run_cli(kCli, "gen --length 60 --regime slow_drift,cyclic_shift --noise 0.1 --out " + dir.str("s.rmem"),
                    dir.path())
                .exit_code,
            0);
  const std::string run = "run --stream " + dir.str("s.rmem") + " --slots 5 --sampling-interval 2 --out-dir ";
  ASSERT_EQ(run_cli(kCli, run + dir.str("r1"), dir.path()).exit_code, 0);
  ASSERT_EQ(run_cli(kCli, run + dir.str("r2"), dir.path()).exit_code, 0);
  const std::string csv = slurp(dir.path() / "r1" / "metrics.csv");
  EXPECT_EQ(csv, slurp(dir.path() / "r2" / "metrics.csv"));
  EXPECT_EQ(slurp(dir.path() / "r1" / "summary.json"), slurp(dir.path() / "r2" / "summary.json"));
  EXPECT_EQ(csv.rfind("frame,action,log_abs_det,lsb_score,winning_slot,candidate_max\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 61);
  const auto j = nlohmann::json::parse(slurp(dir.path() / "r1" / "summary.json"));
  EXPECT_EQ(j["config"]["slots"], 5);
  EXPECT_EQ(j["frames"], 60);
}

TEST(Cli, RunWithOracleCheckAgrees) {
  ScratchDir dir("cli_oracle_run");
  ASSERT_EQ(run_cli(kCli, "gen --length 80 --regime slow_drift --noise 0.3 --out " + dir.str("s.rmem"), dir.path())
                .exit_code,
            0);
  const auto r = run_cli(kCli,
                         "run --stream " + dir.str("s.rmem") +
                             " --slots 5 --sampling-interval 1 --lsb -1 --check-oracle --out-dir " + dir.str("o"),
                         dir.path());
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("oracle agreement"), std::string::npos);
}

TEST(Cli, ExitCodesAreDistinct) {
  ScratchDir dir("cli_exit");
  ASSERT_EQ(run_cli(kCli, "gen --length 10 --out " + dir.str("s.rmem"), dir.path()).exit_code, 0);

  std::string bytes = slurp(dir.path() / "s.rmem");
  bytes[0] = 'Q';
  std::ofstream(dir.path() / "bad.rmem", std::ios::binary) << bytes;
  const int container = run_cli(kCli, "run --stream " + dir.str("bad.rmem") + " --out-dir " + dir.str("o"),
                                dir.path())
                            .exit_code;
  const int shape = run_cli(kCli,
                            "run --stream " + dir.str("s.rmem") + " --spatial 9 --out-dir " + dir.str("o"),
                            dir.path())
                        .exit_code;
  const int config = run_cli(kCli, "run --stream " + dir.str("s.rmem") + " --slots 1 --out-dir " + dir.str("o"),
                             dir.path())
                         .exit_code;
  const int fault = run_cli(kFaultCli, "oracle-check --trials 50 --inject-fault", dir.path()).exit_code;
  EXPECT_EQ(container, 3);
  EXPECT_EQ(shape, 4);
  EXPECT_EQ(config, 2);
  EXPECT_EQ(fault, 5);
  EXPECT_EQ(run_cli(kCli, "run --stream " + dir.str("missing.rmem") + " --out-dir " + dir.str("o"), dir.path())
                .exit_code,
            1);
  EXPECT_EQ(run_cli(kCli, "run --stream " + dir.str("s.rmem") + " --rea sideways --out-dir " + dir.str("o"),
                    dir.path())
                .exit_code,
            2);
  EXPECT_EQ(run_cli(kCli, "frobnicate", dir.path()).exit_code, 2);
}

TEST(Cli, OracleCheckAgreesAndWarnsOnZeroTrials) {
  ScratchDir dir("cli_oracle");
  const auto full = run_cli(kCli, "oracle-check --trials 1000 --slots 5 --spatial 8 --channels-key 4", dir.path());
  EXPECT_EQ(full.exit_code, 0);
  EXPECT_NE(full.out.find("agreement 1000/1000"), std::string::npos);

  const auto zero = run_cli(kCli, "oracle-check --trials 0", dir.path());
  EXPECT_EQ(zero.exit_code, 0);
  EXPECT_NE(zero.out.find("warning: 0 trials"), std::string::npos);

  const auto clean_fault_build = run_cli(kFaultCli, "oracle-check --trials 50", dir.path());
  EXPECT_EQ(clean_fault_build.exit_code, 0);
  // The production binary does not expose the fault switch at all.
  EXPECT_EQ(run_cli(kCli, "oracle-check --inject-fault", dir.path()).exit_code, 2);
}

TEST(Cli, AblateWritesEveryRow) {
  ScratchDir dir("cli_ablate");
  ASSERT_EQ(run_cli(kCli, "gen --length 40 --regime slow_drift --noise 0.1 --out " + dir.str("s.rmem"), dir.path())
                .exit_code,
            0);
  ASSERT_EQ(run_cli(kCli,
                    "ablate --stream " + dir.str("s.rmem") + " --slots 4 --sampling-interval 2 --fixture-seeds 2 --out " +
                        dir.str("ab.csv"),
                    dir.path())
                .exit_code,
            0);
  const std::string csv = slurp(dir.path() / "ab.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 10);
  for (const char* name : {"rea_hungarian_affinity", "rea_off", "no_dme_fifo", "no_lsb", "no_adjacent"}) {
    EXPECT_NE(csv.find(std::string("\n") + name + ","), std::string::npos) << name;
  }
}

}  // namespace
}  // namespace readmem

#include <array>
#include <cstdio>
#include <memory>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "rknfc/coeffs.hpp"

namespace {

struct Result {
  int code;
  std::string out;
};

Result shell(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!pipe) return {-1, ""};
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

const std::string kBench = BENCH_EXE;
const std::string kCoeffs = COEFFS_EXE;
const std::string kTableau = std::string(RKNFC_DATA_DIR) + "/dirkn_crouzeix3_order4.txt";

}  // namespace

TEST(CoeffsCli, DumpMatchesLibrary) {
  const Result r = shell(kCoeffs + " dump --k 4 --r 2");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  const auto mats = rknfc::read_matrices(in);
  const rknfc::MethodCoefficients m = rknfc::build_coefficients(4, 2);
  EXPECT_EQ(mats.at("X"), m.X);
  EXPECT_EQ(mats.at("A_bar"), m.A_bar);
}

TEST(CoeffsCli, InvalidShapeExitsThree) {
  EXPECT_EQ(shell(kCoeffs + " dump --k 2 --r 3").code, 3);
  EXPECT_EQ(shell(kCoeffs + " dump --k 4").code, 3);
}

TEST(BenchCli, RunCsv) {
  const Result r = shell(kBench +
                         " run --problem kepler --method rkn-tfc-b --tend 1 --h 0.1 --format csv"
                         " --repetitions 1");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("problem,method,", 0), 0u);
  EXPECT_NE(r.out.find("kepler,rkn-tfc-b,1,0.10000000000000001,ok"), std::string::npos);
}

TEST(BenchCli, RunJsonWithDirknTableau) {
  const Result r = shell(kBench + " run --problem henon-heiles --method dirkn-f --tend 1 --h 0.1"
                                  " --format json --repetitions 1 --tableau " + kTableau);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"status\": \"ok\""), std::string::npos);
}

TEST(BenchCli, ExitCodes) {
  EXPECT_EQ(shell(kBench + " run --problem nope --method rkn-tfc-b --tend 1 --h 0.1").code, 3);
  EXPECT_EQ(shell(kBench + " run --problem kepler --method bogus --tend 1 --h 0.1").code, 3);
  EXPECT_EQ(shell(kBench + " run --problem kepler --method dirkn-f --tend 1 --h 0.1").code, 3);
  EXPECT_EQ(shell(kBench + " run --problem kepler --method rkn-tfc-b --tend 1 --h 0.3").code, 3);
  EXPECT_EQ(shell(kBench + " table --paper-grid table9").code, 3);
  EXPECT_EQ(shell(kBench + " run --problem kepler --method rkn-tfc-f --tend 10 --h 1"
                           " --max-iter 3 --repetitions 1")
                .code,
            2);
}

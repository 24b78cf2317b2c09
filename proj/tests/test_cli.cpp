#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "config.hpp"
#include "qarspec/csv.hpp"
#include "qarspec/error.hpp"

namespace qarspec::cli {
namespace {

namespace fs = std::filesystem;

const fs::path kFixtures = QARSPEC_FIXTURE_DIR;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "qarspec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    files[e.path().filename().string()] = slurp(e.path());
  }
  return files;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("qarspec_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }

  /// Runs args into out_a with 1 thread, reruns from each output's embedded
  /// config into out_b with 3 threads, and requires identical files.
  void expect_reproducible(std::vector<std::string> args, const std::string& first_output) {
    std::vector<std::string> a = args;
    a.insert(a.end(), {"--out", path("out_a"), "--threads", "1"});
    const Result ra = run(a);
    ASSERT_EQ(ra.code, 0) << ra.err;
    const Result rb = run({args.front(), "--config", path("out_a/" + first_output), "--out",
                           path("out_b"), "--threads", "3"});
    ASSERT_EQ(rb.code, 0) << rb.err;
    const auto fa = directory_contents(path("out_a"));
    const auto fb = directory_contents(path("out_b"));
    ASSERT_FALSE(fa.empty());
    EXPECT_EQ(fa, fb);
    for (const auto& [name, text] : fa) {
      EXPECT_EQ(text.rfind("#% command = " + args.front() + "\n", 0), 0u) << name;
      EXPECT_NE(text.find("#% seed = "), std::string::npos) << name;
    }
  }

  fs::path dir_;
};

std::string fixture(const std::string& name) { return (kFixtures / name).string(); }

TEST(Config, ParsesPlainAndEmbedded) {
  std::istringstream plain("# comment\nseed = 5\n  m_list= 5,9 \n");
  const auto a = parse_config_text(plain, "x");
  EXPECT_EQ(a.at("seed"), "5");
  EXPECT_EQ(a.at("m_list"), "5,9");
  std::istringstream embedded("#% command = fit\n#% p = 2\nperiod,y\n1,2\n");
  const auto b = parse_config_text(embedded, "x");
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(b.at("p"), "2");
  std::istringstream bad("seed 5\n");
  EXPECT_THROW(parse_config_text(bad, "x"), ParameterError);
}

TEST(Config, TypedAccessors) {
  RunConfig c({{"a", "1.5"}, {"b", "7"}, {"c", "yes"}, {"d", "1, 2,3"}, {"e", "x"}});
  EXPECT_EQ(c.real("a"), 1.5);
  EXPECT_EQ(c.integer("b"), 7);
  EXPECT_TRUE(c.flag("c"));
  EXPECT_EQ(c.integer_list("d"), (std::vector<long>{1, 2, 3}));
  EXPECT_THROW((void)c.integer("a"), ParameterError);
  EXPECT_THROW((void)c.real("e"), ParameterError);
  EXPECT_THROW((void)c.flag("e"), ParameterError);
  EXPECT_THROW((void)c.text("zzz"), ParameterError);
}

TEST_F(CliTest, NoSubcommandIsUsageError) {
  EXPECT_EQ(run({}).code, kUsageError);
  EXPECT_EQ(run({"bogus"}).code, kUsageError);
  EXPECT_EQ(run({"fit", "--no-such-flag", "1"}).code, kUsageError);
}

TEST_F(CliTest, HelpExitsZero) {
  const Result r = run({"--help"});
  EXPECT_EQ(r.code, kSuccess);
  EXPECT_NE(r.out.find("montecarlo"), std::string::npos);
}

TEST_F(CliTest, FactorsRankOnePanel) {
  std::ostringstream csv;
  csv.precision(17);
  csv << "period,a,b,c,d\n";
  for (int t = 1; t <= 12; ++t) {
    const double f = std::sin(0.9 * t) + 0.1 * t;
    csv << t << ',' << f << ',' << 2 * f << ',' << -0.5 * f + 1 << ',' << 3 * f - 2 << '\n';
  }
  write("panel.csv", csv.str());
  const Result r = run({"factors", "--input", path("panel.csv"), "--kmax", "3", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("k = 1"), std::string::npos);
  const CsvTable factors = read_csv(path("o/factors.csv"));
  EXPECT_EQ(factors.header, (std::vector<std::string>{"period", "F1"}));
  EXPECT_EQ(factors.rows.size(), 12u);
  EXPECT_EQ(read_csv(path("o/loadings.csv")).rows.size(), 4u);
  const std::string report = slurp(path("o/factors_report.txt"));
  EXPECT_NE(report.find("ic.1 = "), std::string::npos);
  EXPECT_EQ(report.find("ic.2 = "), std::string::npos);
}

TEST_F(CliTest, FactorsMissingInputNamesPath) {
  const Result r = run({"factors", "--input", path("absent.csv"), "--out", path("o")});
  EXPECT_EQ(r.code, kUsageError);
  EXPECT_NE(r.err.find("absent.csv"), std::string::npos);
}

TEST_F(CliTest, FactorsKTooLarge) {
  write("two.csv", "period,a,b\n1,1,2\n2,3,1\n3,2,5\n4,0,1\n");
  const Result r = run({"factors", "--input", path("two.csv"), "--k", "3", "--out", path("o")});
  EXPECT_EQ(r.code, kUsageError);
}

TEST_F(CliTest, FitWritesPathQuantilesAndBands) {
  const Result r = run({"fit", "--input", fixture("case2_series.csv"), "--factors",
                        fixture("case2_true_factors.csv"), "--m", "5", "--bands", "20", "--out",
                        path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable p = read_csv(path("o/path.csv"));
  EXPECT_EQ(p.rows.size(), 5u);
  EXPECT_EQ(p.header[1], "intercept");
  EXPECT_EQ(p.header[3], "F1_lag1");
  const CsvTable q = read_csv(path("o/quantiles.csv"));
  EXPECT_EQ(q.header, (std::vector<std::string>{"period", "q0.05", "q0.25", "q0.75", "q0.95"}));
  EXPECT_EQ(q.rows.size(), 199u);
  EXPECT_EQ(read_csv(path("o/bands.csv")).rows.size(), 5u);
}

TEST_F(CliTest, TestOnCaseTwoFixture) {
  const Result r = run({"test", "--input", fixture("case2_series.csv"), "--panel",
                        fixture("case2_panel.csv"), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable table = read_csv(path("o/table.csv"));
  ASSERT_EQ(table.rows.size(), 3u);
  const std::vector<std::string> ms{"5", "9", "17"};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(table.rows[i][0], ms[i]);
    EXPECT_LT(*parse_real(table.rows[i][1]), 0.05);
    EXPECT_GT(*parse_real(table.rows[i][2]), 0.05);
  }
  const std::string report = slurp(path("o/test_report.txt"));
  EXPECT_NE(report.find("m17.h02.status = run"), std::string::npos);
  EXPECT_NE(report.find("#% seed = 20240101"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("o/surface_h02_m9.csv")));
}

TEST_F(CliTest, TestOnCaseOneFixtureSkipsH02) {
  const Result r = run({"test", "--input", fixture("case1_series.csv"), "--panel",
                        fixture("case1_panel.csv"), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable table = read_csv(path("o/table.csv"));
  for (const auto& row : table.rows) {
    EXPECT_GT(*parse_real(row[1]), 0.05);
    EXPECT_EQ(row[2], "");
  }
  const std::string report = slurp(path("o/test_report.txt"));
  EXPECT_NE(report.find("m5.h02.status = skipped"), std::string::npos);
  EXPECT_NE(report.find("m5.h02.note = "), std::string::npos);
}

TEST_F(CliTest, TestRejectsBothFactorSources) {
  const Result r = run({"test", "--input", fixture("case2_series.csv"), "--panel",
                        fixture("case2_panel.csv"), "--factors",
                        fixture("case2_true_factors.csv"), "--out", path("o")});
  EXPECT_EQ(r.code, kUsageError);
}

TEST_F(CliTest, SingularDesignIsNumericFailure) {
  std::ostringstream csv;
  csv << "period,y\n";
  for (int t = 1; t <= 30; ++t) csv << t << ",4\n";
  write("flat.csv", csv.str());
  const Result r = run({"fit", "--input", path("flat.csv"), "--out", path("o")});
  EXPECT_EQ(r.code, kNumericError) << r.err;
}

TEST_F(CliTest, MontecarloInvalidCase) {
  EXPECT_EQ(run({"montecarlo", "--cases", "case3", "--out", path("o")}).code, kUsageError);
}

TEST_F(CliTest, MontecarloFullScaleWarnsFirst) {
  // The warning is printed before validation rejects the tiny sample size.
  const Result r = run({"montecarlo", "--full-scale", "--sizes", "5", "--out", path("o")});
  EXPECT_EQ(r.code, kUsageError);
  EXPECT_EQ(r.err.rfind("warning: full-scale", 0), 0u) << r.err;
}

TEST_F(CliTest, MontecarloWritesTables) {
  const Result r = run({"montecarlo", "--sizes", "40", "--mc-reps", "3", "--boot-reps", "5",
                        "--gamma-points", "3", "--m", "3", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_csv(path("o/rejection.csv")).rows.size(), 4u);
  EXPECT_NE(slurp(path("o/rejection.txt")).find("case1 CvM"), std::string::npos);
}

TEST_F(CliTest, SmoothFlagsCrossingPeriodAndContinues) {
  write("q.csv",
        "period,q0.05,q0.25,q0.75,q0.95\n"
        "a,-1.6,-0.7,0.7,1.6\n"
        "b,-1.6,0.9,0.7,1.6\n"
        "c,-1.0,-0.2,0.9,2.5\n");
  const Result r = run({"smooth", "--input", path("q.csv"), "--grid", "200", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable params = read_csv(path("o/skewt_params.csv"));
  ASSERT_EQ(params.rows.size(), 3u);
  EXPECT_EQ(params.rows[0][8], "ok");
  EXPECT_EQ(params.rows[1][1], "nan");
  EXPECT_NE(params.rows[1][8], "ok");
  EXPECT_EQ(params.rows[2][8], "ok");
  const CsvTable density = read_csv(path("o/density.csv"));
  EXPECT_EQ(density.rows.size(), 400u);
  EXPECT_EQ(density.header, (std::vector<std::string>{"period", "y", "density"}));
}

TEST_F(CliTest, SmoothAcceptsBareProbabilityHeaders) {
  write("q.csv", "period,0.05,0.25,0.75,0.95\n1,-1.6,-0.7,0.7,1.6\n");
  const Result r = run({"smooth", "--input", path("q.csv"), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_csv(path("o/skewt_params.csv")).rows.size(), 1u);
}

TEST_F(CliTest, ConfigFileWithOverrides) {
  write("run.cfg", "p = 2\nm = 3\n");
  const Result r = run({"fit", "--config", path("run.cfg"), "--input",
                        fixture("case1_series.csv"), "--m", "4", "--predict-taus", "", "--out",
                        path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(path("o/path.csv"));
  EXPECT_NE(text.find("#% p = 2\n"), std::string::npos);
  EXPECT_NE(text.find("#% m = 4\n"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("o/quantiles.csv")));
}

TEST_F(CliTest, UnknownConfigKey) {
  write("run.cfg", "bogus = 1\n");
  const Result r = run({"fit", "--config", path("run.cfg"), "--out", path("o")});
  EXPECT_EQ(r.code, kUsageError);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
}

TEST_F(CliTest, ConfigFromAnotherCommandRejected) {
  ASSERT_EQ(run({"simulate", "--T", "30", "--panel-n", "5", "--out", path("s")}).code, 0);
  const Result r = run({"fit", "--config", path("s/series.csv"), "--out", path("o")});
  EXPECT_EQ(r.code, kUsageError);
}

TEST_F(CliTest, BadNumberIsUsageError) {
  const Result r = run({"fit", "--input", fixture("case1_series.csv"), "--p", "two", "--out",
                        path("o")});
  EXPECT_EQ(r.code, kUsageError);
  EXPECT_NE(r.err.find("'p'"), std::string::npos);
}

TEST_F(CliTest, ReproducibleSimulate) {
  expect_reproducible({"simulate", "--case", "case2", "--T", "60", "--panel-n", "20"}, "series.csv");
}

TEST_F(CliTest, ReproducibleFactors) {
  expect_reproducible({"factors", "--input", fixture("case2_panel.csv")}, "factors.csv");
}

TEST_F(CliTest, ReproducibleFit) {
  expect_reproducible({"fit", "--input", fixture("case2_series.csv"), "--bands", "15"},
                      "path.csv");
}

TEST_F(CliTest, ReproducibleTest) {
  expect_reproducible({"test", "--input", fixture("case2_series.csv"), "--panel",
                       fixture("case2_panel.csv"), "--boot-reps", "49", "--m-list", "5,9"},
                      "test_report.txt");
}

TEST_F(CliTest, ReproducibleMontecarlo) {
  expect_reproducible({"montecarlo", "--sizes", "40", "--mc-reps", "4", "--boot-reps", "5",
                       "--gamma-points", "3", "--m", "3", "--h02"},
                      "rejection.csv");
}

TEST_F(CliTest, ReproducibleSmooth) {
  write("q.csv", "period,q0.05,q0.25,q0.75,q0.95\n1,-1.6,-0.7,0.7,1.6\n2,-1.0,-0.2,0.9,2.5\n");
  expect_reproducible({"smooth", "--input", path("q.csv"), "--grid", "7"}, "skewt_params.csv");
}

}  // namespace
}  // namespace qarspec::cli

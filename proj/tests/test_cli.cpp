#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "hazardstream/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hazardstream_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) {
    const std::string cmd = std::string(HAZARDSTREAM_CLI) + " " + args + " >" + path("stdout.txt") + " 2>" +
                            path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  static void write(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

  // Data rows (without header) of a dataset CSV.
  static std::vector<std::string> data_lines(const std::string& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) out.push_back(line);
    return out;
  }

  static std::string header_of(const std::string& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
  }

  // Numeric body of a surface CSV: rows of (t, values...).
  static std::vector<std::vector<std::string>> surface(const std::string& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> f;
      for (auto v : hazardstream::split(line, ',')) f.emplace_back(v);
      out.push_back(std::move(f));
    }
    return out;
  }

  void small_lattice_files() {
    write(path("points.json"), R"({"points": [{"x_c": [0.5, 2.0], "x_d": [0, 0, 0]},
                                              {"x_c": [-0.25, 4.0], "x_d": [0, 0, 1]}]})");
  }

  std::string fit_flags() const {
    return "--preset-censoring 20 --reflect-boundary --lattice-t 0.5:4:8 --x-points " + path("points.json");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateIsDeterministic) {
  ASSERT_EQ(run("simulate --n 1000 --seed 7 --shift 1 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("simulate --n 1000 --seed 7 --shift 1 --out " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(data_lines(path("a.csv")).size(), 1000u);
  EXPECT_EQ(header_of(path("a.csv")), "y,delta,x1,x2,d1,d2,d3");
  const auto side = json::parse(slurp(path("a.csv.json")));
  EXPECT_EQ(side["seed"], 7);
  EXPECT_EQ(side["censoring_shift"], 1.0);
  ASSERT_EQ(run("simulate --n 1000 --seed 8 --shift 1 --out " + path("c.csv")), 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(CliTest, SimulateCalibratedCensoring) {
  ASSERT_EQ(run("simulate --n 20000 --seed 3 --censoring 0.4 --out " + path("d.csv")), 0);
  const auto side = json::parse(slurp(path("d.csv.json")));
  EXPECT_NEAR(side["empirical_censored_fraction"].get<double>(), 0.4, 0.01);
  EXPECT_TRUE(side["calibrated"].get<bool>());
}

TEST_F(CliTest, SimulateUsageErrors) {
  EXPECT_EQ(run("simulate --model weibull --out " + path("x.csv")), 2);
  EXPECT_NE(slurp(path("stderr.txt")).find("weibull"), std::string::npos);
  EXPECT_EQ(run("simulate --n 10"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_NE(run("simulate --n 10 --out " + path("no/such/dir/x.csv")), 0);
}

TEST_F(CliTest, SimulateMechanismColumns) {
  ASSERT_EQ(run("simulate --n 200 --mechanism ltrc_cure --cure-fraction 0.2 --out " + path("m.csv")), 0);
  EXPECT_EQ(header_of(path("m.csv")), "y,delta,x1,x2,d1,d2,d3,l,c");
  ASSERT_EQ(run("simulate --n 200 --mechanism cr --cause-weights 1,2 --out " + path("cr.csv")), 0);
  EXPECT_EQ(header_of(path("cr.csv")), "y,delta,x1,x2,d1,d2,d3,cause");
}

TEST_F(CliTest, CalibrateConstantColumnFails) {
  std::string text = "y,delta,x1,x2,d1,d2,d3\n";
  for (int i = 0; i < 50; ++i) text += "1," + std::to_string(i % 2) + "," + std::to_string(0.1 * i) + ",5,0,0,0\n";
  write(path("const.csv"), text);
  EXPECT_EQ(run("calibrate --data " + path("const.csv") + " --out " + path("st.json")), 3);
  EXPECT_NE(slurp(path("stderr.txt")).find("'x2'"), std::string::npos);
}

TEST_F(CliTest, CalibrateMomentsAndReuse) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::exponential_distribution<double> e(1.0);
  std::ostringstream os;
  os << "y,delta,age,d1\n";
  for (int i = 0; i < 100000; ++i)
    os << hazardstream::format_double(e(rng)) << ',' << (i % 5 ? 1 : 0) << ',' << hazardstream::format_double(g(rng))
       << ',' << (i % 3 == 0) << '\n';
  write(path("norm.csv"), os.str());
  ASSERT_EQ(run("calibrate --data " + path("norm.csv") + " --out " + path("st.json") +
                " --continuous age --discrete d1"),
            0);
  const auto doc = json::parse(slurp(path("st.json")));
  EXPECT_NEAR(doc["columns"][0]["mean"].get<double>(), 0.0, 0.02);
  EXPECT_NEAR(doc["columns"][0]["sd"].get<double>(), 1.0, 0.02);
  EXPECT_EQ(doc["points"].size(), 6u);
  ASSERT_EQ(run("fit --data " + path("norm.csv") + " --snapshot " + path("n.snap") +
                " --continuous age --discrete d1 --standardize " + path("st.json") + " --x-points " +
                path("st.json") + " --lattice-t 0.1:3:10 --preset-censoring 20"),
            0)
      << slurp(path("stderr.txt"));
  const auto s = surface(path("n_survival.csv"));
  EXPECT_EQ(s.size(), 11u);
}

TEST_F(CliTest, FitThenUpdateEqualsSingleFit) {
  small_lattice_files();
  ASSERT_EQ(run("simulate --n 3000 --seed 11 --shift 1 --out " + path("all.csv")), 0);
  const auto lines = data_lines(path("all.csv"));
  const auto head = header_of(path("all.csv"));
  std::string a = head + "\n", b = head + "\n";
  for (std::size_t i = 0; i < lines.size(); ++i) (i < 1200 ? a : b) += lines[i] + "\n";
  write(path("a.csv"), a);
  write(path("b.csv"), b);
  ASSERT_EQ(run("fit --data " + path("all.csv") + " --snapshot " + path("one.snap") + " " + fit_flags()), 0);
  ASSERT_EQ(run("fit --data " + path("a.csv") + " --snapshot " + path("half.snap") + " " + fit_flags()), 0);
  ASSERT_EQ(run("update --from " + path("half.snap") + " --data " + path("b.csv") + " --snapshot " + path("two.snap")),
            0);
  EXPECT_EQ(slurp(path("one.snap")), slurp(path("two.snap")));
  for (const char* q : {"_hazard.csv", "_cumhaz.csv", "_survival.csv"})
    EXPECT_EQ(slurp(path(std::string("one") + q)), slurp(path(std::string("two") + q))) << q;
  const auto out = json::parse(slurp(path("stdout.txt")));
  EXPECT_EQ(out["n"], 3000);
  EXPECT_EQ(out["records"], 1800);
}

TEST_F(CliTest, UpdateWithNoRowsLeavesSurfacesUnchanged) {
  small_lattice_files();
  ASSERT_EQ(run("simulate --n 500 --seed 12 --out " + path("d.csv")), 0);
  write(path("empty.csv"), header_of(path("d.csv")) + "\n");
  ASSERT_EQ(run("fit --data " + path("d.csv") + " --snapshot " + path("a.snap") + " " + fit_flags()), 0);
  ASSERT_EQ(run("update --from " + path("a.snap") + " --data " + path("empty.csv") + " --snapshot " + path("b.snap")), 0);
  EXPECT_EQ(slurp(path("a.snap")), slurp(path("b.snap")));
  EXPECT_EQ(slurp(path("a_hazard.csv")), slurp(path("b_hazard.csv")));
}

TEST_F(CliTest, UpdateRejectsMismatchedConfig) {
  small_lattice_files();
  ASSERT_EQ(run("simulate --n 300 --seed 13 --out " + path("d.csv")), 0);
  ASSERT_EQ(run("fit --data " + path("d.csv") + " --snapshot " + path("a.snap") + " " + fit_flags()), 0);
  EXPECT_EQ(run("update --from " + path("a.snap") + " --data " + path("d.csv") + " --snapshot " + path("b.snap") +
                " --kernel epanechnikov"),
            2);
  EXPECT_NE(slurp(path("stderr.txt")).find("digest"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("b.snap")));
  EXPECT_EQ(run("update --from " + path("a.snap") + " --data " + path("d.csv") + " --snapshot " + path("c.snap") +
                " --preset-censoring 20 --reflect-boundary"),
            0);
}

TEST_F(CliTest, EmptyDataGivesTrivialSurfaces) {
  small_lattice_files();
  write(path("empty.csv"), "y,delta,x1,x2,d1,d2,d3\n");
  ASSERT_EQ(run("fit --data " + path("empty.csv") + " --snapshot " + path("e.snap") + " " + fit_flags()), 0);
  EXPECT_NE(slurp(path("stderr.txt")).find("warning"), std::string::npos);
  const auto h = surface(path("e_hazard.csv"));
  const auto s = surface(path("e_survival.csv"));
  ASSERT_EQ(h.size(), 9u);
  for (std::size_t r = 1; r < h.size(); ++r)
    for (std::size_t c = 1; c < h[r].size(); ++c) {
      EXPECT_EQ(h[r][c], "0");
      EXPECT_EQ(s[r][c], "1");
    }
}

TEST_F(CliTest, SchemaAndMalformedRows) {
  small_lattice_files();
  ASSERT_EQ(run("simulate --n 1000 --seed 14 --out " + path("d.csv")), 0);
  EXPECT_EQ(run("fit --data " + path("d.csv") + " --snapshot " + path("l.snap") + " --mechanism ltrc " + fit_flags()),
            3);
  EXPECT_NE(slurp(path("stderr.txt")).find("'l'"), std::string::npos);

  auto lines = data_lines(path("d.csv"));
  std::string few = header_of(path("d.csv")) + "\n", many = few;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    few += (i == 10 ? std::string("garbage,row") : lines[i]) + "\n";
    many += (i % 20 == 0 ? std::string("1,1,x,0,0,0,0") : lines[i]) + "\n";
  }
  write(path("few.csv"), few);
  write(path("many.csv"), many);
  EXPECT_EQ(run("fit --data " + path("few.csv") + " --snapshot " + path("f.snap") + " " + fit_flags()), 0);
  const auto report = slurp(path("f_malformed.csv"));
  EXPECT_NE(report.find("\n12,"), std::string::npos) << report;
  EXPECT_EQ(run("fit --data " + path("many.csv") + " --snapshot " + path("m.snap") + " " + fit_flags()), 3);
}

TEST_F(CliTest, PredictMatchesSurfacesAndClamps) {
  small_lattice_files();
  ASSERT_EQ(run("simulate --n 2000 --seed 15 --shift 1 --out " + path("d.csv")), 0);
  ASSERT_EQ(run("fit --data " + path("d.csv") + " --snapshot " + path("p.snap") + " " + fit_flags()), 0);
  const auto hz = surface(path("p_hazard.csv"));
  const auto sv = surface(path("p_survival.csv"));
  write(path("q.csv"),
        "t,x1,x2,d1,d2,d3\n"
        "1,0.5,2,0,0,0\n"
        "3,-0.25,4,0,0,1\n"
        "99,0.5,2,0,0,0\n"
        "0.75,0.5,2,0,0,0\n");
  ASSERT_EQ(run("predict --snapshot " + path("p.snap") + " --query " + path("q.csv") + " --out " + path("o.csv")), 0)
      << slurp(path("stderr.txt"));
  const auto out = surface(path("o.csv"));
  ASSERT_EQ(out.size(), 5u);
  // Columns: t,x1,x2,d1,d2,d3,t_used,hazard,cumulative_hazard,survival,clamped,error
  EXPECT_EQ(out[0][7], "hazard");
  EXPECT_EQ(out[1][7], hz[2][1]);  // t = 1 is the third grid point
  EXPECT_EQ(out[1][9], sv[2][1]);
  EXPECT_EQ(out[2][7], hz[6][2]);  // t = 3
  EXPECT_EQ(out[3][6], "4");
  EXPECT_EQ(out[3][10], "1");
  EXPECT_EQ(out[3][9], sv[8][1]);
  EXPECT_EQ(out[1][10], "0");
  for (std::size_t r = 1; r < out.size(); ++r) {
    const double s = std::stod(out[r][9]);
    EXPECT_TRUE(s >= 0.0 && s <= 1.0);
  }
}

TEST_F(CliTest, PredictOffLatticeRowsReported) {
  small_lattice_files();
  ASSERT_EQ(run("simulate --n 300 --seed 16 --out " + path("d.csv")), 0);
  ASSERT_EQ(run("fit --data " + path("d.csv") + " --snapshot " + path("p.snap") + " " + fit_flags()), 0);
  write(path("q.csv"), "t,x1,x2,d1,d2,d3\n1,0.5,2,0,0,0\n1,0.6,2,0,0,0\n");
  EXPECT_EQ(run("predict --snapshot " + path("p.snap") + " --query " + path("q.csv") + " --out " + path("o.csv")), 1);
  const auto out = surface(path("o.csv"));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[1].back(), "");
  EXPECT_EQ(out[2].back(), "off-lattice covariates");
}

TEST_F(CliTest, CorruptSnapshotRejected) {
  small_lattice_files();
  ASSERT_EQ(run("simulate --n 300 --seed 17 --out " + path("d.csv")), 0);
  ASSERT_EQ(run("fit --data " + path("d.csv") + " --snapshot " + path("p.snap") + " " + fit_flags()), 0);
  auto bytes = slurp(path("p.snap"));
  bytes[bytes.size() / 2] ^= 0x11;
  write(path("bad.snap"), bytes);
  EXPECT_EQ(run("update --from " + path("bad.snap") + " --data " + path("d.csv") + " --snapshot " + path("x.snap")), 1);
  EXPECT_NE(slurp(path("stderr.txt")).find("snapshot"), std::string::npos);
}

TEST_F(CliTest, BenchIsDeterministic) {
  write(path("plan.json"),
        R"({"model": "cph", "sample_sizes": [60, 120], "replications": 3, "calibration_draws": 20000, "seed": 9})");
  ASSERT_EQ(run("bench --plan " + path("plan.json") + " --out " + path("r1.csv") + " --threads 1"), 0)
      << slurp(path("stderr.txt"));
  ASSERT_EQ(run("bench --plan " + path("plan.json") + " --out " + path("r2.csv") + " --threads 2 --emit-plot-data " +
                path("plot.csv")),
            0);
  EXPECT_EQ(slurp(path("r1.csv")), slurp(path("r2.csv")));
  EXPECT_EQ(header_of(path("r1.csv")), "model,censor_target,n,replications,mise_median,mise_q25,mise_q75,seed");
  EXPECT_EQ(data_lines(path("r1.csv")).size(), 2u);
  EXPECT_EQ(data_lines(path("plot.csv")).size(), 2u * 5400u);
  write(path("zero.json"), R"({"replications": 0})");
  EXPECT_EQ(run("bench --plan " + path("zero.json")), 2);
}

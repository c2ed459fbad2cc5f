#include "gevbayes/cli.hpp"
#include "gevbayes/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace gevbayes;
namespace fs = std::filesystem;

namespace {

struct Out {
  int code;
  std::string out, err;
};

Out run(std::vector<std::string> args) {
  args.insert(args.begin(), "gevbayes");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  return {code, o.str(), e.str()};
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("gevbayes_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Io, SampleRoundTripIsExact) {
  TempDir d;
  const Sample s = gev_sample({1.3, -0.2, 0.4}, 10000, 5);
  save_sample(d.file("y.csv"), s.values());
  const Sample t = load_sample(d.file("y.csv"));
  EXPECT_EQ(s.values(), t.values());
}

TEST(Io, ParseErrors) {
  std::istringstream empty("");
  try {
    parse_sample(empty, "a.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("no observations"), std::string::npos);
  }
  std::istringstream header_only("y\n");
  EXPECT_THROW(parse_sample(header_only, "b.csv"), ParseError);
  std::istringstream bad("y\n1.0\nabc\n");
  try {
    parse_sample(bad, "c.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("c.csv:3"), std::string::npos);
  }
  std::istringstream ok("# comment\n\n 1.5 \n-2\n");
  EXPECT_EQ(parse_sample(ok).n(), 2u);
  EXPECT_THROW(load_sample("/nonexistent/file.csv"), IoError);
}

TEST(Io, NonFiniteJsonValues) {
  EXPECT_TRUE(jnum(kNaN).is_null());
  EXPECT_EQ(jget(jnum(kInf)), kInf);
  EXPECT_EQ(jget(jnum(-kInf)), -kInf);
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Cli, SimulateThenFitFromFile) {
  TempDir d;
  const auto a = run({"simulate", "--theta0", "1,0,0.3", "--n", "400", "--seed", "3", "--out", d.file("y.txt")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(load_sample(d.file("y.txt")).n(), 400u);
  const auto b = run({"fit", "--data", d.file("y.txt")});
  ASSERT_EQ(b.code, 0) << b.err;
  std::istringstream lines(b.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(nlohmann::json::parse(first).at("type"), "header");
  const auto j = nlohmann::json::parse(second);
  EXPECT_NEAR(j.at("theta_hat").at(2).get<double>(), 0.3, 0.15);
  const auto t = run({"fit", "--data", d.file("y.txt"), "--format", "text"});
  EXPECT_EQ(t.code, 0);
  EXPECT_NE(t.out.find("(n = 400"), std::string::npos);
}

TEST(Cli, RerunsAreByteIdentical) {
  const std::vector<std::string> args = {"evidence", "--theta0", "1,0,0.5", "--n", "80", "--seed", "2"};
  const auto a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const std::vector<std::string> m = {"mcmc", "--n", "100", "--iter", "3000", "--burn", "1000"};
  EXPECT_EQ(run(m).out, run(m).out);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"nosuch"}).code, 2);
  EXPECT_EQ(run({"fit", "--bogus"}).code, 2);
  EXPECT_EQ(run({"fit", "--data", "/nonexistent/y.csv"}).code, 2);
  EXPECT_EQ(run({"fit", "--prior", "weird"}).code, 2);
  EXPECT_EQ(run({"simulate", "--theta0", "-1,0,0"}).code, 2);
  EXPECT_EQ(run({"--version"}).code, 0);
  TempDir d;
  write(d.file("flat.txt"), "y\n1\n1\n1\n1\n");
  // a constant sample is bad input
  const auto flat = run({"fit", "--data", d.file("flat.txt")});
  EXPECT_EQ(flat.code, 2);
  EXPECT_FALSE(flat.err.empty());
}

TEST(Cli, ConfigFile) {
  TempDir d;
  write(d.file("ok.toml"), "[simulate]\nn = [25]\nseed = [4]\n");
  const auto a = run({"--config", d.file("ok.toml"), "simulate"});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run({"simulate", "--n", "25", "--seed", "4"});
  EXPECT_EQ(a.out, b.out);
  write(d.file("bad.toml"), "unknown_key = 3\n");
  const auto c = run({"--config", d.file("bad.toml"), "simulate"});
  EXPECT_EQ(c.code, 2);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  TempDir d;
  ::setenv(cli::kOutputDirEnv, d.file("outdir").c_str(), 1);
  const auto a = run({"simulate", "--n", "10", "--out", "sub/y.txt"});
  ::unsetenv(cli::kOutputDirEnv);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_TRUE(fs::exists(d.file("outdir/sub/y.txt")));
  EXPECT_EQ(load_sample(d.file("outdir/sub/y.txt")).n(), 10u);
}

TEST(Cli, StudyWritesJsonlAndCsv) {
  TempDir d;
  const auto a = run({"study", "--n", "30,60", "--seeds", "1,2", "--out", d.file("s.jsonl"), "--csv", d.file("s.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  std::ifstream in(d.file("s.jsonl"));
  const StudyReport rep = read_study_jsonl(in);
  EXPECT_EQ(rep.records.size(), 4u);
  const std::string csv = slurp(d.file("s.csv"));
  EXPECT_EQ(csv.rfind("n,cells,failed", 0), 0u);
}

TEST(Cli, PriorParsing) {
  EXPECT_EQ(cli::parse_prior("flat").name, "flat");
  EXPECT_DOUBLE_EQ(cli::parse_prior("power:2").alpha, 2.0);
  EXPECT_FALSE(cli::parse_prior("normal:0,1,0,5,0,1").scale_invariant());
  EXPECT_THROW(cli::parse_prior("normal:1,2"), std::invalid_argument);
  EXPECT_THROW(cli::parse_prior("power:x"), std::invalid_argument);
}

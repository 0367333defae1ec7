#include "tlsbf/cli.hpp"
#include "tlsbf/dataio.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tlsbf;

namespace {

const std::string toy = std::string(TLSBF_DATA_DIR) + "/toy.csv";

struct Run
{
  int code;
  std::string out;
  std::string err;
};

Run
run(std::vector<std::string> args)
{
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return { code, out.str(), err.str() };
}

std::filesystem::path
temp(const std::string& name)
{
  return std::filesystem::temp_directory_path() / ("tlsbf_cli_" + name);
}

} // namespace

TEST_CASE("fit with BIC writes a valid artifact")
{
  const auto r = run({ "fit", "--data", toy, "--bic", "--lambda-count", "8" });
  REQUIRE(r.code == exit_ok);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["schema_version"] == 1);
  CHECK(j["components"].size() == 5);
  CHECK(j["feature_names"][0] == "x1");
  CHECK(j["provenance"]["input_digest"] == file_digest(toy));
  CHECK(j["config"]["selection"] == "bic");
  const auto art = fit_from_json(r.out);
  CHECK(art.fit.d() == 5);
  CHECK(!art.fit.active_set.empty());

  // Same input, same bytes.
  CHECK(run({ "fit", "--data", toy, "--bic", "--lambda-count", "8" }).out == r.out);
}

TEST_CASE("fit with a fixed lambda to a file")
{
  const auto path = temp("fit.json");
  const auto r = run({ "--seed", "9", "fit", "--data", toy, "--lambda", "0.05", "--bandwidth", "0.2", "--out",
                       path.string() });
  REQUIRE(r.code == exit_ok);
  const auto art = load_fit(path);
  std::filesystem::remove(path);
  CHECK(art.fit.lambda == 0.05);
  CHECK(art.seed == 9);
  CHECK(art.fit.bandwidths[3] == 0.2);
}

TEST_CASE("usage errors exit with 1")
{
  auto r = run({ "fit", "--data", toy, "--bic", "--frobnicate" });
  CHECK(r.code == exit_usage);
  CHECK(r.err.find("--frobnicate") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);

  CHECK(run({}).code == exit_usage);
  CHECK(run({ "fit", "--data", toy }).code == exit_usage);
  CHECK(run({ "fit", "--data", toy, "--bic", "--lambda", "0.1" }).code == exit_usage);
  CHECK(run({ "fit", "--data", toy, "--bic", "--kernel", "gaussian" }).code == exit_usage);
  CHECK(run({ "fit", "--data", toy, "--lambda", "0.1", "--bandwidth", "0.1,0.2" }).code == exit_usage);
  CHECK(run({ "tl-fit", "--data", toy, "--aux", toy, "--lambda1", "0.1" }).code == exit_usage);
  CHECK(run({ "--help" }).code == exit_ok);
}

TEST_CASE("data errors exit with 2")
{
  auto r = run({ "fit", "--data", "/nonexistent.csv", "--bic" });
  CHECK(r.code == exit_data);
  CHECK(r.err.find("nonexistent") != std::string::npos);
  CHECK(run({ "fit", "--data", toy, "--response", "zz", "--bic" }).code == exit_data);

  const auto wide = temp("wide.csv");
  {
    std::ofstream f(wide);
    f << "a,y\n0.1,1\n1.5,2\n0.3,3\n";
  }
  CHECK(run({ "fit", "--data", wide.string(), "--lambda", "0.1", "--bandwidth", "0.3" }).code == exit_data);
  std::filesystem::remove(wide);
}

TEST_CASE("numerical failures exit with 3")
{
  const auto clumped = temp("clumped.csv");
  {
    std::ofstream f(clumped);
    f << "a,y\n";
    for (int i = 0; i < 60; ++i)
      f << 0.45 + 0.001 * (i % 10) << ',' << i % 7 << '\n';
  }
  const auto r = run({ "fit", "--data", clumped.string(), "--lambda", "0.1", "--bandwidth", "0.02" });
  CHECK(r.code == exit_numerical);
  CHECK(r.err.find("ill-conditioned") != std::string::npos);
  std::filesystem::remove(clumped);
}

TEST_CASE("transfer fit and detection")
{
  const auto r = run({ "tl-fit", "--data", toy, "--aux", toy, "--lambda1", "0.05", "--lambda2", "0.1" });
  REQUIRE(r.code == exit_ok);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["config"]["command"] == "tl-fit");
  CHECK(j["config"]["lambda2"] == 0.1);

  const auto d = run({ "detect", "--data", toy, "--aux", toy, "--splits", "1", "--lambda-count", "5" });
  REQUIRE(d.code == exit_ok);
  std::istringstream lines(d.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "source,score,accepted");
  std::getline(lines, line);
  CHECK(line.rfind(toy + ",", 0) == 0);
}

TEST_CASE("simulate is reproducible for a fixed seed")
{
  const std::vector<std::string> args{ "--seed", "3",     "simulate",       "--n0",      "60",
                                       "--d",    "13",    "--n-aux",        "80",        "80",
                                       "--reps", "2",     "--methods",      "LL,NW",     "--mc-size",
                                       "2000",   "--quadrature", "10000",   "--lambda-count", "5" };
  const auto a = run(args);
  REQUIRE(a.code == exit_ok);
  const auto b = run(args);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("cell,method,rep,seed,mise,mc_se,runtime_s,status\n", 0) == 0);
  CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 5);

  auto other = args;
  other[1] = "4";
  CHECK(run(other).out != a.out);

  CHECK(run({ "simulate", "--d", "5" }).code == exit_usage);
  CHECK(run({ "simulate", "--methods", "GAM" }).code == exit_usage);
}

TEST_CASE("screen pipeline")
{
  const auto scaling = temp("scaling.json");
  const auto r = run({ "screen", "--data", toy, "--top-var", "4", "--top-cor", "2", "--scaling-out",
                       scaling.string() });
  REQUIRE(r.code == exit_ok);
  std::istringstream in(r.out);
  const auto t = parse_csv(in, "y");
  CHECK(t.columns() == 2);
  CHECK(sample_sd(t.response) == doctest::Approx(2.5).epsilon(1e-9));
  std::ifstream sc(scaling);
  const auto j = nlohmann::json::parse(sc);
  CHECK(j["features"].size() == 2);
  std::filesystem::remove(scaling);
}

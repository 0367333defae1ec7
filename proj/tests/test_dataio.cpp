#include "oracles.hpp"

#include "tlsbf/dataio.hpp"
#include "tlsbf/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace tlsbf;

namespace {

RawTable
csv(const std::string& text, const std::string& response = "y")
{
  std::istringstream in(text);
  return parse_csv(in, response);
}

double
pearson(std::span<const double> a, std::span<const double> b)
{
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST_CASE("CSV parsing")
{
  const auto t = csv("a, y ,b\n1,2,3\n4,5,6\n\n7,8,9\n");
  CHECK(t.feature_names == std::vector<std::string>{ "a", "b" });
  CHECK(t.response_name == "y");
  CHECK(t.rows() == 3);
  CHECK(t.response == std::vector<double>{ 2, 5, 8 });
  CHECK(t.features(2, 1) == 9.0);
  CHECK(t.dropped_rows == 0);
  CHECK(t.warnings.empty());

  const auto bad = csv("a,y\n1,2\n3,oops\n5,\n+7,1e-3\n9,10,11\n");
  CHECK(bad.dropped_rows == 3);
  CHECK(bad.rows() == 2);
  CHECK(bad.features(1, 0) == 7.0);
  CHECK(bad.response[1] == 1e-3);
  REQUIRE(bad.warnings.size() == 1);
  CHECK(bad.warnings[0].find("3") != std::string::npos);

  CHECK_THROWS_AS(csv("1,2\n3,4\n"), DataError);
  CHECK_THROWS_AS(csv("a,b\n1,2\n"), DataError);
  CHECK_THROWS_AS(csv(""), DataError);
  CHECK_THROWS_AS(csv("a,y\nx,z\n"), DataError);
  CHECK_THROWS_AS(csv("a,y\n1,nan\n"), DataError);
  CHECK(csv("a,target\n1,2\n2,3\n", "target").rows() == 2);

  std::ostringstream out;
  write_csv(out, t);
  CHECK(out.str() == "a,b,y\n1,3,2\n4,6,5\n7,9,8\n");
  const auto back = csv(out.str());
  CHECK(back.response == t.response);
}

TEST_CASE("feature screening")
{
  std::mt19937_64 rng(501);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t n = 200, p = 30;
  RawTable t;
  t.response_name = "y";
  t.features = Matrix(n, p);
  t.response.resize(n);
  for (std::size_t j = 0; j < p; ++j)
    t.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      t.features(i, j) = std::pow(1.3, static_cast<double>(j)) * z(rng);
    t.response[i] = t.features(i, 25) + 0.1 * t.features(i, 28) + z(rng);
  }

  // Highest variances are the last columns; correlation then picks 25 and 28.
  const auto s = screen_features(t, 10, 2);
  CHECK(s.feature_names == std::vector<std::string>{ "x25", "x28" });
  CHECK(s.rows() == n);
  CHECK(s.features(7, 0) == t.features(7, 25));

  const auto v = screen_features(t, 5, 5);
  CHECK(v.feature_names == std::vector<std::string>{ "x25", "x26", "x27", "x28", "x29" });
  // Screening its own output changes nothing.
  const auto again = screen_features(v, 5, 5);
  CHECK(again.feature_names == v.feature_names);

  const auto all = screen_features(t, 100, 200);
  CHECK(all.columns() == p);
  CHECK(all.warnings.size() == 2);

  // Ties keep the earlier column.
  RawTable tie;
  tie.response_name = "y";
  tie.feature_names = { "a", "b", "c" };
  tie.features = Matrix(4, 3);
  tie.response = { 1, 2, 3, 5 };
  for (std::size_t i = 0; i < 4; ++i) {
    tie.features(i, 0) = static_cast<double>(i % 2);
    tie.features(i, 1) = static_cast<double>(i);
    tie.features(i, 2) = static_cast<double>(i % 2);
  }
  CHECK(screen_features(tie, 2, 2).feature_names == std::vector<std::string>{ "a", "b" });
}

TEST_CASE("unit-interval scaling")
{
  auto t = csv("a,b,y\n1,5,0\n2,5,1\n3,5,2\n");
  const auto s = scale_unit_interval(t);
  CHECK(s.table.features(0, 0) == 0.0);
  CHECK(s.table.features(1, 0) == 0.5);
  CHECK(s.table.features(2, 0) == 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(s.table.features(i, 1) == 0.5);
  CHECK(s.scaling.constant_columns == std::vector<std::size_t>{ 1 });
  CHECK(!s.table.warnings.empty());
  CHECK(s.table.response == t.response);

  auto fresh = csv("a,b,y\n0,5,0\n2.5,4,1\n4,6,2\n");
  CHECK(apply_scaling(fresh, s.scaling) == 2);
  CHECK(fresh.features(0, 0) == 0.0);
  CHECK(fresh.features(1, 0) == 0.75);
  CHECK(fresh.features(2, 0) == 1.0);

  auto narrow = csv("a,y\n1,2\n2,3\n");
  CHECK_THROWS_AS(apply_scaling(narrow, s.scaling), DataError);

  // Scaled output is a valid sample.
  CHECK_NOTHROW(to_sample(s.table));
  CHECK_THROWS_AS(to_sample(t), DomainError);
}

TEST_CASE("response normalization")
{
  std::mt19937_64 rng(503);
  const auto raw = oracle::uniform_sample(300, 2, rng);
  RawTable t;
  t.feature_names = { "a", "b" };
  t.features = raw.x();
  t.response_name = "y";
  t.response.assign(raw.y().begin(), raw.y().end());
  const auto n = normalize_response(t);
  CHECK(sample_sd(n.response) == doctest::Approx(2.5).epsilon(1e-12));
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(pearson(n.features.col(j), n.response) ==
          doctest::Approx(pearson(t.features.col(j), t.response)).epsilon(1e-12));
  CHECK(sample_sd(normalize_response(t, 1.0).response) == doctest::Approx(1.0).epsilon(1e-12));

  t.response.assign(300, 4.0);
  CHECK_THROWS_AS(normalize_response(t), DataError);
  CHECK_THROWS_AS(normalize_response(n, 0.0), ConfigError);
}

TEST_CASE("digests")
{
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto path = std::filesystem::temp_directory_path() / "tlsbf_digest.txt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "abc";
  }
  CHECK(file_digest(path) == sha256_hex("abc"));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(file_digest(path), DataError);
}

TEST_CASE("fit artifact round trip")
{
  std::mt19937_64 rng(505);
  const auto s = oracle::uniform_sample(120, 4, rng);
  FitConfig cfg;
  cfg.lambda = 0.15;
  const auto f = fit(s, Bandwidths({ 0.15, 0.2, 0.25, 0.3 }), cfg);
  REQUIRE(f.active_set.size() < 4);

  FitArtifact art;
  art.fit = f;
  art.feature_names = { "a", "b", "c", "d" };
  art.config_json = R"({"lambda":0.15})";
  art.seed = 1234567890123ULL;
  art.input_digest = sha256_hex("data");

  const auto path = std::filesystem::temp_directory_path() / "tlsbf_fit.json";
  save_fit(path, art);
  const auto back = load_fit(path);
  std::filesystem::remove(path);

  CHECK(back.fit.intercept == f.intercept);
  CHECK(back.fit.active_set == f.active_set);
  CHECK(back.fit.lambda == f.lambda);
  CHECK(back.feature_names == art.feature_names);
  CHECK(back.seed == art.seed);
  CHECK(back.input_digest == art.input_digest);
  CHECK(back.config_json == art.config_json);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(back.fit.bandwidths[j] == f.bandwidths[j]);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix pts(100, 4);
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      pts(i, j) = u(rng);
  const auto p0 = predict(f, pts);
  const auto p1 = predict(back.fit, pts);
  for (std::size_t i = 0; i < 100; ++i)
    CHECK(std::abs(p0[i] - p1[i]) <= 1e-12);

  // Inactive components are stored as null.
  const auto text = to_json(art);
  CHECK(text.find("null") != std::string::npos);

  CHECK_THROWS_AS(fit_from_json("{"), DataError);
  CHECK_THROWS_AS(fit_from_json("{}"), DataError);
  auto wrong = text;
  wrong.replace(wrong.find("\"schema_version\": 1"), 19, "\"schema_version\": 9");
  CHECK_THROWS_AS(fit_from_json(wrong), DataError);
}

TEST_CASE("scenario files")
{
  std::istringstream one("# single cell\nn0 = 150\nd = 20\nt = 1.0 # comment\nn_aux = [300, 100]\n"
                         "delta_p = 0.9\ndelta_f = 2\nseed = 7\nreplications = 4\n");
  const auto cells = parse_scenario(one);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].n0 == 150);
  CHECK(cells[0].d == 20);
  CHECK(cells[0].t == 1.0);
  CHECK(cells[0].n_aux == std::vector<std::size_t>{ 300, 100 });
  CHECK(cells[0].delta_p == 0.9);
  CHECK(cells[0].delta_f == 2.0);
  CHECK(cells[0].seed == 7);
  CHECK(cells[0].replications == 4);

  std::istringstream grid("[scenario]\nd = [20, 40]\ndelta_f = [0.5, 1, 2]\n");
  const auto many = parse_scenario(grid);
  CHECK(many.size() == 6);
  CHECK(many[0].d == 20);
  CHECK(many[5].d == 40);
  CHECK(many[5].delta_f == 2.0);

  std::istringstream unknown("bandwidth = 0.2\n");
  CHECK_THROWS_AS(parse_scenario(unknown), ConfigError);
  std::istringstream garbage("d 20\n");
  CHECK_THROWS_AS(parse_scenario(garbage), ConfigError);
  std::istringstream invalid("d = 5\n");
  CHECK_THROWS_AS(parse_scenario(invalid), ConfigError);
  std::istringstream fractional("n0 = 10.5\n");
  CHECK_THROWS_AS(parse_scenario(fractional), ConfigError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.toml"), ConfigError);
}

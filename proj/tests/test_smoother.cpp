#include "oracles.hpp"

#include "tlsbf/errors.hpp"
#include "tlsbf/smoother.hpp"

#include <doctest.h>

#include <random>

using namespace tlsbf;

namespace {

double
pi00_oracle(const Sample& s, std::size_t j, double h, std::size_t G, const ComponentCurve& c)
{
  const auto x = oracle::grid_points(G);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto w = oracle::grid_weight_column(s.x()(i, j), h, G);
    for (std::size_t g = 0; g < G; ++g)
      acc += oracle::trapezoid_weight(g, G) * w[g] * (c.value[g] + (s.x()(i, j) - x[g]) * c.deriv[g]);
  }
  return acc / static_cast<double>(s.n());
}

} // namespace

TEST_CASE("design moments: tiny hand instance")
{
  // Two observations sitting exactly on a grid node.
  Matrix x(2, 1, 0.5);
  const Sample s(x, { 1.0, 3.0 });
  const EvalGrid grid(101);
  const auto design = build_design(s, Bandwidths({ 0.1 }), grid);
  const auto M = design.Mjj(0);
  const double k = oracle::grid_weight_column(0.5, 0.1, 101)[50];
  CHECK(M[50].xx == doctest::Approx(k).epsilon(1e-12));
  CHECK(M[50].xy == 0.0);
  CHECK(M[50].yy == 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g)
    CHECK(M[g].xx == design.pj(0)[g].a);
}

TEST_CASE("design moments: law of large numbers and positive semidefiniteness")
{
  std::mt19937_64 rng(5);
  const auto s = oracle::uniform_sample(50000, 2, rng);
  const EvalGrid grid(101);
  const auto design = build_design(s, Bandwidths({ 0.1, 0.2 }), grid);
  const auto M = design.Mjj(0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CHECK(M[g].min_eigenvalue() >= -1e-14);
    CHECK(M[g].xx == design.pj(0)[g].a);
    if (grid[g] >= 0.2 && grid[g] <= 0.8) {
      CHECK(M[g].xx == doctest::Approx(1.0).epsilon(0.05));
      CHECK(std::abs(M[g].xy) < 0.05);
      CHECK(M[g].yy == doctest::Approx(0.2).epsilon(0.05));
    }
  }
  CHECK(design.marginal_mass(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("marginal local linear")
{
  std::mt19937_64 rng(17);
  const EvalGrid grid(201);
  SUBCASE("constant response gives the zero curve")
  {
    auto s0 = oracle::uniform_sample(80, 1, rng);
    const Sample s(s0.x(), std::vector<double>(80, 4.2));
    const auto c = marginal_ll(build_design(s, Bandwidths({ 0.15 }), grid), 0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CHECK(std::abs(c.value[g]) < 1e-12);
      CHECK(std::abs(c.deriv[g]) < 1e-10);
    }
  }
  SUBCASE("agrees with direct weighted least squares")
  {
    const auto s = oracle::uniform_sample(150, 1, rng);
    const double h = 0.12;
    // No ridge, so the comparison is exact up to rounding.
    const auto c = marginal_ll(
      build_design(s, Bandwidths({ h }), grid, BaselineKernel(), SmootherMode::local_linear, 0.0), 0);
    std::vector<double> X(s.x().col(0).begin(), s.x().col(0).end());
    std::vector<double> r(s.y().begin(), s.y().end());
    for (double& v : r)
      v -= s.mean_y();
    const auto wls = oracle::local_linear_wls(X, r, h, grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CHECK(c.value[g] == doctest::Approx(wls[g].first).epsilon(1e-10).scale(1.0));
      CHECK(c.deriv[g] == doctest::Approx(wls[g].second).epsilon(1e-8).scale(1.0));
    }
  }
  SUBCASE("linear trend is reproduced")
  {
    auto s0 = oracle::uniform_sample(200, 1, rng);
    std::vector<double> y(s0.x().col(0).begin(), s0.x().col(0).end());
    const Sample s(s0.x(), y);
    const auto c = marginal_ll(build_design(s, Bandwidths({ 0.05 }), grid), 0);
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (grid[g] >= 0.1 && grid[g] <= 0.9)
        CHECK(std::abs(c.value[g] - (grid[g] - s.mean_y())) <= 2e-2);
  }
  SUBCASE("singular design raises with the grid point")
  {
    Matrix x(60, 1);
    for (std::size_t i = 0; i < 60; ++i)
      x(i, 0) = 0.3 + 0.4 * static_cast<double>(i) / 59.0;
    const Sample s(x, std::vector<double>(60, 1.0));
    try {
      marginal_ll(build_design(s, Bandwidths({ 0.05 }), grid), 0);
      FAIL("expected IllConditioned");
    } catch (const IllConditioned& e) {
      CHECK(e.covariate() == 0);
      CHECK((e.grid_point() < 0.25 || e.grid_point() > 0.75));
    }
  }
}

TEST_CASE("cross term")
{
  std::mt19937_64 rng(23);
  SUBCASE("matches materialised double quadrature on a tiny instance")
  {
    const std::size_t G = 21;
    const auto s = oracle::uniform_sample(3, 2, rng);
    const std::vector<double> h{ 0.2, 0.3 };
    const auto design = build_design(s, Bandwidths(h), EvalGrid(G));
    const auto other = oracle::random_curve(G, rng);
    const auto fast = cross_term(design, 0, 1, other);
    const auto slow = oracle::brute_force_cross(s, 0, 1, h, G, other);
    for (std::size_t g = 0; g < G; ++g) {
      CHECK(std::abs(fast[g].a - slow[g].first) <= 1e-9);
      CHECK(std::abs(fast[g].b - slow[g].second) <= 1e-9);
    }
    // And with the library's own materialised matrix.
    const auto M = design.cross_matrix(0, 1);
    const EvalGrid grid(G);
    for (std::size_t a = 0; a < G; ++a) {
      double v0 = 0.0;
      for (std::size_t b = 0; b < G; ++b) {
        const auto& m = M[a * G + b];
        v0 += grid.weight(b) * (m.m00 * other.value[b] + m.m01 * h[1] * other.deriv[b]);
      }
      CHECK(std::abs(v0 - fast[a].a) <= 1e-9);
    }
  }
  SUBCASE("zero curve gives zero field")
  {
    const auto s = oracle::uniform_sample(30, 2, rng);
    const auto design = build_design(s, Bandwidths({ 0.2, 0.2 }), EvalGrid(51));
    for (const auto& v : cross_term(design, 0, 1, ComponentCurve::zero(51))) {
      CHECK(v.a == 0.0);
      CHECK(v.b == 0.0);
    }
  }
  SUBCASE("independent covariates and a centred curve give a near-zero field")
  {
    const auto s = oracle::uniform_sample(50000, 2, rng);
    const EvalGrid grid(101);
    const auto design = build_design(s, Bandwidths({ 0.1, 0.1 }), grid);
    auto c = ComponentCurve::zero(101);
    for (std::size_t g = 0; g < 101; ++g) {
      c.value[g] = std::sin(2 * M_PI * grid[g]);
      c.deriv[g] = 2 * M_PI * std::cos(2 * M_PI * grid[g]);
    }
    c = center_constraint(c, design, 1);
    double worst = 0.0;
    for (const auto& v : cross_term(design, 0, 1, c))
      worst = std::max(worst, std::abs(v.a));
    CHECK(worst < 0.05);
  }
}

TEST_CASE("tuple norm, centering and pi00")
{
  std::mt19937_64 rng(29);
  const std::size_t G = 101;
  const auto s = oracle::uniform_sample(120, 2, rng);
  const std::vector<double> h{ 0.15, 0.25 };
  const auto design = build_design(s, Bandwidths(h), EvalGrid(G));
  const auto a = oracle::random_curve(G, rng);
  const auto b = oracle::random_curve(G, rng);

  CHECK(tuple_norm(ComponentCurve::zero(G), design, 0) == 0.0);
  CHECK(tuple_norm(a, design, 1) == doctest::Approx(oracle::brute_force_norm(s, 1, h[1], G, a)).epsilon(1e-10));

  ComponentCurve scaled = a;
  for (std::size_t g = 0; g < G; ++g) {
    scaled.value[g] *= -2.5;
    scaled.deriv[g] *= -2.5;
  }
  CHECK(tuple_norm(scaled, design, 0) == doctest::Approx(2.5 * tuple_norm(a, design, 0)).epsilon(1e-12));

  ComponentCurve sum = a;
  for (std::size_t g = 0; g < G; ++g) {
    sum.value[g] += b.value[g];
    sum.deriv[g] += b.deriv[g];
  }
  CHECK(tuple_norm(sum, design, 0) <= tuple_norm(a, design, 0) + tuple_norm(b, design, 0) + 1e-12);

  for (std::size_t j = 0; j < 2; ++j)
    CHECK(pi00_constant(a, design, j) == doctest::Approx(pi00_oracle(s, j, h[j], G, a)).epsilon(1e-12));

  auto ones = ComponentCurve::zero(G);
  std::fill(ones.value.begin(), ones.value.end(), 3.0);
  CHECK(pi00_constant(ones, design, 0) == doctest::Approx(3.0 * design.marginal_mass(0)).epsilon(1e-12));
  const auto centred_ones = center_constraint(ones, design, 0);
  for (double v : centred_ones.value)
    CHECK(std::abs(v) < 1e-12);

  const auto ca = center_constraint(a, design, 0);
  CHECK(std::abs(pi00_constant(ca, design, 0)) <= 1e-12);
  CHECK(ca.deriv == a.deriv);
  const auto cca = center_constraint(ca, design, 0);
  for (std::size_t g = 0; g < G; ++g)
    CHECK(cca.value[g] == doctest::Approx(ca.value[g]).epsilon(1e-12));

  // Linearity: center(a + b) = center(a) + center(b).
  const auto cb = center_constraint(b, design, 0);
  const auto csum = center_constraint(sum, design, 0);
  for (std::size_t g = 0; g < G; ++g)
    CHECK(csum.value[g] == doctest::Approx(ca.value[g] + cb.value[g]).epsilon(1e-10));
}

TEST_CASE("tuple norm of the constant curve is about one for uniform data")
{
  std::mt19937_64 rng(31);
  const auto s = oracle::uniform_sample(20000, 1, rng);
  const auto design = build_design(s, Bandwidths({ 0.1 }), EvalGrid(101));
  auto ones = ComponentCurve::zero(101);
  std::fill(ones.value.begin(), ones.value.end(), 1.0);
  CHECK(tuple_norm(ones, design, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Nadaraya-Watson mode drops the slope")
{
  std::mt19937_64 rng(37);
  const auto s = oracle::uniform_sample(100, 1, rng);
  const auto design = build_design(s, Bandwidths({ 0.15 }), EvalGrid(101), BaselineKernel(), SmootherMode::nadaraya_watson);
  const auto c = marginal_ll(design, 0);
  for (std::size_t g = 0; g < 101; ++g) {
    CHECK(c.deriv[g] == 0.0);
    // Local constant: weighted mean of the centred response.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.n(); ++i) {
      const double w = oracle::grid_weight_column(s.x()(i, 0), 0.15, 101)[g];
      num += w * (s.y()[i] - s.mean_y());
      den += w;
    }
    CHECK(c.value[g] == doctest::Approx(num / den).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("pooled design is the weighted combination of the populations")
{
  std::mt19937_64 rng(41);
  const auto a = oracle::uniform_sample(70, 2, rng);
  const auto b = oracle::uniform_sample(130, 2, rng);
  const Bandwidths bw({ 0.2, 0.2 });
  const EvalGrid grid(51);
  const std::reference_wrapper<const Sample> pool[] = { std::cref(a), std::cref(b) };
  const DesignField pooled(pool, bw, grid);
  const auto da = build_design(a, bw, grid);
  const auto db = build_design(b, bw, grid);
  const double wa = 70.0 / 200.0, wb = 130.0 / 200.0;
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CHECK(pooled.Mjj(j)[g].yy == doctest::Approx(wa * da.Mjj(j)[g].yy + wb * db.Mjj(j)[g].yy).epsilon(1e-12));
      CHECK(pooled.pj(j)[g].b == doctest::Approx(wa * da.pj(j)[g].b + wb * db.pj(j)[g].b).epsilon(1e-12).scale(1.0));
      CHECK(pooled.mj(j)[g].a == doctest::Approx(wa * da.mj(j)[g].a + wb * db.mj(j)[g].a).epsilon(1e-12).scale(1.0));
    }
}

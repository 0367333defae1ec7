#include "oracles.hpp"

#include "tlsbf/errors.hpp"
#include "tlsbf/kernel.hpp"

#include <doctest.h>

#include <random>

using namespace tlsbf;

TEST_CASE("baseline kernels are symmetric densities on [-1,1]")
{
  for (auto kind : { KernelKind::epanechnikov, KernelKind::quartic }) {
    const BaselineKernel k(kind);
    CHECK(k(1.5) == 0.0);
    CHECK(k(-1.0001) == 0.0);
    double mass = 0.0;
    const int m = 200000;
    for (int s = 0; s < m; ++s) {
      const double u = -1.0 + (s + 0.5) * 2.0 / m;
      CHECK(k(u) >= 0.0);
      mass += k(u) * 2.0 / m;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    for (double u : { 0.1, 0.37, 0.8, 0.999 })
      CHECK(k(u) == k(-u));
    CHECK(k.partial_moment(0, -1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(k.partial_moment(1, -1.0, 1.0) == doctest::Approx(0.0));
    // Lipschitz: finite-difference slopes stay bounded.
    double worst = 0.0;
    for (int s = 0; s < 2000; ++s) {
      const double u = -1.2 + s * 2.4 / 2000;
      worst = std::max(worst, std::abs(k(u + 1e-6) - k(u)) / 1e-6);
    }
    CHECK(worst < 2.0);
  }
  CHECK(BaselineKernel().mu2() == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(parse_kernel("quartic") == KernelKind::quartic);
  CHECK_THROWS_AS(parse_kernel("gaussian"), ConfigError);
}

TEST_CASE("partial moments match quadrature")
{
  const BaselineKernel k(KernelKind::quartic);
  for (int ell = 0; ell <= 2; ++ell) {
    const double a = -0.4, b = 0.7;
    double q = 0.0;
    const int m = 100000;
    for (int s = 0; s < m; ++s) {
      const double u = a + (s + 0.5) * (b - a) / m;
      q += std::pow(u, ell) * oracle::quartic(u) * (b - a) / m;
    }
    CHECK(k.partial_moment(ell, a, b) == doctest::Approx(q).epsilon(1e-9));
  }
  // Limits outside the support are clipped.
  CHECK(k.partial_moment(0, -3.0, 3.0) == doctest::Approx(1.0));
}

TEST_CASE("evaluation grid")
{
  const EvalGrid grid(401);
  CHECK(grid.size() == 401);
  CHECK(grid[0] == 0.0);
  CHECK(grid[400] == 1.0);
  CHECK(grid.spacing() == doctest::Approx(1.0 / 400));
  for (std::size_t g = 1; g < grid.size(); ++g)
    CHECK(grid[g] - grid[g - 1] == doctest::Approx(grid.spacing()).epsilon(1e-12));
  std::vector<double> ones(401, 1.0);
  CHECK(grid.integrate(ones) == doctest::Approx(1.0).epsilon(1e-14));
  std::vector<double> lin(grid.points().begin(), grid.points().end());
  CHECK(grid.interpolate(lin, 0.123456) == doctest::Approx(0.123456).epsilon(1e-14));
  CHECK(grid.interpolate(lin, 1.0) == 1.0);
  CHECK_THROWS(EvalGrid(1));
}

TEST_CASE("normalized weight: hand values and bandwidth validation")
{
  CHECK(normalized_weight(0.5, 0.5, 0.1) == doctest::Approx(7.5).epsilon(1e-14));
  CHECK(normalized_weight(0.0, 0.0, 0.1) == doctest::Approx(15.0).epsilon(1e-14));
  // Denominator confirmed by independent numerical integration.
  CHECK(oracle::kernel_mass(0.5, 0.1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(oracle::kernel_mass(0.0, 0.1) == doctest::Approx(0.5).epsilon(1e-10));
  for (double v : { 0.0, 0.03, 0.08, 0.5, 0.97 }) {
    for (double u : { 0.0, 0.05, 0.1, 0.5, 0.96 }) {
      const double expect = oracle::scaled_kernel(u, v, 0.1) / oracle::kernel_mass(v, 0.1);
      CHECK(normalized_weight(u, v, 0.1) == doctest::Approx(expect).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(normalized_weight(0.5, 0.5, 0.0), InvalidBandwidth);
  CHECK_THROWS_AS(normalized_weight(0.5, 0.5, -0.1), InvalidBandwidth);
  CHECK_THROWS_AS(normalized_weight(0.5, 0.5, 0.51), InvalidBandwidth);
  CHECK_NOTHROW(normalized_weight(0.5, 0.5, 0.5));
}

TEST_CASE("normalized weight: two-sided bound and interior identity")
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const BaselineKernel k;
  for (double h : { 0.02, 0.05, 0.1, 0.25, 0.5 }) {
    for (int s = 0; s < 2000; ++s) {
      const double u = unif(rng);
      const double v = unif(rng);
      const double base = k((u - v) / h) / h;
      const double w = normalized_weight(u, v, h);
      CHECK(w >= base * (1.0 - 1e-12));
      CHECK(w <= 2.0 * base * (1.0 + 1e-12));
      if (u >= 2 * h && u <= 1 - 2 * h)
        CHECK(w == doctest::Approx(base).epsilon(1e-14));
    }
  }
}

TEST_CASE("weight field: grid normalization, support and spot checks")
{
  const EvalGrid grid(401);
  const std::vector<double> one{ 0.5 };
  const WeightField single(one, grid, 0.1);
  std::vector<double> column(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    column[g] = single(g, 0);
    if (std::abs(grid[g] - 0.5) > 0.1)
      CHECK(column[g] == 0.0);
  }
  CHECK(grid.integrate(column) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> xs(300);
  for (double& x : xs)
    x = unif(rng);
  xs[0] = 0.0;
  xs[1] = 1.0;
  for (double h : { 0.05, 0.1, 0.25 }) {
    const WeightField grid_norm(xs, grid, h);
    const WeightField analytic(xs, grid, h, BaselineKernel(), Normalization::analytic);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t g = 0; g < grid.size(); ++g)
        column[g] = grid_norm(g, i);
      CHECK(std::abs(grid.integrate(column) - 1.0) <= 1e-8);
      // Analytic mode reproduces normalized_weight entrywise.
      for (std::size_t g = 0; g < grid.size(); g += 7)
        CHECK(analytic(g, i) == doctest::Approx(normalized_weight(grid[g], xs[i], h)).epsilon(1e-12));
    }
    // Grid mode matches the independent grid-normalised oracle.
    for (std::size_t i = 0; i < 20; ++i) {
      const auto expect = oracle::grid_weight_column(xs[i], h, grid.size());
      for (std::size_t g = 0; g < grid.size(); ++g)
        CHECK(grid_norm(g, i) == doctest::Approx(expect[g]).epsilon(1e-12));
    }
  }
}

TEST_CASE("weight field rejects bad input")
{
  const EvalGrid grid(101);
  CHECK_THROWS_AS(WeightField(std::vector<double>{}, grid, 0.1), DataError);
  const std::vector<double> bad{ 0.2, 1.2 };
  try {
    WeightField w(bad, grid, 0.1);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK_THROWS_AS(WeightField(std::vector<double>{ 0.5 }, grid, 0.004), InvalidBandwidth);
}

TEST_CASE("kernel moments")
{
  const EvalGrid grid(401);
  for (double h : { 0.05, 0.1, 0.25 }) {
    const auto mom = kernel_moments(grid, h);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CHECK(mom[g].mu0 == doctest::Approx(1.0).epsilon(1e-10));
      if (grid[g] >= 2 * h && grid[g] <= 1 - 2 * h) {
        CHECK(std::abs(mom[g].mu1) < 1e-12);
        CHECK(mom[g].mu2 == doctest::Approx(0.2).epsilon(1e-10));
      }
    }
    CHECK(mom[0].mu1 > 0.0);
  }
}

TEST_CASE("bandwidths")
{
  const Bandwidths bw({ 0.1, 0.2, 0.4 });
  CHECK(bw.size() == 3);
  CHECK(bw.reference() == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(bw.lower_ratio() == doctest::Approx(0.5));
  CHECK(bw.upper_ratio() == doctest::Approx(2.0));
  for (std::size_t j = 0; j < bw.size(); ++j) {
    CHECK(bw[j] >= bw.lower_ratio() * bw.reference() * (1 - 1e-12));
    CHECK(bw[j] <= bw.upper_ratio() * bw.reference() * (1 + 1e-12));
  }
  CHECK_THROWS_AS(Bandwidths({ 0.1, 0.6 }), InvalidBandwidth);
  CHECK(Bandwidths::constant(4, 0.3)[3] == 0.3);
}

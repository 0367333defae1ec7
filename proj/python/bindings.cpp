#include "tlsbf/dataio.hpp"
#include "tlsbf/errors.hpp"
#include "tlsbf/model_select.hpp"
#include "tlsbf/simlab.hpp"
#include "tlsbf/transfer.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

namespace py = pybind11;
using namespace tlsbf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix
to_matrix(const Array& x)
{
  if (x.ndim() != 2)
    throw DataError("covariates must be a 2-d array");
  const auto r = x.unchecked<2>();
  Matrix m(static_cast<std::size_t>(r.shape(0)), static_cast<std::size_t>(r.shape(1)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i)
    for (py::ssize_t j = 0; j < r.shape(1); ++j)
      m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = r(i, j);
  return m;
}

std::vector<double>
to_vector(const Array& y)
{
  if (y.ndim() != 1)
    throw DataError("responses must be a 1-d array");
  return { y.data(), y.data() + y.size() };
}

Sample
to_sample(const Array& x, const Array& y)
{
  return Sample(to_matrix(x), to_vector(y));
}

FitConfig
make_config(std::size_t grid_size, const std::string& kernel, bool nw)
{
  FitConfig cfg;
  cfg.grid_size = grid_size;
  cfg.kernel = parse_kernel(kernel);
  cfg.mode = nw ? SmootherMode::nadaraya_watson : SmootherMode::local_linear;
  cfg.validate();
  return cfg;
}

// None: rule of thumb; float: common value; sequence: one per covariate.
Bandwidths
resolve_bandwidths(const py::object& spec, const Sample& s, const FitConfig& cfg)
{
  if (spec.is_none())
    return widen_until_conditioned(s, rot_bandwidth(s).bandwidths, cfg);
  if (py::isinstance<py::float_>(spec) || py::isinstance<py::int_>(spec))
    return Bandwidths::constant(s.d(), spec.cast<double>());
  return Bandwidths(spec.cast<std::vector<double>>());
}

double
centered_sd(std::span<const double> y)
{
  return sample_sd(y);
}

py::array_t<double>
predict_array(const AdditiveFit& f, const Array& x)
{
  if (x.ndim() == 1) {
    const auto v = to_vector(x);
    py::array_t<double> out(1);
    out.mutable_at(0) = predict(f, v);
    return out;
  }
  const auto p = predict(f, to_matrix(x));
  return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
}

} // namespace

PYBIND11_MODULE(_tlsbf, m)
{
  m.doc() = "Sparse additive smooth backfitting with two-stage transfer learning";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<InvalidBandwidth>(m, "InvalidBandwidth", base);
  py::register_exception<IllConditioned>(m, "IllConditioned", base);

  py::class_<FitArtifact>(m, "Fit")
    .def_property_readonly("intercept", [](const FitArtifact& a) { return a.fit.intercept; })
    .def_property_readonly("lam", [](const FitArtifact& a) { return a.fit.lambda; })
    .def_property_readonly("active_set", [](const FitArtifact& a) { return a.fit.active_set; })
    .def_property_readonly("bandwidths",
                           [](const FitArtifact& a) {
                             return std::vector<double>(a.fit.bandwidths.values().begin(),
                                                        a.fit.bandwidths.values().end());
                           })
    .def_property_readonly("grid",
                           [](const FitArtifact& a) {
                             return std::vector<double>(a.fit.grid.points().begin(), a.fit.grid.points().end());
                           })
    .def_property_readonly("converged", [](const FitArtifact& a) { return a.fit.diagnostics.converged; })
    .def("component", [](const FitArtifact& a, std::size_t j) { return a.fit.components.at(j).value; })
    .def("predict", [](const FitArtifact& a, const Array& x) { return predict_array(a.fit, x); }, py::arg("x"))
    .def("to_json", [](const FitArtifact& a) { return to_json(a); })
    .def_static("from_json", &fit_from_json, py::arg("text"))
    .def("__repr__", [](const FitArtifact& a) {
      std::ostringstream out;
      out << "<Fit d=" << a.fit.d() << " active=" << a.fit.active_set.size() << " lambda=" << a.fit.lambda << ">";
      return out.str();
    });

  m.def(
    "fit",
    [](const Array& x,
       const Array& y,
       std::optional<double> lam,
       const py::object& bandwidth,
       std::size_t grid_size,
       const std::string& kernel,
       bool nw,
       std::size_t lambda_count) {
      const Sample s = to_sample(x, y);
      FitConfig cfg = make_config(grid_size, kernel, nw);
      const auto bw = resolve_bandwidths(bandwidth, s, cfg);
      FitArtifact out;
      if (lam) {
        cfg.lambda = *lam;
        out.fit = fit(s, bw, cfg);
      } else {
        out.fit = select_lambda(s, bw, LambdaGrid::log_spaced(centered_sd(s.y()), lambda_count), cfg).fit;
      }
      return out;
    },
    "Target-only fit; the penalty is chosen by BIC when `lam` is None.",
    py::arg("x"),
    py::arg("y"),
    py::arg("lam") = py::none(),
    py::arg("bandwidth") = py::none(),
    py::arg("grid_size") = 101,
    py::arg("kernel") = "epanechnikov",
    py::arg("nw") = false,
    py::arg("lambda_count") = 20);

  m.def(
    "tl_fit",
    [](const Array& x,
       const Array& y,
       const std::vector<std::pair<Array, Array>>& aux,
       std::optional<double> lambda1,
       std::optional<double> lambda2,
       bool pool_target,
       std::size_t grid_size,
       std::size_t pair_count) {
      std::vector<LabeledSample> samples;
      for (std::size_t a = 0; a < aux.size(); ++a)
        samples.push_back({ "aux" + std::to_string(a + 1), to_sample(aux[a].first, aux[a].second) });
      const MultiSampleSet data(to_sample(x, y), std::move(samples));
      TLConfig cfg;
      cfg.inner = make_config(grid_size, "epanechnikov", false);
      cfg.include_target_in_pool = pool_target;
      cfg.bw_target = widen_until_conditioned(data.target(), rot_bandwidth(data.target()).bandwidths, cfg.inner);
      const auto pool = data.pool(pool_target);
      cfg.bw_pooled = widen_until_conditioned(pool, rot_bandwidth(pool).bandwidths, cfg.inner);
      FitArtifact out;
      if (lambda1 && lambda2) {
        cfg.lambda1 = *lambda1;
        cfg.lambda2 = *lambda2;
        out.fit = tl_fit(data, cfg).final;
        return out;
      }
      if (lambda1 || lambda2)
        throw ConfigError("give both lambda1 and lambda2, or neither for BIC selection");
      std::vector<double> pooled;
      for (const Sample& s : pool)
        for (double v : s.y())
          pooled.push_back(v - s.mean_y());
      out.fit = select_lambda_pair(data,
                                   cfg,
                                   LambdaGrid::log_spaced(sample_sd(pooled), pair_count),
                                   LambdaGrid::log_spaced(sample_sd(data.target().y()), pair_count))
                  .fit.final;
      return out;
    },
    "Two-stage transfer fit; both penalties are chosen by BIC when not given.",
    py::arg("x"),
    py::arg("y"),
    py::arg("aux"),
    py::arg("lambda1") = py::none(),
    py::arg("lambda2") = py::none(),
    py::arg("pool_target") = true,
    py::arg("grid_size") = 101,
    py::arg("pair_count") = 10);

  m.def(
    "detect",
    [](const Array& x,
       const Array& y,
       const std::vector<std::tuple<std::string, Array, Array>>& candidates,
       double c_sd,
       int splits,
       std::uint64_t seed,
       std::size_t lambda_count) {
      std::vector<LabeledSample> c;
      for (const auto& [label, cx, cy] : candidates)
        c.push_back({ label, to_sample(cx, cy) });
      DetectionConfig cfg;
      cfg.c_sd = c_sd;
      cfg.n_splits = splits;
      cfg.seed = seed;
      cfg.lambda_grid_size = lambda_count;
      py::list out;
      for (const auto& s : detect_sources(to_sample(x, y), c, cfg)) {
        py::dict row;
        row["source"] = s.label;
        row["score"] = s.score;
        row["accepted"] = s.accepted;
        out.append(row);
      }
      return out;
    },
    "Split-sample transferable source detection.",
    py::arg("x"),
    py::arg("y"),
    py::arg("candidates"),
    py::arg("c_sd") = 1.0,
    py::arg("splits") = 2,
    py::arg("seed") = 0,
    py::arg("lambda_count") = 20);

  m.def(
    "simulate",
    [](std::size_t n0,
       std::vector<std::size_t> n_aux,
       std::size_t d,
       double t,
       double delta_p,
       double delta_f,
       double noise_sd,
       std::size_t reps,
       std::uint64_t seed,
       const std::vector<std::string>& methods,
       std::size_t mc_size,
       std::size_t quadrature,
       std::size_t lambda_count,
       std::size_t pair_count) {
      ScenarioConfig cell;
      cell.n0 = n0;
      cell.n_aux = std::move(n_aux);
      cell.d = d;
      cell.t = t;
      cell.delta_p = delta_p;
      cell.delta_f = delta_f;
      cell.noise_sd = noise_sd;
      cell.replications = reps;
      cell.seed = seed;
      ExperimentOptions opt;
      opt.methods.clear();
      for (const auto& name : methods)
        opt.methods.push_back(parse_method(name));
      opt.mc_size = mc_size;
      opt.quadrature_points = quadrature;
      opt.lambda_grid_size = lambda_count;
      opt.pair_grid_size = pair_count;
      std::ostringstream out;
      const std::vector<ScenarioConfig> cells{ cell };
      run_experiment(cells, opt, &out);
      return out.str();
    },
    "Runs one simulation cell and returns the replication table as CSV text.",
    py::arg("n0") = 100,
    py::arg("n_aux") = std::vector<std::size_t>{ 200, 200 },
    py::arg("d") = 100,
    py::arg("t") = 0.1,
    py::arg("delta_p") = 0.1,
    py::arg("delta_f") = 0.5,
    py::arg("noise_sd") = 1.0,
    py::arg("reps") = 1,
    py::arg("seed") = 1,
    py::arg("methods") = std::vector<std::string>{ "NW", "LL", "TL" },
    py::arg("mc_size") = 100000,
    py::arg("quadrature") = 1000000,
    py::arg("lambda_count") = 20,
    py::arg("pair_count") = 10);

  m.def(
    "rot_bandwidth",
    [](const Array& x) {
      const Matrix mx = to_matrix(x);
      const auto bw = rot_bandwidth(Sample(mx, std::vector<double>(mx.rows(), 0.0))).bandwidths;
      return std::vector<double>(bw.values().begin(), bw.values().end());
    },
    "Rule-of-thumb bandwidths for covariates in [0,1].",
    py::arg("x"));
}

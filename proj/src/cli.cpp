#include "tlsbf/cli.hpp"

#include "tlsbf/dataio.hpp"
#include "tlsbf/errors.hpp"
#include "tlsbf/model_select.hpp"
#include "tlsbf/simlab.hpp"
#include "tlsbf/transfer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace tlsbf {

namespace {

using nlohmann::json;

struct Globals
{
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool verbose = false;
};

struct FitOptions
{
  std::string data;
  std::string response = "y";
  std::optional<double> lambda;
  bool bic = false;
  std::string bandwidth = "auto";
  std::size_t grid = 101;
  std::string kernel = "epanechnikov";
  bool nw = false;
  std::size_t lambda_count = 20;
  std::string out;
};

struct TLOptions
{
  std::vector<std::string> aux;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  bool bic2d = false;
  bool no_pool_target = false;
  std::size_t pair_count = 10;
};

struct DetectOptions
{
  double c_sd = 1.0;
  int splits = 2;
};

struct SimulateOptions
{
  std::string scenario;
  std::size_t n0 = 100;
  std::vector<std::size_t> n_aux{ 200, 200 };
  std::size_t d = 100;
  double t = 0.1;
  double delta_p = 0.1;
  double delta_f = 0.5;
  double noise_sd = 1.0;
  std::optional<std::size_t> full_grid;
  std::size_t reps = 1;
  std::string methods = "NW,LL,TL";
  std::size_t mc_size = 100000;
  std::size_t quadrature = 1000000;
  std::size_t lambda_count = 20;
  std::size_t pair_count = 10;
  bool timing = false;
  std::string out;
};

struct ScreenOptions
{
  std::size_t top_var = 3000;
  std::size_t top_cor = 450;
  double target_sd = 2.5;
  std::string scaling_out;
};

void
report_warnings(std::ostream& err, const std::vector<std::string>& warnings)
{
  for (const auto& w : warnings)
    err << "warning: " << w << '\n';
}

Sample
read_sample(const std::string& path, const std::string& response, const Globals& g, std::ostream& err)
{
  RawTable t = load_csv(path, response);
  if (g.verbose || t.dropped_rows > 0)
    report_warnings(err, t.warnings);
  return to_sample(t);
}

std::vector<std::string>
read_header_names(const std::string& path, const std::string& response)
{
  return load_csv(path, response).feature_names;
}

Bandwidths
resolve_bandwidths(const std::string& spec, const Sample& sample, const FitConfig& cfg, std::ostream& err)
{
  if (spec == "auto") {
    std::vector<std::string> warnings;
    auto bw = widen_until_conditioned(sample, rot_bandwidth(sample).bandwidths, cfg, &warnings);
    report_warnings(err, warnings);
    return bw;
  }
  std::vector<double> values;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      values.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw ConfigError("--bandwidth: cannot parse '" + token + "'");
    }
  }
  if (values.size() == 1)
    return Bandwidths::constant(sample.d(), values[0]);
  if (values.size() != sample.d())
    throw ConfigError("--bandwidth needs 1 or " + std::to_string(sample.d()) + " values");
  return Bandwidths(std::move(values));
}

FitConfig
inner_config(const FitOptions& o)
{
  FitConfig cfg;
  cfg.grid_size = o.grid;
  cfg.kernel = parse_kernel(o.kernel);
  cfg.mode = o.nw ? SmootherMode::nadaraya_watson : SmootherMode::local_linear;
  cfg.validate();
  return cfg;
}

void
emit_artifact(const FitArtifact& artifact, const std::string& path, std::ostream& out)
{
  if (path.empty() || path == "-")
    out << to_json(artifact) << '\n';
  else
    save_fit(path, artifact);
}

void
add_fit_flags(CLI::App* cmd, FitOptions& o)
{
  cmd->add_option("--data", o.data, "Target CSV (header row, numeric cells)")->required();
  cmd->add_option("--response", o.response, "Response column name");
  cmd->add_option("--bandwidth", o.bandwidth, "'auto' or comma-separated bandwidths");
  cmd->add_option("--grid", o.grid, "Evaluation grid size");
  cmd->add_option("--kernel", o.kernel, "epanechnikov or quartic");
  cmd->add_flag("--nw", o.nw, "Nadaraya-Watson (local constant) smoothing");
  cmd->add_option("--lambda-count", o.lambda_count, "BIC grid size");
  cmd->add_option("--out", o.out, "Output fit JSON ('-' for stdout)");
}

int
run_fit(const FitOptions& o, const Globals& g, std::ostream& out, std::ostream& err)
{
  const Sample sample = read_sample(o.data, o.response, g, err);
  FitConfig cfg = inner_config(o);
  const Bandwidths bw = resolve_bandwidths(o.bandwidth, sample, cfg, err);
  FitArtifact artifact;
  if (o.bic) {
    std::vector<double> centered(sample.y().begin(), sample.y().end());
    for (double& y : centered)
      y -= sample.mean_y();
    const auto grid = LambdaGrid::log_spaced(sample_sd(centered), o.lambda_count);
    auto sel = select_lambda(sample, bw, grid, cfg, g.threads);
    report_warnings(err, sel.warnings);
    artifact.fit = std::move(sel.fit);
  } else {
    cfg.lambda = *o.lambda;
    artifact.fit = fit(sample, bw, cfg);
  }
  if (g.verbose)
    err << "lambda=" << artifact.fit.lambda << " active=" << artifact.fit.active_set.size()
        << " iters=" << artifact.fit.diagnostics.outer_iters << '\n';
  artifact.feature_names = read_header_names(o.data, o.response);
  artifact.seed = g.seed;
  artifact.input_digest = file_digest(o.data);
  artifact.config_json = json{ { "command", "fit" },
                               { "response", o.response },
                               { "selection", o.bic ? "bic" : "fixed" },
                               { "bandwidth", o.bandwidth },
                               { "grid", o.grid },
                               { "kernel", o.kernel },
                               { "mode", o.nw ? "nadaraya_watson" : "local_linear" } }
                           .dump();
  emit_artifact(artifact, o.out, out);
  return exit_ok;
}

int
run_tl_fit(const FitOptions& o, const TLOptions& t, const Globals& g, std::ostream& out, std::ostream& err)
{
  Sample target = read_sample(o.data, o.response, g, err);
  std::vector<LabeledSample> aux;
  std::string digests = file_digest(o.data);
  for (const auto& path : t.aux) {
    aux.push_back({ path, read_sample(path, o.response, g, err) });
    digests += file_digest(path);
  }
  const MultiSampleSet data(std::move(target), std::move(aux));

  TLConfig cfg;
  cfg.inner = inner_config(o);
  cfg.include_target_in_pool = !t.no_pool_target;
  cfg.bw_target = resolve_bandwidths(o.bandwidth, data.target(), cfg.inner, err);
  const auto pool = data.pool(cfg.include_target_in_pool);
  cfg.bw_pooled = o.bandwidth == "auto"
                    ? widen_until_conditioned(pool, rot_bandwidth(pool).bandwidths, cfg.inner)
                    : cfg.bw_target;

  FitArtifact artifact;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  if (t.bic2d) {
    std::vector<double> pooled_centered;
    for (const Sample& s : pool)
      for (double y : s.y())
        pooled_centered.push_back(y - s.mean_y());
    std::vector<double> target_centered(data.target().y().begin(), data.target().y().end());
    for (double& y : target_centered)
      y -= data.target().mean_y();
    auto sel = select_lambda_pair(data,
                                  cfg,
                                  LambdaGrid::log_spaced(sample_sd(pooled_centered), t.pair_count),
                                  LambdaGrid::log_spaced(sample_sd(target_centered), t.pair_count),
                                  true,
                                  g.threads);
    report_warnings(err, sel.warnings);
    lambda1 = sel.lambda1;
    lambda2 = sel.lambda2;
    artifact.fit = std::move(sel.fit.final);
  } else {
    if (!t.lambda1 || !t.lambda2)
      throw ConfigError("tl-fit needs --lambda1 and --lambda2, or --bic2d");
    cfg.lambda1 = lambda1 = *t.lambda1;
    cfg.lambda2 = lambda2 = *t.lambda2;
    artifact.fit = tl_fit(data, cfg).final;
  }
  if (g.verbose)
    err << "lambda1=" << lambda1 << " lambda2=" << lambda2 << " active=" << artifact.fit.active_set.size()
        << '\n';
  artifact.feature_names = read_header_names(o.data, o.response);
  artifact.seed = g.seed;
  artifact.input_digest = sha256_hex(digests);
  artifact.config_json = json{ { "command", "tl-fit" },
                               { "response", o.response },
                               { "aux", t.aux },
                               { "lambda1", lambda1 },
                               { "lambda2", lambda2 },
                               { "selection", t.bic2d ? "bic2d" : "fixed" },
                               { "pool_target", !t.no_pool_target },
                               { "bandwidth", o.bandwidth },
                               { "grid", o.grid },
                               { "kernel", o.kernel } }
                           .dump();
  emit_artifact(artifact, o.out, out);
  return exit_ok;
}

int
run_detect(const FitOptions& o,
           const TLOptions& t,
           const DetectOptions& d,
           const Globals& g,
           std::ostream& out,
           std::ostream& err)
{
  const Sample target = read_sample(o.data, o.response, g, err);
  std::vector<LabeledSample> candidates;
  for (const auto& path : t.aux)
    candidates.push_back({ path, read_sample(path, o.response, g, err) });
  if (candidates.empty())
    throw ConfigError("detect needs at least one --aux file");
  DetectionConfig cfg;
  cfg.c_sd = d.c_sd;
  cfg.n_splits = d.splits;
  cfg.seed = g.seed;
  cfg.inner = inner_config(o);
  cfg.lambda_grid_size = o.lambda_count;
  cfg.threads = g.threads;
  out << "source,score,accepted\n";
  for (const auto& s : detect_sources(target, candidates, cfg))
    out << s.label << ',' << s.score << ',' << (s.accepted ? "yes" : "no") << '\n';
  return exit_ok;
}

int
run_simulate(const SimulateOptions& s, const Globals& g, std::ostream& out, std::ostream& err)
{
  std::vector<ScenarioConfig> cells;
  if (!s.scenario.empty()) {
    cells = load_scenario(s.scenario);
  } else if (s.full_grid) {
    cells = full_scenario_grid(*s.full_grid, s.reps, g.seed);
  } else {
    ScenarioConfig c;
    c.n0 = s.n0;
    c.n_aux = s.n_aux;
    c.d = s.d;
    c.t = s.t;
    c.delta_p = s.delta_p;
    c.delta_f = s.delta_f;
    c.noise_sd = s.noise_sd;
    c.seed = g.seed;
    cells.push_back(c);
  }
  for (auto& c : cells)
    c.replications = s.reps;

  ExperimentOptions options;
  options.methods.clear();
  std::stringstream ss(s.methods);
  std::string token;
  while (std::getline(ss, token, ','))
    options.methods.push_back(parse_method(token));
  options.mc_size = s.mc_size;
  options.quadrature_points = s.quadrature;
  options.lambda_grid_size = s.lambda_count;
  options.pair_grid_size = s.pair_count;
  options.threads = g.threads;
  options.timing = s.timing;

  std::ofstream file;
  std::ostream* sink = &out;
  if (!s.out.empty() && s.out != "-") {
    file.open(s.out);
    if (!file)
      throw DataError("cannot write '" + s.out + "'");
    sink = &file;
  }
  const auto rows = run_experiment(cells, options, sink);
  std::size_t failed = 0;
  for (const auto& r : rows)
    if (r.status != "ok")
      ++failed;
  if (g.verbose || failed > 0)
    err << rows.size() << " rows, " << failed << " failed\n";
  return exit_ok;
}

int
run_screen(const FitOptions& o, const ScreenOptions& s, const Globals& g, std::ostream& out, std::ostream& err)
{
  RawTable table = load_csv(o.data, o.response);
  table = screen_features(table, s.top_var, s.top_cor);
  auto scaled = scale_unit_interval(table);
  table = normalize_response(scaled.table, s.target_sd);
  if (g.verbose || !table.warnings.empty())
    report_warnings(err, table.warnings);
  if (!s.scaling_out.empty()) {
    std::ofstream sc(s.scaling_out);
    if (!sc)
      throw DataError("cannot write '" + s.scaling_out + "'");
    sc << json{ { "features", table.feature_names },
                { "min", scaled.scaling.min },
                { "max", scaled.scaling.max },
                { "constant_columns", scaled.scaling.constant_columns } }
            .dump(2)
       << '\n';
  }
  if (o.out.empty() || o.out == "-") {
    write_csv(out, table);
  } else {
    std::ofstream file(o.out);
    if (!file)
      throw DataError("cannot write '" + o.out + "'");
    write_csv(file, table);
  }
  return exit_ok;
}

} // namespace

int
cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Sparse additive smooth backfitting with transfer learning", "tlsbf" };
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Diagnostics on stderr");

  FitOptions fo;
  TLOptions to;
  DetectOptions dopt;
  SimulateOptions so;
  ScreenOptions sc;

  auto* fit_cmd = app.add_subcommand("fit", "Target-only sparse additive fit");
  add_fit_flags(fit_cmd, fo);
  auto* lambda_opt = fit_cmd->add_option("--lambda", fo.lambda, "Fixed penalty");
  auto* bic_flag = fit_cmd->add_flag("--bic", fo.bic, "Select the penalty by BIC");
  lambda_opt->excludes(bic_flag);

  auto* tl_cmd = app.add_subcommand("tl-fit", "Two-stage transfer fit");
  FitOptions tl_fo;
  add_fit_flags(tl_cmd, tl_fo);
  tl_cmd->add_option("--aux", to.aux, "Auxiliary CSV files")->required();
  auto* l1 = tl_cmd->add_option("--lambda1", to.lambda1, "Pooled-stage penalty");
  auto* l2 = tl_cmd->add_option("--lambda2", to.lambda2, "De-biasing penalty");
  auto* b2 = tl_cmd->add_flag("--bic2d", to.bic2d, "Select both penalties by BIC");
  l1->excludes(b2);
  l2->excludes(b2);
  tl_cmd->add_flag("--no-pool-target", to.no_pool_target, "Pool auxiliaries only in the first stage");
  tl_cmd->add_option("--pair-count", to.pair_count, "Size of each BIC grid");

  auto* det_cmd = app.add_subcommand("detect", "Transferable source detection");
  FitOptions det_fo;
  TLOptions det_to;
  add_fit_flags(det_cmd, det_fo);
  det_cmd->add_option("--aux", det_to.aux, "Candidate CSV files")->required();
  det_cmd->add_option("--c-sd", dopt.c_sd, "Detection threshold constant");
  det_cmd->add_option("--splits", dopt.splits, "Number of random splits")->check(CLI::PositiveNumber);

  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo simulation study");
  sim_cmd->add_option("--scenario", so.scenario, "Scenario file (key = value lines)");
  sim_cmd->add_option("--full-grid", so.full_grid, "Run the 32-cell grid with this target size");
  sim_cmd->add_option("--n0", so.n0);
  sim_cmd->add_option("--n-aux", so.n_aux)->delimiter(',');
  sim_cmd->add_option("--d", so.d);
  sim_cmd->add_option("--t", so.t);
  sim_cmd->add_option("--delta-p", so.delta_p);
  sim_cmd->add_option("--delta-f", so.delta_f);
  sim_cmd->add_option("--noise-sd", so.noise_sd);
  sim_cmd->add_option("--reps", so.reps)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--methods", so.methods, "Comma list of NW, LL, TL");
  sim_cmd->add_option("--mc-size", so.mc_size, "Monte-Carlo draws for the MISE");
  sim_cmd->add_option("--quadrature", so.quadrature, "Quadrature points for centering constants");
  sim_cmd->add_option("--lambda-count", so.lambda_count);
  sim_cmd->add_option("--pair-count", so.pair_count);
  sim_cmd->add_flag("--timing", so.timing, "Record wall time per row");
  sim_cmd->add_option("--out", so.out, "Output CSV ('-' for stdout)");

  auto* scr_cmd = app.add_subcommand("screen", "Screen, scale and normalize a CSV");
  FitOptions scr_fo;
  scr_cmd->add_option("--data", scr_fo.data)->required();
  scr_cmd->add_option("--response", scr_fo.response);
  scr_cmd->add_option("--top-var", sc.top_var);
  scr_cmd->add_option("--top-cor", sc.top_cor);
  scr_cmd->add_option("--target-sd", sc.target_sd);
  scr_cmd->add_option("--scaling-out", sc.scaling_out, "Write per-column min/max JSON");
  scr_cmd->add_option("--out", scr_fo.out, "Output CSV ('-' for stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (fit_cmd->parsed() && !fo.lambda && !fo.bic)
      throw CLI::ValidationError("fit", "one of --lambda or --bic is required");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) {
      err << app.help();
      return exit_usage;
    }
    return exit_ok;
  }

  try {
    if (fit_cmd->parsed())
      return run_fit(fo, g, out, err);
    if (tl_cmd->parsed())
      return run_tl_fit(tl_fo, to, g, out, err);
    if (det_cmd->parsed())
      return run_detect(det_fo, det_to, dopt, g, out, err);
    if (sim_cmd->parsed())
      return run_simulate(so, g, out, err);
    if (scr_cmd->parsed())
      return run_screen(scr_fo, sc, g, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const DomainError& e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const InvalidBandwidth& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  }
  return exit_usage;
}

} // namespace tlsbf

#include "tlsbf/dataio.hpp"

#include "tlsbf/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace tlsbf {

namespace {

std::string
trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string>
split_fields(const std::string& line, char sep = ',')
{
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep))
    out.push_back(trim(field));
  if (!line.empty() && line.back() == sep)
    out.emplace_back();
  return out;
}

bool
parse_double(const std::string& text, double& value)
{
  if (text.empty())
    return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+')
    ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end && std::isfinite(value);
}

double
variance(std::span<const double> v)
{
  const double s = sample_sd(v);
  return s * s;
}

double
abs_correlation(std::span<const double> x, std::span<const double> y)
{
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    return 0.0;
  return std::abs(sxy) / std::sqrt(sxx * syy);
}

// Indices of the k largest scores; equal scores keep the earlier column.
// Returned in ascending (original) order.
std::vector<std::size_t>
top_k(const std::vector<double>& scores, std::size_t k)
{
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{ 0 });
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

RawTable
select_columns(const RawTable& t, const std::vector<std::size_t>& cols)
{
  RawTable out;
  out.features = t.features.select_cols(cols);
  for (std::size_t c : cols)
    out.feature_names.push_back(t.feature_names[c]);
  out.response_name = t.response_name;
  out.response = t.response;
  out.dropped_rows = t.dropped_rows;
  out.warnings = t.warnings;
  return out;
}

} // namespace

RawTable
parse_csv(std::istream& in, const std::string& response)
{
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw DataError("CSV input is empty: a header row is required");
  const auto header = split_fields(line);
  // A header whose fields all parse as numbers is almost certainly data.
  double probe = 0.0;
  if (std::all_of(header.begin(), header.end(), [&](const std::string& f) { return parse_double(f, probe); }))
    throw DataError("CSV has no header row (first line is numeric)");

  const auto resp = std::find(header.begin(), header.end(), response);
  if (resp == header.end())
    throw DataError("response column '" + response + "' not found in CSV header");
  const std::size_t resp_col = static_cast<std::size_t>(resp - header.begin());

  RawTable out;
  out.response_name = response;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != resp_col)
      out.feature_names.push_back(header[c]);

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto fields = split_fields(line);
    std::vector<double> values(fields.size());
    bool ok = fields.size() == header.size();
    for (std::size_t c = 0; ok && c < fields.size(); ++c)
      ok = parse_double(fields[c], values[c]);
    if (!ok) {
      ++out.dropped_rows;
      continue;
    }
    rows.push_back(std::move(values));
  }
  if (out.dropped_rows > 0)
    out.warnings.push_back("dropped " + std::to_string(out.dropped_rows) + " row(s) with missing or non-numeric cells");
  if (rows.empty())
    throw DataError("CSV table is empty after dropping non-numeric rows");

  out.features = Matrix(rows.size(), out.feature_names.size());
  out.response.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t j = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == resp_col)
        out.response[i] = rows[i][c];
      else
        out.features(i, j++) = rows[i][c];
    }
  }
  return out;
}

RawTable
load_csv(const std::filesystem::path& path, const std::string& response)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, response);
}

void
write_csv(std::ostream& out, const RawTable& table)
{
  for (const auto& name : table.feature_names)
    out << name << ',';
  out << table.response_name << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.columns(); ++j)
      out << table.features(i, j) << ',';
    out << table.response[i] << '\n';
  }
}

RawTable
screen_features(const RawTable& table, std::size_t top_var, std::size_t top_cor)
{
  const std::size_t p = table.columns();
  std::vector<std::string> warnings;
  if (top_cor > top_var) {
    warnings.push_back("top_cor exceeds top_var; using top_cor = top_var");
    top_cor = top_var;
  }
  if (top_var > p) {
    warnings.push_back("only " + std::to_string(p) + " columns available for top_var = " +
                       std::to_string(top_var) + "; keeping all");
    top_var = p;
    top_cor = std::min(top_cor, p);
  }

  std::vector<double> var(p);
  for (std::size_t j = 0; j < p; ++j)
    var[j] = table.rows() > 1 ? variance(table.features.col(j)) : 0.0;
  const auto by_var = top_k(var, top_var);

  std::vector<double> cor(by_var.size());
  for (std::size_t k = 0; k < by_var.size(); ++k)
    cor[k] = abs_correlation(table.features.col(by_var[k]), table.response);
  std::vector<std::size_t> chosen;
  for (std::size_t k : top_k(cor, top_cor))
    chosen.push_back(by_var[k]);

  RawTable out = select_columns(table, chosen);
  out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
  return out;
}

ScaledTable
scale_unit_interval(const RawTable& table)
{
  ScaledTable out{ table, {} };
  const std::size_t p = table.columns();
  out.scaling.min.resize(p);
  out.scaling.max.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = table.features.col(j);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    out.scaling.min[j] = *lo;
    out.scaling.max[j] = *hi;
    if (*hi == *lo)
      out.scaling.constant_columns.push_back(j);
  }
  apply_scaling(out.table, out.scaling);
  if (!out.scaling.constant_columns.empty())
    out.table.warnings.push_back(std::to_string(out.scaling.constant_columns.size()) +
                                 " constant column(s) mapped to 0.5");
  return out;
}

std::size_t
apply_scaling(RawTable& table, const ColumnScaling& scaling)
{
  if (scaling.min.size() != table.columns() || scaling.max.size() != table.columns())
    throw DataError("scaling has " + std::to_string(scaling.min.size()) + " columns, table has " +
                    std::to_string(table.columns()));
  std::size_t clipped = 0;
  for (std::size_t j = 0; j < table.columns(); ++j) {
    const double lo = scaling.min[j];
    const double range = scaling.max[j] - lo;
    for (std::size_t i = 0; i < table.rows(); ++i) {
      double& v = table.features(i, j);
      if (range == 0.0) {
        v = 0.5;
        continue;
      }
      const double s = (v - lo) / range;
      if (s < 0.0 || s > 1.0)
        ++clipped;
      v = std::clamp(s, 0.0, 1.0);
    }
  }
  return clipped;
}

RawTable
normalize_response(const RawTable& table, double target_sd)
{
  if (!(target_sd > 0.0))
    throw ConfigError("target_sd must be positive");
  if (table.rows() < 2)
    throw DataError("need at least two rows to normalize the response");
  const double sd = sample_sd(table.response);
  if (!(sd > 0.0))
    throw DataError("response has zero variance");
  RawTable out = table;
  const double factor = target_sd / sd;
  for (double& y : out.response)
    y *= factor;
  return out;
}

Sample
to_sample(const RawTable& table)
{
  return Sample(table.features, table.response);
}

std::string
sha256_hex(std::string_view bytes)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned int k = 0; k < len; ++k)
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
  return out.str();
}

std::string
file_digest(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

using nlohmann::json;

std::string
to_json(const FitArtifact& artifact)
{
  const AdditiveFit& f = artifact.fit;
  json j;
  j["schema_version"] = artifact.schema_version;
  j["intercept"] = f.intercept;
  j["grid"] = std::vector<double>(f.grid.points().begin(), f.grid.points().end());
  j["lambda"] = f.lambda;
  j["mode"] = f.mode == SmootherMode::local_linear ? "local_linear" : "nadaraya_watson";
  j["bandwidths"] = std::vector<double>(f.bandwidths.values().begin(), f.bandwidths.values().end());
  j["bandwidth_reference"] = f.bandwidths.reference();
  j["active_set"] = f.active_set;
  j["feature_names"] = artifact.feature_names;
  json comps = json::array();
  for (std::size_t k = 0; k < f.d(); ++k) {
    const auto& c = f.components[k];
    if (c.is_zero()) {
      comps.push_back(nullptr);
      continue;
    }
    comps.push_back({ { "value", c.value }, { "deriv", c.deriv } });
  }
  j["components"] = std::move(comps);
  j["diagnostics"] = { { "outer_iters", f.diagnostics.outer_iters },
                       { "converged", f.diagnostics.converged } };
  j["config"] = json::parse(artifact.config_json);
  j["provenance"] = { { "seed", artifact.seed }, { "input_digest", artifact.input_digest } };
  return j.dump(2);
}

FitArtifact
fit_from_json(const std::string& text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("fit artifact is not valid JSON: ") + e.what());
  }
  try {
    FitArtifact out;
    out.schema_version = j.at("schema_version").get<int>();
    if (out.schema_version != fit_schema_version)
      throw DataError("unsupported fit schema version " + std::to_string(out.schema_version));
    AdditiveFit& f = out.fit;
    f.intercept = j.at("intercept").get<double>();
    const auto grid = j.at("grid").get<std::vector<double>>();
    f.grid = EvalGrid(grid.size());
    f.lambda = j.at("lambda").get<double>();
    f.mode = j.at("mode").get<std::string>() == "nadaraya_watson" ? SmootherMode::nadaraya_watson
                                                                  : SmootherMode::local_linear;
    f.bandwidths =
      Bandwidths(j.at("bandwidths").get<std::vector<double>>(), j.at("bandwidth_reference").get<double>());
    out.feature_names = j.value("feature_names", std::vector<std::string>{});
    const auto& comps = j.at("components");
    for (const auto& c : comps) {
      if (c.is_null()) {
        f.components.push_back(ComponentCurve::zero(grid.size()));
        continue;
      }
      ComponentCurve curve{ c.at("value").get<std::vector<double>>(), c.at("deriv").get<std::vector<double>>() };
      if (curve.value.size() != grid.size() || curve.deriv.size() != grid.size())
        throw DataError("component arrays do not match the grid length");
      f.components.push_back(std::move(curve));
    }
    if (f.bandwidths.size() != f.components.size())
      throw DataError("bandwidths and components disagree on the number of covariates");
    f.refresh_active_set();
    f.diagnostics.outer_iters = j.at("diagnostics").value("outer_iters", 0);
    f.diagnostics.converged = j.at("diagnostics").value("converged", false);
    out.config_json = j.value("config", json::object()).dump();
    out.seed = j.at("provenance").value("seed", std::uint64_t{ 0 });
    out.input_digest = j.at("provenance").value("input_digest", std::string());
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit artifact: ") + e.what());
  }
}

void
save_fit(const std::filesystem::path& path, const FitArtifact& artifact)
{
  std::ofstream out(path);
  if (!out)
    throw DataError("cannot write '" + path.string() + "'");
  out << to_json(artifact) << '\n';
}

FitArtifact
load_fit(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return fit_from_json(buf.str());
}

namespace {

std::vector<double>
parse_scenario_value(const std::string& raw, const std::string& key)
{
  std::string text = trim(raw);
  std::vector<double> out;
  auto number = [&](const std::string& token) {
    double v = 0.0;
    if (!parse_double(trim(token), v))
      throw ConfigError("scenario key '" + key + "': cannot parse '" + trim(token) + "' as a number");
    return v;
  };
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']')
      throw ConfigError("scenario key '" + key + "': unterminated array");
    const std::string body = text.substr(1, text.size() - 2);
    if (trim(body).empty())
      throw ConfigError("scenario key '" + key + "': empty array");
    for (const auto& token : split_fields(body))
      out.push_back(number(token));
  } else {
    out.push_back(number(text));
  }
  return out;
}

std::size_t
as_count(double v, const std::string& key)
{
  if (v < 0.0 || v != std::floor(v))
    throw ConfigError("scenario key '" + key + "' must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

} // namespace

std::vector<ScenarioConfig>
parse_scenario(std::istream& in)
{
  std::map<std::string, std::vector<double>> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    if (trim(line).empty())
      continue;
    if (trim(line).front() == '[' && line.find('=') == std::string::npos)
      continue; // table headers are accepted and ignored
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("scenario line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    values[key] = parse_scenario_value(line.substr(eq + 1), key);
  }

  ScenarioConfig base;
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (const auto& [key, v] : values) {
    if (key == "n_aux") {
      base.n_aux.clear();
      for (double x : v)
        base.n_aux.push_back(as_count(x, key));
      continue;
    }
    if (key != "n0" && key != "d" && key != "t" && key != "delta_p" && key != "delta_f" &&
        key != "noise_sd" && key != "seed" && key != "replications")
      throw ConfigError("unknown scenario key '" + key + "'");
    axes.emplace_back(key, v);
  }

  auto assign = [](ScenarioConfig& c, const std::string& key, double v) {
    if (key == "n0")
      c.n0 = as_count(v, key);
    else if (key == "d")
      c.d = as_count(v, key);
    else if (key == "t")
      c.t = v;
    else if (key == "delta_p")
      c.delta_p = v;
    else if (key == "delta_f")
      c.delta_f = v;
    else if (key == "noise_sd")
      c.noise_sd = v;
    else if (key == "seed")
      c.seed = as_count(v, key);
    else if (key == "replications")
      c.replications = as_count(v, key);
  };

  std::vector<ScenarioConfig> cells{ base };
  for (const auto& [key, v] : axes) {
    std::vector<ScenarioConfig> next;
    for (const auto& c : cells)
      for (double x : v) {
        ScenarioConfig copy = c;
        assign(copy, key, x);
        next.push_back(copy);
      }
    cells = std::move(next);
  }
  for (const auto& c : cells)
    c.validate();
  return cells;
}

std::vector<ScenarioConfig>
load_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open scenario file '" + path.string() + "'");
  return parse_scenario(in);
}

} // namespace tlsbf

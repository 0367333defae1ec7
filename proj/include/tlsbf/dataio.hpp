#pragma once

#include "tlsbf/backfit.hpp"
#include "tlsbf/sample.hpp"
#include "tlsbf/simlab.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tlsbf {

//! Numeric table read from CSV: features plus one response column.
struct RawTable
{
  std::vector<std::string> feature_names;
  Matrix features;
  std::string response_name;
  std::vector<double> response;
  std::size_t dropped_rows = 0;
  std::vector<std::string> warnings;

  std::size_t rows() const { return response.size(); }
  std::size_t columns() const { return feature_names.size(); }
};

RawTable parse_csv(std::istream& in, const std::string& response);
RawTable load_csv(const std::filesystem::path& path, const std::string& response);
void write_csv(std::ostream& out, const RawTable& table);

//! Top `top_var` columns by sample variance, then the `top_cor` of those
//! with the largest |Pearson correlation| with the response. Ties keep the
//! earlier column; survivors stay in their original order.
RawTable screen_features(const RawTable& table, std::size_t top_var = 3000, std::size_t top_cor = 450);

struct ColumnScaling
{
  std::vector<double> min;
  std::vector<double> max;
  std::vector<std::size_t> constant_columns;
};

struct ScaledTable
{
  RawTable table;
  ColumnScaling scaling;
};

//! Columnwise (x - min)/(max - min); constant columns map to 0.5.
ScaledTable scale_unit_interval(const RawTable& table);

//! Applies stored scaling to new data, clipping to [0,1]. Returns the number
//! of clipped cells.
std::size_t apply_scaling(RawTable& table, const ColumnScaling& scaling);

//! y <- y * target_sd / sd(y).
RawTable normalize_response(const RawTable& table, double target_sd = 2.5);

Sample to_sample(const RawTable& table);

std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

inline constexpr int fit_schema_version = 1;

//! Serialized fit with its provenance.
struct FitArtifact
{
  int schema_version = fit_schema_version;
  AdditiveFit fit;
  std::vector<std::string> feature_names;
  //! Free-form echo of the settings that produced the fit (a JSON object text).
  std::string config_json = "{}";
  std::uint64_t seed = 0;
  std::string input_digest;
};

std::string to_json(const FitArtifact& artifact);
FitArtifact fit_from_json(const std::string& text);
void save_fit(const std::filesystem::path& path, const FitArtifact& artifact);
FitArtifact load_fit(const std::filesystem::path& path);

//! Reads a scenario file with `key = value` lines (TOML subset: comments with
//! '#', numbers, and arrays `[a, b]`). Array-valued keys other than `n_aux`
//! expand into a grid of cells.
std::vector<ScenarioConfig> parse_scenario(std::istream& in);
std::vector<ScenarioConfig> load_scenario(const std::filesystem::path& path);

} // namespace tlsbf

#include "tlsbf/sample.hpp"

#include "tlsbf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tlsbf {

std::vector<double>
Matrix::row(std::size_t i) const
{
  std::vector<double> out(cols_);
  for (std::size_t j = 0; j < cols_; ++j)
    out[j] = (*this)(i, j);
  return out;
}

Matrix
Matrix::select_rows(std::span<const std::size_t> rows) const
{
  Matrix out(rows.size(), cols_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t r = 0; r < rows.size(); ++r)
      out(r, j) = (*this)(rows[r], j);
  return out;
}

Matrix
Matrix::select_cols(std::span<const std::size_t> cols) const
{
  Matrix out(rows_, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    auto src = col(cols[c]);
    auto dst = out.col(c);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

Sample::Sample(Matrix x, std::vector<double> y)
  : x_(std::move(x))
  , y_(std::move(y))
{
  if (x_.rows() != y_.size())
    throw DataError("covariate rows (" + std::to_string(x_.rows()) + ") and responses (" +
                    std::to_string(y_.size()) + ") differ");
  if (y_.size() < 2)
    throw DataError("a sample needs at least two observations");
  if (x_.cols() == 0)
    throw DataError("a sample needs at least one covariate");
  for (std::size_t i = 0; i < y_.size(); ++i)
    if (!std::isfinite(y_[i]))
      throw DataError("non-finite response at row " + std::to_string(i));
  for (std::size_t j = 0; j < x_.cols(); ++j) {
    for (std::size_t i = 0; i < x_.rows(); ++i) {
      const double v = x_(i, j);
      if (!std::isfinite(v))
        throw DataError("non-finite covariate at row " + std::to_string(i) + ", column " +
                        std::to_string(j));
      if (v < 0.0 || v > 1.0)
        throw DomainError("covariate at row " + std::to_string(i) + ", column " +
                          std::to_string(j) + " outside [0,1]");
    }
  }
}

double
Sample::mean_y() const
{
  return mean(y_);
}

Sample
Sample::subset(std::span<const std::size_t> rows) const
{
  std::vector<double> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    y[r] = y_[rows[r]];
  return Sample(x_.select_rows(rows), std::move(y));
}

double
mean(std::span<const double> v)
{
  if (v.empty())
    return 0.0;
  double s = 0.0;
  for (double x : v)
    s += x;
  return s / static_cast<double>(v.size());
}

double
sample_sd(std::span<const double> v)
{
  if (v.size() < 2)
    return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v)
    ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace tlsbf

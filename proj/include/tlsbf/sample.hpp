#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tlsbf {

//! Dense column-major matrix; columns are covariates.
class Matrix
{
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows)
    , cols_(cols)
    , data_(rows * cols, fill)
  {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<const double> col(std::size_t j) const { return { data_.data() + j * rows_, rows_ }; }
  std::span<double> col(std::size_t j) { return { data_.data() + j * rows_, rows_ }; }

  std::vector<double> row(std::size_t i) const;

  Matrix select_rows(std::span<const std::size_t> rows) const;
  Matrix select_cols(std::span<const std::size_t> cols) const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

//! One population's data: n rows of covariates in [0,1]^d and responses.
class Sample
{
public:
  Sample() = default;
  //! Throws DataError on shape mismatch, n < 2 or non-finite values and
  //! DomainError for covariates outside [0,1].
  Sample(Matrix x, std::vector<double> y);

  std::size_t n() const { return y_.size(); }
  std::size_t d() const { return x_.cols(); }
  const Matrix& x() const { return x_; }
  std::span<const double> y() const { return y_; }
  double mean_y() const;

  Sample subset(std::span<const std::size_t> rows) const;

private:
  Matrix x_;
  std::vector<double> y_;
};

double mean(std::span<const double> v);
//! Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> v);

} // namespace tlsbf

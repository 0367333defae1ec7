#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tlsbf {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InvalidBandwidth : public Error
{
public:
  using Error::Error;
};

//! Input value outside its admissible domain (e.g. a covariate outside [0,1]).
class DomainError : public Error
{
public:
  using Error::Error;
};

//! Malformed or inconsistent data (shapes, missing columns, empty tables).
class DataError : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

//! A local-linear design matrix is numerically singular at some grid point.
class IllConditioned : public Error
{
public:
  IllConditioned(const std::string& what, std::size_t covariate, double grid_point)
    : Error(what)
    , covariate_(covariate)
    , grid_point_(grid_point)
  {}

  std::size_t covariate() const { return covariate_; }
  double grid_point() const { return grid_point_; }

private:
  std::size_t covariate_;
  double grid_point_;
};

} // namespace tlsbf

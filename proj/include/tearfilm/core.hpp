#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tearfilm {

using Eigen::Index;
using Eigen::VectorXd;
using Eigen::MatrixXd;

/// Row-major 2D field; element (iy, ix), x runs along columns.
using Array2 = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double pi = std::numbers::pi;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical or nondimensional parameter outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Invalid ellipse description (eccentricity or focal vector).
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline Eigen::Map<const Array2> as_field(const double* data, Index ny, Index nx) {
  return {data, ny, nx};
}

inline Eigen::Map<Array2> as_field(double* data, Index ny, Index nx) {
  return {data, ny, nx};
}

}  // namespace tearfilm

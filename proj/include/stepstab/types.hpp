#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace stepstab {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A selection s was passed where s in S(u) is required, and it is not.
class SelectionNotInStepSet : public Error {
 public:
  using Error::Error;
};

class DegenerateKernel : public Error {
 public:
  using Error::Error;
};

class NonPlanarState : public Error {
 public:
  using Error::Error;
};

class DegenerateTrajectory : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace stepstab

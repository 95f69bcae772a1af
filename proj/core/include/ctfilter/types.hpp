// Common aliases, error types and step diagnostics shared by every module.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecCRef = Eigen::Ref<const Vec>;
using VecRef = Eigen::Ref<Vec>;
using MatCRef = Eigen::Ref<const Mat>;
using MatRef = Eigen::Ref<Mat>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of arguments do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A model or belief violates one of its invariants.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A numerical step cannot be completed (NaN, singular matrix, impossible observation...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An explicit grid step would be unstable for the requested dt.
class StabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Optional sink for non-fatal events raised while stepping a filter.
///
/// Filters take a `Diagnostics*` that may be null; when present, clamping and
/// fallbacks are counted here instead of being silently absorbed.
struct Diagnostics {
  std::size_t clamp_events = 0;    ///< steps in which at least one value was clamped
  double clamped_mass = 0.0;       ///< accumulated magnitude removed by clamping
  double max_clamp_fraction = 0.0; ///< worst single-step clamped mass relative to total
  std::size_t fallbacks = 0;       ///< singular branches replaced by a safe alternative
  std::vector<std::string> warnings;

  void warn(std::string message);
  void record_clamp(double removed, double total);
  void merge(const Diagnostics& other);
};

inline void check_dim(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace ctf

// Vector- and matrix-valued callbacks used by signal and observation models.
//
// A model coefficient (drift, observation function, rate function...) is a
// `VectorFn`. Opaque user callbacks only provide `eval`; registered analytic
// families additionally provide exact derivatives and closed-form Gaussian
// expectations, which the Gaussian approximate filters consume.
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ctfilter/types.hpp"

namespace ctf {

/// Expectations of a map g: R^n -> R^m under X ~ N(mean, cov).
struct GaussianMoments {
  Vec mean;                ///< E[g(X)], length m
  Mat cross_cov;           ///< cov(g_k(X), X_j), m x n
  std::vector<Mat> second; ///< cov(g_k(X), X X^T), one n x n matrix per k (optional)
};

class VectorFn {
 public:
  virtual ~VectorFn() = default;

  virtual int in_dim() const = 0;
  virtual int out_dim() const = 0;
  virtual void eval(VecCRef x, double t, VecRef out) const = 0;

  /// Evaluates g on every row of `x` (one point per row) into the rows of
  /// `out`, which is resized to x.rows() x out_dim(). Families override this
  /// with vectorised kernels; particle filters call it once per step.
  virtual void eval_rows(const RowMat& x, double t, RowMat& out) const;

  virtual bool has_jacobian() const { return false; }
  /// out_dim x in_dim.
  virtual void jacobian(VecCRef x, double t, MatRef out) const;

  virtual bool has_hessian() const { return false; }
  /// Hessian of component k, in_dim x in_dim.
  virtual void hessian(int k, VecCRef x, double t, MatRef out) const;

  /// log g_k(x). Families override this to stay finite where g_k underflows.
  virtual double log_component(int k, VecCRef x, double t) const;
  /// Gradient of log g_k; defaults to the quotient rule.
  virtual void log_gradient(int k, VecCRef x, double t, VecRef out) const;
  /// Hessian of log g_k; defaults to the quotient rule.
  virtual void log_hessian(int k, VecCRef x, double t, MatRef out) const;

  /// Closed-form Gaussian expectations. Returns false when unavailable (or when
  /// `second_order` is requested but only first-order moments are known).
  virtual bool gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                                GaussianMoments& out) const;

  Vec operator()(VecCRef x, double t = 0.0) const;
  Mat jacobian_at(VecCRef x, double t = 0.0) const;
  Mat hessian_at(int k, VecCRef x, double t = 0.0) const;
};

class MatrixFn {
 public:
  virtual ~MatrixFn() = default;

  virtual int in_dim() const = 0;
  virtual int rows() const = 0;
  virtual int cols() const = 0;
  virtual void eval(VecCRef x, double t, MatRef out) const = 0;
  virtual bool is_constant() const { return false; }

  Mat operator()(VecCRef x, double t = 0.0) const;
};

using VectorFnPtr = std::shared_ptr<const VectorFn>;
using MatrixFnPtr = std::shared_ptr<const MatrixFn>;

/// Signature of an opaque vector callback: writes g(x, t) into `out`.
using VectorCallback = std::function<void(VecCRef x, double t, VecRef out)>;
using JacobianCallback = std::function<void(VecCRef x, double t, MatRef out)>;
using MatrixCallback = std::function<void(VecCRef x, double t, MatRef out)>;

/// Wraps a user callback. The Jacobian is optional.
VectorFnPtr make_vector_fn(int in_dim, int out_dim, VectorCallback value,
                           JacobianCallback jacobian = {});

MatrixFnPtr make_matrix_fn(int in_dim, int rows, int cols, MatrixCallback value);

/// A state-independent matrix (constant diffusion or jump amplitude).
class ConstantMatrixFn final : public MatrixFn {
 public:
  ConstantMatrixFn(int in_dim, Mat value);

  int in_dim() const override { return in_dim_; }
  int rows() const override { return static_cast<int>(value_.rows()); }
  int cols() const override { return static_cast<int>(value_.cols()); }
  void eval(VecCRef x, double t, MatRef out) const override;
  bool is_constant() const override { return true; }
  const Mat& value() const { return value_; }

 private:
  int in_dim_;
  Mat value_;
};

MatrixFnPtr make_constant_matrix(int in_dim, Mat value);

}  // namespace ctf

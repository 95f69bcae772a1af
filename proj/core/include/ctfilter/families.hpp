// Registered analytic model families with exact derivatives and Gaussian
// expectations. These back the named families usable from scenario configs.
#pragma once

#include <string>

#include "ctfilter/functions.hpp"

namespace ctf {

/// g(x) = A x + b. Used for linear drifts, linear observation functions and
/// constant maps (A = 0).
class LinearFn final : public VectorFn {
 public:
  LinearFn(Mat A, Vec b);
  static std::shared_ptr<const LinearFn> constant(int in_dim, Vec value);

  int in_dim() const override { return static_cast<int>(A_.cols()); }
  int out_dim() const override { return static_cast<int>(A_.rows()); }
  void eval(VecCRef x, double t, VecRef out) const override;
  void eval_rows(const RowMat& x, double t, RowMat& out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(VecCRef x, double t, MatRef out) const override;
  bool has_hessian() const override { return true; }
  void hessian(int k, VecCRef x, double t, MatRef out) const override;
  bool gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                        GaussianMoments& out) const override;

  const Mat& matrix() const { return A_; }
  const Vec& offset() const { return b_; }

 private:
  Mat A_;
  Vec b_;
};

/// Componentwise double-well drift f_i(x) = -a x_i (x_i^2 - 1); the stationary
/// density of dX = f dt + s dW is bimodal with modes at +-1.
class DoubleWellDrift final : public VectorFn {
 public:
  DoubleWellDrift(int dim, double a);

  int in_dim() const override { return dim_; }
  int out_dim() const override { return dim_; }
  void eval(VecCRef x, double t, VecRef out) const override;
  void eval_rows(const RowMat& x, double t, RowMat& out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(VecCRef x, double t, MatRef out) const override;
  bool has_hessian() const override { return true; }
  void hessian(int k, VecCRef x, double t, MatRef out) const override;
  bool gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                        GaussianMoments& out) const override;

  double strength() const { return a_; }

 private:
  int dim_;
  double a_;
};

/// h_k(x) = c_k exp(beta_k^T x); beta_k is row k of `slopes`.
class ExponentialRate final : public VectorFn {
 public:
  ExponentialRate(Vec gains, Mat slopes);

  int in_dim() const override { return static_cast<int>(slopes_.cols()); }
  int out_dim() const override { return static_cast<int>(slopes_.rows()); }
  void eval(VecCRef x, double t, VecRef out) const override;
  void eval_rows(const RowMat& x, double t, RowMat& out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(VecCRef x, double t, MatRef out) const override;
  bool has_hessian() const override { return true; }
  void hessian(int k, VecCRef x, double t, MatRef out) const override;
  double log_component(int k, VecCRef x, double t) const override;
  void log_gradient(int k, VecCRef x, double t, VecRef out) const override;
  void log_hessian(int k, VecCRef x, double t, MatRef out) const override;
  bool gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                        GaussianMoments& out) const override;

 private:
  Vec gains_;
  Mat slopes_;
};

/// Gaussian-shaped tuning curves h_k(x) = g_k exp(-|x - m_k|^2 / (2 s_k^2)).
/// Column k of `centers` is m_k.
class GaussianBumpRate final : public VectorFn {
 public:
  GaussianBumpRate(Vec gains, Mat centers, Vec widths);

  int in_dim() const override { return static_cast<int>(centers_.rows()); }
  int out_dim() const override { return static_cast<int>(centers_.cols()); }
  void eval(VecCRef x, double t, VecRef out) const override;
  void eval_rows(const RowMat& x, double t, RowMat& out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(VecCRef x, double t, MatRef out) const override;
  bool has_hessian() const override { return true; }
  void hessian(int k, VecCRef x, double t, MatRef out) const override;
  double log_component(int k, VecCRef x, double t) const override;
  void log_gradient(int k, VecCRef x, double t, VecRef out) const override;
  void log_hessian(int k, VecCRef x, double t, MatRef out) const override;
  bool gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                        GaussianMoments& out) const override;

 private:
  Vec gains_;
  Mat centers_;
  Vec widths_;
};

/// h_k(x) = g_k log(1 + exp(beta_k^T x + c_k)). No closed-form Gaussian
/// expectations exist, so ADF falls back to quadrature for this family.
class SoftplusRate final : public VectorFn {
 public:
  SoftplusRate(Vec gains, Mat slopes, Vec offsets);

  int in_dim() const override { return static_cast<int>(slopes_.cols()); }
  int out_dim() const override { return static_cast<int>(slopes_.rows()); }
  void eval(VecCRef x, double t, VecRef out) const override;
  void eval_rows(const RowMat& x, double t, RowMat& out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(VecCRef x, double t, MatRef out) const override;
  bool has_hessian() const override { return true; }
  void hessian(int k, VecCRef x, double t, MatRef out) const override;

 private:
  Vec gains_;
  Mat slopes_;
  Vec offsets_;
};

}  // namespace ctf

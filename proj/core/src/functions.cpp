#include "ctfilter/functions.hpp"

#include <cmath>
#include <string>

namespace ctf {

void VectorFn::jacobian(VecCRef, double, MatRef) const {
  throw ModelError("function has no Jacobian");
}

void VectorFn::hessian(int, VecCRef, double, MatRef) const {
  throw ModelError("function has no Hessian");
}

double VectorFn::log_component(int k, VecCRef x, double t) const {
  Vec value(out_dim());
  eval(x, t, value);
  return std::log(value(k));
}

void VectorFn::log_gradient(int k, VecCRef x, double t, VecRef out) const {
  Vec value(out_dim());
  eval(x, t, value);
  Mat jac(out_dim(), in_dim());
  jacobian(x, t, jac);
  out = jac.row(k).transpose() / value(k);
}

void VectorFn::log_hessian(int k, VecCRef x, double t, MatRef out) const {
  Vec value(out_dim());
  eval(x, t, value);
  Mat jac(out_dim(), in_dim());
  jacobian(x, t, jac);
  Mat hess(in_dim(), in_dim());
  hessian(k, x, t, hess);
  const Vec grad = jac.row(k).transpose();
  const double h = value(k);
  out = hess / h - grad * grad.transpose() / (h * h);
}

void VectorFn::eval_rows(const RowMat& x, double t, RowMat& out) const {
  check_dim(x.cols() == in_dim(), "eval_rows: point dimension");
  out.resize(x.rows(), out_dim());
  Vec xi(in_dim()), gi(out_dim());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    xi = x.row(r).transpose();
    eval(xi, t, gi);
    out.row(r) = gi.transpose();
  }
}

bool VectorFn::gaussian_moments(const Vec&, const Mat&, bool, GaussianMoments&) const {
  return false;
}

Vec VectorFn::operator()(VecCRef x, double t) const {
  Vec out(out_dim());
  eval(x, t, out);
  return out;
}

Mat VectorFn::jacobian_at(VecCRef x, double t) const {
  Mat out(out_dim(), in_dim());
  jacobian(x, t, out);
  return out;
}

Mat VectorFn::hessian_at(int k, VecCRef x, double t) const {
  Mat out(in_dim(), in_dim());
  hessian(k, x, t, out);
  return out;
}

Mat MatrixFn::operator()(VecCRef x, double t) const {
  Mat out(rows(), cols());
  eval(x, t, out);
  return out;
}

namespace {

class CallbackVectorFn final : public VectorFn {
 public:
  CallbackVectorFn(int in_dim, int out_dim, VectorCallback value, JacobianCallback jacobian)
      : in_dim_(in_dim), out_dim_(out_dim), value_(std::move(value)),
        jacobian_(std::move(jacobian)) {}

  int in_dim() const override { return in_dim_; }
  int out_dim() const override { return out_dim_; }
  void eval(VecCRef x, double t, VecRef out) const override { value_(x, t, out); }
  bool has_jacobian() const override { return static_cast<bool>(jacobian_); }
  void jacobian(VecCRef x, double t, MatRef out) const override {
    if (!jacobian_) VectorFn::jacobian(x, t, out);
    jacobian_(x, t, out);
  }

 private:
  int in_dim_;
  int out_dim_;
  VectorCallback value_;
  JacobianCallback jacobian_;
};

class CallbackMatrixFn final : public MatrixFn {
 public:
  CallbackMatrixFn(int in_dim, int rows, int cols, MatrixCallback value)
      : in_dim_(in_dim), rows_(rows), cols_(cols), value_(std::move(value)) {}

  int in_dim() const override { return in_dim_; }
  int rows() const override { return rows_; }
  int cols() const override { return cols_; }
  void eval(VecCRef x, double t, MatRef out) const override { value_(x, t, out); }

 private:
  int in_dim_;
  int rows_;
  int cols_;
  MatrixCallback value_;
};

}  // namespace

VectorFnPtr make_vector_fn(int in_dim, int out_dim, VectorCallback value,
                           JacobianCallback jacobian) {
  if (in_dim <= 0 || out_dim <= 0) throw DimensionError("vector function dimensions must be positive");
  if (!value) throw ModelError("vector function needs a value callback");
  return std::make_shared<CallbackVectorFn>(in_dim, out_dim, std::move(value), std::move(jacobian));
}

MatrixFnPtr make_matrix_fn(int in_dim, int rows, int cols, MatrixCallback value) {
  if (in_dim <= 0 || rows <= 0 || cols <= 0) throw DimensionError("matrix function dimensions must be positive");
  if (!value) throw ModelError("matrix function needs a value callback");
  return std::make_shared<CallbackMatrixFn>(in_dim, rows, cols, std::move(value));
}

ConstantMatrixFn::ConstantMatrixFn(int in_dim, Mat value) : in_dim_(in_dim), value_(std::move(value)) {
  if (in_dim_ <= 0 || value_.size() == 0) throw DimensionError("constant matrix must be non-empty");
}

void ConstantMatrixFn::eval(VecCRef, double, MatRef out) const { out = value_; }

MatrixFnPtr make_constant_matrix(int in_dim, Mat value) {
  return std::make_shared<ConstantMatrixFn>(in_dim, std::move(value));
}

}  // namespace ctf

#include "ctfilter/families.hpp"

#include <cmath>

namespace ctf {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ModelError(what);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// LinearFn

LinearFn::LinearFn(Mat A, Vec b) : A_(std::move(A)), b_(std::move(b)) {
  check_dim(A_.rows() > 0 && A_.cols() > 0, "LinearFn: empty matrix");
  check_dim(b_.size() == A_.rows(), "LinearFn: offset length must equal rows of A");
}

std::shared_ptr<const LinearFn> LinearFn::constant(int in_dim, Vec value) {
  const auto rows = value.size();
  return std::make_shared<LinearFn>(Mat::Zero(rows, in_dim), std::move(value));
}

void LinearFn::eval(VecCRef x, double, VecRef out) const { out.noalias() = A_ * x + b_; }

void LinearFn::eval_rows(const RowMat& x, double, RowMat& out) const {
  check_dim(x.cols() == in_dim(), "eval_rows: point dimension");
  out.noalias() = x * A_.transpose();
  out.rowwise() += b_.transpose();
}

void LinearFn::jacobian(VecCRef, double, MatRef out) const { out = A_; }

void LinearFn::hessian(int, VecCRef, double, MatRef out) const { out.setZero(); }

bool LinearFn::gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                                GaussianMoments& out) const {
  out.mean = A_ * mean + b_;
  out.cross_cov = A_ * cov;
  out.second.clear();
  if (second_order) {
    for (Eigen::Index k = 0; k < A_.rows(); ++k) {
      const Vec s = cov * A_.row(k).transpose();
      out.second.push_back(mean * s.transpose() + s * mean.transpose());
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// DoubleWellDrift

DoubleWellDrift::DoubleWellDrift(int dim, double a) : dim_(dim), a_(a) {
  check_dim(dim > 0, "DoubleWellDrift: dimension must be positive");
}

void DoubleWellDrift::eval(VecCRef x, double, VecRef out) const {
  for (int i = 0; i < dim_; ++i) out(i) = -a_ * x(i) * (x(i) * x(i) - 1.0);
}

void DoubleWellDrift::eval_rows(const RowMat& x, double, RowMat& out) const {
  check_dim(x.cols() == dim_, "eval_rows: point dimension");
  out = (-a_ * x.array() * (x.array().square() - 1.0)).matrix();
}

void DoubleWellDrift::jacobian(VecCRef x, double, MatRef out) const {
  out.setZero();
  for (int i = 0; i < dim_; ++i) out(i, i) = -a_ * (3.0 * x(i) * x(i) - 1.0);
}

void DoubleWellDrift::hessian(int k, VecCRef x, double, MatRef out) const {
  out.setZero();
  out(k, k) = -6.0 * a_ * x(k);
}

bool DoubleWellDrift::gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                                       GaussianMoments& out) const {
  if (second_order) return false;
  out.mean.resize(dim_);
  Vec mean_slope(dim_);
  for (int i = 0; i < dim_; ++i) {
    const double m = mean(i);
    const double v = cov(i, i);
    out.mean(i) = -a_ * (m * m * m + 3.0 * m * v - m);
    mean_slope(i) = -a_ * (3.0 * (m * m + v) - 1.0);
  }
  // Stein's lemma: cov(f(X), X) = E[Df(X)] cov.
  out.cross_cov = mean_slope.asDiagonal() * cov;
  out.second.clear();
  return true;
}

// ---------------------------------------------------------------------------
// ExponentialRate

ExponentialRate::ExponentialRate(Vec gains, Mat slopes) : gains_(std::move(gains)), slopes_(std::move(slopes)) {
  check_dim(slopes_.rows() > 0 && slopes_.cols() > 0, "ExponentialRate: empty slopes");
  check_dim(gains_.size() == slopes_.rows(), "ExponentialRate: one gain per channel");
  require((gains_.array() > 0.0).all(), "ExponentialRate: gains must be positive");
}

void ExponentialRate::eval(VecCRef x, double, VecRef out) const {
  out = gains_.array() * (slopes_ * x).array().exp();
}

void ExponentialRate::eval_rows(const RowMat& x, double, RowMat& out) const {
  check_dim(x.cols() == in_dim(), "eval_rows: point dimension");
  out.noalias() = x * slopes_.transpose();
  out = (out.array().exp().rowwise() * gains_.transpose().array()).matrix();
}

void ExponentialRate::jacobian(VecCRef x, double t, MatRef out) const {
  Vec h(out_dim());
  eval(x, t, h);
  out = h.asDiagonal() * slopes_;
}

void ExponentialRate::hessian(int k, VecCRef x, double, MatRef out) const {
  const double h = gains_(k) * std::exp(slopes_.row(k).dot(x));
  out = h * slopes_.row(k).transpose() * slopes_.row(k);
}

double ExponentialRate::log_component(int k, VecCRef x, double) const {
  return std::log(gains_(k)) + slopes_.row(k).dot(x);
}

void ExponentialRate::log_gradient(int k, VecCRef, double, VecRef out) const {
  out = slopes_.row(k).transpose();
}

void ExponentialRate::log_hessian(int, VecCRef, double, MatRef out) const { out.setZero(); }

bool ExponentialRate::gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                                       GaussianMoments& out) const {
  const auto m = slopes_.rows();
  const auto n = slopes_.cols();
  out.mean.resize(m);
  out.cross_cov.resize(m, n);
  out.second.clear();
  for (Eigen::Index k = 0; k < m; ++k) {
    const Vec beta = slopes_.row(k).transpose();
    const Vec s = cov * beta;
    const double e = gains_(k) * std::exp(beta.dot(mean) + 0.5 * beta.dot(s));
    out.mean(k) = e;
    out.cross_cov.row(k) = e * s.transpose();
    if (second_order) {
      out.second.push_back(e * (mean * s.transpose() + s * mean.transpose() + s * s.transpose()));
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// GaussianBumpRate

GaussianBumpRate::GaussianBumpRate(Vec gains, Mat centers, Vec widths)
    : gains_(std::move(gains)), centers_(std::move(centers)), widths_(std::move(widths)) {
  check_dim(centers_.rows() > 0 && centers_.cols() > 0, "GaussianBumpRate: empty centers");
  check_dim(gains_.size() == centers_.cols() && widths_.size() == centers_.cols(),
            "GaussianBumpRate: one gain and width per channel");
  require((gains_.array() > 0.0).all(), "GaussianBumpRate: gains must be positive");
  require((widths_.array() > 0.0).all(), "GaussianBumpRate: widths must be positive");
}

double GaussianBumpRate::log_component(int k, VecCRef x, double) const {
  const double s2 = widths_(k) * widths_(k);
  return std::log(gains_(k)) - (x - centers_.col(k)).squaredNorm() / (2.0 * s2);
}

void GaussianBumpRate::eval(VecCRef x, double t, VecRef out) const {
  for (Eigen::Index k = 0; k < centers_.cols(); ++k) {
    out(k) = std::exp(log_component(static_cast<int>(k), x, t));
  }
}

void GaussianBumpRate::eval_rows(const RowMat& x, double, RowMat& out) const {
  check_dim(x.cols() == in_dim(), "eval_rows: point dimension");
  out.resize(x.rows(), out_dim());
  for (Eigen::Index k = 0; k < centers_.cols(); ++k) {
    const double scale = -0.5 / (widths_(k) * widths_(k));
    const double log_gain = std::log(gains_(k));
    out.col(k) = ((x.rowwise() - centers_.col(k).transpose()).rowwise().squaredNorm().array() * scale +
                  log_gain)
                     .exp()
                     .matrix();
  }
}

void GaussianBumpRate::jacobian(VecCRef x, double t, MatRef out) const {
  for (Eigen::Index k = 0; k < centers_.cols(); ++k) {
    const double s2 = widths_(k) * widths_(k);
    const double h = std::exp(log_component(static_cast<int>(k), x, t));
    out.row(k) = -h * (x - centers_.col(k)).transpose() / s2;
  }
}

void GaussianBumpRate::hessian(int k, VecCRef x, double t, MatRef out) const {
  const double s2 = widths_(k) * widths_(k);
  const double h = std::exp(log_component(k, x, t));
  const Vec d = x - centers_.col(k);
  const auto n = centers_.rows();
  out = h * (d * d.transpose() / (s2 * s2) - Mat::Identity(n, n) / s2);
}

void GaussianBumpRate::log_gradient(int k, VecCRef x, double, VecRef out) const {
  out = -(x - centers_.col(k)) / (widths_(k) * widths_(k));
}

void GaussianBumpRate::log_hessian(int k, VecCRef, double, MatRef out) const {
  const auto n = centers_.rows();
  out = -Mat::Identity(n, n) / (widths_(k) * widths_(k));
}

bool GaussianBumpRate::gaussian_moments(const Vec& mean, const Mat& cov, bool second_order,
                                        GaussianMoments& out) const {
  const auto m = centers_.cols();
  const auto n = centers_.rows();
  out.mean.resize(m);
  out.cross_cov.resize(m, n);
  out.second.clear();
  for (Eigen::Index k = 0; k < m; ++k) {
    // The tilted density h_k(x) N(x; mean, cov) is Gaussian with
    // mean' = mean + K d and cov' = cov - K cov, K = cov (cov + s^2 I)^{-1}.
    const double s2 = widths_(k) * widths_(k);
    const Mat widened = cov + s2 * Mat::Identity(n, n);
    const Eigen::LLT<Mat> llt(widened);
    if (llt.info() != Eigen::Success) throw NumericalError("GaussianBumpRate: covariance not PSD");
    const Vec d = centers_.col(k) - mean;
    const Vec shift = cov * llt.solve(d);
    const Mat shrink = cov * llt.solve(cov);
    const double log_det_ratio =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum() -
        static_cast<double>(n) * std::log(s2);
    const double e = gains_(k) * std::exp(-0.5 * log_det_ratio - 0.5 * d.dot(llt.solve(d)));
    out.mean(k) = e;
    out.cross_cov.row(k) = e * shift.transpose();
    if (second_order) {
      const Vec tilted_mean = mean + shift;
      out.second.push_back(e * (tilted_mean * tilted_mean.transpose() - mean * mean.transpose() - shrink));
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// SoftplusRate

SoftplusRate::SoftplusRate(Vec gains, Mat slopes, Vec offsets)
    : gains_(std::move(gains)), slopes_(std::move(slopes)), offsets_(std::move(offsets)) {
  check_dim(slopes_.rows() > 0 && slopes_.cols() > 0, "SoftplusRate: empty slopes");
  check_dim(gains_.size() == slopes_.rows() && offsets_.size() == slopes_.rows(),
            "SoftplusRate: one gain and offset per channel");
  require((gains_.array() > 0.0).all(), "SoftplusRate: gains must be positive");
}

void SoftplusRate::eval(VecCRef x, double, VecRef out) const {
  for (Eigen::Index k = 0; k < slopes_.rows(); ++k) {
    out(k) = gains_(k) * softplus(slopes_.row(k).dot(x) + offsets_(k));
  }
}

void SoftplusRate::eval_rows(const RowMat& x, double t, RowMat& out) const {
  check_dim(x.cols() == in_dim(), "eval_rows: point dimension");
  out.resize(x.rows(), out_dim());
  Vec gi(out_dim());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    eval(x.row(r).transpose(), t, gi);
    out.row(r) = gi.transpose();
  }
}

void SoftplusRate::jacobian(VecCRef x, double, MatRef out) const {
  for (Eigen::Index k = 0; k < slopes_.rows(); ++k) {
    out.row(k) = gains_(k) * sigmoid(slopes_.row(k).dot(x) + offsets_(k)) * slopes_.row(k);
  }
}

void SoftplusRate::hessian(int k, VecCRef x, double, MatRef out) const {
  const double s = sigmoid(slopes_.row(k).dot(x) + offsets_(k));
  out = gains_(k) * s * (1.0 - s) * slopes_.row(k).transpose() * slopes_.row(k);
}

}  // namespace ctf

#include "ctfilter/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace ctf {

void symmetrize(Mat& m) { m = 0.5 * (m + m.transpose()).eval(); }

bool clamp_psd(Mat& cov, Diagnostics* diag) {
  symmetrize(cov);
  if (cov.rows() == 1) {
    if (cov(0, 0) >= 0.0) return false;
    if (diag) diag->record_clamp(-cov(0, 0), -cov(0, 0));
    cov(0, 0) = 0.0;
    return true;
  }
  // Cheap test first: a successful LDLT with nonnegative pivots means PSD.
  Eigen::LDLT<Mat> ldlt(cov);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() >= 0.0).all()) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  const Vec& ev = eig.eigenvalues();
  if (ev.minCoeff() >= 0.0) return false;
  const double removed = (-ev.array()).max(0.0).sum();
  const double total = ev.cwiseAbs().sum();
  cov = eig.eigenvectors() * ev.cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  symmetrize(cov);
  if (diag) diag->record_clamp(removed, total);
  return true;
}

Mat expm(const Mat& m) { return m.exp(); }

double symmetric_condition(const Mat& m) {
  const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(m, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / lo;
}

}  // namespace ctf

namespace ctf {

Mat spd_inverse(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + ": matrix not positive definite");
  Mat inv = llt.solve(Mat::Identity(m.rows(), m.cols()));
  symmetrize(inv);
  return inv;
}

}  // namespace ctf

#include "ctfilter/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace ctf {

namespace {

QuadratureRule compute_gauss_hermite(int order) {
  // Jacobi matrix of the probabilists' Hermite recurrence: zero diagonal,
  // off-diagonal sqrt(k).
  Mat J = Mat::Zero(order, order);
  for (int k = 1; k < order; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> eig(J);
  QuadratureRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  // Enforce exact symmetry of the rule about 0.
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double x = 0.5 * (rule.nodes(j, 0) - rule.nodes(i, 0));
    const double w = 0.5 * (rule.weights(i) + rule.weights(j));
    rule.nodes(i, 0) = -x;
    rule.nodes(j, 0) = x;
    rule.weights(i) = rule.weights(j) = w;
  }
  if (order % 2 == 1) rule.nodes(order / 2, 0) = 0.0;
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw ModelError("gauss_hermite: order must be positive");
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_gauss_hermite(order)).first;
  return it->second;
}

QuadratureRule gaussian_quadrature(const Vec& mean, const Mat& cov, int order) {
  const auto n = mean.size();
  check_dim(cov.rows() == n && cov.cols() == n, "gaussian_quadrature: covariance shape");
  if (n < 1 || n > 2) throw ModelError("gaussian_quadrature: only dimensions 1 and 2 are supported");
  const QuadratureRule base = gauss_hermite(order);
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  const Mat root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  QuadratureRule rule;
  if (n == 1) {
    rule.nodes = (base.nodes.array() * root(0, 0) + mean(0)).matrix();
    rule.weights = base.weights;
    return rule;
  }
  const int q = order * order;
  rule.nodes.resize(q, 2);
  rule.weights.resize(q);
  int idx = 0;
  for (int a = 0; a < order; ++a) {
    for (int b = 0; b < order; ++b, ++idx) {
      const Eigen::Vector2d z(base.nodes(a, 0), base.nodes(b, 0));
      rule.nodes.row(idx) = (mean + root * z).transpose();
      rule.weights(idx) = base.weights(a) * base.weights(b);
    }
  }
  return rule;
}

void quadrature_moments(const VectorFn& g, const Vec& mean, const Mat& cov, int order,
                        bool second_order, GaussianMoments& out, double t) {
  const QuadratureRule rule = gaussian_quadrature(mean, cov, order);
  const auto n = mean.size();
  const auto m = g.out_dim();
  const auto q = rule.weights.size();
  Mat values(m, q);
  Vec x(n), gx(m);
  for (Eigen::Index i = 0; i < q; ++i) {
    x = rule.nodes.row(i).transpose();
    g.eval(x, t, gx);
    if (!gx.allFinite()) throw NumericalError("quadrature_moments: non-finite integrand");
    values.col(i) = gx;
  }
  out.mean = values * rule.weights;
  out.cross_cov = Mat::Zero(m, n);
  out.second.clear();
  if (second_order) out.second.assign(static_cast<std::size_t>(m), Mat::Zero(n, n));
  for (Eigen::Index i = 0; i < q; ++i) {
    const Vec d = rule.nodes.row(i).transpose() - mean;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double wc = rule.weights(i) * (values(k, i) - out.mean(k));
      out.cross_cov.row(k) += wc * d.transpose();
      if (second_order) out.second[k] += wc * d * d.transpose();
    }
  }
  if (second_order) {
    // cov(g, X X^T) = cov(g, (X-mu)(X-mu)^T) + cov(g, X) mu^T + mu cov(g, X)^T.
    for (Eigen::Index k = 0; k < m; ++k) {
      const Vec c = out.cross_cov.row(k).transpose();
      out.second[k] += c * mean.transpose() + mean * c.transpose();
    }
  }
}

}  // namespace ctf

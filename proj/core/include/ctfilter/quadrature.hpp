// Gauss-Hermite quadrature for expectations under a Gaussian.
#pragma once

#include "ctfilter/functions.hpp"

namespace ctf {

struct QuadratureRule {
  RowMat nodes;  ///< one node per row
  Vec weights;   ///< sum to 1
};

/// Probabilists' Gauss-Hermite rule for N(0, 1) with `order` nodes
/// (Golub-Welsch). Exact for polynomials of degree <= 2 order - 1.
QuadratureRule gauss_hermite(int order);

/// Tensorised rule for N(mean, cov), dimension 1 or 2. A PSD square root of
/// `cov` maps the standard nodes, so singular covariances are allowed.
QuadratureRule gaussian_quadrature(const Vec& mean, const Mat& cov, int order);

/// Fills `out` (mean, cross covariance and optionally cov(g_k, X X^T)) by
/// quadrature.
void quadrature_moments(const VectorFn& g, const Vec& mean, const Mat& cov, int order,
                        bool second_order, GaussianMoments& out, double t = 0.0);

}  // namespace ctf

// Small dense linear-algebra helpers shared by the filters.
#pragma once

#include "ctfilter/types.hpp"

namespace ctf {

/// Replaces m by (m + m^T) / 2.
void symmetrize(Mat& m);

/// Makes `cov` symmetric and floors negative eigenvalues at zero. Returns true
/// if any eigenvalue was clamped (and records the removed mass in `diag`).
bool clamp_psd(Mat& cov, Diagnostics* diag = nullptr);

/// Matrix exponential.
Mat expm(const Mat& m);

/// 2-norm condition number of a symmetric matrix (inf if singular).
double symmetric_condition(const Mat& m);

}  // namespace ctf

namespace ctf {

/// Inverse of a symmetric positive definite matrix via Cholesky; the result
/// is symmetrised. Throws NumericalError if `m` is not positive definite.
Mat spd_inverse(const Mat& m, const char* what = "spd_inverse");

}  // namespace ctf

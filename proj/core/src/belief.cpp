#include "ctfilter/belief.hpp"

#include <cmath>

namespace ctf {

void DiscreteBelief::validate(double tol) const {
  if (probs.size() == 0 || !probs.allFinite() || (probs.array() < 0.0).any() ||
      std::abs(probs.sum() - 1.0) > tol) {
    throw ModelError("DiscreteBelief: not a probability vector");
  }
}

DiscreteBelief DiscreteBelief::uniform(int n) {
  check_dim(n > 0, "DiscreteBelief: need at least one state");
  return {Vec::Constant(n, 1.0 / n)};
}

int map_estimate(const DiscreteBelief& b) {
  check_dim(b.probs.size() > 0, "map_estimate: empty belief");
  int best = 0;
  for (Eigen::Index i = 1; i < b.probs.size(); ++i) {
    if (b.probs(i) > b.probs(best)) best = static_cast<int>(i);
  }
  return best;
}

void GaussianBelief::validate() const {
  check_dim(mean.size() > 0 && cov.rows() == mean.size() && cov.cols() == mean.size(),
            "GaussianBelief: covariance shape");
  if (!mean.allFinite() || !cov.allFinite()) throw NumericalError("GaussianBelief: non-finite entries");
}

}  // namespace ctf

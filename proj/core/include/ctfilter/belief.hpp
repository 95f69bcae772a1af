// Belief states shared by the exact and approximate filters.
#pragma once

#include "ctfilter/types.hpp"

namespace ctf {

/// Probability vector over a finite state space.
struct DiscreteBelief {
  Vec probs;

  int n_states() const { return static_cast<int>(probs.size()); }
  /// Throws ModelError unless entries are >= 0 and sum to 1 within `tol`.
  void validate(double tol = 1e-10) const;
  static DiscreteBelief uniform(int n);
};

/// Most probable state; ties go to the lowest index, so with two states the
/// estimate is 1 exactly when p_1 > 1/2.
int map_estimate(const DiscreteBelief& b);

struct GaussianBelief {
  Vec mean;
  Mat cov;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

}  // namespace ctf

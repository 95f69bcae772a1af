// Error metrics used by the experiment harness and the acceptance checks.
#pragma once

#include <vector>

#include "ctfilter/particle.hpp"
#include "ctfilter/pde_oracle.hpp"

namespace ctf {

/// Root mean squared error over all entries of two aligned matrices.
double metric_rmse(const Mat& estimates, const Mat& truth);

/// L1 distance between two densities on the same grid (dx-weighted).
double metric_l1(const GridDensity& a, const GridDensity& b);

/// Fraction of positions where the labels agree.
double metric_accuracy(const std::vector<int>& labels, const std::vector<int>& truth);

/// Mass of `dens` falling in each bin of [xmin, xmax) (split by overlap), and
/// the mass outside that range.
struct BinnedMass {
  Vec bins;
  double outside = 0.0;
};
BinnedMass bin_density(const GridDensity& dens, double xmin, double xmax, int n_bins);

/// Mass of N(mean, var) in each bin and outside the range.
BinnedMass bin_gaussian(double mean, double var, double xmin, double xmax, int n_bins);

/// Bin masses of a weighted histogram (density times bin width).
BinnedMass bin_histogram(const Histogram& hist);

/// sum_b |a_b - b_b| + |a_outside - b_outside|.
double binned_l1(const BinnedMass& a, const BinnedMass& b);

/// L1 distance between a particle histogram and a grid density rebinned onto
/// the same bins, including the mass outside the histogram range:
///   sum_b |m_hist(b) - m_grid(b)| + |outside_hist - outside_grid|.
double histogram_l1(const Histogram& hist, const GridDensity& oracle);

}  // namespace ctf

#include "ctfilter/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace ctf {

double metric_rmse(const Mat& estimates, const Mat& truth) {
  check_dim(estimates.rows() == truth.rows() && estimates.cols() == truth.cols(),
            "metric_rmse: estimates and truth are not aligned");
  if (truth.size() == 0) throw DimensionError("metric_rmse: empty input");
  return std::sqrt((estimates - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double metric_l1(const GridDensity& a, const GridDensity& b) {
  check_dim(a.n_cells() == b.n_cells() && a.xmin == b.xmin && a.xmax == b.xmax,
            "metric_l1: densities live on different grids");
  return (a.values - b.values).cwiseAbs().sum() * a.dx();
}

double metric_accuracy(const std::vector<int>& labels, const std::vector<int>& truth) {
  check_dim(labels.size() == truth.size(), "metric_accuracy: labels and truth are not aligned");
  if (truth.empty()) throw DimensionError("metric_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += labels[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

BinnedMass bin_density(const GridDensity& dens, double xmin, double xmax, int n_bins) {
  if (!(xmax > xmin) || n_bins <= 0) throw DimensionError("bin_density: invalid bin range");
  BinnedMass out;
  out.bins = Vec::Zero(n_bins);
  const double width = (xmax - xmin) / n_bins;
  const double dx = dens.dx();
  for (int i = 0; i < dens.n_cells(); ++i) {
    const double mass = dens.values(i) * dx;
    const double lo = dens.xmin + i * dx, hi = lo + dx;
    double inside = 0.0;
    const int first = std::max(0, static_cast<int>(std::floor((lo - xmin) / width)));
    const int last = std::min(n_bins - 1, static_cast<int>(std::floor((hi - xmin) / width)));
    for (int b = first; b <= last; ++b) {
      const double blo = xmin + b * width, bhi = blo + width;
      const double overlap = std::min(hi, bhi) - std::max(lo, blo);
      if (overlap > 0.0) {
        const double part = mass * overlap / dx;
        out.bins(b) += part;
        inside += part;
      }
    }
    out.outside += mass - inside;
  }
  return out;
}

BinnedMass bin_gaussian(double mean, double var, double xmin, double xmax, int n_bins) {
  if (!(xmax > xmin) || n_bins <= 0) throw DimensionError("bin_gaussian: invalid bin range");
  BinnedMass out;
  out.bins = Vec::Zero(n_bins);
  const double width = (xmax - xmin) / n_bins;
  if (!(var > 0.0)) {
    const int b = static_cast<int>(std::floor((mean - xmin) / width));
    if (b >= 0 && b < n_bins) {
      out.bins(b) = 1.0;
    } else {
      out.outside = 1.0;
    }
    return out;
  }
  const double scale = std::sqrt(2.0 * var);
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / scale); };
  double prev = cdf(xmin);
  const double lower = prev;
  for (int b = 0; b < n_bins; ++b) {
    const double next = cdf(xmin + (b + 1) * width);
    out.bins(b) = next - prev;
    prev = next;
  }
  out.outside = lower + (1.0 - prev);
  return out;
}

BinnedMass bin_histogram(const Histogram& hist) {
  return {hist.density * hist.bin_width(), hist.outside_mass};
}

double binned_l1(const BinnedMass& a, const BinnedMass& b) {
  check_dim(a.bins.size() == b.bins.size(), "binned_l1: different bin counts");
  return (a.bins - b.bins).cwiseAbs().sum() + std::abs(a.outside - b.outside);
}

double histogram_l1(const Histogram& hist, const GridDensity& oracle) {
  const int n = static_cast<int>(hist.density.size());
  BinnedMass grid = bin_density(oracle, hist.xmin, hist.xmax, n);
  const double scale = 1.0 / std::max(oracle.mass(), 1e-300);
  grid.bins *= scale;
  grid.outside *= scale;
  return binned_l1(bin_histogram(hist), grid);
}

}  // namespace ctf

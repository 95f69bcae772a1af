// 1-D finite-volume reference solver for the Fokker-Planck / master equation
// and the Kushner, Zakai and point-process filtering equations.
//
// Space: cell-centred grid on [xmin, xmax] with zero-flux (reflecting)
// boundaries. The drift-diffusion flux F = f p - d/dx(D p), D = G^2 / 2, is
// discretised with the exponentially fitted Scharfetter-Gummel scheme, which
// reduces to first-order upwinding where diffusion vanishes and reproduces
// exp(-potential) stationary profiles to second order. Constant jumps move
// mass by the nearest whole number of cells; jumps that would leave the
// domain are suppressed so that mass is conserved.
//
// Time: explicit Euler. A step is only taken if it keeps the update
// monotone (positivity preserving); otherwise StabilityError is thrown.
// Filter steps can split the prediction into substeps.
#pragma once

#include <functional>
#include <iosfwd>

#include "ctfilter/belief.hpp"
#include "ctfilter/exact_filters.hpp"
#include "ctfilter/model.hpp"

namespace ctf {

struct GridDensity {
  double xmin = 0.0;
  double xmax = 1.0;
  Vec values;  ///< density per cell (units 1/x)

  int n_cells() const { return static_cast<int>(values.size()); }
  double dx() const { return (xmax - xmin) / static_cast<double>(values.size()); }
  double center(int i) const { return xmin + (i + 0.5) * dx(); }
  Vec centers() const;

  double mass() const { return values.sum() * dx(); }
  void normalize();
  double expectation(const std::function<double(double)>& fn) const;
  double mean() const;
  double variance() const;
  void validate() const;

  /// Samples `density` at the cell centres and normalises.
  static GridDensity from_density(double xmin, double xmax, int n_cells,
                                  const std::function<double(double)>& density);
  /// Gaussian prior N(mean, var); var = 0 puts all mass in the nearest cell.
  static GridDensity gaussian(double xmin, double xmax, int n_cells, double mean, double var);
};

/// Precomputed explicit Fokker-Planck operator for a 1-D model at time t.
class FokkerPlanckOperator {
 public:
  FokkerPlanckOperator(const JumpDiffusionModel& model, double xmin, double xmax, int n_cells,
                       double t = 0.0, Diagnostics* diag = nullptr);

  int n_cells() const { return n_cells_; }
  double xmin() const { return xmin_; }
  double xmax() const { return xmax_; }
  double dx() const { return dx_; }

  /// Largest dt for which one explicit step stays monotone.
  double max_stable_dt() const { return max_dt_; }
  /// Smallest number of equal substeps that keeps `dt` stable.
  int substeps_for(double dt) const;

  /// One explicit step; throws StabilityError if dt > max_stable_dt().
  /// Mass is conserved up to rounding; no renormalisation is applied.
  void step(Vec& p, double dt) const;
  /// Advances by dt using `substeps` equal steps (0 = as many as needed).
  void advance(Vec& p, double dt, int substeps = 0) const;

 private:
  int n_cells_;
  double xmin_, xmax_, dx_;
  Vec right_;  ///< interface i+1/2: F = right_(i) p_i - left_(i) p_{i+1}
  Vec left_;
  Vec jump_rate_;  ///< per cell and channel, flattened channel-major
  std::vector<int> shifts_;
  double max_dt_;
};

/// fokker_planck_step on a fresh operator: one explicit step, then renormalise.
GridDensity fokker_planck_step(const GridDensity& dens, const JumpDiffusionModel& model, double dt,
                               Diagnostics* diag = nullptr, double t = 0.0);

/// How the observation factor is applied after the prediction.
enum class ObsUpdate {
  /// Multiply by the first-order factor, e.g. 1 + (h - <h>)^T R^{-1} (dY - <h> dt);
  /// negative values are clamped and counted.
  linearized,
  /// Multiply by the exact likelihood ratio over the step, e.g.
  /// exp(h^T R^{-1} dY - h^T R^{-1} h dt / 2); positive by construction.
  exponential,
};

/// The linearized factor drops the dY dY^T - Sigma_y dt fluctuation, so its
/// pathwise error only shrinks like sqrt(dt); the exponential factor is the
/// default for reference solutions.
struct GridFilterOptions {
  ObsUpdate update = ObsUpdate::exponential;
  int substeps = 1;  ///< prediction substeps per observation step; 0 = automatic
};

GridDensity kushner_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                         const GaussianObsModel& obs, VecCRef dY, double dt,
                         const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr,
                         double t = 0.0);
GridDensity kushner_step(const GridDensity& dens, const JumpDiffusionModel& model,
                         const GaussianObsModel& obs, VecCRef dY, double dt,
                         const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr,
                         double t = 0.0);

/// Unnormalised density: no renormalisation after the update.
GridDensity zakai_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                       const GaussianObsModel& obs, VecCRef dY, double dt,
                       const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr,
                       double t = 0.0);
GridDensity zakai_step(const GridDensity& dens, const JumpDiffusionModel& model,
                       const GaussianObsModel& obs, VecCRef dY, double dt,
                       const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr,
                       double t = 0.0);

GridDensity pp_kushner_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                            const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                            const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr,
                            double t = 0.0);
GridDensity pp_kushner_step(const GridDensity& dens, const JumpDiffusionModel& model,
                            const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                            const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr,
                            double t = 0.0);

/// Unnormalised point-process filter relative to reference rate lambda_0.
GridDensity pp_zakai_step(const GridDensity& dens, const FokkerPlanckOperator& op,
                          const PointProcessObsModel& obs, IntVecCRef dN, double dt,
                          const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr,
                          double t = 0.0);

// Finite-state versions: prediction by an explicit master-equation step
// p += A^T p dt, followed by the same observation factors.

DiscreteBelief kushner_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                            const Mat& h_matrix, const Mat& noise_cov, VecCRef dY, double dt,
                            const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr);

DiscreteBelief pp_kushner_step(const DiscreteBelief& belief, const MarkovChainModel& model,
                               const Mat& rates, IntVecCRef dN, double dt,
                               const GridFilterOptions& opts = {}, Diagnostics* diag = nullptr);

/// Density evaluated observation values: row j holds h_j at every cell centre.
Mat grid_values(const VectorFn& fn, const GridDensity& dens, double t = 0.0);

/// CSV with columns x, p.
void write_density_csv(const GridDensity& dens, std::ostream& os);

}  // namespace ctf

#pragma once

#include <optional>

#include <Eigen/Core>

namespace daisi {

/// Per-step evaluation record.  `ssr` is flagged degenerate when some
/// per-variable error vanishes and the ratio is undefined.
struct MetricReport {
  double rmse = 0.0;
  double ens_rmse = 0.0;
  double crps = 0.0;
  double spread = 0.0;
  double ssr = 0.0;
  bool ssr_degenerate = false;
  std::optional<double> mmd;
};

/// RMSE of the ensemble mean against the truth, over all variables.
/// Rows of `ensemble` are members.
double rmse(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& truth);

/// Mean over members of the per-member RMSE.
double ens_rmse(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& truth);

/// Fair (unbiased) ensemble CRPS, per variable then averaged:
/// mean_j |x_j - y| - (1/(2 J (J-1))) sum_{j,k} |x_j - x_k|.
/// Requires at least two members.
double crps_fair(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& truth);

struct SpreadSsr {
  double spread = 0.0;
  double ssr = 0.0;
  bool degenerate = false;  // some per-variable error was exactly zero
};

/// Ensemble spread and the spread-skill ratio
/// sqrt((J+1)/J) * spread_d / rmse_d, per variable then averaged.
SpreadSsr spread_and_ssr(const Eigen::MatrixXd& ensemble,
                         const Eigen::VectorXd& truth);

/// Kernel two-sample distance: square root of the clamped unbiased MMD^2
/// estimate under a squared-exponential kernel whose bandwidth is the
/// median heuristic sigma^2 = median(|x_i - y_j|) / 2 over the cross-set
/// distance multiset (lower median).  Rows are samples; both sets need at
/// least two.
double mmd_rbf(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// All per-step metrics at once.
MetricReport evaluate_ensemble(const Eigen::MatrixXd& ensemble,
                               const Eigen::VectorXd& truth);

}  // namespace daisi

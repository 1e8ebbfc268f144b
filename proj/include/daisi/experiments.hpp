#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "daisi/filters.hpp"
#include "daisi/training.hpp"

namespace daisi {

/// Heatmap experiment on the static mixture testbed: for each (t_min, eps)
/// cell, run one analysis step on the tilted forecast ensemble with Monte
/// Carlo guidance and score the result by MMD against the exact filtering
/// reference.
struct GmmAblationConfig {
  std::vector<double> t_min_grid{0.3};
  std::vector<double> eps_grid{0.1};
  Eigen::Index particles = 10000;  // testbed/ensemble size
  Eigen::Index pool = 10000;       // Monte Carlo guidance pool
  int steps = 200;
  int seeds = 1;
  double zeta = 1.0;
  std::uint64_t master_seed = 0;
};

struct GmmAblationRow {
  double t_min = 0.0;
  double eps = 0.0;
  double mmd = 0.0;
  std::uint64_t seed = 0;
};

struct GmmAblationResult {
  std::vector<GmmAblationRow> rows;
  double best_t_min = 0.0;
  double best_eps = 0.0;
  double best_mmd = 0.0;  // per-cell mean across seeds at the argmin cell
};

GmmAblationResult run_gmm_ablation(const GmmAblationConfig& cfg, int threads);

/// One analysis pass on the testbed, exposed for the trade-off and
/// monotonicity checks that need the raw samples.
struct GmmCellResult {
  GmmTestbed testbed;
  Eigen::VectorXd analysis;
};

GmmCellResult run_gmm_cell(const GmmAblationConfig& cfg, double t_min,
                           double eps, std::uint64_t seed, int threads);

enum class FilterMethod { Daisi, DaisiNoInversion, Bpf };

/// Lorenz '63 filtering benchmark: per repeat, integrate a truth trajectory,
/// assimilate scalar x-observations over the last `n_assim` steps and average
/// the metrics over the last `metric_window`.
struct L63FilterConfig {
  FilterMethod method = FilterMethod::Daisi;
  double t_min = 0.65;
  double eps = 0.15;
  int steps = 40;
  Eigen::Index members = 100;
  Eigen::Index mc_pool = 10000;
  double zeta = 1.0;
  Eigen::Index bpf_particles = 10000;
  ResamplingScheme resampling = ResamplingScheme::Systematic;
  Eigen::Index truth_rows = 5000;
  Eigen::Index n_assim = 500;
  Eigen::Index metric_window = 100;
  double sigma_obs = 5.0;
  double sigma_init = 5.0;
  int repeats = 10;
  std::uint64_t master_seed = 0;
};

struct MetricSummary {
  double rmse = 0.0;
  double ens_rmse = 0.0;
  double crps = 0.0;
  double spread = 0.0;
  double ssr = 0.0;
};

struct L63FilterResult {
  std::vector<MetricSummary> repeats;  // window means per repeat
  MetricSummary mean;
  MetricSummary stdev;
  std::vector<FilterTrace> traces;
};

/// `model` is ignored for the BPF method; `data` supplies the normalization
/// and the Monte Carlo guidance pool (training rows only).
L63FilterResult run_l63_filter(const L63FilterConfig& cfg, const NetDrift& model,
                               const Dataset& data, int threads);

/// Grid search replacing the paper-level hyperparameter tuner: evaluates the
/// window-averaged CRPS on a held-out tuning trajectory for every
/// (t_min, eps) cell and returns the argmin.
struct SweepConfig {
  std::vector<double> t_min_grid{0.65};
  std::vector<double> eps_grid{0.15};
  int repeats = 1;
  Eigen::Index members = 100;
  Eigen::Index mc_pool = 2000;
  int steps = 40;
  double zeta = 1.0;
  Eigen::Index truth_rows = 5000;
  Eigen::Index n_assim = 200;
  Eigen::Index metric_window = 100;
  double sigma_obs = 5.0;
  double sigma_init = 5.0;
  std::uint64_t master_seed = 0;
};

struct SweepRow {
  double t_min = 0.0;
  double eps = 0.0;
  double crps = 0.0;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double best_t_min = 0.0;
  double best_eps = 0.0;
  double best_crps = 0.0;
};

SweepResult run_sweep(const SweepConfig& cfg, const NetDrift& model,
                      const Dataset& data, int threads);

/// Linear-Gaussian oracle battery: conjugate-posterior sampling with MMPS
/// guidance, a DAISI run against the exact Kalman filter on a scalar AR(1)
/// system, and the bootstrap particle filter against the same oracle.
struct CheckReport {
  bool pass = true;
  std::vector<std::string> lines;
};

CheckReport run_linear_gaussian_check(std::uint64_t seed, int threads);

/// Draws `count` distinct rows (seeded) from the leading `limit` rows.
Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& source,
                               Eigen::Index limit, Eigen::Index count,
                               std::uint64_t seed);

/// Window mean over the last `window` entries of a trace's metrics.
MetricSummary summarize_trace(const FilterTrace& trace, Eigen::Index window);

}  // namespace daisi

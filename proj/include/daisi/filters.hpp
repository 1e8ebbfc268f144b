#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "daisi/drift.hpp"
#include "daisi/guidance.hpp"
#include "daisi/metrics.hpp"
#include "daisi/rng.hpp"
#include "daisi/sde.hpp"
#include "daisi/systems.hpp"

namespace daisi {

/// Carrier of the filtering distributions: J state vectors of dimension d,
/// one per row, plus the assimilation step index.
struct Ensemble {
  Eigen::MatrixXd members;
  int step = 0;

  Eigen::Index size() const { return members.rows(); }
  Eigen::Index dim() const { return members.cols(); }
};

/// Analysis-step configuration.  `no_inversion` replaces the backward pass
/// with fresh draws from the interpolant reference N(0, I), so the analysis
/// samples the observation-conditioned prior and ignores the forecast.
struct DaisiConfig {
  double t_min = 0.01;
  double eps = 0.0;
  int steps = 100;
  GuidanceMethod guidance{};
  bool no_inversion = false;
  std::uint64_t seed = 0;

  void validate() const;
  SdeConfig sde_config() const;
};

/// One analysis step: per member, invert the forecast down to t_min with the
/// backward SDE, then run the guided forward SDE back to t = 1.  Members own
/// rng streams derived from (seed, step, member), so results are independent
/// of the thread count.
Ensemble daisi_analysis(const Ensemble& forecast, const Eigen::VectorXd& y,
                        const ObservationModel& obs, const DriftModel& drift,
                        const DaisiConfig& cfg, int threads = 1);

/// Per-step record of a filter run; metrics are filled when a truth
/// trajectory is supplied.
struct FilterTrace {
  std::vector<MetricReport> metrics;
  Eigen::MatrixXd means;                 // n_steps x d ensemble means
  std::vector<Eigen::MatrixXd> ensembles;  // kept only on request

  std::size_t size() const { return metrics.size(); }
};

/// Full forecast/analysis cycle over a sequence of observations (one row
/// each).  `truth` rows, when given, are the states the observations were
/// generated from and feed the per-step metrics.
FilterTrace daisi_run(Ensemble init, const Eigen::MatrixXd& observations,
                      const Propagator& dynamics, const ObservationModel& obs,
                      const DriftModel& drift, const DaisiConfig& cfg,
                      const Eigen::MatrixXd* truth = nullptr, int threads = 1,
                      bool keep_ensembles = false);

enum class ResamplingScheme { Systematic, Multinomial };

/// Bootstrap particle filter: propagate, weight by the Gaussian likelihood in
/// log space, resample every step.
FilterTrace bpf_run(Ensemble init, const Eigen::MatrixXd& observations,
                    const Propagator& dynamics, const ObservationModel& obs,
                    ResamplingScheme scheme, std::uint64_t seed,
                    const Eigen::MatrixXd* truth = nullptr,
                    bool keep_ensembles = false);

/// Draws rows of `samples` with replacement proportionally to the given
/// log weights.
Eigen::MatrixXd resample_rows(const Eigen::MatrixXd& samples,
                              const Eigen::VectorXd& log_weights,
                              Eigen::Index n_out, Rng& rng,
                              ResamplingScheme scheme);

/// Importance-reweights a sample set by weight_fn (non-negative, at least one
/// strictly positive) and resamples the same number of rows.
template <class F>
Eigen::MatrixXd reweight_resample(const Eigen::MatrixXd& samples, F&& weight_fn,
                                  Rng& rng,
                                  ResamplingScheme scheme =
                                      ResamplingScheme::Multinomial) {
  Eigen::VectorXd logw(samples.rows());
  bool any_positive = false;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const double w = weight_fn(samples.row(i).transpose());
    if (w < 0.0)
      throw std::invalid_argument("reweight_resample: negative weight");
    any_positive = any_positive || w > 0.0;
    logw[i] = std::log(w);
  }
  if (!any_positive)
    throw std::invalid_argument("reweight_resample: all weights are zero");
  return resample_rows(samples, logw, samples.rows(), rng, scheme);
}

/// Exact linear-Gaussian filter (predict/update recursion), used only as a
/// verification oracle.
struct KalmanResult {
  Eigen::MatrixXd means;                // n_steps x d posterior means
  std::vector<Eigen::MatrixXd> covs;    // posterior covariances
};

KalmanResult kalman_filter(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                           const Eigen::VectorXd& m0, const Eigen::MatrixXd& P0,
                           const Eigen::MatrixXd& observations);

}  // namespace daisi

#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "daisi/rng.hpp"
#include "daisi/schedule.hpp"

namespace daisi {

/// Evaluator of the interpolant drift b(t, z).  Models are immutable after
/// construction and safe to evaluate from any number of threads.  Evaluation
/// happens in the model's native space; `stats()` tells the caller how that
/// space relates to data space (identity for analytic models).
class DriftModel {
 public:
  virtual ~DriftModel() = default;

  virtual Eigen::Index dim() const = 0;
  virtual const Schedule& schedule() const = 0;
  virtual const NormStats& stats() const = 0;

  virtual Eigen::VectorXd drift(double t, const Eigen::VectorXd& z) const = 0;

  /// Batched evaluation, one state per row.  The default loops over rows;
  /// concrete models override with vectorized paths.
  virtual Eigen::MatrixXd drift_rows(double t, const Eigen::MatrixXd& z) const;

  /// Directional derivative of the denoiser mean, (d/dz E[z1|z_t]) v.
  /// The default uses central finite differences with step
  /// h = 1e-4 * (1 + |z|_inf); analytic models override with exact values.
  virtual Eigen::VectorXd denoiser_jvp(double t, const Eigen::VectorXd& z,
                                       const Eigen::VectorXd& v) const;
};

/// (d/dz E[z1|z_t]) v for any drift evaluator.
Eigen::VectorXd jacobian_vector_product(const DriftModel& model,
                                        const Eigen::VectorXd& z, double t,
                                        const Eigen::VectorXd& v);

/// One-dimensional Gaussian mixture prior.
struct GmmPrior {
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd stds;

  Eigen::Index components() const { return weights.size(); }
  void validate() const;
  double log_pdf(double x) const;
  double pdf(double x) const;
};

/// Draws n samples from the mixture.
Eigen::VectorXd sample_gmm(const GmmPrior& prior, Eigen::Index n, Rng& rng);

/// Exact drift of the interpolant toward a 1D Gaussian mixture.  Under the
/// interpolant, z_t | component k is N(alpha*mu_k, alpha^2 sd_k^2 + beta^2),
/// so the drift is a responsibility-weighted combination of the per-component
/// conditional means of (z1, z0).  Responsibilities are computed in log space
/// with max subtraction.
double gmm_drift(const GmmPrior& prior, double z, double t,
                 const Schedule& schedule);

class GmmDrift final : public DriftModel {
 public:
  GmmDrift(GmmPrior prior, Schedule schedule = Schedule{});

  Eigen::Index dim() const override { return 1; }
  const Schedule& schedule() const override { return schedule_; }
  const NormStats& stats() const override { return stats_; }
  const GmmPrior& prior() const { return prior_; }

  Eigen::VectorXd drift(double t, const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd drift_rows(double t, const Eigen::MatrixXd& z) const override;

  // exact scalar Jacobian of the denoiser mean
  Eigen::VectorXd denoiser_jvp(double t, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& v) const override;

 private:
  GmmPrior prior_;
  Schedule schedule_;
  NormStats stats_;
};

/// Analytic drift for an isotropic Gaussian prior N(mean, var*I) in any
/// dimension; the denoiser mean is affine in z, so the JVP is exact.
class IsotropicGaussianDrift final : public DriftModel {
 public:
  IsotropicGaussianDrift(Eigen::VectorXd mean, double var,
                         Schedule schedule = Schedule{});

  Eigen::Index dim() const override { return mean_.size(); }
  const Schedule& schedule() const override { return schedule_; }
  const NormStats& stats() const override { return stats_; }

  Eigen::VectorXd drift(double t, const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd drift_rows(double t, const Eigen::MatrixXd& z) const override;
  Eigen::VectorXd denoiser_jvp(double t, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& v) const override;

 private:
  Eigen::VectorXd mean_;
  double var_;
  Schedule schedule_;
  NormStats stats_;
};

/// Feed-forward drift network: input [z, t] of size d+1, rectifier hidden
/// layers, linear output of size d.  Operates in normalized space; `stats()`
/// records the normalization it was trained under.
class NetDrift final : public DriftModel {
 public:
  NetDrift() = default;
  NetDrift(std::vector<int> layer_dims, NormStats stats,
           Schedule schedule = Schedule{});

  Eigen::Index dim() const override;
  const Schedule& schedule() const override { return schedule_; }
  const NormStats& stats() const override { return stats_; }

  const std::vector<int>& layer_dims() const { return dims_; }
  Eigen::Index n_params() const { return params_.size(); }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }
  void set_stats(NormStats stats) { stats_ = std::move(stats); }

  /// Xavier-uniform weights, zero biases.
  void init_params(Rng& rng);

  /// Raw forward pass on a batch of inputs (rows of size dims.front()).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  Eigen::VectorXd drift(double t, const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd drift_rows(double t, const Eigen::MatrixXd& z) const override;

  // flat parameter layout: per layer, column-major W (out x in) then bias
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  int layers() const { return static_cast<int>(dims_.size()) - 1; }

 private:
  std::vector<int> dims_;
  std::vector<Eigen::Index> w_offsets_, b_offsets_;
  Eigen::VectorXd params_;
  NormStats stats_;
  Schedule schedule_;
};

/// Data-space view of a drift model trained in normalized space:
/// b_Z(t, z) = sigma * b_W(t, (z - mu)/sigma).
class RescaledDrift final : public DriftModel {
 public:
  RescaledDrift(std::shared_ptr<const DriftModel> inner, NormStats stats);

  Eigen::Index dim() const override { return inner_->dim(); }
  const Schedule& schedule() const override { return inner_->schedule(); }
  const NormStats& stats() const override { return identity_; }

  Eigen::VectorXd drift(double t, const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd drift_rows(double t, const Eigen::MatrixXd& z) const override;
  Eigen::VectorXd denoiser_jvp(double t, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& v) const override;

 private:
  std::shared_ptr<const DriftModel> inner_;
  NormStats rescale_;
  NormStats identity_;
};

}  // namespace daisi

#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "daisi/drift.hpp"
#include "daisi/schedule.hpp"

namespace daisi {

/// Additive-Gaussian observation model y = H(x) + nu, nu ~ N(0, sigma_obs^2 I).
/// Operator kinds: identity, sparse-linear coordinate selection, elementwise
/// (x/scale)^2 and elementwise arctan.  An optional affine change of state
/// variables (u = in_scale*x + in_offset, applied before the operator) lets a
/// data-space model act on normalized states.
struct ObservationModel {
  enum class Kind { Identity, SparseLinear, Square, Arctan };

  Kind kind = Kind::Identity;
  Eigen::Index d_x = 0;
  std::vector<Eigen::Index> mask;  // SparseLinear only
  double sigma_obs = 1.0;
  double square_scale = 7.0;

  double in_scale = 1.0;
  Eigen::VectorXd in_offset;  // empty means zero

  Eigen::Index d_y() const;
  void validate() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// H'(x) v and H'(x)^T w; the Jacobians are analytic per operator kind.
  Eigen::VectorXd jac_apply(const Eigen::VectorXd& x,
                            const Eigen::VectorXd& v) const;
  Eigen::VectorXd jac_transpose_apply(const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& w) const;

  double log_likelihood(const Eigen::VectorXd& y,
                        const Eigen::VectorXd& x) const;

  /// The same observations seen from normalized state space w = (x-mu)/sigma.
  ObservationModel for_normalized_state(const NormStats& stats) const;
};

struct CgConfig {
  double tol = 1e-8;
  int max_iters = 200;
};

enum class GuidanceKind { Dps, Mmps, MonteCarlo };

/// Likelihood-score approximation selector.  `zeta` multiplies the estimated
/// likelihood score wherever it enters the guided drift and score.
struct GuidanceMethod {
  GuidanceKind kind = GuidanceKind::Mmps;
  double zeta = 1.0;
  Eigen::MatrixXd mc_pool;  // M x d prior samples (MonteCarlo only), data space
  CgConfig solver{};

  void validate() const;
};

/// Plug-in (DPS) estimate of the likelihood score:
/// J^T H_t^T (y - H(zhat1)) with zhat1 = E[z1|z_t] and H_t the operator
/// Jacobian at zhat1.
Eigen::VectorXd dps_grad(const Eigen::VectorXd& z_t, double t,
                         const Eigen::VectorXd& y, const ObservationModel& obs,
                         const DriftModel& model);

/// Moment-matched (MMPS) estimate: solves the d_y x d_y system
/// (sigma_obs^2 I + (beta^2/alpha) H J H^T) v = y - H(zhat1) matrix-free by
/// conjugate gradients (J accessed only through denoiser JVPs) and returns
/// J^T H_t^T v.  Throws on CG non-convergence, naming the residual norm.
Eigen::VectorXd mmps_grad(const Eigen::VectorXd& z_t, double t,
                          const Eigen::VectorXd& y, const ObservationModel& obs,
                          const DriftModel& model, const CgConfig& cg = {});

/// Monte Carlo estimate over a pool of prior samples:
/// grad log [ sum_i p(y|x_i) N(z_t; alpha x_i, beta^2 I)
///          / sum_j N(z_t; alpha x_j, beta^2 I) ]
///  = (alpha/beta^2) (m_w - m_u), the difference of the likelihood-tilted and
/// untilted softmax-weighted pool means.  All weights are handled in log
/// space; full underflow of the tilted weights reports pool depletion.
Eigen::VectorXd mc_grad(const Eigen::VectorXd& z_t, double t,
                        const Eigen::VectorXd& y, const ObservationModel& obs,
                        const Eigen::MatrixXd& pool, const Schedule& schedule);

struct GuidedTerms {
  Eigen::VectorXd drift;            // b + lambda_t * zeta * g
  Eigen::VectorXd score_increment;  // zeta * g
};

/// Assembles the guided drift and the score increment from an unguided drift
/// value and a likelihood-score estimate.  Throws at t = 0 where lambda_t is
/// singular.
GuidedTerms guided_terms(const Eigen::VectorXd& b, const Eigen::VectorXd& g,
                         double t, const Schedule& schedule, double zeta);

/// Per-analysis guidance evaluator used by the SDE integrators.  For the
/// Monte Carlo method it holds the pool and the per-pool-sample likelihood
/// weights (both fixed given y), plus per-time-step kernel caches refreshed
/// via set_time; DPS/MMPS are stateless.  One instance serves one member
/// block; copies share the pool storage.
class GuidanceContext {
 public:
  GuidanceContext(const GuidanceMethod& method, Eigen::VectorXd y,
                  ObservationModel obs, Schedule schedule);

  double zeta() const { return zeta_; }
  GuidanceKind kind() const { return kind_; }

  void set_time(double t);
  Eigen::VectorXd likelihood_grad(const Eigen::VectorXd& z_t, double t,
                                  const DriftModel& model) const;

 private:
  GuidanceKind kind_;
  double zeta_;
  Eigen::VectorXd y_;
  ObservationModel obs_;
  Schedule schedule_;
  CgConfig cg_;

  std::shared_ptr<const Eigen::MatrixXd> pool_;
  Eigen::ArrayXd lik_weight_;  // exp(log p(y|x_i) - max_i)
  // time cache
  double alpha_ = 0.0, beta2_ = 0.0;
  Eigen::MatrixXd alpha_pool_;
  Eigen::ArrayXd alpha_pool_sqnorm_;
};

}  // namespace daisi

#pragma once

#include <Eigen/Core>

namespace daisi {

/// Score evaluation is rejected for t >= 1 - kScoreSingularDelta; the score
/// of the interpolant diverges at t = 1 and integrators multiply it by
/// eps_t = eps * (1 - t), which vanishes there, so the guarded zone is never
/// needed by a correctly configured solver.
inline constexpr double kScoreSingularDelta = 1e-4;

enum class ScheduleKind { Linear };

/// Interpolant coefficients at a fixed time t.
struct ScheduleCoeffs {
  double t;
  double alpha;
  double beta;
  double dalpha;
  double dbeta;
  double gamma;  // dalpha*beta - alpha*dbeta

  /// beta*gamma/alpha; diverges as t -> 0.  Throws std::domain_error at the
  /// singular schedule point alpha = 0.
  double lambda() const;
};

/// Interpolant schedule alpha_t, beta_t with alpha(0)=beta(1)=0 and
/// alpha(1)=beta(0)=1.  Only the linear schedule alpha=t, beta=1-t is
/// implemented; the enumeration leaves room for other C^2 schedules.
class Schedule {
 public:
  explicit Schedule(ScheduleKind kind = ScheduleKind::Linear) : kind_(kind) {}

  ScheduleKind kind() const { return kind_; }

  /// All coefficients at once; throws std::domain_error for t outside [0,1].
  ScheduleCoeffs coeffs(double t) const;

  double alpha(double t) const { return coeffs(t).alpha; }
  double beta(double t) const { return coeffs(t).beta; }
  double dalpha(double t) const { return coeffs(t).dalpha; }
  double dbeta(double t) const { return coeffs(t).dbeta; }
  double gamma(double t) const { return coeffs(t).gamma; }
  double lambda(double t) const { return coeffs(t).lambda(); }

 private:
  ScheduleKind kind_;
};

/// Diffusion strength eps_t = eps * (1 - t); zero at t = 1 so the backward
/// SDE never needs the score at its singular endpoint.
struct EpsSchedule {
  double eps = 0.0;

  double operator()(double t) const { return eps * (1.0 - t); }
  bool active() const { return eps > 0.0; }
};

/// Normalization used when a drift model was trained on standardized data:
/// w = (x - mu) / sigma with per-component mu and a single scalar sigma.
struct NormStats {
  Eigen::VectorXd mu;
  double sigma = 1.0;

  static NormStats identity(Eigen::Index dim);
  bool is_identity() const;
  void validate() const;  // throws std::invalid_argument unless sigma > 0

  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& w) const;
  Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd denormalize_rows(const Eigen::MatrixXd& w) const;
};

/// Score of the interpolant marginal recovered from the drift,
/// s = (alpha*b - dalpha*z) / (beta*gamma).  Rejects t in the guarded zone
/// near the t = 1 singularity (see kScoreSingularDelta).
Eigen::VectorXd score_from_drift(const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& z, double t,
                                 const Schedule& schedule);

/// Row-wise variant: each row of `b`/`z` is one state.
Eigen::MatrixXd score_from_drift_rows(const Eigen::MatrixXd& b,
                                      const Eigen::MatrixXd& z, double t,
                                      const Schedule& schedule);

/// Conditional expectation E[z1 | z_t] = (beta*b - dbeta*z) / gamma.
/// Well defined on (0, 1]; returns z exactly at t = 1.
Eigen::VectorXd denoiser_mean_from_drift(const Eigen::VectorXd& b,
                                         const Eigen::VectorXd& z, double t,
                                         const Schedule& schedule);

Eigen::MatrixXd denoiser_mean_from_drift_rows(const Eigen::MatrixXd& b,
                                              const Eigen::MatrixXd& z,
                                              double t,
                                              const Schedule& schedule);

/// Conditional expectation E[z0 | z_t] = -beta * score.
Eigen::VectorXd noise_mean_from_drift(const Eigen::VectorXd& b,
                                      const Eigen::VectorXd& z, double t,
                                      const Schedule& schedule);

/// Maps a drift value from normalized space to data space:
/// b_Z(t, z) = sigma * b_W(t, (z - mu)/sigma).  This is the value-level half
/// of the rescaling; evaluating b_W at the normalized point is the caller's
/// (or RescaledDrift's) job.
Eigen::VectorXd rescale_drift(const Eigen::VectorXd& b_w,
                              const NormStats& stats);

}  // namespace daisi

#include "daisi/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace daisi {

double ScheduleCoeffs::lambda() const {
  if (alpha == 0.0)
    throw std::domain_error("singular schedule point: lambda undefined at t=0");
  return beta * gamma / alpha;
}

ScheduleCoeffs Schedule::coeffs(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream msg;
    msg << "schedule time outside [0,1]: t=" << t;
    throw std::domain_error(msg.str());
  }
  // linear schedule: alpha=t, beta=1-t, gamma = 1*(1-t) - t*(-1) = 1
  return ScheduleCoeffs{t, t, 1.0 - t, 1.0, -1.0, 1.0};
}

NormStats NormStats::identity(Eigen::Index dim) {
  return NormStats{Eigen::VectorXd::Zero(dim), 1.0};
}

bool NormStats::is_identity() const {
  return sigma == 1.0 && (mu.size() == 0 || mu.isZero(0.0));
}

void NormStats::validate() const {
  if (!(sigma > 0.0))
    throw std::invalid_argument("NormStats: sigma must be > 0");
}

Eigen::VectorXd NormStats::normalize(const Eigen::VectorXd& x) const {
  return (x - mu) / sigma;
}

Eigen::VectorXd NormStats::denormalize(const Eigen::VectorXd& w) const {
  return sigma * w + mu;
}

Eigen::MatrixXd NormStats::normalize_rows(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mu.transpose()) / sigma;
}

Eigen::MatrixXd NormStats::denormalize_rows(const Eigen::MatrixXd& w) const {
  return (sigma * w).rowwise() + mu.transpose();
}

namespace {

void check_score_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream msg;
    msg << "score_from_drift: t outside [0,1]: t=" << t;
    throw std::domain_error(msg.str());
  }
  if (t >= 1.0 - kScoreSingularDelta) {
    std::ostringstream msg;
    msg << "score_from_drift: score singular near t=1 (t=" << t << ")";
    throw std::domain_error(msg.str());
  }
}

void check_denoiser_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream msg;
    msg << "denoiser_mean_from_drift: t outside [0,1]: t=" << t;
    throw std::domain_error(msg.str());
  }
}

}  // namespace

Eigen::VectorXd score_from_drift(const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& z, double t,
                                 const Schedule& schedule) {
  check_score_time(t);
  const ScheduleCoeffs c = schedule.coeffs(t);
  return (c.alpha * b - c.dalpha * z) / (c.beta * c.gamma);
}

Eigen::MatrixXd score_from_drift_rows(const Eigen::MatrixXd& b,
                                      const Eigen::MatrixXd& z, double t,
                                      const Schedule& schedule) {
  check_score_time(t);
  const ScheduleCoeffs c = schedule.coeffs(t);
  return (c.alpha * b - c.dalpha * z) / (c.beta * c.gamma);
}

Eigen::VectorXd denoiser_mean_from_drift(const Eigen::VectorXd& b,
                                         const Eigen::VectorXd& z, double t,
                                         const Schedule& schedule) {
  check_denoiser_time(t);
  const ScheduleCoeffs c = schedule.coeffs(t);
  return (c.beta * b - c.dbeta * z) / c.gamma;
}

Eigen::MatrixXd denoiser_mean_from_drift_rows(const Eigen::MatrixXd& b,
                                              const Eigen::MatrixXd& z,
                                              double t,
                                              const Schedule& schedule) {
  check_denoiser_time(t);
  const ScheduleCoeffs c = schedule.coeffs(t);
  return (c.beta * b - c.dbeta * z) / c.gamma;
}

Eigen::VectorXd noise_mean_from_drift(const Eigen::VectorXd& b,
                                      const Eigen::VectorXd& z, double t,
                                      const Schedule& schedule) {
  const double beta = schedule.coeffs(t).beta;
  return -beta * score_from_drift(b, z, t, schedule);
}

Eigen::VectorXd rescale_drift(const Eigen::VectorXd& b_w,
                              const NormStats& stats) {
  stats.validate();
  return stats.sigma * b_w;
}

}  // namespace daisi

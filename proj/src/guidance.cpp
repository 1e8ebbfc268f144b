#include "daisi/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace daisi {

Eigen::Index ObservationModel::d_y() const {
  return kind == Kind::SparseLinear ? static_cast<Eigen::Index>(mask.size())
                                    : d_x;
}

void ObservationModel::validate() const {
  if (d_x < 1) throw std::invalid_argument("ObservationModel: d_x must be >= 1");
  if (!(sigma_obs > 0.0))
    throw std::invalid_argument("ObservationModel: sigma_obs must be > 0");
  if (kind == Kind::SparseLinear) {
    if (mask.empty())
      throw std::invalid_argument("ObservationModel: empty sparse-linear mask");
    std::vector<Eigen::Index> sorted = mask;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("ObservationModel: duplicate mask indices");
    if (sorted.front() < 0 || sorted.back() >= d_x)
      throw std::invalid_argument("ObservationModel: mask index out of range");
  }
  if (in_offset.size() != 0 && in_offset.size() != d_x)
    throw std::invalid_argument("ObservationModel: in_offset dimension mismatch");
}

namespace {

Eigen::VectorXd input_map(const ObservationModel& m, const Eigen::VectorXd& x) {
  if (m.in_scale == 1.0 && m.in_offset.size() == 0) return x;
  Eigen::VectorXd u = m.in_scale * x;
  if (m.in_offset.size() != 0) u += m.in_offset;
  return u;
}

}  // namespace

Eigen::VectorXd ObservationModel::apply(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd u = input_map(*this, x);
  switch (kind) {
    case Kind::Identity:
      return u;
    case Kind::SparseLinear: {
      Eigen::VectorXd out(mask.size());
      for (std::size_t i = 0; i < mask.size(); ++i) out[i] = u[mask[i]];
      return out;
    }
    case Kind::Square:
      return (u.array() / square_scale).square().matrix();
    case Kind::Arctan:
      return u.array().atan().matrix();
  }
  throw std::logic_error("ObservationModel: unknown kind");
}

Eigen::VectorXd ObservationModel::jac_apply(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& v) const {
  const Eigen::VectorXd u = input_map(*this, x);
  const Eigen::VectorXd sv = in_scale * v;
  switch (kind) {
    case Kind::Identity:
      return sv;
    case Kind::SparseLinear: {
      Eigen::VectorXd out(mask.size());
      for (std::size_t i = 0; i < mask.size(); ++i) out[i] = sv[mask[i]];
      return out;
    }
    case Kind::Square:
      return (2.0 * u.array() / (square_scale * square_scale) * sv.array())
          .matrix();
    case Kind::Arctan:
      return (sv.array() / (1.0 + u.array().square())).matrix();
  }
  throw std::logic_error("ObservationModel: unknown kind");
}

Eigen::VectorXd ObservationModel::jac_transpose_apply(
    const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  const Eigen::VectorXd u = input_map(*this, x);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d_x);
  switch (kind) {
    case Kind::Identity:
      out = w;
      break;
    case Kind::SparseLinear:
      for (std::size_t i = 0; i < mask.size(); ++i) out[mask[i]] = w[i];
      break;
    case Kind::Square:
      out = (2.0 * u.array() / (square_scale * square_scale) * w.array())
                .matrix();
      break;
    case Kind::Arctan:
      out = (w.array() / (1.0 + u.array().square())).matrix();
      break;
  }
  return in_scale * out;
}

double ObservationModel::log_likelihood(const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = y - apply(x);
  return -0.5 * r.squaredNorm() / (sigma_obs * sigma_obs);
}

ObservationModel ObservationModel::for_normalized_state(
    const NormStats& stats) const {
  if (in_scale != 1.0 || in_offset.size() != 0)
    throw std::invalid_argument(
        "ObservationModel: already carries an input map");
  stats.validate();
  ObservationModel out = *this;
  out.in_scale = stats.sigma;
  out.in_offset = stats.mu;
  return out;
}

void GuidanceMethod::validate() const {
  if (zeta < 0.0)
    throw std::invalid_argument("GuidanceMethod: zeta must be >= 0");
  if (kind == GuidanceKind::MonteCarlo && mc_pool.rows() == 0)
    throw std::invalid_argument("GuidanceMethod: Monte Carlo needs a pool");
}

Eigen::VectorXd dps_grad(const Eigen::VectorXd& z_t, double t,
                         const Eigen::VectorXd& y, const ObservationModel& obs,
                         const DriftModel& model) {
  const Eigen::VectorXd zhat1 = denoiser_mean_from_drift(
      model.drift(t, z_t), z_t, t, model.schedule());
  const Eigen::VectorXd residual = y - obs.apply(zhat1);
  const Eigen::VectorXd pulled = obs.jac_transpose_apply(zhat1, residual);
  // the denoiser Jacobian is symmetric, so the JVP stands in for J^T
  return model.denoiser_jvp(t, z_t, pulled);
}

Eigen::VectorXd mmps_grad(const Eigen::VectorXd& z_t, double t,
                          const Eigen::VectorXd& y, const ObservationModel& obs,
                          const DriftModel& model, const CgConfig& cg) {
  const ScheduleCoeffs c = model.schedule().coeffs(t);
  if (!(c.alpha > 0.0))
    throw std::domain_error("mmps_grad: requires alpha_t > 0");
  const double cov_scale = c.beta * c.beta / c.alpha;
  const double sigma2 = obs.sigma_obs * obs.sigma_obs;

  const Eigen::VectorXd zhat1 = denoiser_mean_from_drift(
      model.drift(t, z_t), z_t, t, model.schedule());
  const Eigen::VectorXd rhs = y - obs.apply(zhat1);

  const auto apply_system = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd hw = obs.jac_transpose_apply(zhat1, w);
    const Eigen::VectorXd jhw = model.denoiser_jvp(t, z_t, hw);
    return (sigma2 * w + cov_scale * obs.jac_apply(zhat1, jhw)).eval();
  };

  // conjugate gradients on the small observation-space system
  Eigen::VectorXd v = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Eigen::VectorXd::Zero(z_t.size());
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  bool converged = false;
  for (int it = 0; it < cg.max_iters; ++it) {
    const Eigen::VectorXd ap = apply_system(p);
    const double alpha_cg = rs / p.dot(ap);
    v += alpha_cg * p;
    r -= alpha_cg * ap;
    const double rs_new = r.squaredNorm();
    if (std::sqrt(rs_new) <= cg.tol * rhs_norm) {
      converged = true;
      break;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "mmps_grad: CG did not converge after " << cg.max_iters
        << " iterations, residual norm " << r.norm();
    throw std::runtime_error(msg.str());
  }

  const Eigen::VectorXd pulled = obs.jac_transpose_apply(zhat1, v);
  return model.denoiser_jvp(t, z_t, pulled);
}

namespace {

struct McMeans {
  Eigen::VectorXd tilted;    // likelihood-weighted softmax mean of the pool
  Eigen::VectorXd untilted;  // kernel-only softmax mean
};

// Shared core of mc_grad and GuidanceContext: softmax means over the pool
// under kernel log-weights c_i = -|z - alpha x_i|^2 / (2 beta^2), with the
// tilted version additionally weighted by exp(log p(y|x_i) - max).
McMeans mc_softmax_means(const Eigen::MatrixXd& pool,
                         const Eigen::MatrixXd& alpha_pool,
                         const Eigen::ArrayXd& alpha_pool_sqnorm,
                         const Eigen::ArrayXd& lik_weight, double beta2,
                         const Eigen::VectorXd& z_t, double t) {
  // |z - a_i|^2 = |z|^2 - 2 z.a_i + |a_i|^2; |z|^2 drops in the softmax
  Eigen::ArrayXd logk =
      (alpha_pool * z_t).array() - 0.5 * alpha_pool_sqnorm;
  logk /= beta2;
  const double m = logk.maxCoeff();
  const Eigen::ArrayXd ker = (logk - m).exp();

  const double s_u = ker.sum();
  const Eigen::ArrayXd tilted_w = ker * lik_weight;
  const double s_t = tilted_w.sum();
  if (!(s_u > 0.0) || !(s_t > 0.0)) {
    std::ostringstream msg;
    msg << "mc_grad: pool depleted at t=" << t;
    throw std::runtime_error(msg.str());
  }
  McMeans out;
  out.untilted = (pool.transpose() * ker.matrix()) / s_u;
  out.tilted = (pool.transpose() * tilted_w.matrix()) / s_t;
  return out;
}

Eigen::ArrayXd pool_log_likelihoods(const Eigen::MatrixXd& pool,
                                    const Eigen::VectorXd& y,
                                    const ObservationModel& obs) {
  Eigen::ArrayXd ll(pool.rows());
  for (Eigen::Index i = 0; i < pool.rows(); ++i)
    ll[i] = obs.log_likelihood(y, pool.row(i).transpose());
  return ll;
}

}  // namespace

Eigen::VectorXd mc_grad(const Eigen::VectorXd& z_t, double t,
                        const Eigen::VectorXd& y, const ObservationModel& obs,
                        const Eigen::MatrixXd& pool, const Schedule& schedule) {
  if (pool.rows() == 0) throw std::invalid_argument("mc_grad: empty pool");
  const ScheduleCoeffs c = schedule.coeffs(t);
  const double beta2 = c.beta * c.beta;

  Eigen::ArrayXd ll = pool_log_likelihoods(pool, y, obs);
  const Eigen::ArrayXd lik_weight = (ll - ll.maxCoeff()).exp();

  const Eigen::MatrixXd alpha_pool = c.alpha * pool;
  const Eigen::ArrayXd sqnorm = alpha_pool.rowwise().squaredNorm();
  const McMeans means = mc_softmax_means(pool, alpha_pool, sqnorm, lik_weight,
                                         beta2, z_t, t);
  return (c.alpha / beta2) * (means.tilted - means.untilted);
}

GuidedTerms guided_terms(const Eigen::VectorXd& b, const Eigen::VectorXd& g,
                         double t, const Schedule& schedule, double zeta) {
  const double lambda = schedule.coeffs(t).lambda();
  GuidedTerms out;
  out.score_increment = zeta * g;
  out.drift = b + lambda * out.score_increment;
  return out;
}

GuidanceContext::GuidanceContext(const GuidanceMethod& method,
                                 Eigen::VectorXd y, ObservationModel obs,
                                 Schedule schedule)
    : kind_(method.kind),
      zeta_(method.zeta),
      y_(std::move(y)),
      obs_(std::move(obs)),
      schedule_(schedule),
      cg_(method.solver) {
  method.validate();
  obs_.validate();
  if (kind_ == GuidanceKind::MonteCarlo) {
    pool_ = std::make_shared<const Eigen::MatrixXd>(method.mc_pool);
    const Eigen::ArrayXd ll = pool_log_likelihoods(*pool_, y_, obs_);
    lik_weight_ = (ll - ll.maxCoeff()).exp();
  }
}

void GuidanceContext::set_time(double t) {
  if (kind_ != GuidanceKind::MonteCarlo) return;
  const ScheduleCoeffs c = schedule_.coeffs(t);
  alpha_ = c.alpha;
  beta2_ = c.beta * c.beta;
  alpha_pool_ = alpha_ * (*pool_);
  alpha_pool_sqnorm_ = alpha_pool_.rowwise().squaredNorm();
}

Eigen::VectorXd GuidanceContext::likelihood_grad(const Eigen::VectorXd& z_t,
                                                 double t,
                                                 const DriftModel& model) const {
  switch (kind_) {
    case GuidanceKind::Dps:
      return dps_grad(z_t, t, y_, obs_, model);
    case GuidanceKind::Mmps:
      return mmps_grad(z_t, t, y_, obs_, model, cg_);
    case GuidanceKind::MonteCarlo: {
      const McMeans means = mc_softmax_means(
          *pool_, alpha_pool_, alpha_pool_sqnorm_, lik_weight_, beta2_, z_t, t);
      return (alpha_ / beta2_) * (means.tilted - means.untilted);
    }
  }
  throw std::logic_error("GuidanceContext: unknown kind");
}

}  // namespace daisi

#include "daisi/sde.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace daisi {

void SdeConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("SdeConfig: steps must be >= 1");
  if (!(t_min >= 0.0 && t_min < 1.0))
    throw std::invalid_argument("SdeConfig: t_min must lie in [0,1)");
  if (eps.eps < 0.0)
    throw std::invalid_argument("SdeConfig: eps must be >= 0");
}

namespace {

constexpr int kFiniteCheckStride = 10;

void check_step_size(double dt, bool eps_active) {
  // with eps > 0 the score is evaluated up to t = 1 - dt, which must stay
  // outside the guarded singular zone
  if (eps_active && dt <= kScoreSingularDelta) {
    std::ostringstream msg;
    msg << "SDE step size " << dt
        << " too small for the score guard near t=1; reduce steps";
    throw std::invalid_argument(msg.str());
  }
}

void check_finite(const Eigen::MatrixXd& z, int step) {
  if (!z.allFinite()) {
    std::ostringstream msg;
    msg << "SDE state became non-finite at step " << step;
    throw std::runtime_error(msg.str());
  }
}

void add_noise(Eigen::MatrixXd& z, double sd, std::span<Rng> rngs) {
  std::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      z(j, c) += sd * normal(rngs[static_cast<std::size_t>(j)]);
  }
}

void bump_score_counters(SdeCounters* counters, double t, Eigen::Index rows) {
  if (!counters) return;
  counters->score_evals += rows;
  if (t == 1.0) counters->score_evals_at_one += rows;
}

}  // namespace

Eigen::MatrixXd integrate_forward_block(const DriftModel& model,
                                        const SdeConfig& cfg,
                                        Eigen::MatrixXd z, double from_t,
                                        std::span<Rng> rngs,
                                        SdeCounters* counters) {
  cfg.validate();
  if (!(from_t >= 0.0 && from_t < 1.0))
    throw std::invalid_argument("integrate_forward: from_t must lie in [0,1)");
  if (rngs.size() != static_cast<std::size_t>(z.rows()))
    throw std::invalid_argument("integrate_forward: one rng per member");
  const double dt = (1.0 - from_t) / cfg.steps;
  check_step_size(dt, cfg.eps.active());
  const Schedule& sched = model.schedule();

  for (int k = 0; k < cfg.steps; ++k) {
    const double t = from_t + k * dt;
    const Eigen::MatrixXd b = model.drift_rows(t, z);
    if (counters) counters->drift_evals += z.rows();
    const double e = cfg.eps(t);
    if (e > 0.0) {
      const Eigen::MatrixXd s = score_from_drift_rows(b, z, t, sched);
      bump_score_counters(counters, t, z.rows());
      z += dt * (b + e * s);
      add_noise(z, std::sqrt(2.0 * e * dt), rngs);
    } else {
      z += dt * b;
    }
    if (k % kFiniteCheckStride == 0) check_finite(z, k);
  }
  check_finite(z, cfg.steps);
  return z;
}

Eigen::MatrixXd integrate_backward_block(const DriftModel& model,
                                         const SdeConfig& cfg,
                                         Eigen::MatrixXd z,
                                         std::span<Rng> rngs,
                                         SdeCounters* counters) {
  cfg.validate();
  if (rngs.size() != static_cast<std::size_t>(z.rows()))
    throw std::invalid_argument("integrate_backward: one rng per member");
  const double dt = (1.0 - cfg.t_min) / cfg.steps;
  check_step_size(dt, cfg.eps.active());
  const Schedule& sched = model.schedule();

  for (int k = cfg.steps; k >= 1; --k) {
    // evaluate at the current (upper) grid point; t = 1 exactly on the first
    // step, where eps_t = 0 keeps the singular score out of the update
    const double t = (k == cfg.steps) ? 1.0 : cfg.t_min + k * dt;
    const Eigen::MatrixXd b = model.drift_rows(t, z);
    if (counters) counters->drift_evals += z.rows();
    const double e = cfg.eps(t);
    if (e > 0.0) {
      const Eigen::MatrixXd s = score_from_drift_rows(b, z, t, sched);
      bump_score_counters(counters, t, z.rows());
      z -= dt * (b - e * s);
      add_noise(z, std::sqrt(2.0 * e * dt), rngs);
    } else {
      z -= dt * b;
    }
    if (k % kFiniteCheckStride == 0) check_finite(z, k);
  }
  check_finite(z, 0);
  return z;
}

Eigen::MatrixXd integrate_guided_forward_block(const DriftModel& model,
                                               GuidanceContext& ctx,
                                               const SdeConfig& cfg,
                                               Eigen::MatrixXd z,
                                               double start_t,
                                               std::span<Rng> rngs,
                                               SdeCounters* counters) {
  cfg.validate();
  if (!(start_t >= 0.0 && start_t < 1.0))
    throw std::invalid_argument("guided forward: start time must lie in [0,1)");
  if (rngs.size() != static_cast<std::size_t>(z.rows()))
    throw std::invalid_argument("guided forward: one rng per member");
  const double dt = (1.0 - start_t) / cfg.steps;
  check_step_size(dt, cfg.eps.active());
  const Schedule& sched = model.schedule();
  const double zeta = ctx.zeta();

  Eigen::MatrixXd g(z.rows(), z.cols());
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = start_t + k * dt;
    const Eigen::MatrixXd b = model.drift_rows(t, z);
    if (counters) counters->drift_evals += z.rows();
    const double e = cfg.eps(t);
    const bool guided = zeta != 0.0 && t > 0.0;

    Eigen::MatrixXd drift_term = b;
    if (guided) {
      ctx.set_time(t);
      for (Eigen::Index j = 0; j < z.rows(); ++j) {
        try {
          g.row(j) =
              ctx.likelihood_grad(z.row(j).transpose(), t, model).transpose();
        } catch (const std::exception& err) {
          std::ostringstream msg;
          msg << "guidance failed at t=" << t << ": " << err.what();
          throw std::runtime_error(msg.str());
        }
      }
      drift_term += (sched.coeffs(t).lambda() * zeta) * g;
    }

    if (e > 0.0) {
      Eigen::MatrixXd score_term = score_from_drift_rows(b, z, t, sched);
      bump_score_counters(counters, t, z.rows());
      if (guided) score_term += zeta * g;
      z += dt * (drift_term + e * score_term);
      add_noise(z, std::sqrt(2.0 * e * dt), rngs);
    } else {
      z += dt * drift_term;
    }
    if (k % kFiniteCheckStride == 0) check_finite(z, k);
  }
  check_finite(z, cfg.steps);
  return z;
}

Eigen::VectorXd integrate_forward(const DriftModel& model, const SdeConfig& cfg,
                                  const Eigen::VectorXd& z0, double from_t,
                                  Rng& rng, SdeCounters* counters) {
  Eigen::MatrixXd z = z0.transpose();
  const Eigen::MatrixXd out = integrate_forward_block(
      model, cfg, std::move(z), from_t, std::span<Rng>(&rng, 1), counters);
  return out.row(0).transpose();
}

LatentState integrate_backward(const DriftModel& model, const SdeConfig& cfg,
                               const Eigen::VectorXd& z1, Rng& rng,
                               SdeCounters* counters) {
  Eigen::MatrixXd z = z1.transpose();
  const Eigen::MatrixXd out = integrate_backward_block(
      model, cfg, std::move(z), std::span<Rng>(&rng, 1), counters);
  return LatentState{out.row(0).transpose(), cfg.t_min};
}

Eigen::VectorXd integrate_guided_forward(const DriftModel& model,
                                         const GuidanceMethod& guidance,
                                         const Eigen::VectorXd& y,
                                         const ObservationModel& obs,
                                         const SdeConfig& cfg,
                                         const LatentState& z_start, Rng& rng,
                                         SdeCounters* counters) {
  if (std::abs(z_start.t - cfg.t_min) > 1e-12)
    throw std::invalid_argument(
        "integrate_guided_forward: start state must sit at cfg.t_min");
  GuidanceContext ctx(guidance, y, obs, model.schedule());
  Eigen::MatrixXd z = z_start.z.transpose();
  const Eigen::MatrixXd out = integrate_guided_forward_block(
      model, ctx, cfg, std::move(z), z_start.t, std::span<Rng>(&rng, 1),
      counters);
  return out.row(0).transpose();
}

}  // namespace daisi

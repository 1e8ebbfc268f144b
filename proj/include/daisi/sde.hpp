#pragma once

#include <span>

#include <Eigen/Core>

#include "daisi/drift.hpp"
#include "daisi/guidance.hpp"
#include "daisi/rng.hpp"
#include "daisi/schedule.hpp"

namespace daisi {

/// Euler-Maruyama setup on a uniform grid over [t_min, 1].  Backward and
/// forward passes share the grid so that the eps = 0 roundtrip converges to
/// the identity as steps grow.
struct SdeConfig {
  int steps = 100;
  EpsSchedule eps{};
  double t_min = 0.0;

  void validate() const;
};

struct LatentState {
  Eigen::VectorXd z;
  double t = 0.0;
};

/// Instrumentation for the integrators; score_evals_at_one stays zero because
/// eps_t vanishes at t = 1 and the score is skipped whenever its coefficient
/// is zero.
struct SdeCounters {
  long drift_evals = 0;
  long score_evals = 0;
  long score_evals_at_one = 0;
};

/// dz = (b + eps_t s) dt + sqrt(2 eps_t) dW from from_t to 1.  With eps = 0
/// this is the deterministic transport ODE and the score is never evaluated.
Eigen::VectorXd integrate_forward(const DriftModel& model, const SdeConfig& cfg,
                                  const Eigen::VectorXd& z0, double from_t,
                                  Rng& rng, SdeCounters* counters = nullptr);

/// dz = (b - eps_t s) dt + sqrt(2 eps_t) dW integrated from t = 1 down to
/// cfg.t_min; returns the latent state at t_min.
LatentState integrate_backward(const DriftModel& model, const SdeConfig& cfg,
                               const Eigen::VectorXd& z1, Rng& rng,
                               SdeCounters* counters = nullptr);

/// Guided forward SDE from z_start.t (= cfg.t_min) to 1; the likelihood-score
/// estimate g enters the drift as lambda_t*zeta*g and the score channel as
/// zeta*g.  At t = 0 exactly, where lambda_t is singular, the first step is
/// taken unguided.
Eigen::VectorXd integrate_guided_forward(const DriftModel& model,
                                         const GuidanceMethod& guidance,
                                         const Eigen::VectorXd& y,
                                         const ObservationModel& obs,
                                         const SdeConfig& cfg,
                                         const LatentState& z_start, Rng& rng,
                                         SdeCounters* counters = nullptr);

// Block variants: rows of Z are ensemble members integrated in lockstep, each
// member drawing noise from its own stream.  These are what the filters use;
// the single-state functions above are one-row wrappers.
Eigen::MatrixXd integrate_forward_block(const DriftModel& model,
                                        const SdeConfig& cfg,
                                        Eigen::MatrixXd z0, double from_t,
                                        std::span<Rng> rngs,
                                        SdeCounters* counters = nullptr);

Eigen::MatrixXd integrate_backward_block(const DriftModel& model,
                                         const SdeConfig& cfg,
                                         Eigen::MatrixXd z1,
                                         std::span<Rng> rngs,
                                         SdeCounters* counters = nullptr);

Eigen::MatrixXd integrate_guided_forward_block(const DriftModel& model,
                                               GuidanceContext& ctx,
                                               const SdeConfig& cfg,
                                               Eigen::MatrixXd z_start,
                                               double start_t,
                                               std::span<Rng> rngs,
                                               SdeCounters* counters = nullptr);

}  // namespace daisi

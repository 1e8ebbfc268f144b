#pragma once

#include <Eigen/Core>

#include "daisi/drift.hpp"
#include "daisi/guidance.hpp"
#include "daisi/rng.hpp"

namespace daisi {

/// Standard chaotic-regime parameters and the integration step used
/// throughout.
struct L63Params {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double dt = 0.01;
};

/// Lorenz '63 vector field (sigma*(y-x), x*(rho-z)-y, x*y-beta*z).
Eigen::Vector3d l63_rhs(const Eigen::Vector3d& x, const L63Params& p = {});

/// Classical fourth-order Runge-Kutta step.
template <class F>
Eigen::VectorXd rk4_step(F&& f, const Eigen::VectorXd& x, double dt) {
  const Eigen::VectorXd k1 = f(x);
  const Eigen::VectorXd k2 = f((x + 0.5 * dt * k1).eval());
  const Eigen::VectorXd k3 = f((x + 0.5 * dt * k2).eval());
  const Eigen::VectorXd k4 = f((x + dt * k3).eval());
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// n_steps rows starting at x0 (the first row is x0 itself).
Eigen::MatrixXd l63_trajectory(const Eigen::Vector3d& x0, Eigen::Index n_steps,
                               const L63Params& p = {});

/// Forecast dynamics used by the filters.  The linear-Gaussian kind is the
/// scalar AR(1) system x' = a x + q xi used by the oracle tests; L63 is
/// deterministic (process noise identically zero).
struct Propagator {
  enum class Kind { Static, L63, LinearGaussian };

  Kind kind = Kind::Static;
  L63Params l63{};
  double ar_coeff = 0.0;
  double ar_noise_std = 0.0;
  int steps_per_assim = 1;

  Eigen::VectorXd propagate(const Eigen::VectorXd& x, Rng& rng) const;
};

/// Applies the observation operator and adds N(0, sigma_obs^2 I) noise.
Eigen::VectorXd observe(const Eigen::VectorXd& x, const ObservationModel& obs,
                        Rng& rng);

/// Static 1D testbed: a Gaussian-mixture invariant measure, a forecast
/// ensemble built by tilting it with a Gaussian density ratio, a scalar
/// observation, and reweight-resample sample sets for the exact posterior
/// references.
struct GmmTestbed {
  GmmPrior prior;
  double y = 2.5;
  double sigma_obs = 1.0;
  double tilt_mean = 0.5;
  double tilt_std = 1.5;

  Eigen::VectorXd prior_pool;          // draws from the invariant measure
  Eigen::VectorXd forecast;            // predictive ensemble (tilted prior)
  Eigen::VectorXd posterior_truth;     // filtering reference: p(y|.)*tilt*prior
  Eigen::VectorXd posterior_reference; // observation-only reference: p(y|.)*prior

  ObservationModel observation_model() const;
};

GmmPrior paper_gmm_prior();

GmmTestbed build_gmm_testbed(std::uint64_t seed, Eigen::Index n = 10000);

}  // namespace daisi

#include "daisi/systems.hpp"

#include <cmath>
#include <stdexcept>

#include "daisi/filters.hpp"

namespace daisi {

Eigen::Vector3d l63_rhs(const Eigen::Vector3d& x, const L63Params& p) {
  return {p.sigma * (x[1] - x[0]), x[0] * (p.rho - x[2]) - x[1],
          x[0] * x[1] - p.beta * x[2]};
}

Eigen::MatrixXd l63_trajectory(const Eigen::Vector3d& x0, Eigen::Index n_steps,
                               const L63Params& p) {
  if (n_steps < 1)
    throw std::invalid_argument("l63_trajectory: n_steps must be >= 1");
  const auto rhs = [&p](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return l63_rhs(x, p);
  };
  Eigen::MatrixXd out(n_steps, 3);
  Eigen::VectorXd x = x0;
  out.row(0) = x.transpose();
  for (Eigen::Index i = 1; i < n_steps; ++i) {
    x = rk4_step(rhs, x, p.dt);
    out.row(i) = x.transpose();
  }
  return out;
}

Eigen::VectorXd Propagator::propagate(const Eigen::VectorXd& x, Rng& rng) const {
  switch (kind) {
    case Kind::Static:
      return x;
    case Kind::L63: {
      const auto rhs = [this](const Eigen::VectorXd& s) -> Eigen::VectorXd {
        return l63_rhs(s, l63);
      };
      Eigen::VectorXd out = x;
      for (int i = 0; i < steps_per_assim; ++i)
        out = rk4_step(rhs, out, l63.dt);
      return out;
    }
    case Kind::LinearGaussian: {
      Eigen::VectorXd out = ar_coeff * x;
      if (ar_noise_std > 0.0) out += ar_noise_std * normal_vector(rng, x.size());
      return out;
    }
  }
  throw std::logic_error("Propagator: unknown kind");
}

Eigen::VectorXd observe(const Eigen::VectorXd& x, const ObservationModel& obs,
                        Rng& rng) {
  obs.validate();
  return obs.apply(x) + obs.sigma_obs * normal_vector(rng, obs.d_y());
}

GmmPrior paper_gmm_prior() {
  GmmPrior prior;
  prior.weights = Eigen::Vector3d{0.5, 0.3, 0.2};
  prior.means = Eigen::Vector3d{0.0, 3.0, -2.0};
  prior.stds = Eigen::Vector3d{1.0, 0.5, 0.8};
  return prior;
}

ObservationModel GmmTestbed::observation_model() const {
  ObservationModel obs;
  obs.kind = ObservationModel::Kind::Identity;
  obs.d_x = 1;
  obs.sigma_obs = sigma_obs;
  return obs;
}

GmmTestbed build_gmm_testbed(std::uint64_t seed, Eigen::Index n) {
  GmmTestbed bed;
  bed.prior = paper_gmm_prior();

  Rng pool_rng = make_rng(seed, stream::kTestbed, 0);
  bed.prior_pool = sample_gmm(bed.prior, n, pool_rng);
  const Eigen::MatrixXd pool = bed.prior_pool;

  const double tilt_mean = bed.tilt_mean, tilt_std = bed.tilt_std;
  const auto tilt = [tilt_mean, tilt_std](const Eigen::VectorXd& x) {
    const double r = (x[0] - tilt_mean) / tilt_std;
    return std::exp(-0.5 * r * r);
  };
  const double y = bed.y, sigma_obs = bed.sigma_obs;
  const auto likelihood = [y, sigma_obs](const Eigen::VectorXd& x) {
    const double r = (y - x[0]) / sigma_obs;
    return std::exp(-0.5 * r * r);
  };

  Rng forecast_rng = make_rng(seed, stream::kTestbed, 1);
  bed.forecast = reweight_resample(pool, tilt, forecast_rng);

  Rng truth_rng = make_rng(seed, stream::kTestbed, 2);
  bed.posterior_truth = reweight_resample(
      pool,
      [&](const Eigen::VectorXd& x) { return tilt(x) * likelihood(x); },
      truth_rng);

  Rng ref_rng = make_rng(seed, stream::kTestbed, 3);
  bed.posterior_reference = reweight_resample(pool, likelihood, ref_rng);
  return bed;
}

}  // namespace daisi

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "daisi/drift.hpp"
#include "daisi/schedule.hpp"
#include "daisi/systems.hpp"
#include "oracles.hpp"

using namespace daisi;

namespace {
Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x[0] = v;
  return x;
}

oracles::Mixture1d paper_mixture() {
  return {{0.5, 0.3, 0.2}, {0.0, 3.0, -2.0}, {1.0, 0.5, 0.8}};
}
}  // namespace

TEST_CASE("linear schedule endpoint conditions") {
  Schedule s;
  CHECK(s.alpha(0.0) == 0.0);
  CHECK(s.alpha(1.0) == 1.0);
  CHECK(s.beta(0.0) == 1.0);
  CHECK(s.beta(1.0) == 0.0);
}

TEST_CASE("schedule coefficients at reference points") {
  Schedule s;
  const ScheduleCoeffs c = s.coeffs(0.5);
  CHECK(c.alpha == 0.5);
  CHECK(c.beta == 0.5);
  CHECK(c.dalpha == 1.0);
  CHECK(c.dbeta == -1.0);
  CHECK(c.gamma == 1.0);
  CHECK(c.lambda() == 1.0);

  const ScheduleCoeffs e = s.coeffs(1.0);
  CHECK(e.alpha == 1.0);
  CHECK(e.beta == 0.0);
  CHECK(e.gamma == 1.0);
  CHECK(e.lambda() == 0.0);

  CHECK(s.coeffs(0.25).lambda() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("closed forms on random times") {
  Schedule s;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = u(rng);
    const ScheduleCoeffs c = s.coeffs(t);
    CHECK(c.alpha == t);
    CHECK(c.beta == 1.0 - t);
    CHECK(c.gamma == 1.0);
    if (t > 0.0)
      CHECK(c.lambda() == doctest::Approx((1.0 - t) / t).epsilon(1e-14));
  }
}

TEST_CASE("domain and singularity guards") {
  Schedule s;
  CHECK_THROWS_AS((void)s.coeffs(-0.1), std::domain_error);
  CHECK_THROWS_AS((void)s.coeffs(1.1), std::domain_error);
  CHECK_THROWS_AS((void)s.coeffs(0.0).lambda(), std::domain_error);
  CHECK_THROWS_AS(
      (void)score_from_drift(scalar(0.0), scalar(1.0), 1.0 - 0.5e-4, s),
      std::domain_error);
  CHECK_THROWS_AS((void)score_from_drift(scalar(0.0), scalar(1.0), 1.0, s),
                  std::domain_error);
}

TEST_CASE("score from drift, b = z at t = 1/2") {
  Schedule s;
  const Eigen::VectorXd z = scalar(1.7);
  CHECK(score_from_drift(z, z, 0.5, s)[0] ==
        doctest::Approx(-1.7).epsilon(1e-14));
}

TEST_CASE("standard Gaussian prior: drift-to-score path") {
  // closed form: s(t, z) = -z / (t^2 + (1-t)^2)
  Schedule sched;
  const IsotropicGaussianDrift drift(Eigen::VectorXd::Zero(1), 1.0);
  const double t = 0.3, z = 1.0;
  const Eigen::VectorXd b = drift.drift(t, scalar(z));
  const double s = score_from_drift(b, scalar(z), t, sched)[0];
  CHECK(s == doctest::Approx(-1.0 / 0.58).epsilon(1e-12));

  // independent quadrature + finite-difference oracle
  oracles::Mixture1d gauss{{1.0}, {0.0}, {1.0}};
  CHECK(s == doctest::Approx(oracles::fd_score(gauss, z, t)).epsilon(1e-5));
}

TEST_CASE("mixture prior: score and denoiser match quadrature") {
  Schedule sched;
  const GmmDrift drift(paper_gmm_prior());
  const oracles::Mixture1d mix = paper_mixture();
  const double t = 0.5, z = 0.0;
  const Eigen::VectorXd b = drift.drift(t, scalar(z));

  const double score = score_from_drift(b, scalar(z), t, sched)[0];
  CHECK(score ==
        doctest::Approx(oracles::fd_score(mix, z, t)).epsilon(1e-5));

  const double denoiser = denoiser_mean_from_drift(b, scalar(z), t, sched)[0];
  CHECK(denoiser ==
        doctest::Approx(oracles::quadrature_denoiser(mix, z, t)).epsilon(1e-5));
}

TEST_CASE("denoiser endpoint and zero-drift cases") {
  Schedule s;
  CHECK(denoiser_mean_from_drift(scalar(12.0), scalar(-3.0), 1.0, s)[0] ==
        -3.0);
  CHECK(denoiser_mean_from_drift(scalar(0.0), scalar(2.0), 0.5, s)[0] == 2.0);
}

TEST_CASE("identity consistency: alpha E1 + beta E0 = z") {
  Schedule sched;
  const GmmDrift drift(paper_gmm_prior());
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ut(0.05, 0.95);
  std::uniform_real_distribution<double> uz(-4.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double t = ut(rng), z = uz(rng);
    const ScheduleCoeffs c = sched.coeffs(t);
    const Eigen::VectorXd b = drift.drift(t, scalar(z));
    const double e1 = denoiser_mean_from_drift(b, scalar(z), t, sched)[0];
    const double e0 = noise_mean_from_drift(b, scalar(z), t, sched)[0];
    CHECK(c.alpha * e1 + c.beta * e0 ==
          doctest::Approx(z).epsilon(1e-10));
  }
}

TEST_CASE("eps schedule vanishes at t = 1") {
  const EpsSchedule eps{2.0};
  CHECK(eps(1.0) == 0.0);
  CHECK(eps(0.25) == doctest::Approx(1.5));
  CHECK(eps(0.0) == 2.0);
}

TEST_CASE("drift rescaling") {
  SUBCASE("identity stats") {
    const NormStats id = NormStats::identity(3);
    const Eigen::VectorXd b = Eigen::Vector3d{1.0, -2.0, 0.5};
    CHECK((rescale_drift(b, id) - b).norm() == 0.0);
  }

  SUBCASE("symmetric zero at the mean") {
    // prior N(m, s^2) in data space == rescaled standard-Gaussian drift
    NormStats stats;
    stats.mu = scalar(1.5);
    stats.sigma = 2.0;
    auto inner = std::make_shared<IsotropicGaussianDrift>(
        Eigen::VectorXd::Zero(1), 1.0);
    const RescaledDrift rescaled(inner, stats);
    CHECK(rescaled.drift(0.5, scalar(1.5))[0] ==
          doctest::Approx(0.0).epsilon(1e-14));
  }

  SUBCASE("scaled score formula") {
    // s_Z(t, z) = (alpha b_Z - dalpha (z - mu)) / (sigma^2 beta gamma)
    // must equal sigma^{-1} s_W(t, (z - mu)/sigma)
    Schedule sched;
    NormStats stats;
    stats.mu = scalar(2.0);
    stats.sigma = 1.5;
    auto inner = std::make_shared<GmmDrift>(paper_gmm_prior());
    const RescaledDrift rescaled(inner, stats);
    for (double t : {0.2, 0.5, 0.8})
      for (double z : {-1.0, 2.0, 4.5}) {
        const ScheduleCoeffs c = sched.coeffs(t);
        const double bz = rescaled.drift(t, scalar(z))[0];
        const double sz = (c.alpha * bz - c.dalpha * (z - stats.mu[0])) /
                          (stats.sigma * stats.sigma * c.beta * c.gamma);
        const double w = (z - stats.mu[0]) / stats.sigma;
        const double sw = score_from_drift(inner->drift(t, scalar(w)),
                                           scalar(w), t, sched)[0];
        CHECK(sz == doctest::Approx(sw / stats.sigma).epsilon(1e-12));
      }
  }
}

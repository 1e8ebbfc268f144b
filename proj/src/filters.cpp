#include "daisi/filters.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "daisi/parallel.hpp"

namespace daisi {

namespace {
// fixed batching granularity: member groups are the same for every thread
// count, which keeps runs bit-identical under --threads
constexpr int kMemberGroup = 32;
}  // namespace

void DaisiConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("DaisiConfig: steps must be >= 1");
  if (eps < 0.0) throw std::invalid_argument("DaisiConfig: eps must be >= 0");
  if (!(t_min >= 0.0 && t_min < 1.0))
    throw std::invalid_argument("DaisiConfig: t_min must lie in [0,1)");
  guidance.validate();
  if (guidance.zeta > 0.0 && t_min <= 0.0)
    throw std::invalid_argument(
        "DaisiConfig: t_min must be > 0 when guidance is active (lambda_t is "
        "singular at t=0)");
}

SdeConfig DaisiConfig::sde_config() const {
  return SdeConfig{steps, EpsSchedule{eps}, t_min};
}

Ensemble daisi_analysis(const Ensemble& forecast, const Eigen::VectorXd& y,
                        const ObservationModel& obs, const DriftModel& drift,
                        const DaisiConfig& cfg, int threads) {
  cfg.validate();
  obs.validate();
  if (!forecast.members.allFinite())
    throw std::invalid_argument("daisi_analysis: non-finite forecast member");
  if (forecast.dim() != drift.dim())
    throw std::invalid_argument("daisi_analysis: forecast/model dim mismatch");

  const NormStats& stats = drift.stats();
  const Eigen::Index J = forecast.size();
  const Eigen::Index d = forecast.dim();
  const SdeConfig sde = cfg.sde_config();

  const Eigen::MatrixXd w_forecast = stats.normalize_rows(forecast.members);
  const ObservationModel obs_n =
      stats.is_identity() ? obs : obs.for_normalized_state(stats);
  GuidanceMethod guidance = cfg.guidance;
  if (guidance.kind == GuidanceKind::MonteCarlo)
    guidance.mc_pool = stats.normalize_rows(guidance.mc_pool);

  Eigen::MatrixXd result(J, d);
  const int n_groups =
      static_cast<int>((J + kMemberGroup - 1) / kMemberGroup);

  parallel_for(n_groups, threads, [&](int gi) {
    const Eigen::Index first = static_cast<Eigen::Index>(gi) * kMemberGroup;
    const Eigen::Index rows = std::min<Eigen::Index>(kMemberGroup, J - first);
    std::vector<Rng> rngs;
    rngs.reserve(rows);
    for (Eigen::Index j = 0; j < rows; ++j)
      rngs.push_back(make_rng(cfg.seed, stream::kAnalysis,
                              static_cast<std::uint64_t>(forecast.step),
                              static_cast<std::uint64_t>(first + j)));
    try {
      Eigen::MatrixXd z(rows, d);
      if (cfg.no_inversion) {
        for (Eigen::Index j = 0; j < rows; ++j)
          z.row(j) = normal_vector(rngs[j], d).transpose();
      } else {
        z = integrate_backward_block(drift, sde,
                                     w_forecast.middleRows(first, rows),
                                     std::span<Rng>(rngs));
      }
      GuidanceContext ctx(guidance, y, obs_n, drift.schedule());
      z = integrate_guided_forward_block(drift, ctx, sde, std::move(z),
                                         sde.t_min, std::span<Rng>(rngs));
      result.middleRows(first, rows) = z;
    } catch (const std::exception& err) {
      std::ostringstream msg;
      msg << "daisi_analysis: members [" << first << "," << first + rows
          << "): " << err.what();
      throw std::runtime_error(msg.str());
    }
  });

  return Ensemble{stats.denormalize_rows(result), forecast.step};
}

namespace {

void append_metrics(FilterTrace& trace, const Eigen::MatrixXd& members,
                    const Eigen::MatrixXd* truth, Eigen::Index step,
                    bool keep_ensembles) {
  trace.means.row(step) = members.colwise().mean();
  if (truth)
    trace.metrics.push_back(
        evaluate_ensemble(members, truth->row(step).transpose()));
  if (keep_ensembles) trace.ensembles.push_back(members);
}

Eigen::MatrixXd propagate_members(const Eigen::MatrixXd& members,
                                  const Propagator& dynamics, int step,
                                  std::uint64_t seed) {
  Eigen::MatrixXd out(members.rows(), members.cols());
  for (Eigen::Index j = 0; j < members.rows(); ++j) {
    Rng rng = make_rng(seed, stream::kForecast,
                       static_cast<std::uint64_t>(step),
                       static_cast<std::uint64_t>(j));
    out.row(j) = dynamics.propagate(members.row(j).transpose(), rng).transpose();
  }
  return out;
}

}  // namespace

FilterTrace daisi_run(Ensemble init, const Eigen::MatrixXd& observations,
                      const Propagator& dynamics, const ObservationModel& obs,
                      const DriftModel& drift, const DaisiConfig& cfg,
                      const Eigen::MatrixXd* truth, int threads,
                      bool keep_ensembles) {
  const Eigen::Index n = observations.rows();
  if (truth && truth->rows() != n)
    throw std::invalid_argument("daisi_run: truth/observation length mismatch");
  FilterTrace trace;
  trace.means.resize(n, init.dim());
  trace.metrics.reserve(truth ? n : 0);

  Ensemble ens = std::move(init);
  for (Eigen::Index step = 0; step < n; ++step) {
    ens.members = propagate_members(ens.members, dynamics,
                                    static_cast<int>(step), cfg.seed);
    ens.step = static_cast<int>(step);
    ens = daisi_analysis(ens, observations.row(step).transpose(), obs, drift,
                         cfg, threads);
    append_metrics(trace, ens.members, truth, step, keep_ensembles);
  }
  return trace;
}

Eigen::MatrixXd resample_rows(const Eigen::MatrixXd& samples,
                              const Eigen::VectorXd& log_weights,
                              Eigen::Index n_out, Rng& rng,
                              ResamplingScheme scheme) {
  if (samples.rows() != log_weights.size())
    throw std::invalid_argument("resample_rows: weight count mismatch");
  const double max_lw = log_weights.maxCoeff();
  if (!std::isfinite(max_lw))
    throw std::runtime_error("resample_rows: all weights are zero");
  Eigen::ArrayXd w = (log_weights.array() - max_lw).exp();
  w /= w.sum();

  Eigen::MatrixXd out(n_out, samples.cols());
  if (scheme == ResamplingScheme::Multinomial) {
    std::discrete_distribution<Eigen::Index> pick(w.data(), w.data() + w.size());
    for (Eigen::Index i = 0; i < n_out; ++i) out.row(i) = samples.row(pick(rng));
  } else {
    // systematic: one uniform offset, stratified positions (i+u)/n
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double cum = w[0];
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < n_out; ++i) {
      const double pos = (i + u) / static_cast<double>(n_out);
      while (pos > cum && j + 1 < w.size()) cum += w[++j];
      out.row(i) = samples.row(j);
    }
  }
  return out;
}

FilterTrace bpf_run(Ensemble init, const Eigen::MatrixXd& observations,
                    const Propagator& dynamics, const ObservationModel& obs,
                    ResamplingScheme scheme, std::uint64_t seed,
                    const Eigen::MatrixXd* truth, bool keep_ensembles) {
  obs.validate();
  if (init.size() < 1) throw std::invalid_argument("bpf_run: empty ensemble");
  const Eigen::Index n = observations.rows();
  if (truth && truth->rows() != n)
    throw std::invalid_argument("bpf_run: truth/observation length mismatch");

  FilterTrace trace;
  trace.means.resize(n, init.dim());
  trace.metrics.reserve(truth ? n : 0);

  Eigen::MatrixXd particles = std::move(init.members);
  Eigen::VectorXd logw(particles.rows());
  for (Eigen::Index step = 0; step < n; ++step) {
    particles = propagate_members(particles, dynamics, static_cast<int>(step),
                                  seed);
    const Eigen::VectorXd y = observations.row(step).transpose();
    for (Eigen::Index j = 0; j < particles.rows(); ++j)
      logw[j] = obs.log_likelihood(y, particles.row(j).transpose());
    if (!std::isfinite(logw.maxCoeff())) {
      std::ostringstream msg;
      msg << "bpf_run: weight degeneracy (all zero) at step " << step;
      throw std::runtime_error(msg.str());
    }
    Rng rng = make_rng(seed, stream::kResample,
                       static_cast<std::uint64_t>(step));
    particles = resample_rows(particles, logw, particles.rows(), rng, scheme);
    append_metrics(trace, particles, truth, step, keep_ensembles);
  }
  return trace;
}

KalmanResult kalman_filter(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                           const Eigen::VectorXd& m0, const Eigen::MatrixXd& P0,
                           const Eigen::MatrixXd& observations) {
  const Eigen::Index n = observations.rows();
  const Eigen::Index d = m0.size();
  KalmanResult out;
  out.means.resize(n, d);
  out.covs.reserve(n);

  Eigen::VectorXd m = m0;
  Eigen::MatrixXd P = P0;
  for (Eigen::Index step = 0; step < n; ++step) {
    m = A * m;
    P = A * P * A.transpose() + Q;
    const Eigen::MatrixXd S = H * P * H.transpose() + R;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("kalman_filter: innovation covariance not PSD");
    const Eigen::MatrixXd K = llt.solve(H * P).transpose();
    m += K * (observations.row(step).transpose() - H * m);
    P = P - K * H * P;
    out.means.row(step) = m.transpose();
    out.covs.push_back(P);
  }
  return out;
}

}  // namespace daisi

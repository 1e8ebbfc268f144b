#include "daisi/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "daisi/metrics.hpp"
#include "daisi/parallel.hpp"

namespace daisi {

namespace {

Eigen::MatrixXd guided_from_reference(const DriftModel& drift,
                                      const GuidanceMethod& guidance,
                                      const Eigen::VectorXd& y,
                                      const ObservationModel& obs,
                                      const SdeConfig& sde, Eigen::Index n,
                                      std::uint64_t seed, int threads) {
  const Eigen::Index d = drift.dim();
  Eigen::MatrixXd out(n, d);
  constexpr Eigen::Index kGroup = 64;
  const int n_groups = static_cast<int>((n + kGroup - 1) / kGroup);
  parallel_for(n_groups, threads, [&](int gi) {
    const Eigen::Index first = static_cast<Eigen::Index>(gi) * kGroup;
    const Eigen::Index rows = std::min<Eigen::Index>(kGroup, n - first);
    std::vector<Rng> rngs;
    rngs.reserve(rows);
    Eigen::MatrixXd z(rows, d);
    for (Eigen::Index j = 0; j < rows; ++j) {
      rngs.push_back(make_rng(seed, stream::kAnalysis, 0,
                              static_cast<std::uint64_t>(first + j)));
      z.row(j) = normal_vector(rngs[j], d).transpose();
    }
    GuidanceContext ctx(guidance, y, obs, drift.schedule());
    z = integrate_guided_forward_block(drift, ctx, sde, std::move(z),
                                       sde.t_min, std::span<Rng>(rngs));
    out.middleRows(first, rows) = z;
  });
  return out;
}

}  // namespace

GmmCellResult run_gmm_cell(const GmmAblationConfig& cfg, double t_min,
                           double eps, std::uint64_t seed, int threads) {
  GmmCellResult cell;
  cell.testbed = build_gmm_testbed(seed, cfg.particles);

  Rng pool_rng = make_rng(seed, stream::kPool);
  GuidanceMethod guidance;
  guidance.kind = GuidanceKind::MonteCarlo;
  guidance.zeta = cfg.zeta;
  guidance.mc_pool = sample_gmm(cell.testbed.prior, cfg.pool, pool_rng);

  DaisiConfig daisi;
  daisi.t_min = t_min;
  daisi.eps = eps;
  daisi.steps = cfg.steps;
  daisi.guidance = std::move(guidance);
  daisi.seed = derive_seed(seed, stream::kCell);

  const GmmDrift drift(cell.testbed.prior);
  Eigen::VectorXd y(1);
  y[0] = cell.testbed.y;
  const Ensemble forecast{cell.testbed.forecast, 0};
  const Ensemble analysis = daisi_analysis(
      forecast, y, cell.testbed.observation_model(), drift, daisi, threads);
  cell.analysis = analysis.members.col(0);
  return cell;
}

GmmAblationResult run_gmm_ablation(const GmmAblationConfig& cfg, int threads) {
  GmmAblationResult result;
  std::map<std::pair<double, double>, std::vector<double>> by_cell;

  for (double t_min : cfg.t_min_grid) {
    for (double eps : cfg.eps_grid) {
      for (int s = 0; s < cfg.seeds; ++s) {
        const std::uint64_t seed =
            derive_seed(cfg.master_seed, stream::kCell,
                        static_cast<std::uint64_t>(s));
        const GmmCellResult cell = run_gmm_cell(cfg, t_min, eps, seed, threads);
        const double mmd =
            mmd_rbf(cell.analysis, cell.testbed.posterior_truth);
        result.rows.push_back(
            GmmAblationRow{t_min, eps, mmd, static_cast<std::uint64_t>(s)});
        by_cell[{t_min, eps}].push_back(mmd);
      }
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& [cell, values] : by_cell) {
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    if (mean < best) {
      best = mean;
      result.best_t_min = cell.first;
      result.best_eps = cell.second;
      result.best_mmd = mean;
    }
  }
  return result;
}

MetricSummary summarize_trace(const FilterTrace& trace, Eigen::Index window) {
  const Eigen::Index n = static_cast<Eigen::Index>(trace.metrics.size());
  const Eigen::Index w = std::min(window, n);
  MetricSummary s;
  for (Eigen::Index i = n - w; i < n; ++i) {
    const MetricReport& m = trace.metrics[static_cast<std::size_t>(i)];
    s.rmse += m.rmse;
    s.ens_rmse += m.ens_rmse;
    s.crps += m.crps;
    s.spread += m.spread;
    s.ssr += m.ssr;
  }
  s.rmse /= w;
  s.ens_rmse /= w;
  s.crps /= w;
  s.spread /= w;
  s.ssr /= w;
  return s;
}

Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& source,
                               Eigen::Index limit, Eigen::Index count,
                               std::uint64_t seed) {
  limit = std::min(limit, source.rows());
  if (count > limit)
    throw std::invalid_argument("subsample_rows: count exceeds available rows");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(limit));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, stream::kPool);
  // partial Fisher-Yates
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, limit - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd out(count, source.cols());
  for (Eigen::Index i = 0; i < count; ++i) out.row(i) = source.row(idx[i]);
  return out;
}

namespace {

struct L63Problem {
  Eigen::MatrixXd truth;         // assimilated rows only
  Eigen::MatrixXd observations;  // n_assim x 1
  Eigen::VectorXd init_state;
};

L63Problem make_l63_problem(const Eigen::VectorXd& x0, Eigen::Index truth_rows,
                            Eigen::Index n_assim, double sigma_obs,
                            const ObservationModel& obs, std::uint64_t seed,
                            std::uint64_t rep) {
  if (truth_rows <= n_assim)
    throw std::invalid_argument("l63: truth_rows must exceed n_assim");
  const Eigen::MatrixXd all = l63_trajectory(x0, truth_rows);
  const Eigen::Index w0 = truth_rows - n_assim;

  L63Problem p;
  p.truth = all.middleRows(w0, n_assim);
  p.init_state = all.row(w0 - 1).transpose();
  p.observations.resize(n_assim, obs.d_y());
  Rng noise = make_rng(seed, stream::kObsNoise, rep);
  for (Eigen::Index n = 0; n < n_assim; ++n)
    p.observations.row(n) =
        observe(p.truth.row(n).transpose(), obs, noise).transpose();
  (void)sigma_obs;
  return p;
}

Eigen::MatrixXd ball_around(const Eigen::VectorXd& center, Eigen::Index n,
                            double radius, Rng& rng) {
  Eigen::MatrixXd out(n, center.size());
  for (Eigen::Index j = 0; j < n; ++j)
    out.row(j) =
        (center + radius * normal_vector(rng, center.size())).transpose();
  return out;
}

}  // namespace

L63FilterResult run_l63_filter(const L63FilterConfig& cfg,
                               const NetDrift& model, const Dataset& data,
                               int threads) {
  ObservationModel obs;
  obs.kind = ObservationModel::Kind::SparseLinear;
  obs.mask = {0};
  obs.d_x = 3;
  obs.sigma_obs = cfg.sigma_obs;

  Eigen::MatrixXd pool;
  if (cfg.method != FilterMethod::Bpf)
    pool = subsample_rows(data.samples, data.train_rows, cfg.mc_pool,
                          derive_seed(cfg.master_seed, stream::kPool));

  Propagator dynamics;
  dynamics.kind = Propagator::Kind::L63;

  L63FilterResult result;
  for (int rep = 0; rep < cfg.repeats; ++rep) {
    Rng traj_rng = make_rng(cfg.master_seed, stream::kTrajectory,
                            static_cast<std::uint64_t>(rep));
    const Eigen::VectorXd x0 =
        data.stats.mu + data.stats.sigma * normal_vector(traj_rng, 3);
    const L63Problem problem =
        make_l63_problem(x0, cfg.truth_rows, cfg.n_assim, cfg.sigma_obs, obs,
                         cfg.master_seed, static_cast<std::uint64_t>(rep));

    Rng init_rng = make_rng(cfg.master_seed, stream::kInit,
                            static_cast<std::uint64_t>(rep));
    FilterTrace trace;
    if (cfg.method == FilterMethod::Bpf) {
      Ensemble init{ball_around(problem.init_state, cfg.bpf_particles,
                                cfg.sigma_init, init_rng),
                    0};
      trace = bpf_run(std::move(init), problem.observations, dynamics, obs,
                      cfg.resampling,
                      derive_seed(cfg.master_seed, stream::kResample,
                                  static_cast<std::uint64_t>(rep)),
                      &problem.truth);
    } else {
      Ensemble init{
          ball_around(problem.init_state, cfg.members, cfg.sigma_init, init_rng),
          0};
      DaisiConfig daisi;
      daisi.t_min = cfg.t_min;
      daisi.eps = cfg.eps;
      daisi.steps = cfg.steps;
      daisi.no_inversion = cfg.method == FilterMethod::DaisiNoInversion;
      daisi.guidance.kind = GuidanceKind::MonteCarlo;
      daisi.guidance.zeta = cfg.zeta;
      daisi.guidance.mc_pool = pool;
      daisi.seed = derive_seed(cfg.master_seed, stream::kAnalysis,
                               static_cast<std::uint64_t>(rep));
      trace = daisi_run(std::move(init), problem.observations, dynamics, obs,
                        model, daisi, &problem.truth, threads);
    }
    result.repeats.push_back(summarize_trace(trace, cfg.metric_window));
    result.traces.push_back(std::move(trace));
  }

  const auto accumulate = [&](auto field) {
    double mean = 0.0, sq = 0.0;
    for (const MetricSummary& s : result.repeats) mean += s.*field;
    mean /= result.repeats.size();
    for (const MetricSummary& s : result.repeats) {
      const double d = s.*field - mean;
      sq += d * d;
    }
    const double var =
        result.repeats.size() > 1 ? sq / (result.repeats.size() - 1.0) : 0.0;
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  std::tie(result.mean.rmse, result.stdev.rmse) =
      accumulate(&MetricSummary::rmse);
  std::tie(result.mean.ens_rmse, result.stdev.ens_rmse) =
      accumulate(&MetricSummary::ens_rmse);
  std::tie(result.mean.crps, result.stdev.crps) =
      accumulate(&MetricSummary::crps);
  std::tie(result.mean.spread, result.stdev.spread) =
      accumulate(&MetricSummary::spread);
  std::tie(result.mean.ssr, result.stdev.ssr) = accumulate(&MetricSummary::ssr);
  return result;
}

SweepResult run_sweep(const SweepConfig& cfg, const NetDrift& model,
                      const Dataset& data, int threads) {
  ObservationModel obs;
  obs.kind = ObservationModel::Kind::SparseLinear;
  obs.mask = {0};
  obs.d_x = 3;
  obs.sigma_obs = cfg.sigma_obs;

  const Eigen::MatrixXd pool =
      subsample_rows(data.samples, data.train_rows, cfg.mc_pool,
                     derive_seed(cfg.master_seed, stream::kPool));

  // one held-out tuning trajectory, shared by every cell; repeats vary the
  // observation noise and the ensemble streams
  std::vector<L63Problem> problems;
  for (int rep = 0; rep < cfg.repeats; ++rep)
    problems.push_back(make_l63_problem(
        Eigen::Vector3d{0.0, 1.0, 1.05}, cfg.truth_rows, cfg.n_assim,
        cfg.sigma_obs, obs, cfg.master_seed, static_cast<std::uint64_t>(rep)));

  Propagator dynamics;
  dynamics.kind = Propagator::Kind::L63;

  SweepResult result;
  std::map<std::pair<double, double>, std::vector<double>> by_cell;
  std::uint64_t cell_index = 0;
  for (double t_min : cfg.t_min_grid) {
    for (double eps : cfg.eps_grid) {
      for (int rep = 0; rep < cfg.repeats; ++rep) {
        const L63Problem& problem = problems[static_cast<std::size_t>(rep)];
        Rng init_rng = make_rng(cfg.master_seed, stream::kInit,
                                static_cast<std::uint64_t>(rep));
        Ensemble init{
            ball_around(problem.init_state, cfg.members, cfg.sigma_init,
                        init_rng),
            0};
        DaisiConfig daisi;
        daisi.t_min = t_min;
        daisi.eps = eps;
        daisi.steps = cfg.steps;
        daisi.guidance.kind = GuidanceKind::MonteCarlo;
        daisi.guidance.zeta = cfg.zeta;
        daisi.guidance.mc_pool = pool;
        daisi.seed = derive_seed(cfg.master_seed, stream::kCell, cell_index,
                                 static_cast<std::uint64_t>(rep));
        const FilterTrace trace =
            daisi_run(std::move(init), problem.observations, dynamics, obs,
                      model, daisi, &problem.truth, threads);
        const MetricSummary s = summarize_trace(trace, cfg.metric_window);
        result.rows.push_back(
            SweepRow{t_min, eps, s.crps, static_cast<std::uint64_t>(rep)});
        by_cell[{t_min, eps}].push_back(s.crps);
      }
      ++cell_index;
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& [cell, values] : by_cell) {
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    if (mean < best) {
      best = mean;
      result.best_t_min = cell.first;
      result.best_eps = cell.second;
      result.best_crps = mean;
    }
  }
  return result;
}

namespace {

struct Ar1Posterior {
  Eigen::VectorXd mean;    // per-step ensemble means
  Eigen::VectorXd stderr;  // per-step sd(members)/sqrt(J)
};

Ar1Posterior per_step_means(const FilterTrace& trace) {
  Ar1Posterior out;
  const Eigen::Index n = static_cast<Eigen::Index>(trace.ensembles.size());
  out.mean.resize(n);
  out.stderr.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd members =
        trace.ensembles[static_cast<std::size_t>(i)].col(0);
    const double mean = members.mean();
    const double var =
        (members.array() - mean).square().sum() / (members.size() - 1.0);
    out.mean[i] = mean;
    out.stderr[i] = std::sqrt(var / members.size());
  }
  return out;
}

}  // namespace

CheckReport run_linear_gaussian_check(std::uint64_t seed, int threads) {
  CheckReport report;
  const auto record = [&](bool ok, const std::string& line) {
    report.pass = report.pass && ok;
    report.lines.push_back(std::string(ok ? "[pass] " : "[FAIL] ") + line);
  };
  const auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
  };

  // -- conjugate Gaussian posterior via MMPS-guided sampling --
  {
    const double sigma_obs = 1.0, y_obs = 2.0;
    auto drift = IsotropicGaussianDrift(Eigen::VectorXd::Zero(1), 1.0);
    ObservationModel obs;
    obs.kind = ObservationModel::Kind::Identity;
    obs.d_x = 1;
    obs.sigma_obs = sigma_obs;
    GuidanceMethod guidance;
    guidance.kind = GuidanceKind::Mmps;
    Eigen::VectorXd y(1);
    y[0] = y_obs;
    const SdeConfig sde{500, EpsSchedule{0.0}, 0.0};
    const Eigen::MatrixXd samples = guided_from_reference(
        drift, guidance, y, obs, sde, 10000, derive_seed(seed, 1), threads);
    const double mean = samples.col(0).mean();
    const double var =
        (samples.col(0).array() - mean).square().sum() / (samples.rows() - 1.0);
    // analytic posterior N(1, 0.5)
    record(std::abs(mean - 1.0) <= 0.03,
           "MMPS conjugate posterior mean " + fmt(mean) + " within 1 +- 0.03");
    record(std::abs(var - 0.5) <= 0.05,
           "MMPS conjugate posterior variance " + fmt(var) +
               " within 0.5 +- 0.05");
  }

  // -- scalar AR(1) against the exact Kalman filter --
  {
    const double a = 0.5;
    const double q = std::sqrt(0.75);  // stationary variance = 1
    const double sigma_obs = 1.0;
    const int n_steps = 50;
    const Eigen::Index members = 64;

    Propagator dynamics;
    dynamics.kind = Propagator::Kind::LinearGaussian;
    dynamics.ar_coeff = a;
    dynamics.ar_noise_std = q;

    ObservationModel obs;
    obs.kind = ObservationModel::Kind::Identity;
    obs.d_x = 1;
    obs.sigma_obs = sigma_obs;

    Rng truth_rng = make_rng(seed, stream::kTrajectory);
    Eigen::MatrixXd truth(n_steps, 1), observations(n_steps, 1);
    double x = std_normal(truth_rng);  // x0 ~ stationary N(0, 1)
    for (int n = 0; n < n_steps; ++n) {
      x = a * x + q * std_normal(truth_rng);
      truth(n, 0) = x;
      observations(n, 0) = x + sigma_obs * std_normal(truth_rng);
    }

    const Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 1, a);
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Constant(1, 1, q * q);
    const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);
    const Eigen::MatrixXd R =
        Eigen::MatrixXd::Constant(1, 1, sigma_obs * sigma_obs);
    const KalmanResult kalman =
        kalman_filter(A, Q, H, R, Eigen::VectorXd::Zero(1),
                      Eigen::MatrixXd::Identity(1, 1), observations);

    // DAISI with the stationary prior; hyperparameters tuned for this system
    auto drift = IsotropicGaussianDrift(Eigen::VectorXd::Zero(1), 1.0);
    DaisiConfig daisi;
    daisi.t_min = 0.10;
    daisi.eps = 0.30;
    daisi.steps = 128;
    daisi.guidance.kind = GuidanceKind::Mmps;
    daisi.seed = derive_seed(seed, 2);

    Rng init_rng = make_rng(seed, stream::kInit);
    Ensemble init{normal_matrix(init_rng, members, 1), 0};
    const FilterTrace daisi_trace =
        daisi_run(std::move(init), observations, dynamics, obs, drift, daisi,
                  nullptr, threads, true);
    const Ar1Posterior daisi_stats = per_step_means(daisi_trace);
    double worst = 0.0;
    for (int n = 0; n < n_steps; ++n)
      worst = std::max(worst,
                       std::abs(daisi_stats.mean[n] - kalman.means(n, 0)) /
                           (3.0 * daisi_stats.stderr[n]));
    record(worst <= 1.0, "DAISI AR(1) mean within 3 SE of Kalman at every "
                         "step (worst ratio " +
                             fmt(worst) + ")");

    // the per-step SE of a particle-filter mean exceeds sd/sqrt(N) because
    // resampling correlates particles; estimate it from independent replicates
    const int replicates = 16;
    Eigen::MatrixXd bpf_means(n_steps, replicates);
    for (int r = 0; r < replicates; ++r) {
      Rng bpf_init_rng = make_rng(seed, stream::kInit, 1,
                                  static_cast<std::uint64_t>(r));
      Ensemble bpf_init{normal_matrix(bpf_init_rng, 10000, 1), 0};
      const FilterTrace bpf_trace =
          bpf_run(std::move(bpf_init), observations, dynamics, obs,
                  ResamplingScheme::Systematic,
                  derive_seed(seed, 3, static_cast<std::uint64_t>(r)), nullptr,
                  true);
      const Ar1Posterior bpf_stats = per_step_means(bpf_trace);
      bpf_means.col(r) = bpf_stats.mean;
    }
    worst = 0.0;
    for (int n = 0; n < n_steps; ++n) {
      const double grand = bpf_means.row(n).mean();
      const double var = (bpf_means.row(n).array() - grand).square().sum() /
                         (replicates - 1.0);
      const double se = std::sqrt(var / replicates);
      worst = std::max(worst,
                       std::abs(grand - kalman.means(n, 0)) / (3.0 * se));
    }
    record(worst <= 1.0, "BPF AR(1) mean within 3 SE of Kalman at every step "
                         "(worst ratio " +
                             fmt(worst) + ")");
  }

  return report;
}

}  // namespace daisi

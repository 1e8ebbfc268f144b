// Experiment harness: train drift models, run the mixture-testbed ablation,
// the Lorenz '63 filtering benchmark, the hyperparameter sweep, and the
// linear-Gaussian oracle battery.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 oracle check failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "daisi/experiments.hpp"
#include "daisi/io.hpp"

namespace fs = std::filesystem;
using namespace daisi;

namespace {

fs::path prepare_run_dir(const std::string& out, const std::string& experiment,
                         const std::string& tag) {
  const fs::path dir = fs::path(out) / experiment / tag;
  fs::create_directories(dir);
  return dir;
}

void echo_config(const CLI::App& app, const fs::path& dir) {
  std::ofstream f(dir / "config_echo.txt");
  f << app.config_to_str(true, true);
}

void write_trace_csv(const FilterTrace& trace, const fs::path& path) {
  CsvWriter csv(path, {"step", "rmse", "ens_rmse", "crps", "spread", "ssr"});
  for (std::size_t i = 0; i < trace.metrics.size(); ++i) {
    const MetricReport& m = trace.metrics[i];
    csv.write_row({static_cast<double>(i), m.rmse, m.ens_rmse, m.crps, m.spread,
                   m.ssr_degenerate ? std::nan("") : m.ssr});
  }
}

std::string summary_line(const char* label, const MetricSummary& mean,
                         const MetricSummary& stdev) {
  std::ostringstream os;
  os.precision(4);
  os << label << ": rmse " << mean.rmse << " +- " << stdev.rmse << ", crps "
     << mean.crps << " +- " << stdev.crps << ", ssr " << mean.ssr << " +- "
     << stdev.ssr;
  return os.str();
}

struct TrainCli {
  std::string system = "l63";
  long samples = 1000000;
  std::vector<int> hidden{128, 128};
  TrainConfig cfg{};
  std::string out = "model.bin";
};

struct FilterCli {
  std::string method = "daisi";
  std::string model_path;
  long data_steps = 1000000;
  L63FilterConfig cfg{};
  bool save_ensembles = false;
  std::string out = "out";
  std::string tag = "run";
};

struct AblateCli {
  GmmAblationConfig cfg{};
  std::string out = "out";
  std::string tag = "run";
};

struct SweepCli {
  std::string model_path;
  long data_steps = 1000000;
  SweepConfig cfg{};
  std::string out = "out";
  std::string tag = "run";
};

int run_train(const TrainCli& cli) {
  Dataset data;
  if (cli.system == "l63") {
    data = generate_l63_dataset(cli.samples, cli.cfg.seed);
  } else if (cli.system == "gmm") {
    Rng rng = make_rng(cli.cfg.seed, stream::kTrain, 99);
    data = make_dataset(sample_gmm(paper_gmm_prior(), cli.samples, rng),
                        cli.cfg.split);
  } else if (cli.system == "gauss") {
    Rng rng = make_rng(cli.cfg.seed, stream::kTrain, 99);
    data = make_dataset(normal_matrix(rng, cli.samples, 1), cli.cfg.split);
  } else {
    throw CLI::ValidationError("--system must be l63, gmm or gauss");
  }
  const TrainResult result = train_drift(data, cli.hidden, cli.cfg);
  save_drift(result.model, cli.out);
  for (std::size_t e = 0; e < result.train_loss.size(); ++e)
    std::printf("epoch %zu: train loss %.6f, val loss %.6f\n", e + 1,
                result.train_loss[e],
                e < result.val_loss.size() ? result.val_loss[e] : 0.0);
  std::printf("model written to %s\n", cli.out.c_str());
  return 0;
}

int run_filter(const CLI::App& app, FilterCli& cli, int threads) {
  if (cli.method == "daisi")
    cli.cfg.method = FilterMethod::Daisi;
  else if (cli.method == "daisi-no-inversion")
    cli.cfg.method = FilterMethod::DaisiNoInversion;
  else if (cli.method == "bpf")
    cli.cfg.method = FilterMethod::Bpf;
  else
    throw CLI::ValidationError(
        "--method must be daisi, daisi-no-inversion or bpf");

  NetDrift model;
  Dataset data;
  if (cli.cfg.method != FilterMethod::Bpf) {
    if (cli.model_path.empty() || !fs::exists(cli.model_path))
      throw CLI::ValidationError("missing model file: " + cli.model_path);
    model = load_drift(cli.model_path);
    data = generate_l63_dataset(cli.data_steps, 0);
  }

  const fs::path dir = prepare_run_dir(cli.out, "l63_filter", cli.tag);
  echo_config(app, dir);

  const L63FilterResult result = run_l63_filter(cli.cfg, model, data, threads);

  CsvWriter summary(dir / "summary.csv",
                    {"repeat", "rmse", "ens_rmse", "crps", "spread", "ssr"});
  for (std::size_t r = 0; r < result.repeats.size(); ++r) {
    const MetricSummary& s = result.repeats[r];
    summary.write_row({static_cast<double>(r), s.rmse, s.ens_rmse, s.crps,
                       s.spread, s.ssr});
    char name[64];
    std::snprintf(name, sizeof(name), "metrics_rep%03zu.csv", r);
    write_trace_csv(result.traces[r], dir / name);
  }
  if (cli.save_ensembles) {
    fs::create_directories(dir / "ensembles");
    for (std::size_t r = 0; r < result.traces.size(); ++r) {
      if (result.traces[r].ensembles.empty()) continue;
      char name[64];
      std::snprintf(name, sizeof(name), "final_rep%03zu.bin", r);
      save_ensemble(result.traces[r].ensembles.back(), dir / "ensembles" / name);
    }
  }
  std::puts(summary_line(cli.method.c_str(), result.mean, result.stdev).c_str());
  std::printf("results in %s\n", dir.string().c_str());
  return 0;
}

int run_ablate(const CLI::App& app, const AblateCli& cli, int threads) {
  const fs::path dir = prepare_run_dir(cli.out, "gmm_ablation", cli.tag);
  echo_config(app, dir);
  const GmmAblationResult result = run_gmm_ablation(cli.cfg, threads);
  CsvWriter csv(dir / "heatmap.csv", {"t_min", "eps", "mmd", "seed"});
  for (const GmmAblationRow& row : result.rows)
    csv.write_row({row.t_min, row.eps, row.mmd, static_cast<double>(row.seed)});
  std::printf("best cell: t_min=%g eps=%g (mmd %.5f)\n", result.best_t_min,
              result.best_eps, result.best_mmd);
  std::printf("results in %s\n", dir.string().c_str());
  return 0;
}

int run_sweep_cmd(const CLI::App& app, const SweepCli& cli, int threads) {
  if (cli.model_path.empty() || !fs::exists(cli.model_path))
    throw CLI::ValidationError("missing model file: " + cli.model_path);
  const NetDrift model = load_drift(cli.model_path);
  const Dataset data = generate_l63_dataset(cli.data_steps, 0);

  const fs::path dir = prepare_run_dir(cli.out, "sweep", cli.tag);
  echo_config(app, dir);
  const SweepResult result = run_sweep(cli.cfg, model, data, threads);
  CsvWriter csv(dir / "sweep.csv", {"t_min", "eps", "crps", "seed"});
  for (const SweepRow& row : result.rows)
    csv.write_row({row.t_min, row.eps, row.crps, static_cast<double>(row.seed)});
  std::printf("best cell: t_min=%g eps=%g (crps %.4f)\n", result.best_t_min,
              result.best_eps, result.best_crps);
  std::printf("results in %s\n", dir.string().c_str());
  return 0;
}

void validate_daisi_grid(const std::vector<double>& t_min_grid, double zeta,
                         int steps) {
  for (double t_min : t_min_grid) {
    DaisiConfig probe;
    probe.t_min = t_min;
    probe.steps = steps;
    probe.guidance.kind = GuidanceKind::Dps;
    probe.guidance.zeta = zeta;
    probe.validate();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble filtering with flow-based priors and inverse sampling"};
  app.require_subcommand(1);
  app.set_config("--config")->check(CLI::ExistingFile);
  app.allow_config_extras(false);

  int threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "worker threads for members/cells");

  TrainCli train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a drift model");
  train_cmd->add_option("--system", train.system, "l63, gmm or gauss");
  train_cmd->add_option("--samples", train.samples, "dataset rows");
  train_cmd->add_option("--hidden", train.hidden, "hidden layer widths");
  train_cmd->add_option("--epochs", train.cfg.epochs);
  train_cmd->add_option("--lr", train.cfg.lr);
  train_cmd->add_option("--batch", train.cfg.batch);
  train_cmd->add_option("--split", train.cfg.split);
  train_cmd->add_option("--seed", train.cfg.seed);
  train_cmd->add_option("--out", train.out, "model file path");

  FilterCli filter;
  CLI::App* filter_cmd =
      app.add_subcommand("filter", "Lorenz '63 filtering benchmark");
  filter_cmd->add_option("--method", filter.method,
                         "daisi, daisi-no-inversion or bpf");
  filter_cmd->add_option("--model", filter.model_path, "trained drift file");
  filter_cmd->add_option("--data-steps", filter.data_steps,
                         "rows of the regenerated training trajectory");
  filter_cmd->add_option("--t-min", filter.cfg.t_min);
  filter_cmd->add_option("--eps", filter.cfg.eps);
  filter_cmd->add_option("--steps", filter.cfg.steps, "EM steps");
  filter_cmd->add_option("--members", filter.cfg.members);
  filter_cmd->add_option("--pool", filter.cfg.mc_pool, "MC guidance pool");
  filter_cmd->add_option("--zeta", filter.cfg.zeta, "guidance strength");
  filter_cmd->add_option("--particles", filter.cfg.bpf_particles);
  std::string resampling = "systematic";
  filter_cmd->add_option("--resampling", resampling,
                         "systematic or multinomial");
  filter_cmd->add_option("--truth-rows", filter.cfg.truth_rows);
  filter_cmd->add_option("--n-assim", filter.cfg.n_assim);
  filter_cmd->add_option("--window", filter.cfg.metric_window);
  filter_cmd->add_option("--sigma-obs", filter.cfg.sigma_obs);
  filter_cmd->add_option("--sigma-init", filter.cfg.sigma_init);
  filter_cmd->add_option("--repeats", filter.cfg.repeats);
  filter_cmd->add_option("--seed", filter.cfg.master_seed);
  filter_cmd->add_flag("--save-ensembles", filter.save_ensembles);
  filter_cmd->add_option("--out", filter.out, "output directory");
  filter_cmd->add_option("--tag", filter.tag, "run tag");

  AblateCli ablate;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "mixture-testbed (t_min, eps) heatmap");
  ablate_cmd->add_option("--t-min-grid", ablate.cfg.t_min_grid);
  ablate_cmd->add_option("--eps-grid", ablate.cfg.eps_grid);
  ablate_cmd->add_option("--particles", ablate.cfg.particles);
  ablate_cmd->add_option("--pool", ablate.cfg.pool);
  ablate_cmd->add_option("--steps", ablate.cfg.steps, "EM steps");
  ablate_cmd->add_option("--seeds", ablate.cfg.seeds, "seeds per cell");
  ablate_cmd->add_option("--zeta", ablate.cfg.zeta);
  ablate_cmd->add_option("--seed", ablate.cfg.master_seed);
  ablate_cmd->add_option("--out", ablate.out, "output directory");
  ablate_cmd->add_option("--tag", ablate.tag, "run tag");

  SweepCli sweep;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "grid-search (t_min, eps) by held-out CRPS");
  sweep_cmd->add_option("--model", sweep.model_path, "trained drift file");
  sweep_cmd->add_option("--data-steps", sweep.data_steps);
  sweep_cmd->add_option("--t-min-grid", sweep.cfg.t_min_grid);
  sweep_cmd->add_option("--eps-grid", sweep.cfg.eps_grid);
  sweep_cmd->add_option("--repeats", sweep.cfg.repeats);
  sweep_cmd->add_option("--members", sweep.cfg.members);
  sweep_cmd->add_option("--pool", sweep.cfg.mc_pool);
  sweep_cmd->add_option("--steps", sweep.cfg.steps, "EM steps");
  sweep_cmd->add_option("--zeta", sweep.cfg.zeta);
  sweep_cmd->add_option("--n-assim", sweep.cfg.n_assim);
  sweep_cmd->add_option("--window", sweep.cfg.metric_window);
  sweep_cmd->add_option("--seed", sweep.cfg.master_seed);
  sweep_cmd->add_option("--out", sweep.out, "output directory");
  sweep_cmd->add_option("--tag", sweep.tag, "run tag");

  std::uint64_t check_seed = 0;
  CLI::App* check_cmd =
      app.add_subcommand("check", "linear-Gaussian oracle battery");
  check_cmd->add_option("--seed", check_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (filter_cmd->parsed()) {
      if (resampling == "systematic")
        filter.cfg.resampling = ResamplingScheme::Systematic;
      else if (resampling == "multinomial")
        filter.cfg.resampling = ResamplingScheme::Multinomial;
      else
        throw std::invalid_argument("--resampling must be systematic or "
                                    "multinomial");
      if (filter.method != "bpf")
        validate_daisi_grid({filter.cfg.t_min}, filter.cfg.zeta,
                            filter.cfg.steps);
    }
    if (sweep_cmd->parsed())
      validate_daisi_grid(sweep.cfg.t_min_grid, sweep.cfg.zeta,
                          sweep.cfg.steps);
    if (ablate_cmd->parsed())
      validate_daisi_grid(ablate.cfg.t_min_grid, ablate.cfg.zeta,
                          ablate.cfg.steps);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    if (train_cmd->parsed()) return run_train(train);
    if (filter_cmd->parsed()) return run_filter(app, filter, threads);
    if (ablate_cmd->parsed()) return run_ablate(app, ablate, threads);
    if (sweep_cmd->parsed()) return run_sweep_cmd(app, sweep, threads);
    if (check_cmd->parsed()) {
      const CheckReport report = run_linear_gaussian_check(check_seed, threads);
      for (const std::string& line : report.lines) std::puts(line.c_str());
      return report.pass ? 0 : 4;
    }
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return 0;
}

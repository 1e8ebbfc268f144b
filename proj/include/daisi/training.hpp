#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "daisi/drift.hpp"
#include "daisi/schedule.hpp"

namespace daisi {

struct TrainConfig {
  double lr = 1e-4;
  int batch = 64;
  int epochs = 20;
  double beta1 = 0.9;     // Adam
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double split = 0.8;     // training fraction
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sample matrix in data units plus the normalization computed from the
/// training split only (first `train_rows` rows).
struct Dataset {
  Eigen::MatrixXd samples;
  NormStats stats;
  Eigen::Index train_rows = 0;

  Eigen::Index rows() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
};

/// Splits the rows (leading fraction is the training portion) and computes
/// NormStats from the training rows: per-component mean, single pooled
/// standard deviation.
Dataset make_dataset(Eigen::MatrixXd samples, double split_fraction);

/// L63 trajectory dataset: n_steps states starting at (0, 1, 1.05) with RK4
/// and dt = 0.01, split 80-20.  The trajectory is deterministic; the seed is
/// reserved for stochastic dataset variants.
Dataset generate_l63_dataset(Eigen::Index n_steps, std::uint64_t seed);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Flow-matching objective on one batch: mean over the batch of
/// |b_theta(t, z_t) - (dalpha*z1 + dbeta*z0)|^2 with z_t = alpha*z1 + beta*z0,
/// plus the parameter gradient by backpropagation.  Rows of z1/z0 pair with
/// entries of t.
LossGrad flow_matching_loss(const NetDrift& model, const Eigen::MatrixXd& z1,
                            const Eigen::MatrixXd& z0,
                            const Eigen::VectorXd& t, const Schedule& schedule);

struct TrainResult {
  NetDrift model;
  std::vector<double> train_loss;  // per-epoch means
  std::vector<double> val_loss;
};

/// Trains a drift net on the dataset (in normalized space) with Adam.
/// Deterministic: the same seed and config give bit-identical parameters.
/// Times are drawn uniformly on [0, 1 - kScoreSingularDelta]; a non-finite
/// loss aborts with the epoch index.
TrainResult train_drift(const Dataset& data, const std::vector<int>& hidden,
                        const TrainConfig& cfg);

/// Model file: magic "DAISIDRF", version byte, layer dims, NormStats, then
/// the parameters as little-endian f64.  Round-trips bit-exactly.
void save_drift(const NetDrift& model, const std::filesystem::path& path);
NetDrift load_drift(const std::filesystem::path& path);

/// Ensemble dump with the same header layout ("DAISIENS", version, dims
/// {rows, cols}) and a row-major little-endian f64 payload.
void save_ensemble(const Eigen::MatrixXd& members,
                   const std::filesystem::path& path);
Eigen::MatrixXd load_ensemble(const std::filesystem::path& path);

}  // namespace daisi

#include "daisi/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "daisi/io.hpp"
#include "daisi/systems.hpp"

namespace daisi {

void TrainConfig::validate() const {
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (!(split > 0.0 && split < 1.0))
    throw std::invalid_argument("TrainConfig: split must lie in (0,1)");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
}

Dataset make_dataset(Eigen::MatrixXd samples, double split_fraction) {
  if (samples.rows() < 1) throw std::invalid_argument("make_dataset: no rows");
  Dataset data;
  data.train_rows = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(split_fraction * samples.rows())));
  data.train_rows = std::min(data.train_rows, samples.rows());
  const auto train = samples.topRows(data.train_rows);
  data.stats.mu = train.colwise().mean();
  const Eigen::MatrixXd centered = train.rowwise() - data.stats.mu.transpose();
  const double var =
      centered.array().square().sum() /
      (static_cast<double>(data.train_rows) * samples.cols());
  data.stats.sigma = std::sqrt(var);
  if (!(data.stats.sigma > 0.0)) data.stats.sigma = 1.0;  // constant data
  data.samples = std::move(samples);
  return data;
}

Dataset generate_l63_dataset(Eigen::Index n_steps, std::uint64_t /*seed*/) {
  if (n_steps < 1)
    throw std::invalid_argument("generate_l63_dataset: n_steps must be >= 1");
  return make_dataset(l63_trajectory({0.0, 1.0, 1.05}, n_steps), 0.8);
}

namespace {

// forward pass with cached activations, shared by loss and gradient
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // inputs to each layer
  Eigen::MatrixXd output;
};

ForwardCache forward_cached(const NetDrift& model, const Eigen::MatrixXd& x) {
  ForwardCache cache;
  cache.activations.reserve(model.layers());
  Eigen::MatrixXd a = x;
  for (int l = 0; l < model.layers(); ++l) {
    cache.activations.push_back(a);
    Eigen::MatrixXd pre = a * model.weight(l).transpose();
    pre.rowwise() += model.bias(l).transpose();
    if (l + 1 < model.layers())
      a = pre.cwiseMax(0.0);
    else
      a = std::move(pre);
  }
  cache.output = std::move(a);
  return cache;
}

Eigen::VectorXd backward(const NetDrift& model, const ForwardCache& cache,
                         const Eigen::MatrixXd& dout) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.n_params());
  Eigen::MatrixXd g = dout;
  Eigen::Index offset = grad.size();
  for (int l = model.layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a = cache.activations[l];
    const Eigen::Index wsize = model.weight(l).size();
    const Eigen::Index bsize = model.bias(l).size();
    offset -= bsize;
    Eigen::Map<Eigen::VectorXd>(grad.data() + offset, bsize) =
        g.colwise().sum().transpose();
    offset -= wsize;
    Eigen::Map<Eigen::MatrixXd>(grad.data() + offset, g.cols(), a.cols()) =
        g.transpose() * a;
    if (l > 0) {
      g = g * model.weight(l);
      // rectifier gate: the cached input of layer l is its post-activation
      g.array() *= (a.array() > 0.0).cast<double>();
    }
  }
  return grad;
}

Eigen::MatrixXd assemble_inputs(const Eigen::MatrixXd& z1,
                                const Eigen::MatrixXd& z0,
                                const Eigen::VectorXd& t,
                                const Schedule& schedule,
                                Eigen::MatrixXd* target) {
  const Eigen::Index B = z1.rows(), d = z1.cols();
  Eigen::MatrixXd x(B, d + 1);
  if (target) target->resize(B, d);
  for (Eigen::Index i = 0; i < B; ++i) {
    const ScheduleCoeffs c = schedule.coeffs(t[i]);
    x.row(i).head(d) = c.alpha * z1.row(i) + c.beta * z0.row(i);
    x(i, d) = t[i];
    if (target) target->row(i) = c.dalpha * z1.row(i) + c.dbeta * z0.row(i);
  }
  return x;
}

}  // namespace

LossGrad flow_matching_loss(const NetDrift& model, const Eigen::MatrixXd& z1,
                            const Eigen::MatrixXd& z0, const Eigen::VectorXd& t,
                            const Schedule& schedule) {
  if (z1.rows() != z0.rows() || z1.rows() != t.size())
    throw std::invalid_argument("flow_matching_loss: batch size mismatch");
  Eigen::MatrixXd target;
  const Eigen::MatrixXd x = assemble_inputs(z1, z0, t, schedule, &target);
  const ForwardCache cache = forward_cached(model, x);
  const Eigen::MatrixXd residual = cache.output - target;
  const double B = static_cast<double>(z1.rows());
  LossGrad out;
  out.loss = residual.array().square().sum() / B;
  out.grad = backward(model, cache, (2.0 / B) * residual);
  return out;
}

TrainResult train_drift(const Dataset& data, const std::vector<int>& hidden,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (data.rows() < 1) throw std::invalid_argument("train_drift: empty dataset");
  const Eigen::Index d = data.dim();

  std::vector<int> dims;
  dims.push_back(static_cast<int>(d) + 1);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(static_cast<int>(d));

  TrainResult result;
  result.model = NetDrift(dims, data.stats);
  Rng init_rng = make_rng(cfg.seed, stream::kTrain, 0);
  result.model.init_params(init_rng);

  const Eigen::MatrixXd train =
      data.stats.normalize_rows(data.samples.topRows(data.train_rows));
  const Eigen::MatrixXd val = data.stats.normalize_rows(
      data.samples.bottomRows(data.rows() - data.train_rows));

  // fixed validation pairs so the per-epoch validation losses are comparable
  Eigen::MatrixXd val_z0;
  Eigen::VectorXd val_t;
  if (val.rows() > 0) {
    Rng val_rng = make_rng(cfg.seed, stream::kTrain, 1);
    val_z0 = normal_matrix(val_rng, val.rows(), d);
    val_t.resize(val.rows());
    for (Eigen::Index i = 0; i < val.rows(); ++i)
      val_t[i] = uniform(val_rng, 0.0, 1.0 - kScoreSingularDelta);
  }

  const Schedule& schedule = result.model.schedule();
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(result.model.n_params());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(result.model.n_params());
  long adam_step = 0;

  std::vector<Eigen::Index> order(train.rows());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = make_rng(cfg.seed, stream::kTrain, 2,
                             static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), epoch_rng);

    double epoch_loss = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < train.rows(); start += cfg.batch) {
      const Eigen::Index B =
          std::min<Eigen::Index>(cfg.batch, train.rows() - start);
      Eigen::MatrixXd z1(B, d);
      for (Eigen::Index i = 0; i < B; ++i) z1.row(i) = train.row(order[start + i]);
      const Eigen::MatrixXd z0 = normal_matrix(epoch_rng, B, d);
      Eigen::VectorXd t(B);
      for (Eigen::Index i = 0; i < B; ++i)
        t[i] = uniform(epoch_rng, 0.0, 1.0 - kScoreSingularDelta);

      const LossGrad lg = flow_matching_loss(result.model, z1, z0, t, schedule);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream msg;
        msg << "train_drift: non-finite loss in epoch " << epoch;
        throw std::runtime_error(msg.str());
      }
      epoch_loss += lg.loss * B;
      seen += B;

      ++adam_step;
      adam_m = cfg.beta1 * adam_m + (1.0 - cfg.beta1) * lg.grad;
      adam_v = cfg.beta2 * adam_v.array() +
               (1.0 - cfg.beta2) * lg.grad.array().square();
      const double mc = 1.0 - std::pow(cfg.beta1, adam_step);
      const double vc = 1.0 - std::pow(cfg.beta2, adam_step);
      result.model.params().array() -=
          cfg.lr * (adam_m.array() / mc) /
          ((adam_v.array() / vc).sqrt() + cfg.adam_eps);
    }
    result.train_loss.push_back(epoch_loss / seen);

    if (val.rows() > 0) {
      const LossGrad vl =
          flow_matching_loss(result.model, val, val_z0, val_t, schedule);
      result.val_loss.push_back(vl.loss);
    }
  }
  return result;
}

void save_drift(const NetDrift& model, const std::filesystem::path& path) {
  BinaryWriter w(path, "DAISIDRF");
  const auto& dims = model.layer_dims();
  w.write_u32(static_cast<std::uint32_t>(dims.size()));
  for (int dim : dims) w.write_u32(static_cast<std::uint32_t>(dim));
  const NormStats& stats = model.stats();
  w.write_u32(static_cast<std::uint32_t>(stats.mu.size()));
  for (Eigen::Index i = 0; i < stats.mu.size(); ++i) w.write_f64(stats.mu[i]);
  w.write_f64(stats.sigma);
  w.write_u64(static_cast<std::uint64_t>(model.n_params()));
  for (Eigen::Index i = 0; i < model.n_params(); ++i)
    w.write_f64(model.params()[i]);
}

NetDrift load_drift(const std::filesystem::path& path) {
  BinaryReader r(path, "DAISIDRF");
  const std::uint32_t n_dims = r.read_u32();
  std::vector<int> dims(n_dims);
  for (auto& dim : dims) dim = static_cast<int>(r.read_u32());
  NormStats stats;
  stats.mu.resize(r.read_u32());
  for (Eigen::Index i = 0; i < stats.mu.size(); ++i) stats.mu[i] = r.read_f64();
  stats.sigma = r.read_f64();
  NetDrift model(dims, stats);
  const std::uint64_t n_params = r.read_u64();
  if (n_params != static_cast<std::uint64_t>(model.n_params()))
    throw std::runtime_error("load_drift: parameter count mismatch");
  for (Eigen::Index i = 0; i < model.n_params(); ++i)
    model.params()[i] = r.read_f64();
  return model;
}

void save_ensemble(const Eigen::MatrixXd& members,
                   const std::filesystem::path& path) {
  BinaryWriter w(path, "DAISIENS");
  w.write_u32(2);
  w.write_u32(static_cast<std::uint32_t>(members.rows()));
  w.write_u32(static_cast<std::uint32_t>(members.cols()));
  for (Eigen::Index i = 0; i < members.rows(); ++i)
    for (Eigen::Index j = 0; j < members.cols(); ++j) w.write_f64(members(i, j));
}

Eigen::MatrixXd load_ensemble(const std::filesystem::path& path) {
  BinaryReader r(path, "DAISIENS");
  if (r.read_u32() != 2)
    throw std::runtime_error("load_ensemble: expected a 2-d payload");
  const std::uint32_t rows = r.read_u32();
  const std::uint32_t cols = r.read_u32();
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = r.read_f64();
  return out;
}

}  // namespace daisi

#include "daisi/drift.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace daisi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

Eigen::MatrixXd DriftModel::drift_rows(double t, const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    out.row(i) = drift(t, z.row(i).transpose()).transpose();
  return out;
}

Eigen::VectorXd DriftModel::denoiser_jvp(double t, const Eigen::VectorXd& z,
                                         const Eigen::VectorXd& v) const {
  const double vnorm = v.norm();
  if (vnorm == 0.0) return Eigen::VectorXd::Zero(z.size());
  const Eigen::VectorXd u = v / vnorm;
  const double h = 1e-4 * (1.0 + z.lpNorm<Eigen::Infinity>());
  const Eigen::VectorXd zp = z + h * u;
  const Eigen::VectorXd zm = z - h * u;
  const Eigen::VectorXd ep =
      denoiser_mean_from_drift(drift(t, zp), zp, t, schedule());
  const Eigen::VectorXd em =
      denoiser_mean_from_drift(drift(t, zm), zm, t, schedule());
  return vnorm * (ep - em) / (2.0 * h);
}

Eigen::VectorXd jacobian_vector_product(const DriftModel& model,
                                        const Eigen::VectorXd& z, double t,
                                        const Eigen::VectorXd& v) {
  return model.denoiser_jvp(t, z, v);
}

void GmmPrior::validate() const {
  if (weights.size() < 1 || weights.size() != means.size() ||
      weights.size() != stds.size())
    throw std::invalid_argument("GmmPrior: inconsistent component counts");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("GmmPrior: weights must sum to 1");
  if ((stds.array() <= 0.0).any())
    throw std::invalid_argument("GmmPrior: stds must be positive");
}

double GmmPrior::log_pdf(double x) const {
  double best = -std::numeric_limits<double>::infinity();
  Eigen::ArrayXd lp(weights.size());
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    const double r = (x - means[k]) / stds[k];
    lp[k] = std::log(weights[k]) - 0.5 * kLog2Pi - std::log(stds[k]) -
            0.5 * r * r;
    best = std::max(best, lp[k]);
  }
  return best + std::log((lp - best).exp().sum());
}

double GmmPrior::pdf(double x) const { return std::exp(log_pdf(x)); }

Eigen::VectorXd sample_gmm(const GmmPrior& prior, Eigen::Index n, Rng& rng) {
  prior.validate();
  std::discrete_distribution<int> comp(prior.weights.data(),
                                       prior.weights.data() + prior.weights.size());
  std::normal_distribution<double> normal;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = comp(rng);
    out[i] = prior.means[k] + prior.stds[k] * normal(rng);
  }
  return out;
}

namespace {

struct GmmLocal {
  // per-component responsibilities and conditional means at (z, t)
  Eigen::ArrayXd resp, e1, e0, dlog;  // dlog = d/dz log N(z; c_k, m_k^2)
  double drift_value(const ScheduleCoeffs& c) const {
    return c.dalpha * (resp * e1).sum() + c.dbeta * (resp * e0).sum();
  }
};

GmmLocal gmm_local(const GmmPrior& prior, double z, const ScheduleCoeffs& c) {
  const Eigen::Index K = prior.components();
  GmmLocal loc;
  loc.resp.resize(K);
  loc.e1.resize(K);
  loc.e0.resize(K);
  loc.dlog.resize(K);
  Eigen::ArrayXd lp(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double sd = prior.stds[k];
    const double m2 = c.alpha * c.alpha * sd * sd + c.beta * c.beta;
    const double center = c.alpha * prior.means[k];
    const double d = z - center;
    lp[k] = std::log(prior.weights[k]) - 0.5 * std::log(m2) - 0.5 * d * d / m2;
    loc.e1[k] = prior.means[k] + c.alpha * sd * sd / m2 * d;
    loc.e0[k] = c.beta * d / m2;
    loc.dlog[k] = -d / m2;
  }
  const double m = lp.maxCoeff();
  loc.resp = (lp - m).exp();
  loc.resp /= loc.resp.sum();
  return loc;
}

}  // namespace

double gmm_drift(const GmmPrior& prior, double z, double t,
                 const Schedule& schedule) {
  const ScheduleCoeffs c = schedule.coeffs(t);
  return gmm_local(prior, z, c).drift_value(c);
}

GmmDrift::GmmDrift(GmmPrior prior, Schedule schedule)
    : prior_(std::move(prior)),
      schedule_(schedule),
      stats_(NormStats::identity(1)) {
  prior_.validate();
}

Eigen::VectorXd GmmDrift::drift(double t, const Eigen::VectorXd& z) const {
  if (z.size() != 1)
    throw std::invalid_argument("GmmDrift: the mixture drift is 1-d");
  Eigen::VectorXd out(1);
  out[0] = gmm_drift(prior_, z[0], t, schedule_);
  return out;
}

Eigen::MatrixXd GmmDrift::drift_rows(double t, const Eigen::MatrixXd& z) const {
  if (z.cols() != 1)
    throw std::invalid_argument("GmmDrift: the mixture drift is 1-d");
  const ScheduleCoeffs c = schedule_.coeffs(t);
  const Eigen::Index K = prior_.components();
  const Eigen::ArrayXd zc = z.col(0).array();

  Eigen::ArrayXXd lp(z.rows(), K), e1(z.rows(), K), e0(z.rows(), K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double sd = prior_.stds[k];
    const double m2 = c.alpha * c.alpha * sd * sd + c.beta * c.beta;
    const Eigen::ArrayXd d = zc - c.alpha * prior_.means[k];
    lp.col(k) = std::log(prior_.weights[k]) - 0.5 * std::log(m2) -
                0.5 * d.square() / m2;
    e1.col(k) = prior_.means[k] + (c.alpha * sd * sd / m2) * d;
    e0.col(k) = (c.beta / m2) * d;
  }
  const Eigen::ArrayXd m = lp.rowwise().maxCoeff();
  Eigen::ArrayXXd r = (lp.colwise() - m).exp();
  r.colwise() /= r.rowwise().sum();
  return (c.dalpha * (r * e1).rowwise().sum() +
          c.dbeta * (r * e0).rowwise().sum())
      .matrix();
}

Eigen::VectorXd GmmDrift::denoiser_jvp(double t, const Eigen::VectorXd& z,
                                       const Eigen::VectorXd& v) const {
  const ScheduleCoeffs c = schedule_.coeffs(t);
  const GmmLocal loc = gmm_local(prior_, z[0], c);
  const Eigen::Index K = prior_.components();
  // d/dz [sum_k r_k e1_k]; dr_k/dz = r_k (dlog_k - sum_j r_j dlog_j)
  const double mean_dlog = (loc.resp * loc.dlog).sum();
  double jac = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double sd = prior_.stds[k];
    const double m2 = c.alpha * c.alpha * sd * sd + c.beta * c.beta;
    const double de1 = c.alpha * sd * sd / m2;
    const double dr = loc.resp[k] * (loc.dlog[k] - mean_dlog);
    jac += dr * loc.e1[k] + loc.resp[k] * de1;
  }
  return jac * v;
}

IsotropicGaussianDrift::IsotropicGaussianDrift(Eigen::VectorXd mean, double var,
                                               Schedule schedule)
    : mean_(std::move(mean)),
      var_(var),
      schedule_(schedule),
      stats_(NormStats::identity(mean_.size())) {
  if (!(var_ > 0.0))
    throw std::invalid_argument("IsotropicGaussianDrift: var must be > 0");
}

Eigen::VectorXd IsotropicGaussianDrift::drift(double t,
                                              const Eigen::VectorXd& z) const {
  const ScheduleCoeffs c = schedule_.coeffs(t);
  const double m2 = c.alpha * c.alpha * var_ + c.beta * c.beta;
  const Eigen::VectorXd d = z - c.alpha * mean_;
  const Eigen::VectorXd e1 = mean_ + (c.alpha * var_ / m2) * d;
  const Eigen::VectorXd e0 = (c.beta / m2) * d;
  return c.dalpha * e1 + c.dbeta * e0;
}

Eigen::MatrixXd IsotropicGaussianDrift::drift_rows(
    double t, const Eigen::MatrixXd& z) const {
  const ScheduleCoeffs c = schedule_.coeffs(t);
  const double m2 = c.alpha * c.alpha * var_ + c.beta * c.beta;
  const double slope = c.dalpha * c.alpha * var_ / m2 + c.dbeta * c.beta / m2;
  const Eigen::VectorXd offset =
      c.dalpha * mean_ - slope * c.alpha * mean_;
  return (slope * z).rowwise() + offset.transpose();
}

Eigen::VectorXd IsotropicGaussianDrift::denoiser_jvp(
    double t, const Eigen::VectorXd&, const Eigen::VectorXd& v) const {
  const ScheduleCoeffs c = schedule_.coeffs(t);
  const double m2 = c.alpha * c.alpha * var_ + c.beta * c.beta;
  return (c.alpha * var_ / m2) * v;
}

NetDrift::NetDrift(std::vector<int> layer_dims, NormStats stats,
                   Schedule schedule)
    : dims_(std::move(layer_dims)), stats_(std::move(stats)), schedule_(schedule) {
  if (dims_.size() < 2)
    throw std::invalid_argument("NetDrift: need at least input and output dims");
  if (dims_.front() != dims_.back() + 1)
    throw std::invalid_argument(
        "NetDrift: input dim must be output dim + 1 (state plus time)");
  Eigen::Index offset = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    w_offsets_.push_back(offset);
    offset += static_cast<Eigen::Index>(dims_[l + 1]) * dims_[l];
    b_offsets_.push_back(offset);
    offset += dims_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(offset);
  stats_.validate();
}

Eigen::Index NetDrift::dim() const { return dims_.back(); }

Eigen::Map<const Eigen::MatrixXd> NetDrift::weight(int layer) const {
  return {params_.data() + w_offsets_[layer], dims_[layer + 1], dims_[layer]};
}

Eigen::Map<const Eigen::VectorXd> NetDrift::bias(int layer) const {
  return {params_.data() + b_offsets_[layer], dims_[layer + 1]};
}

Eigen::Map<Eigen::MatrixXd> NetDrift::weight(int layer) {
  return {params_.data() + w_offsets_[layer], dims_[layer + 1], dims_[layer]};
}

Eigen::Map<Eigen::VectorXd> NetDrift::bias(int layer) {
  return {params_.data() + b_offsets_[layer], dims_[layer + 1]};
}

void NetDrift::init_params(Rng& rng) {
  for (int l = 0; l < layers(); ++l) {
    auto w = weight(l);
    const double limit = std::sqrt(6.0 / (dims_[l] + dims_[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    bias(l).setZero();
  }
}

Eigen::MatrixXd NetDrift::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != dims_.front())
    throw std::invalid_argument("NetDrift: input dimension mismatch");
  Eigen::MatrixXd a = x;
  for (int l = 0; l < layers(); ++l) {
    Eigen::MatrixXd pre = a * weight(l).transpose();
    pre.rowwise() += bias(l).transpose();
    if (l + 1 < layers())
      a = pre.cwiseMax(0.0);
    else
      a = std::move(pre);
  }
  return a;
}

Eigen::VectorXd NetDrift::drift(double t, const Eigen::VectorXd& z) const {
  if (z.size() != dim())
    throw std::invalid_argument("NetDrift: state dimension mismatch");
  Eigen::MatrixXd x(1, dims_.front());
  x.leftCols(dim()) = z.transpose();
  x(0, dim()) = t;
  return forward(x).row(0).transpose();
}

Eigen::MatrixXd NetDrift::drift_rows(double t, const Eigen::MatrixXd& z) const {
  if (z.cols() != dim())
    throw std::invalid_argument("NetDrift: state dimension mismatch");
  Eigen::MatrixXd x(z.rows(), dims_.front());
  x.leftCols(dim()) = z;
  x.col(dim()).setConstant(t);
  return forward(x);
}

RescaledDrift::RescaledDrift(std::shared_ptr<const DriftModel> inner,
                             NormStats stats)
    : inner_(std::move(inner)),
      rescale_(std::move(stats)),
      identity_(NormStats::identity(inner_->dim())) {
  rescale_.validate();
}

Eigen::VectorXd RescaledDrift::drift(double t, const Eigen::VectorXd& z) const {
  return rescale_drift(inner_->drift(t, rescale_.normalize(z)), rescale_);
}

Eigen::MatrixXd RescaledDrift::drift_rows(double t,
                                          const Eigen::MatrixXd& z) const {
  return rescale_.sigma * inner_->drift_rows(t, rescale_.normalize_rows(z));
}

Eigen::VectorXd RescaledDrift::denoiser_jvp(double t, const Eigen::VectorXd& z,
                                            const Eigen::VectorXd& v) const {
  // E_Z[z1|z] = mu + sigma E_W[w1|w]; the sigma factors cancel in the JVP
  return inner_->denoiser_jvp(t, rescale_.normalize(z), v);
}

}  // namespace daisi

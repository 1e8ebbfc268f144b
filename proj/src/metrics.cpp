#include "daisi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace daisi {

namespace {

void check_dims(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& truth) {
  if (ensemble.cols() != truth.size())
    throw std::invalid_argument("metrics: ensemble/truth dimension mismatch");
  if (ensemble.rows() < 1)
    throw std::invalid_argument("metrics: empty ensemble");
}

}  // namespace

double rmse(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& truth) {
  check_dims(ensemble, truth);
  const Eigen::VectorXd mean = ensemble.colwise().mean();
  return std::sqrt((mean - truth).squaredNorm() / truth.size());
}

double ens_rmse(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& truth) {
  check_dims(ensemble, truth);
  const Eigen::ArrayXd sq =
      (ensemble.rowwise() - truth.transpose()).rowwise().squaredNorm();
  return (sq / truth.size()).sqrt().mean();
}

double crps_fair(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& truth) {
  check_dims(ensemble, truth);
  const Eigen::Index J = ensemble.rows();
  if (J < 2) throw std::invalid_argument("crps_fair: needs at least 2 members");

  double total = 0.0;
  std::vector<double> x(static_cast<std::size_t>(J));
  for (Eigen::Index d = 0; d < truth.size(); ++d) {
    for (Eigen::Index j = 0; j < J; ++j) x[j] = ensemble(j, d);
    double term1 = 0.0;
    for (double v : x) term1 += std::abs(v - truth[d]);
    term1 /= J;
    // sorted form of the full pairwise sum: sum_{j,k} |x_j - x_k|
    std::sort(x.begin(), x.end());
    double pair_sum = 0.0;
    for (Eigen::Index m = 0; m < J; ++m)
      pair_sum += (2.0 * m - J + 1.0) * x[m];
    pair_sum *= 2.0;
    total += term1 - pair_sum / (2.0 * J * (J - 1.0));
  }
  return total / truth.size();
}

SpreadSsr spread_and_ssr(const Eigen::MatrixXd& ensemble,
                         const Eigen::VectorXd& truth) {
  check_dims(ensemble, truth);
  const Eigen::Index J = ensemble.rows();
  if (J < 2)
    throw std::invalid_argument("spread_and_ssr: needs at least 2 members");

  const Eigen::RowVectorXd mean = ensemble.colwise().mean();
  const Eigen::ArrayXd spread_d =
      ((ensemble.rowwise() - mean).array().square().colwise().sum() / J)
          .sqrt()
          .transpose();
  const Eigen::ArrayXd err_d = (mean.transpose() - truth).array().abs();

  SpreadSsr out;
  out.spread = std::sqrt(spread_d.square().mean());
  const double factor = std::sqrt((J + 1.0) / J);
  double acc = 0.0;
  for (Eigen::Index d = 0; d < err_d.size(); ++d) {
    if (err_d[d] == 0.0) {
      out.degenerate = true;
      continue;
    }
    acc += factor * spread_d[d] / err_d[d];
  }
  out.ssr = out.degenerate ? 0.0 : acc / err_d.size();
  return out;
}

namespace {

// lower median (index (n-1)/2) of the cross-set distance multiset
double cross_median_enumerated(const Eigen::MatrixXd& a,
                               const Eigen::MatrixXd& b) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(a.rows()) * b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      d.push_back((a.row(i) - b.row(j)).norm());
  const std::size_t k = (d.size() - 1) / 2;
  std::nth_element(d.begin(), d.begin() + k, d.end());
  return d[k];
}

// 1D case at large sizes: k-th order statistic of |x_i - y_j| by bisection
// on the value, counting pairs with two sorted arrays
double cross_median_sorted_1d(const Eigen::VectorXd& a,
                              const Eigen::VectorXd& b) {
  std::vector<double> x(a.data(), a.data() + a.size());
  std::vector<double> y(b.data(), b.data() + b.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const std::size_t total = x.size() * y.size();
  const std::size_t k = (total - 1) / 2;  // 0-based rank of the lower median

  const auto count_leq = [&](double tau) {
    std::size_t count = 0;
    for (double xi : x) {
      const auto lo = std::lower_bound(y.begin(), y.end(), xi - tau);
      const auto hi = std::upper_bound(y.begin(), y.end(), xi + tau);
      count += static_cast<std::size_t>(hi - lo);
    }
    return count;
  };

  double lo = 0.0;
  double hi = std::max(std::abs(x.front() - y.back()),
                       std::abs(x.back() - y.front()));
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count_leq(mid) >= k + 1)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace

double mmd_rbf(const Eigen::MatrixXd& a_in, const Eigen::MatrixXd& b_in) {
  if (a_in.cols() != b_in.cols())
    throw std::invalid_argument("mmd_rbf: dimension mismatch");
  // canonical argument order makes the floating-point result exactly
  // symmetric in the two sets
  const bool swap = [&] {
    if (a_in.rows() != b_in.rows()) return a_in.rows() > b_in.rows();
    for (Eigen::Index i = 0; i < a_in.size(); ++i)
      if (a_in.data()[i] != b_in.data()[i]) return a_in.data()[i] > b_in.data()[i];
    return false;
  }();
  const Eigen::MatrixXd& a = swap ? b_in : a_in;
  const Eigen::MatrixXd& b = swap ? a_in : b_in;

  const Eigen::Index n = a.rows(), m = b.rows();
  if (n < 2 || m < 2)
    throw std::invalid_argument("mmd_rbf: both sets need at least 2 samples");

  double median;
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(m) <= 40'000'000)
    median = cross_median_enumerated(a, b);
  else if (a.cols() == 1)
    median = cross_median_sorted_1d(a.col(0), b.col(0));
  else
    throw std::invalid_argument("mmd_rbf: sample sets too large");

  const double sigma2 = std::max(median / 2.0, 1e-300);
  const double inv = 1.0 / (2.0 * sigma2);

  // streamed kernel sums; within-set terms exclude the diagonal
  const auto kernel_sum = [&](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                              bool skip_diagonal) {
    double sum = 0.0;
    const Eigen::Index block = 256;
    const Eigen::ArrayXd v_sq = v.rowwise().squaredNorm();
    for (Eigen::Index i0 = 0; i0 < u.rows(); i0 += block) {
      const Eigen::Index rows = std::min(block, u.rows() - i0);
      const auto chunk = u.middleRows(i0, rows);
      Eigen::ArrayXXd d2 = (-2.0 * (chunk * v.transpose())).array();
      d2.rowwise() += v_sq.transpose();
      d2.colwise() += chunk.rowwise().squaredNorm().array();
      Eigen::ArrayXXd kvals = (-inv * d2.max(0.0)).exp();
      if (skip_diagonal)
        for (Eigen::Index r = 0; r < rows; ++r) kvals(r, i0 + r) = 0.0;
      sum += kvals.sum();
    }
    return sum;
  };

  const double within_a = kernel_sum(a, a, true) / (n * (n - 1.0));
  const double within_b = kernel_sum(b, b, true) / (m * (m - 1.0));
  const double cross = kernel_sum(a, b, false) / (static_cast<double>(n) * m);
  const double mmd2 = within_a + within_b - 2.0 * cross;
  return std::sqrt(std::max(mmd2, 0.0));
}

MetricReport evaluate_ensemble(const Eigen::MatrixXd& ensemble,
                               const Eigen::VectorXd& truth) {
  MetricReport r;
  r.rmse = rmse(ensemble, truth);
  r.ens_rmse = ens_rmse(ensemble, truth);
  r.crps = crps_fair(ensemble, truth);
  const SpreadSsr s = spread_and_ssr(ensemble, truth);
  r.spread = s.spread;
  r.ssr = s.ssr;
  r.ssr_degenerate = s.degenerate;
  return r;
}

}  // namespace daisi

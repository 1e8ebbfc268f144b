#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace daisi {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to spread seeds and stream ids over 64 bits.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a stream seed from a master seed and up to three stream indices.
/// Ensemble members, assimilation steps and experiment cells each get their
/// own stream, so results do not depend on how work is scheduled across
/// threads.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = mix64(master);
  s = mix64(s ^ mix64(a + 0x9e37));
  s = mix64(s ^ mix64(b + 0x79b9));
  s = mix64(s ^ mix64(c + 0xf4a7));
  return s;
}

inline Rng make_rng(std::uint64_t master, std::uint64_t a = 0,
                    std::uint64_t b = 0, std::uint64_t c = 0) {
  return Rng(derive_seed(master, a, b, c));
}

// Stream tags keeping the independent noise sources of an experiment apart.
namespace stream {
inline constexpr std::uint64_t kForecast = 1;
inline constexpr std::uint64_t kAnalysis = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kObsNoise = 4;
inline constexpr std::uint64_t kTestbed = 5;
inline constexpr std::uint64_t kPool = 6;
inline constexpr std::uint64_t kTrain = 7;
inline constexpr std::uint64_t kTrajectory = 8;
inline constexpr std::uint64_t kResample = 9;
inline constexpr std::uint64_t kCell = 10;
}  // namespace stream

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> n;
  return n(rng);
}

inline Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> dist;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows,
                                     Eigen::Index cols) {
  std::normal_distribution<double> dist;
  Eigen::MatrixXd m(rows, cols);
  // row-major fill so each row (ensemble member) consumes a contiguous
  // block of the stream
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

}  // namespace daisi

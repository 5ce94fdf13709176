#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace acbc {

/// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

/// mt19937_64 with a portable uniform mapping (std distributions are not
/// specified bit-for-bit across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  Eigen::VectorXd uniform(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd v(lo.size());
    for (int i = 0; i < lo.size(); ++i) v(i) = uniform(lo(i), hi(i));
    return v;
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace acbc

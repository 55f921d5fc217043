#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dissipate {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DivergenceError : std::runtime_error {
  double time;
  explicit DivergenceError(double t)
      : std::runtime_error("state norm exceeded divergence bound at t=" +
                           std::to_string(t)),
        time(t) {}
};

struct SingularResolventError : std::runtime_error {
  double omega;
  explicit SingularResolventError(double w)
      : std::runtime_error("jw*I - A singular at omega=" + std::to_string(w)),
        omega(w) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

// splitmix64: stateless hash used for seed derivation so ensemble members
// are independent of evaluation order and worker count.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic, platform-independent uniform doubles from a 64-bit state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_ + 0x632be59bd9b4e019ULL);
    return state_;
  }

  double next01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * next01(); }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
  }

  Vec uniform_vec(int n, double a, double b) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(a, b);
    return v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace dissipate

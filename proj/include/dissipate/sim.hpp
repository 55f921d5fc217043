#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dissipate/common.hpp"
#include "dissipate/models.hpp"
#include "dissipate/operators.hpp"

namespace dissipate {

// ---------------------------------------------------------------------------
// Configuration and signals
// ---------------------------------------------------------------------------

enum class Method { Rk4, Euler };

struct SimConfig {
  double h = 1e-3;
  double T = 5.0;
  Method method = Method::Rk4;
  double divergence_bound = 1e9;

  int steps() const {
    double s = T / h;
    double r = std::round(s);
    require(std::abs(s - r) < 1e-9 && r > 0,
            "horizon must be an integer number of steps");
    return int(r);
  }

  std::vector<double> grid() const {
    const int N = steps();
    std::vector<double> g(N + 1);
    for (int k = 0; k <= N; ++k) g[k] = h * k;
    return g;
  }
};

/// Deterministic test-input families. Seeded families are reproducible
/// bit-identically: piecewise-constant levels come from a stateless hash of
/// (seed, channel, segment).
class InputSignal {
 public:
  enum class Family { Zero, Constant, Sinusoid, PiecewiseConstant, DecayExp };

  static InputSignal zero(int dims) {
    InputSignal s; s.family_ = Family::Zero; s.dims_ = dims; return s;
  }
  static InputSignal constant(Vec level) {
    InputSignal s;
    s.family_ = Family::Constant;
    s.dims_ = int(level.size());
    s.level_ = std::move(level);
    return s;
  }
  static InputSignal sinusoid(double amplitude, double frequency,
                              double phase, int dims = 1) {
    InputSignal s;
    s.family_ = Family::Sinusoid;
    s.dims_ = dims;
    s.amp_ = amplitude; s.freq_ = frequency; s.phase_ = phase;
    return s;
  }
  static InputSignal piecewise_constant(std::uint64_t seed, double dwell,
                                        double amplitude, int dims = 1) {
    require(dwell > 0 && amplitude >= 0, "invalid piecewise-constant params");
    InputSignal s;
    s.family_ = Family::PiecewiseConstant;
    s.dims_ = dims;
    s.seed_ = seed; s.dwell_ = dwell; s.amp_ = amplitude;
    return s;
  }
  static InputSignal decaying_exponential(double amplitude, double rate,
                                          int dims = 1) {
    require(rate > 0, "decay rate must be positive");
    InputSignal s;
    s.family_ = Family::DecayExp;
    s.dims_ = dims;
    s.amp_ = amplitude; s.freq_ = rate;
    return s;
  }

  Family family() const { return family_; }
  int dims() const { return dims_; }

  Vec operator()(double t) const {
    Vec v(dims_);
    switch (family_) {
      case Family::Zero:
        v.setZero();
        break;
      case Family::Constant:
        v = level_;
        break;
      case Family::Sinusoid:
        v.setConstant(amp_ * std::sin(freq_ * t + phase_));
        break;
      case Family::PiecewiseConstant: {
        auto seg = std::uint64_t(std::floor(t / dwell_));
        for (int j = 0; j < dims_; ++j) {
          std::uint64_t r =
              splitmix64(seed_ ^ splitmix64(seg * 0x10001ULL + j));
          double u01 = double(r >> 11) * 0x1.0p-53;
          v[j] = amp_ * (2.0 * u01 - 1.0);
        }
        break;
      }
      case Family::DecayExp:
        v.setConstant(amp_ * std::exp(-freq_ * t));
        break;
    }
    return v;
  }

 private:
  Family family_ = Family::Zero;
  int dims_ = 1;
  Vec level_;
  double amp_ = 0, freq_ = 1, phase_ = 0, dwell_ = 1;
  std::uint64_t seed_ = 0;
};

inline Mat gen_input(const InputSignal& sig, const std::vector<double>& grid) {
  Mat out(grid.size(), sig.dims());
  for (size_t k = 0; k < grid.size(); ++k) out.row(k) = sig(grid[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory container
// ---------------------------------------------------------------------------

/// Sampled trajectory on a uniform grid. Rows are time samples. int_xi is
/// the running trapezoid of the xi channel.
struct Trajectory {
  std::vector<double> t;
  Mat x;        // plant state(s)
  Mat z;        // auxiliary state(s)
  Mat u;
  Mat y;
  Vec xi;       // empty when no supply rate attached
  Vec int_xi;
  Vec storage;  // optional S(x, z) channel

  int samples() const { return int(t.size()); }
  bool has_xi() const { return xi.size() == int(t.size()); }
  bool has_storage() const { return storage.size() == int(t.size()); }
};

inline Vec cumtrapz(const std::vector<double>& t, const Vec& f) {
  Vec out(f.size());
  if (f.size() == 0) return out;
  out[0] = 0.0;
  for (int k = 1; k < f.size(); ++k)
    out[k] = out[k - 1] + 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
  return out;
}

namespace detail {

using OdeFn = std::function<Vec(double, const Vec&)>;

inline Vec ode_step(Method method, const OdeFn& f, double t, double h,
                    const Vec& s) {
  if (method == Method::Euler) return s + h * f(t, s);
  Vec k1 = f(t, s);
  Vec k2 = f(t + 0.5 * h, s + 0.5 * h * k1);
  Vec k3 = f(t + 0.5 * h, s + 0.5 * h * k2);
  Vec k4 = f(t + h, s + h * k3);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Open-loop simulation
// ---------------------------------------------------------------------------

/// Co-integrates the plant, an optional auxiliary system, and the internal
/// dynamics of an optional supply rate on a single fixed-step grid. A prime
/// supply rate pins xbar to x0.
inline Trajectory simulate_open(const SystemDef& sys,
                                const std::optional<AuxiliarySystem>& phi,
                                const std::optional<SupplyRate>& xi,
                                const InputSignal& input, const Vec& x0,
                                Vec xbar, const SimConfig& cfg) {
  require(int(x0.size()) == sys.n(), "x0 dimension mismatch");
  require(x0.allFinite(), "x0 must be finite");
  require(input.dims() == sys.m(), "input dimension mismatch");
  const int n = sys.n();
  const int nz = phi ? phi->state_dim() : 0;
  const int ns = (xi && xi->valid()) ? xi->state_dim() : 0;

  if (xi && xi->valid() && xi->prime()) xbar = x0;

  auto f = [&](double t, const Vec& s) -> Vec {
    Vec u = input(t);
    Vec x = s.head(n);
    Vec dx = sys.eval_dynamics(x, u);
    Vec ds(s.size());
    ds.head(n) = dx;
    if (nz > 0) {
      Vec y = sys.eval_output(x, u);
      ds.segment(n, nz) = phi->deriv(s.segment(n, nz), x, u, y);
    }
    if (ns > 0) {
      Vec y = sys.eval_output(x, u);
      ds.tail(ns) = xi->state_deriv(s.tail(ns), u, y);
    }
    return ds;
  };

  const auto grid = cfg.grid();
  const int N = int(grid.size());
  Trajectory traj;
  traj.t = grid;
  traj.x.resize(N, n);
  traj.z.resize(N, nz);
  traj.u.resize(N, sys.m());
  traj.y.resize(N, sys.p());
  if (xi && xi->valid()) traj.xi.resize(N);

  Vec s(n + nz + ns);
  s.head(n) = x0;
  if (nz > 0) s.segment(n, nz) = phi->init_state(xbar);
  if (ns > 0) s.tail(ns) = xi->init_state(xbar);

  for (int k = 0; k < N; ++k) {
    Vec u = input(grid[k]);
    Vec x = s.head(n);
    Vec y = sys.eval_output(x, u);
    traj.x.row(k) = x;
    if (nz > 0) traj.z.row(k) = s.segment(n, nz);
    traj.u.row(k) = u;
    traj.y.row(k) = y;
    if (xi && xi->valid()) traj.xi[k] = xi->output(s.tail(ns), u, y);
    if (k + 1 < N) {
      s = detail::ode_step(cfg.method, f, grid[k], cfg.h, s);
      if (!s.allFinite() || s.norm() > cfg.divergence_bound)
        throw DivergenceError(grid[k + 1]);
    }
  }
  if (xi && xi->valid()) traj.int_xi = cumtrapz(traj.t, traj.xi);
  return traj;
}

// ---------------------------------------------------------------------------
// Closed-loop simulation
// ---------------------------------------------------------------------------

/// Simulates the interconnection u1 = w1 + y2, u2 = w2 + y1 with stacked
/// state (x1, x2, z1, z2). Recorded channels: u = (u1, u2), y = (y1, y2).
/// xbar1 seeds phi1 and xbar2 seeds phi2; the catalog convention ties both
/// to x1(0) via the rules stored in the auxiliary systems.
inline Trajectory simulate_closed(const FeedbackSystem& fb,
                                  const std::optional<AuxiliarySystem>& phi1,
                                  const std::optional<AuxiliarySystem>& phi2,
                                  const InputSignal& w1, const InputSignal& w2,
                                  const Vec& x0, const SimConfig& cfg,
                                  const Vec& xbar1 = Vec(),
                                  const Vec& xbar2 = Vec()) {
  const int n1 = fb.sigma1.n(), n2 = fb.sigma2.n();
  require(int(x0.size()) == n1 + n2, "stacked x0 dimension mismatch");
  require(w1.dims() == fb.sigma1.m() && w2.dims() == fb.sigma2.m(),
          "exogenous input dimension mismatch");
  const int nz1 = phi1 ? phi1->state_dim() : 0;
  const int nz2 = phi2 ? phi2->state_dim() : 0;

  auto f = [&](double t, const Vec& s) -> Vec {
    Vec x1 = s.head(n1), x2 = s.segment(n1, n2);
    LoopSignals sig = resolve_loop(fb, x1, x2, w1(t), w2(t));
    Vec ds(s.size());
    ds.head(n1) = fb.sigma1.eval_dynamics(x1, sig.u1);
    ds.segment(n1, n2) = fb.sigma2.eval_dynamics(x2, sig.u2);
    if (nz1 > 0)
      ds.segment(n1 + n2, nz1) =
          phi1->deriv(s.segment(n1 + n2, nz1), x1, sig.u1, sig.y1);
    if (nz2 > 0)
      ds.tail(nz2) = phi2->deriv(s.tail(nz2), x2, sig.u2, sig.y2);
    return ds;
  };

  const auto grid = cfg.grid();
  const int N = int(grid.size());
  Trajectory traj;
  traj.t = grid;
  traj.x.resize(N, n1 + n2);
  traj.z.resize(N, nz1 + nz2);
  traj.u.resize(N, fb.sigma1.m() + fb.sigma2.m());
  traj.y.resize(N, fb.sigma1.p() + fb.sigma2.p());

  Vec s = Vec::Zero(n1 + n2 + nz1 + nz2);
  s.head(n1 + n2) = x0;
  if (nz1 > 0)
    s.segment(n1 + n2, nz1) =
        phi1->init_state(xbar1.size() ? xbar1 : Vec(x0.head(n1)));
  if (nz2 > 0)
    s.tail(nz2) = phi2->init_state(xbar2.size() ? xbar2 : Vec(x0.head(n1)));

  for (int k = 0; k < N; ++k) {
    Vec x1 = s.head(n1), x2 = s.segment(n1, n2);
    LoopSignals sig = resolve_loop(fb, x1, x2, w1(grid[k]), w2(grid[k]));
    traj.x.row(k) = s.head(n1 + n2);
    if (nz1 + nz2 > 0) traj.z.row(k) = s.tail(nz1 + nz2);
    traj.u.row(k) << sig.u1, sig.u2;
    traj.y.row(k) << sig.y1, sig.y2;
    if (k + 1 < N) {
      s = detail::ode_step(cfg.method, f, grid[k], cfg.h, s);
      if (!s.allFinite() || s.norm() > cfg.divergence_bound)
        throw DivergenceError(grid[k + 1]);
    }
  }
  return traj;
}

}  // namespace dissipate

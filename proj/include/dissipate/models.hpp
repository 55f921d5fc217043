#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dissipate/common.hpp"

namespace dissipate {

/// State-space realization (A, B, C, D) of an LTI system. n = 0 is allowed
/// and denotes a static gain D.
struct LinearRealization {
  Mat A, B, C, D;

  LinearRealization() = default;
  LinearRealization(Mat a, Mat b, Mat c, Mat d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    validate();
  }

  static LinearRealization scalar(double a, double b, double c, double d) {
    Mat A(1, 1), B(1, 1), C(1, 1), D(1, 1);
    A << a; B << b; C << c; D << d;
    return {A, B, C, D};
  }

  static LinearRealization static_gain(const Mat& d) {
    return {Mat(0, 0), Mat(0, d.cols()), Mat(d.rows(), 0), d};
  }

  int n() const { return int(A.rows()); }
  int m() const { return int(B.cols() > 0 ? B.cols() : D.cols()); }
  int p() const { return int(C.rows() > 0 ? C.rows() : D.rows()); }

  void validate() const {
    require(A.rows() == A.cols(), "A must be square");
    require(B.rows() == A.rows(), "B row count must equal state dim");
    require(C.cols() == A.rows(), "C column count must equal state dim");
    require(D.rows() == C.rows() || C.rows() == 0, "D/C row mismatch");
    require(D.cols() == B.cols() || B.cols() == 0, "D/B column mismatch");
    require(A.allFinite() && B.allFinite() && C.allFinite() && D.allFinite(),
            "realization entries must be finite");
  }
};

/// C(jwI - A)^{-1} B + D. Throws SingularResolventError when jw is an
/// eigenvalue of A.
inline CMat frequency_response(const LinearRealization& sys, double omega) {
  const int n = sys.n();
  if (n == 0) return sys.D.cast<std::complex<double>>();
  CMat resolvent = CMat::Identity(n, n) * std::complex<double>(0.0, omega) -
                   sys.A.cast<std::complex<double>>();
  Eigen::FullPivLU<CMat> lu(resolvent);
  if (!lu.isInvertible()) throw SingularResolventError(omega);
  return sys.C.cast<std::complex<double>>() *
             lu.solve(sys.B.cast<std::complex<double>>()) +
         sys.D.cast<std::complex<double>>();
}

/// Scalar static nonlinearity from the catalog. Saturation clips to
/// [-limit, limit]; a table map interpolates a user-supplied monotone
/// piecewise-linear graph through the origin.
class StaticMap {
 public:
  enum class Kind { Identity, Saturation, Table };

  StaticMap() : kind_(Kind::Identity) {}

  static StaticMap identity() { return StaticMap(); }

  static StaticMap saturation(double limit) {
    require(limit > 0.0, "saturation limit must be positive");
    StaticMap s;
    s.kind_ = Kind::Saturation;
    s.limit_ = limit;
    return s;
  }

  static StaticMap table(std::vector<double> abscissa,
                         std::vector<double> ordinate) {
    require(abscissa.size() == ordinate.size() && abscissa.size() >= 2,
            "table needs matching breakpoint/value lists");
    StaticMap s;
    s.kind_ = Kind::Table;
    s.xs_ = std::move(abscissa);
    s.ys_ = std::move(ordinate);
    return s;
  }

  Kind kind() const { return kind_; }
  double limit() const { return limit_; }
  const std::vector<double>& table_x() const { return xs_; }
  const std::vector<double>& table_y() const { return ys_; }

  double operator()(double r) const {
    switch (kind_) {
      case Kind::Identity:
        return r;
      case Kind::Saturation:
        return std::min(std::max(r, -limit_), limit_);
      case Kind::Table: {
        if (r <= xs_.front()) return ys_.front();
        if (r >= xs_.back()) return ys_.back();
        auto it = std::upper_bound(xs_.begin(), xs_.end(), r);
        size_t i = size_t(it - xs_.begin());
        double t = (r - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
        return ys_[i - 1] + t * (ys_[i] - ys_[i - 1]);
      }
    }
    return r;
  }

  /// Antiderivative \int_0^r of the map, used as a storage function for
  /// static sector nonlinearities.
  double integral(double r) const {
    switch (kind_) {
      case Kind::Identity:
        return 0.5 * r * r;
      case Kind::Saturation: {
        double a = std::abs(r);
        if (a <= limit_) return 0.5 * r * r;
        return limit_ * a - 0.5 * limit_ * limit_;
      }
      case Kind::Table: {
        // composite trapezoid over the table breakpoints
        double sign = r >= 0 ? 1.0 : -1.0;
        double hi = std::abs(r), acc = 0.0, prev = 0.0;
        const int steps = 512;
        for (int k = 1; k <= steps; ++k) {
          double s = hi * double(k) / steps;
          double v = (*this)(sign * s) * sign;
          acc += 0.5 * (prev + v) * (hi / steps);
          prev = v;
        }
        return acc;
      }
    }
    return 0.0;
  }

  /// Sector [0, b] and monotonicity inequalities checked on a sample grid.
  bool satisfies_sector(double b, const std::vector<double>& grid) const {
    for (double r : grid) {
      double s = (*this)(r);
      if (s * (b * r - s) < -1e-12) return false;
      for (double q : grid) {
        if ((s - (*this)(q)) * (r - q) < -1e-12) return false;
      }
    }
    return std::abs((*this)(0.0)) < 1e-15;
  }

 private:
  Kind kind_;
  double limit_ = 1.0;
  std::vector<double> xs_, ys_;
};

/// Nonlinear or LTI input-state-output system with equilibrium at the
/// origin: xdot = f(x, u), y = h(x, u).
class SystemDef {
 public:
  using DynFn = std::function<Vec(const Vec&, const Vec&)>;

  enum class Kind { Lti, Icd, Sigma2, Example4, StaticSector, Hook };

  SystemDef() = default;

  /// Generic LTI plant.
  static SystemDef lti(const LinearRealization& r, std::string name = "lti") {
    SystemDef s;
    s.kind_ = Kind::Lti;
    s.real_ = r;
    s.n_ = r.n(); s.m_ = r.m(); s.p_ = r.p();
    s.name_ = std::move(name);
    s.feedthrough_ = !r.D.isZero(0.0);
    return s;
  }

  /// Two-state plant with a sector nonlinearity and an odd-power damping
  /// sum:
  ///   x1' = -a*x1 - psi(x1) + 2*x2 - sum_k b_k x1^{e_k} + u
  ///   x2' = -x2 + u
  ///   y   = x1 - x2
  /// Exponents e_k are odd; the default catalog entry uses e = 1, 3, 5.
  static SystemDef icd(double a, std::vector<double> b,
                       std::vector<int> exponents, StaticMap psi,
                       std::string name = "icd") {
    require(a >= 1.0, "icd requires a >= 1");
    require(b.size() == exponents.size(), "coefficient/exponent mismatch");
    for (double bk : b) require(bk >= 0.0, "icd requires b_k >= 0");
    for (int e : exponents) require(e % 2 == 1, "icd exponents must be odd");
    SystemDef s;
    s.kind_ = Kind::Icd;
    s.a_ = a; s.b_ = std::move(b); s.exponents_ = std::move(exponents);
    s.psi_ = std::move(psi);
    s.n_ = 2; s.m_ = 1; s.p_ = 1;
    s.name_ = std::move(name);
    s.feedthrough_ = false;
    return s;
  }

  /// First-order plant with output feedthrough:
  ///   x' = -5x - psi2(x) + u,   y = x - 0.2u
  static SystemDef sigma2(StaticMap psi2, std::string name = "sigma2") {
    SystemDef s;
    s.kind_ = Kind::Sigma2;
    s.psi_ = std::move(psi2);
    s.n_ = 1; s.m_ = 1; s.p_ = 1;
    s.name_ = std::move(name);
    s.feedthrough_ = true;
    return s;
  }

  /// Double-integrator-like plant with cubic stiffness:
  ///   x1' = x2,  x2' = -x1^3 + psi(x2)^2 + u,  y = x2
  static SystemDef example4(StaticMap psi, std::string name = "example4") {
    SystemDef s;
    s.kind_ = Kind::Example4;
    s.psi_ = std::move(psi);
    s.n_ = 2; s.m_ = 1; s.p_ = 1;
    s.name_ = std::move(name);
    s.feedthrough_ = false;
    return s;
  }

  /// Static system y = sigma(u) with no state (n = 0).
  static SystemDef static_sector(StaticMap sigma,
                                 std::string name = "static_sector") {
    SystemDef s;
    s.kind_ = Kind::StaticSector;
    s.psi_ = std::move(sigma);
    s.n_ = 0; s.m_ = 1; s.p_ = 1;
    s.name_ = std::move(name);
    s.feedthrough_ = true;
    return s;
  }

  /// Caller-supplied dynamics. Not reachable from config files.
  static SystemDef hook(int n, int m, int p, DynFn f, DynFn h,
                        bool direct_feedthrough, std::string name = "hook") {
    SystemDef s;
    s.kind_ = Kind::Hook;
    s.f_ = std::move(f); s.h_ = std::move(h);
    s.n_ = n; s.m_ = m; s.p_ = p;
    s.name_ = std::move(name);
    s.feedthrough_ = direct_feedthrough;
    return s;
  }

  Kind kind() const { return kind_; }
  int n() const { return n_; }
  int m() const { return m_; }
  int p() const { return p_; }
  const std::string& name() const { return name_; }
  bool has_feedthrough() const { return feedthrough_; }
  const LinearRealization& realization() const {
    require(kind_ == Kind::Lti, name_ + " is not an LTI system");
    return real_;
  }
  const StaticMap& nonlinearity() const { return psi_; }
  double icd_a() const { return a_; }
  const std::vector<double>& icd_b() const { return b_; }
  const std::vector<int>& icd_exponents() const { return exponents_; }

  Vec eval_dynamics(const Vec& x, const Vec& u) const {
    require(int(x.size()) == n_, "state dimension mismatch");
    require(int(u.size()) == m_, "input dimension mismatch");
    require(x.allFinite() && u.allFinite(), "non-finite argument");
    Vec dx(n_);
    switch (kind_) {
      case Kind::Lti:
        dx = real_.A * x + real_.B * u;
        break;
      case Kind::Icd: {
        double poly = 0.0;
        for (size_t k = 0; k < b_.size(); ++k)
          poly += b_[k] * std::pow(x[0], exponents_[k]);
        dx[0] = -a_ * x[0] - psi_(x[0]) + 2.0 * x[1] - poly + u[0];
        dx[1] = -x[1] + u[0];
        break;
      }
      case Kind::Sigma2:
        dx[0] = -5.0 * x[0] - psi_(x[0]) + u[0];
        break;
      case Kind::Example4:
        dx[0] = x[1];
        dx[1] = -std::pow(x[0], 3) + std::pow(psi_(x[1]), 2) + u[0];
        break;
      case Kind::StaticSector:
        break;  // n = 0
      case Kind::Hook:
        dx = f_(x, u);
        break;
    }
    if (!dx.allFinite()) throw DivergenceError(0.0);
    return dx;
  }

  Vec eval_output(const Vec& x, const Vec& u) const {
    require(int(x.size()) == n_, "state dimension mismatch");
    require(int(u.size()) == m_, "input dimension mismatch");
    Vec y(p_);
    switch (kind_) {
      case Kind::Lti:
        y = real_.C * x + real_.D * u;
        break;
      case Kind::Icd:
        y[0] = x[0] - x[1];
        break;
      case Kind::Sigma2:
        y[0] = x[0] - 0.2 * u[0];
        break;
      case Kind::Example4:
        y[0] = x[1];
        break;
      case Kind::StaticSector:
        y[0] = psi_(u[0]);
        break;
      case Kind::Hook:
        y = h_(x, u);
        break;
    }
    return y;
  }

 private:
  Kind kind_ = Kind::Lti;
  int n_ = 0, m_ = 0, p_ = 0;
  std::string name_;
  bool feedthrough_ = false;
  LinearRealization real_ = LinearRealization::static_gain(Mat::Zero(0, 0));
  StaticMap psi_;
  double a_ = 1.0;
  std::vector<double> b_;
  std::vector<int> exponents_;
  DynFn f_, h_;
};

/// Feedback pair u1 = w1 + y2, u2 = w2 + y1 (Fig. 2 convention). With
/// negative_feedback set, the sign of y2 is absorbed into the loop:
/// u1 = w1 - y2.
struct FeedbackSystem {
  SystemDef sigma1, sigma2;
  bool negative_feedback = false;
  int resolve_first = 1;  // subsystem whose output is computed first
};

/// Numeric feedthrough gain of h at the origin, used for the algebraic
/// loop check when both subsystems have direct feedthrough.
inline Mat feedthrough_gain(const SystemDef& sys, double eps = 1e-7) {
  Mat J(sys.p(), sys.m());
  Vec x0 = Vec::Zero(sys.n());
  for (int j = 0; j < sys.m(); ++j) {
    Vec up = Vec::Zero(sys.m()), um = Vec::Zero(sys.m());
    up[j] = eps; um[j] = -eps;
    J.col(j) = (sys.eval_output(x0, up) - sys.eval_output(x0, um)) / (2 * eps);
  }
  return J;
}

inline FeedbackSystem make_feedback(const SystemDef& s1, const SystemDef& s2,
                                    bool negative_feedback = false) {
  require(s1.m() == s2.p() && s1.p() == s2.m(),
          "feedback interconnection dimension mismatch");
  FeedbackSystem fb{s1, s2, negative_feedback, 1};
  if (!s1.has_feedthrough()) {
    fb.resolve_first = 1;
  } else if (!s2.has_feedthrough()) {
    fb.resolve_first = 2;
  } else {
    Mat d1 = feedthrough_gain(s1), d2 = feedthrough_gain(s2);
    double gain = (d1 * d2).norm();  // spectral bound via Frobenius
    if (gain >= 1.0)
      throw DimensionError("unresolvable algebraic loop: both subsystems "
                           "have feedthrough and loop gain >= 1 at origin");
    fb.resolve_first = 1;
  }
  return fb;
}

/// Resolve the loop signals (u1, u2, y1, y2) at one time instant.
struct LoopSignals {
  Vec u1, u2, y1, y2;
};

inline LoopSignals resolve_loop(const FeedbackSystem& fb, const Vec& x1,
                                const Vec& x2, const Vec& w1, const Vec& w2) {
  const double sgn = fb.negative_feedback ? -1.0 : 1.0;
  LoopSignals s;
  if (!fb.sigma1.has_feedthrough() || !fb.sigma2.has_feedthrough()) {
    if (fb.resolve_first == 1) {
      s.y1 = fb.sigma1.eval_output(x1, Vec::Zero(fb.sigma1.m()));
      s.u2 = w2 + s.y1;
      s.y2 = sgn * fb.sigma2.eval_output(x2, s.u2);
      s.u1 = w1 + s.y2;
      if (fb.sigma1.has_feedthrough()) s.y1 = fb.sigma1.eval_output(x1, s.u1);
    } else {
      s.y2 = sgn * fb.sigma2.eval_output(x2, Vec::Zero(fb.sigma2.m()));
      s.u1 = w1 + s.y2;
      s.y1 = fb.sigma1.eval_output(x1, s.u1);
      s.u2 = w2 + s.y1;
      if (fb.sigma2.has_feedthrough())
        s.y2 = sgn * fb.sigma2.eval_output(x2, s.u2);
    }
    return s;
  }
  // Both feedthroughs present; loop gain < 1 was verified at construction,
  // so fixed-point iteration contracts.
  s.u1 = w1;
  for (int it = 0; it < 200; ++it) {
    s.y1 = fb.sigma1.eval_output(x1, s.u1);
    s.u2 = w2 + s.y1;
    s.y2 = sgn * fb.sigma2.eval_output(x2, s.u2);
    Vec next = w1 + s.y2;
    double err = (next - s.u1).norm();
    s.u1 = next;
    if (err < 1e-13) return s;
  }
  throw std::runtime_error("feedback loop resolution failed to converge");
}

}  // namespace dissipate

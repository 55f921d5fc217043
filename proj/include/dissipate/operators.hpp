#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dissipate/common.hpp"
#include "dissipate/models.hpp"

namespace dissipate {

// ---------------------------------------------------------------------------
// Initial-condition rules (shared by auxiliary systems and supply rates)
// ---------------------------------------------------------------------------

/// How the internal state of an auxiliary system or supply rate is seeded
/// from the initial-condition parameter xbar.
class InitRule {
 public:
  static InitRule zero(int dim) {
    InitRule r; r.dim_ = dim; return r;
  }
  static InitRule fixed(Vec v) {
    InitRule r; r.dim_ = int(v.size()); r.fixed_ = std::move(v);
    r.kind_ = Kind::Fixed; return r;
  }
  /// z(0) = M * xbar
  static InitRule linear(Mat M) {
    InitRule r; r.dim_ = int(M.rows()); r.map_ = std::move(M);
    r.kind_ = Kind::Linear; return r;
  }

  int dim() const { return dim_; }

  bool depends_on_xbar() const { return kind_ == Kind::Linear; }

  Vec operator()(const Vec& xbar) const {
    switch (kind_) {
      case Kind::Zero: return Vec::Zero(dim_);
      case Kind::Fixed: return fixed_;
      case Kind::Linear:
        require(int(xbar.size()) == int(map_.cols()),
                "xbar dimension mismatch in initial-condition rule");
        return map_ * xbar;
    }
    return Vec::Zero(dim_);
  }

 private:
  enum class Kind { Zero, Fixed, Linear };
  Kind kind_ = Kind::Zero;
  int dim_ = 0;
  Vec fixed_;
  Mat map_;
};

// ---------------------------------------------------------------------------
// Auxiliary systems (Phi)
// ---------------------------------------------------------------------------

/// Auxiliary system z' = g(z, x, u), phi = h(z, x, u) co-evolving with a
/// plant. Catalog entries cover the leaky integrators driven by u or y and
/// the sector-state form; arbitrary hooks are allowed at the library level.
class AuxiliarySystem {
 public:
  using GFn = std::function<Vec(const Vec& z, const Vec& x, const Vec& u,
                                const Vec& y)>;

  AuxiliarySystem() = default;

  /// z' = -z + u (scalar)
  static AuxiliarySystem leaky_integrator_u(InitRule init) {
    AuxiliarySystem a;
    a.nz_ = 1;
    a.init_ = std::move(init);
    a.g_ = [](const Vec& z, const Vec&, const Vec& u, const Vec&) {
      Vec dz(1); dz[0] = -z[0] + u[0]; return dz;
    };
    a.name_ = "leaky_integrator_u";
    return a;
  }

  /// z' = -z + y (scalar)
  static AuxiliarySystem leaky_integrator_y(InitRule init) {
    AuxiliarySystem a;
    a.nz_ = 1;
    a.init_ = std::move(init);
    a.g_ = [](const Vec& z, const Vec&, const Vec&, const Vec& y) {
      Vec dz(1); dz[0] = -z[0] + y[0]; return dz;
    };
    a.name_ = "leaky_integrator_y";
    return a;
  }

  /// z' = -z - psi(z) u^2 + y (scalar)
  static AuxiliarySystem sector_state(StaticMap psi, InitRule init) {
    AuxiliarySystem a;
    a.nz_ = 1;
    a.init_ = std::move(init);
    a.g_ = [psi = std::move(psi)](const Vec& z, const Vec&, const Vec& u,
                                  const Vec& y) {
      Vec dz(1);
      dz[0] = -z[0] - psi(z[0]) * u[0] * u[0] + y[0];
      return dz;
    };
    a.name_ = "sector_state";
    return a;
  }

  static AuxiliarySystem hook(int nz, GFn g, InitRule init,
                              std::string name = "aux_hook") {
    AuxiliarySystem a;
    a.nz_ = nz; a.g_ = std::move(g); a.init_ = std::move(init);
    a.name_ = std::move(name);
    return a;
  }

  int state_dim() const { return nz_; }
  const std::string& name() const { return name_; }
  const InitRule& init_rule() const { return init_; }

  Vec init_state(const Vec& xbar) const { return init_(xbar); }

  Vec deriv(const Vec& z, const Vec& x, const Vec& u, const Vec& y) const {
    return g_(z, x, u, y);
  }

  /// Output map; defaults to phi = z.
  Vec output(const Vec& z, const Vec&, const Vec&) const { return z; }

 private:
  int nz_ = 0;
  InitRule init_ = InitRule::zero(0);
  GFn g_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Operator quadruplet Theta = [Psi Pi; Upsilon Omega]
// ---------------------------------------------------------------------------

/// One block of a quadruplet: either a static matrix or an LTI operator run
/// from zero initial state.
using ThetaBlock = std::variant<Mat, LinearRealization>;

inline int block_rows(const ThetaBlock& b) {
  if (auto* m = std::get_if<Mat>(&b)) return int(m->rows());
  return std::get<LinearRealization>(b).p();
}
inline int block_cols(const ThetaBlock& b) {
  if (auto* m = std::get_if<Mat>(&b)) return int(m->cols());
  return std::get<LinearRealization>(b).m();
}
inline bool block_is_static(const ThetaBlock& b) {
  if (std::holds_alternative<Mat>(b)) return true;
  return std::get<LinearRealization>(b).n() == 0;
}
inline Mat block_static_matrix(const ThetaBlock& b) {
  if (auto* m = std::get_if<Mat>(&b)) return *m;
  return std::get<LinearRealization>(b).D;
}
inline CMat block_freq(const ThetaBlock& b, double omega) {
  if (auto* m = std::get_if<Mat>(&b)) return m->cast<std::complex<double>>();
  return frequency_response(std::get<LinearRealization>(b), omega);
}

/// Dynamic quadruplet generalizing the static (Q, S, R) triplet. Maps
/// [u; y] in R^{m+p} to R^{m+p}; blocks run from zero state.
struct Quadruplet {
  ThetaBlock psi, pi, upsilon, omega;

  int m() const { return block_cols(psi); }
  int p() const { return block_cols(omega); }

  void validate() const {
    require(block_rows(psi) == m() && block_rows(pi) == m() &&
                block_cols(pi) == p(),
            "quadruplet top-row block dimension mismatch");
    require(block_rows(upsilon) == p() && block_cols(upsilon) == m() &&
                block_rows(omega) == p(),
            "quadruplet bottom-row block dimension mismatch");
  }

  static Quadruplet statics(Mat psi, Mat pi, Mat upsilon, Mat omega) {
    Quadruplet q{std::move(psi), std::move(pi), std::move(upsilon),
                 std::move(omega)};
    q.validate();
    return q;
  }

  /// Theta_i = diag(r^2 I_m, -I_p) used by the small-gain specialization.
  static Quadruplet small_gain(double r, int m = 1, int p = 1) {
    return statics(r * r * Mat::Identity(m, m), Mat::Zero(m, p),
                   Mat::Zero(p, m), -Mat::Identity(p, p));
  }

  /// Theta = [-delta I, 1/2 I; 1/2 I, -eps I] for passivity indices.
  static Quadruplet passivity_indices(double delta, double eps, int dim = 1) {
    Mat I = Mat::Identity(dim, dim);
    return statics(-delta * I, 0.5 * I, 0.5 * I, -eps * I);
  }

  bool is_static() const {
    return block_is_static(psi) && block_is_static(pi) &&
           block_is_static(upsilon) && block_is_static(omega);
  }

  Mat static_matrix() const {
    Mat T(m() + p(), m() + p());
    T.topLeftCorner(m(), m()) = block_static_matrix(psi);
    T.topRightCorner(m(), p()) = block_static_matrix(pi);
    T.bottomLeftCorner(p(), m()) = block_static_matrix(upsilon);
    T.bottomRightCorner(p(), p()) = block_static_matrix(omega);
    return T;
  }

  CMat freq(double omega_) const {
    CMat T(m() + p(), m() + p());
    T.topLeftCorner(m(), m()) = block_freq(psi, omega_);
    T.topRightCorner(m(), p()) = block_freq(pi, omega_);
    T.bottomLeftCorner(p(), m()) = block_freq(upsilon, omega_);
    T.bottomRightCorner(p(), p()) = block_freq(omega, omega_);
    return T;
  }

  /// Value at omega = infinity (direct feedthrough of every block).
  Mat freq_limit() const {
    auto dterm = [](const ThetaBlock& b) {
      if (auto* m = std::get_if<Mat>(&b)) return *m;
      return std::get<LinearRealization>(b).D;
    };
    Mat T(m() + p(), m() + p());
    T.topLeftCorner(m(), m()) = dterm(psi);
    T.topRightCorner(m(), p()) = dterm(pi);
    T.bottomLeftCorner(p(), m()) = dterm(upsilon);
    T.bottomRightCorner(p(), p()) = dterm(omega);
    return T;
  }
};

/// Block permutation H = [0 I_p; I_m 0] with H(H(v)) = v.
struct PermutationH {
  int m = 1, p = 1;
  Mat matrix() const {
    Mat H = Mat::Zero(m + p, m + p);
    H.topRightCorner(p, p) = Mat::Identity(p, p);
    H.bottomLeftCorner(m, m) = Mat::Identity(m, m);
    return H;
  }
};

// ---------------------------------------------------------------------------
// Supply rates
// ---------------------------------------------------------------------------

/// Implementation core of a supply rate: internal state dynamics plus a
/// scalar output xi(s, u, y).
class SupplyRateImpl {
 public:
  virtual ~SupplyRateImpl() = default;
  virtual int state_dim() const = 0;
  virtual Vec init_state(const Vec& xbar) const = 0;
  virtual Vec state_deriv(const Vec& s, const Vec& u, const Vec& y) const = 0;
  virtual double output(const Vec& s, const Vec& u, const Vec& y) const = 0;
  virtual bool depends_on_xbar() const = 0;
  virtual std::string id() const = 0;
};

/// Dynamic supply rate xi(t) = Xi(u, y, xbar)(t). A prime rate pins xbar to
/// the plant's initial state x(0) during simulation.
class SupplyRate {
 public:
  SupplyRate() = default;
  SupplyRate(std::shared_ptr<const SupplyRateImpl> impl, bool prime)
      : impl_(std::move(impl)), prime_(prime) {}

  bool valid() const { return impl_ != nullptr; }
  bool prime() const { return prime_; }
  int state_dim() const { return impl_->state_dim(); }
  bool is_static() const {
    return impl_->state_dim() == 0 && !impl_->depends_on_xbar();
  }
  std::string id() const { return impl_->id(); }
  const SupplyRateImpl& impl() const { return *impl_; }
  std::shared_ptr<const SupplyRateImpl> impl_ptr() const { return impl_; }

  Vec init_state(const Vec& xbar) const { return impl_->init_state(xbar); }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec& y) const {
    return impl_->state_deriv(s, u, y);
  }
  double output(const Vec& s, const Vec& u, const Vec& y) const {
    return impl_->output(s, u, y);
  }

 private:
  std::shared_ptr<const SupplyRateImpl> impl_;
  bool prime_ = false;
};

namespace detail {

class StaticQuadraticImpl final : public SupplyRateImpl {
 public:
  explicit StaticQuadraticImpl(Mat P) : P_(std::move(P)) {
    require(P_.rows() == P_.cols(), "P must be square");
  }
  int state_dim() const override { return 0; }
  Vec init_state(const Vec&) const override { return Vec::Zero(0); }
  Vec state_deriv(const Vec&, const Vec&, const Vec&) const override {
    return Vec::Zero(0);
  }
  double output(const Vec&, const Vec& u, const Vec& y) const override {
    Vec v(u.size() + y.size());
    v << u, y;
    require(v.size() == P_.rows(), "P dimension mismatch with (u, y)");
    return v.dot(P_ * v);
  }
  bool depends_on_xbar() const override { return false; }
  std::string id() const override { return "static_quadratic"; }
  const Mat& matrix() const { return P_; }

 private:
  Mat P_;
};

/// z' = -z + u, xi = u (3z + y). Initial condition from the rule applied
/// to xbar (the catalog default picks the second component of xbar).
class IcdRateImpl final : public SupplyRateImpl {
 public:
  explicit IcdRateImpl(InitRule init) : init_(std::move(init)) {}
  int state_dim() const override { return 1; }
  Vec init_state(const Vec& xbar) const override { return init_(xbar); }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec&) const override {
    Vec ds(1); ds[0] = -s[0] + u[0]; return ds;
  }
  double output(const Vec& s, const Vec& u, const Vec& y) const override {
    return u[0] * (3.0 * s[0] + y[0]);
  }
  bool depends_on_xbar() const override { return init_.depends_on_xbar(); }
  std::string id() const override { return "icd_rate"; }

 private:
  InitRule init_;
};

/// z' = -z + u, xi = -y [z - (1+b) u + y].
class SectorRateImpl final : public SupplyRateImpl {
 public:
  SectorRateImpl(double b, InitRule init) : b_(b), init_(std::move(init)) {}
  int state_dim() const override { return 1; }
  Vec init_state(const Vec& xbar) const override { return init_(xbar); }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec&) const override {
    Vec ds(1); ds[0] = -s[0] + u[0]; return ds;
  }
  double output(const Vec& s, const Vec& u, const Vec& y) const override {
    return -y[0] * (s[0] - (1.0 + b_) * u[0] + y[0]);
  }
  bool depends_on_xbar() const override { return init_.depends_on_xbar(); }
  std::string id() const override { return "sector_rate"; }
  double b() const { return b_; }

 private:
  double b_;
  InitRule init_;
};

/// z' = -z - psi(z) u^2 + y, xi = y [z + u + psi(y)^2].
class Example4RateImpl final : public SupplyRateImpl {
 public:
  Example4RateImpl(StaticMap psi, InitRule init)
      : psi_(std::move(psi)), init_(std::move(init)) {}
  int state_dim() const override { return 1; }
  Vec init_state(const Vec& xbar) const override { return init_(xbar); }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec& y) const override {
    Vec ds(1);
    ds[0] = -s[0] - psi_(s[0]) * u[0] * u[0] + y[0];
    return ds;
  }
  double output(const Vec& s, const Vec& u, const Vec& y) const override {
    double py = psi_(y[0]);
    return y[0] * (s[0] + u[0] + py * py);
  }
  bool depends_on_xbar() const override { return init_.depends_on_xbar(); }
  std::string id() const override { return "example4_rate"; }
  const StaticMap& psi() const { return psi_; }

 private:
  StaticMap psi_;
  InitRule init_;
};

/// IONI rate xi = 2 ydot_bar' u - delta |ydot_bar|^2 - eps |Phi u|^2 for an
/// LTI plant (A, B, C, D). ydot_bar = C(A xhat + B u) is computed from an
/// internal copy of the plant state seeded from xbar, so the operator only
/// sees (u, xbar). The filter Phi is applied channelwise.
class IoniRateImpl final : public SupplyRateImpl {
 public:
  IoniRateImpl(LinearRealization plant, double delta, double eps,
               LinearRealization phi)
      : plant_(std::move(plant)), delta_(delta), eps_(eps),
        phi_(std::move(phi)) {
    require(phi_.m() == 1 && phi_.p() == 1, "Phi filter must be SISO");
  }
  int state_dim() const override { return plant_.n() + plant_.m() * phi_.n(); }
  Vec init_state(const Vec& xbar) const override {
    require(int(xbar.size()) == plant_.n(),
            "ioni rate expects xbar of plant state dimension");
    Vec s = Vec::Zero(state_dim());
    s.head(plant_.n()) = xbar;  // filter states start at zero
    return s;
  }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec&) const override {
    const int n = plant_.n(), m = plant_.m(), nf = phi_.n();
    Vec ds(state_dim());
    ds.head(n) = plant_.A * s.head(n) + plant_.B * u;
    for (int j = 0; j < m; ++j)
      ds.segment(n + j * nf, nf) =
          phi_.A * s.segment(n + j * nf, nf) + phi_.B * Vec::Constant(1, u[j]);
    return ds;
  }
  double output(const Vec& s, const Vec& u, const Vec&) const override {
    const int n = plant_.n(), m = plant_.m(), nf = phi_.n();
    Vec ydot = plant_.C * (plant_.A * s.head(n) + plant_.B * u);
    double xi = 2.0 * ydot.dot(u) - delta_ * ydot.squaredNorm();
    if (eps_ != 0.0) {
      for (int j = 0; j < m; ++j) {
        double phi_out =
            (phi_.C * s.segment(n + j * nf, nf))(0) + phi_.D(0, 0) * u[j];
        xi -= eps_ * phi_out * phi_out;
      }
    }
    return xi;
  }
  bool depends_on_xbar() const override { return true; }
  std::string id() const override { return "ioni_rate"; }

 private:
  LinearRealization plant_;
  double delta_, eps_;
  LinearRealization phi_;
};

/// xi = [u; y]' (Theta [u; y]) with LTI blocks run from zero state.
class QuadrupletRateImpl final : public SupplyRateImpl {
 public:
  explicit QuadrupletRateImpl(Quadruplet theta) : theta_(std::move(theta)) {
    theta_.validate();
    offsets_.reserve(4);
    int off = 0;
    for (const ThetaBlock* b :
         {&theta_.psi, &theta_.pi, &theta_.upsilon, &theta_.omega}) {
      offsets_.push_back(off);
      if (auto* r = std::get_if<LinearRealization>(b)) off += r->n();
    }
    nstate_ = off;
  }

  int state_dim() const override { return nstate_; }
  Vec init_state(const Vec&) const override { return Vec::Zero(nstate_); }

  Vec state_deriv(const Vec& s, const Vec& u, const Vec& y) const override {
    Vec ds = Vec::Zero(nstate_);
    const Vec* ins[4] = {&u, &y, &u, &y};
    const ThetaBlock* blocks[4] = {&theta_.psi, &theta_.pi, &theta_.upsilon,
                                   &theta_.omega};
    for (int k = 0; k < 4; ++k) {
      if (auto* r = std::get_if<LinearRealization>(blocks[k])) {
        if (r->n() > 0)
          ds.segment(offsets_[k], r->n()) =
              r->A * s.segment(offsets_[k], r->n()) + r->B * (*ins[k]);
      }
    }
    return ds;
  }

  double output(const Vec& s, const Vec& u, const Vec& y) const override {
    const Vec* ins[4] = {&u, &y, &u, &y};
    const ThetaBlock* blocks[4] = {&theta_.psi, &theta_.pi, &theta_.upsilon,
                                   &theta_.omega};
    Vec top = Vec::Zero(theta_.m()), bot = Vec::Zero(theta_.p());
    for (int k = 0; k < 4; ++k) {
      Vec out;
      if (auto* mtx = std::get_if<Mat>(blocks[k])) {
        out = (*mtx) * (*ins[k]);
      } else {
        const auto& r = std::get<LinearRealization>(*blocks[k]);
        out = r.D * (*ins[k]);
        if (r.n() > 0) out += r.C * s.segment(offsets_[k], r.n());
      }
      if (k < 2) top += out; else bot += out;
    }
    Vec v(u.size() + y.size());
    v << u, y;
    Vec tv(top.size() + bot.size());
    tv << top, bot;
    return v.dot(tv);
  }

  bool depends_on_xbar() const override { return false; }
  std::string id() const override { return "quadruplet"; }
  const Quadruplet& theta() const { return theta_; }

 private:
  Quadruplet theta_;
  std::vector<int> offsets_;
  int nstate_ = 0;
};

/// (-Xi o Gamma): evaluates the wrapped rate with (u, y) swapped and the
/// sign flipped.
class InvertedRateImpl final : public SupplyRateImpl {
 public:
  explicit InvertedRateImpl(std::shared_ptr<const SupplyRateImpl> inner)
      : inner_(std::move(inner)) {}
  int state_dim() const override { return inner_->state_dim(); }
  Vec init_state(const Vec& xbar) const override {
    return inner_->init_state(xbar);
  }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec& y) const override {
    return inner_->state_deriv(s, y, u);
  }
  double output(const Vec& s, const Vec& u, const Vec& y) const override {
    return -inner_->output(s, y, u);
  }
  bool depends_on_xbar() const override { return inner_->depends_on_xbar(); }
  std::string id() const override { return "inverted(" + inner_->id() + ")"; }
  std::shared_ptr<const SupplyRateImpl> inner() const { return inner_; }

 private:
  std::shared_ptr<const SupplyRateImpl> inner_;
};

/// General quadratic form xi = (Psi v)' (Pi v), v = [u; y], with LTI
/// operators Psi and Pi whose initial conditions may depend on xbar.
class DynamicQuadraticImpl final : public SupplyRateImpl {
 public:
  DynamicQuadraticImpl(LinearRealization psi, LinearRealization pi,
                       InitRule psi_init, InitRule pi_init)
      : psi_(std::move(psi)), pi_(std::move(pi)),
        psi_init_(std::move(psi_init)), pi_init_(std::move(pi_init)) {
    require(psi_.p() == pi_.p(), "Psi/Pi output dimension mismatch");
    require(psi_.m() == pi_.m(), "Psi/Pi input dimension mismatch");
    require(psi_init_.dim() == psi_.n() && pi_init_.dim() == pi_.n(),
            "initial-condition rule dimension mismatch");
  }
  int state_dim() const override { return psi_.n() + pi_.n(); }
  Vec init_state(const Vec& xbar) const override {
    Vec s(state_dim());
    s << psi_init_(xbar), pi_init_(xbar);
    return s;
  }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec& y) const override {
    Vec v(u.size() + y.size());
    v << u, y;
    Vec ds(state_dim());
    ds.head(psi_.n()) = psi_.A * s.head(psi_.n()) + psi_.B * v;
    ds.tail(pi_.n()) = pi_.A * s.tail(pi_.n()) + pi_.B * v;
    return ds;
  }
  double output(const Vec& s, const Vec& u, const Vec& y) const override {
    Vec v(u.size() + y.size());
    v << u, y;
    Vec a = psi_.C * s.head(psi_.n()) + psi_.D * v;
    Vec b = pi_.C * s.tail(pi_.n()) + pi_.D * v;
    return a.dot(b);
  }
  bool depends_on_xbar() const override {
    return psi_init_.depends_on_xbar() || pi_init_.depends_on_xbar();
  }
  std::string id() const override { return "dynamic_quadratic"; }

 private:
  LinearRealization psi_, pi_;
  InitRule psi_init_, pi_init_;
};

/// c * Xi: same internal dynamics, scaled output. c = -1 gives the
/// sign-flipped rate used as a negative control.
class ScaledRateImpl final : public SupplyRateImpl {
 public:
  ScaledRateImpl(std::shared_ptr<const SupplyRateImpl> inner, double c)
      : inner_(std::move(inner)), c_(c) {}
  int state_dim() const override { return inner_->state_dim(); }
  Vec init_state(const Vec& xbar) const override {
    return inner_->init_state(xbar);
  }
  Vec state_deriv(const Vec& s, const Vec& u, const Vec& y) const override {
    return inner_->state_deriv(s, u, y);
  }
  double output(const Vec& s, const Vec& u, const Vec& y) const override {
    return c_ * inner_->output(s, u, y);
  }
  bool depends_on_xbar() const override { return inner_->depends_on_xbar(); }
  std::string id() const override {
    return "scaled(" + inner_->id() + ")";
  }

 private:
  std::shared_ptr<const SupplyRateImpl> inner_;
  double c_;
};

}  // namespace detail

// Factories -----------------------------------------------------------------

inline SupplyRate static_quadratic_rate(Mat P) {
  return {std::make_shared<detail::StaticQuadraticImpl>(std::move(P)), false};
}

/// Passivity rate xi = u' y for scalar or vector channels.
inline SupplyRate passivity_rate(int m) {
  Mat P = Mat::Zero(2 * m, 2 * m);
  P.topRightCorner(m, m) = 0.5 * Mat::Identity(m, m);
  P.bottomLeftCorner(m, m) = 0.5 * Mat::Identity(m, m);
  return static_quadratic_rate(P);
}

/// The dynamic rate paired with the two-state sector plant:
/// z' = -z + u, z(0) = [0 1] xbar, xi = u (3z + y). Prime by default.
inline SupplyRate icd_rate(bool prime = true) {
  Mat M(1, 2); M << 0, 1;
  return {std::make_shared<detail::IcdRateImpl>(InitRule::linear(M)), prime};
}

inline SupplyRate sector_rate(double b, InitRule init = InitRule::zero(1)) {
  return {std::make_shared<detail::SectorRateImpl>(b, std::move(init)), false};
}

inline SupplyRate example4_rate(StaticMap psi,
                                InitRule init = InitRule::zero(1)) {
  return {std::make_shared<detail::Example4RateImpl>(std::move(psi),
                                                     std::move(init)),
          false};
}

inline SupplyRate ioni_rate(const LinearRealization& plant, double delta,
                            double eps,
                            LinearRealization phi =
                                LinearRealization::scalar(-1, 1, -1, 1)) {
  return {std::make_shared<detail::IoniRateImpl>(plant, delta, eps,
                                                 std::move(phi)),
          true};
}

inline SupplyRate quadruplet_rate(Quadruplet theta) {
  return {std::make_shared<detail::QuadrupletRateImpl>(std::move(theta)),
          false};
}

inline SupplyRate dynamic_quadratic_rate(LinearRealization psi,
                                         LinearRealization pi,
                                         InitRule psi_init, InitRule pi_init) {
  return {std::make_shared<detail::DynamicQuadraticImpl>(
              std::move(psi), std::move(pi), std::move(psi_init),
              std::move(pi_init)),
          false};
}

inline SupplyRate scale_supply(const SupplyRate& xi, double c) {
  return {std::make_shared<detail::ScaledRateImpl>(xi.impl_ptr(), c),
          xi.prime()};
}

/// Inverse supply rate: invert(xi)(u, y, xbar) = -xi(y, u, xbar). Applying
/// it twice unwraps to the original operator.
inline SupplyRate invert_supply(const SupplyRate& xi) {
  auto inner = xi.impl_ptr();
  if (auto inv =
          std::dynamic_pointer_cast<const detail::InvertedRateImpl>(inner)) {
    return {inv->inner(), xi.prime()};
  }
  return {std::make_shared<detail::InvertedRateImpl>(inner), false};
}

// Trace evaluation ----------------------------------------------------------

/// Sampled-signal evaluation of a supply rate along given (u, y) traces on a
/// uniform grid. Internal dynamics are integrated with classic RK4 at the
/// grid resolution; midpoint inputs are linear interpolants, so xi on [0, T]
/// depends only on samples up to T.
/// u, y: rows = time samples. Returns xi samples.
inline Vec supply_trace(const SupplyRate& xi, const Mat& u, const Mat& y,
                        const Vec& xbar, const std::vector<double>& grid) {
  const int N = int(grid.size());
  require(u.rows() == N && y.rows() == N, "signal/grid length mismatch");
  Vec out(N);
  Vec s = xi.init_state(xbar);
  out[0] = xi.output(s, u.row(0), y.row(0));
  for (int k = 0; k + 1 < N; ++k) {
    const double h = grid[k + 1] - grid[k];
    Vec u0 = u.row(k), u1 = u.row(k + 1);
    Vec y0 = y.row(k), y1 = y.row(k + 1);
    Vec um = 0.5 * (u0 + u1), ym = 0.5 * (y0 + y1);
    Vec k1 = xi.state_deriv(s, u0, y0);
    Vec k2 = xi.state_deriv(s + 0.5 * h * k1, um, ym);
    Vec k3 = xi.state_deriv(s + 0.5 * h * k2, um, ym);
    Vec k4 = xi.state_deriv(s + h * k3, u1, y1);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!s.allFinite() || s.norm() > 1e9) throw DivergenceError(grid[k + 1]);
    out[k + 1] = xi.output(s, u1, y1);
  }
  return out;
}

inline Vec quadruplet_supply(const Quadruplet& theta, const Mat& u,
                             const Mat& y, const std::vector<double>& grid) {
  return supply_trace(quadruplet_rate(theta), u, y, Vec::Zero(0), grid);
}

/// Auxiliary-system trace along sampled (x, u): integrates z' = g(z, x, u)
/// from the initial-condition rule applied to xbar. Returns (z, phi) rows.
/// Pass the sampled output trace y for y-driven auxiliary dynamics.
inline std::pair<Mat, Mat> aux_trace(const AuxiliarySystem& phi, const Mat& x,
                                     const Mat& u, const Vec& xbar,
                                     const std::vector<double>& grid,
                                     const Mat& y = Mat()) {
  const int N = int(grid.size());
  require(x.rows() == N && u.rows() == N, "signal/grid length mismatch");
  const bool has_y = y.rows() == N;
  Mat z(N, phi.state_dim()), ph(N, phi.state_dim());
  Vec s = phi.init_state(xbar);
  auto yrow = [&](int k) -> Vec {
    return has_y ? Vec(y.row(k)) : Vec(Vec::Zero(0));
  };
  z.row(0) = s;
  ph.row(0) = phi.output(s, x.row(0), u.row(0));
  for (int k = 0; k + 1 < N; ++k) {
    const double h = grid[k + 1] - grid[k];
    Vec x0 = x.row(k), x1 = x.row(k + 1), xm = 0.5 * (x0 + x1);
    Vec u0 = u.row(k), u1 = u.row(k + 1), um = 0.5 * (u0 + u1);
    Vec y0 = yrow(k), y1 = yrow(k + 1), ym = 0.5 * (y0 + y1);
    Vec k1 = phi.deriv(s, x0, u0, y0);
    Vec k2 = phi.deriv(s + 0.5 * h * k1, xm, um, ym);
    Vec k3 = phi.deriv(s + 0.5 * h * k2, xm, um, ym);
    Vec k4 = phi.deriv(s + h * k3, x1, u1, y1);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!s.allFinite() || s.norm() > 1e9) throw DivergenceError(grid[k + 1]);
    z.row(k + 1) = s;
    ph.row(k + 1) = phi.output(s, x1, u1);
  }
  return {z, ph};
}

}  // namespace dissipate

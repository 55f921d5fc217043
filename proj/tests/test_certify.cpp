#include <doctest.h>

#include <cmath>

#include "dissipate/certify.hpp"
#include "dissipate/scenarios.hpp"

using namespace dissipate;

namespace {

Vec fd_gradient(const StorageFn& s, const Vec& v, double eps = 1e-5) {
  Vec g(v.size());
  for (int i = 0; i < v.size(); ++i) {
    Vec p = v, m = v;
    p[i] += eps;
    m[i] -= eps;
    g[i] = (s(p) - s(m)) / (2 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("storage gradients match finite differences") {
  Rng rng(13);
  Mat P(3, 3);
  P << 2, 0.5, 0, 0.5, 1, -0.3, 0, -0.3, 4;
  std::vector<StorageFn> fns = {
      StorageFn::quadratic(P),
      StorageFn::diagonal_powers((Vec(3) << 0.25, 0.5, 0.5).finished(),
                                 {4, 2, 2}),
  };
  for (const auto& s : fns) {
    for (int trial = 0; trial < 5; ++trial) {
      Vec v = rng.uniform_vec(3, -2, 2);
      CHECK((s.gradient(v) - fd_gradient(s, v)).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
  auto integral = StorageFn::integral_of_static(StaticMap::saturation(1.0));
  for (int trial = 0; trial < 5; ++trial) {
    Vec v = rng.uniform_vec(1, -3, 3);
    if (std::abs(std::abs(v[0]) - 1.0) < 1e-3) continue;  // kink
    CHECK((integral.gradient(v) - fd_gradient(integral, v)).cwiseAbs()
              .maxCoeff() <= 1e-6);
  }
  CHECK(StorageFn::quadratic(P)(Vec::Zero(3)) == 0.0);
  CHECK(integral(Vec::Zero(1)) == 0.0);
}

TEST_CASE("zero ensemble has exactly zero residuals") {
  std::vector<TrialSpec> ensemble(3);
  for (auto& t : ensemble) {
    t.input = InputSignal::zero(1);
    t.x0 = Vec::Zero(2);
    t.xbar = Vec::Zero(2);
  }
  SimConfig cfg;
  cfg.T = 2.0;
  auto rep = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                               icd_rate(true), catalog::sigma1_storage(),
                               StrictnessSpec::output(1.0), ensemble, cfg);
  CHECK(rep.pass);
  CHECK(rep.max_residual == 0.0);
}

TEST_CASE("prime-rate ensemble passes; sign-flipped rate fails") {
  SimConfig cfg;
  cfg.T = 5.0;
  auto ensemble = make_ensemble(42, 20, 2, 1, 2);
  auto rep = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                               icd_rate(true), catalog::sigma1_storage(),
                               StrictnessSpec::output(1.0), ensemble, cfg,
                               -1.0, 2);
  CHECK(rep.pass);
  CHECK(rep.max_residual <= 1e-5);
  CHECK(rep.strictness_pattern == "output");

  TrialSpec control;
  control.input = InputSignal::constant(Vec::Ones(1));
  control.x0 = (Vec(2) << 1, 0).finished();
  control.xbar = Vec::Zero(2);
  auto neg = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                               scale_supply(icd_rate(true), -1.0),
                               catalog::sigma1_storage(),
                               StrictnessSpec::output(1.0), {control}, cfg);
  CHECK(!neg.pass);
  CHECK(neg.max_residual > 0.0);
}

TEST_CASE("prime rate ignores a supplied xbar") {
  SimConfig cfg;
  cfg.T = 3.0;
  auto ensemble = make_ensemble(7, 10, 2, 1, 2);
  auto rep1 = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                                icd_rate(true), catalog::sigma1_storage(),
                                StrictnessSpec::output(1.0), ensemble, cfg);
  for (auto& t : ensemble) t.xbar = Vec::Zero(2);
  auto rep2 = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                                icd_rate(true), catalog::sigma1_storage(),
                                StrictnessSpec::output(1.0), ensemble, cfg);
  REQUIRE(rep1.residuals.size() == rep2.residuals.size());
  for (size_t i = 0; i < rep1.residuals.size(); ++i)
    CHECK(rep1.residuals[i] == rep2.residuals[i]);
}

TEST_CASE("worker count does not change the report") {
  SimConfig cfg;
  cfg.T = 2.0;
  auto ensemble = make_ensemble(3, 12, 2, 1, 2);
  auto a = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                             icd_rate(true), catalog::sigma1_storage(),
                             StrictnessSpec::output(1.0), ensemble, cfg, -1.0,
                             1);
  auto b = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                             icd_rate(true), catalog::sigma1_storage(),
                             StrictnessSpec::output(1.0), ensemble, cfg, -1.0,
                             5);
  REQUIRE(a.residuals.size() == b.residuals.size());
  for (size_t i = 0; i < a.residuals.size(); ++i)
    CHECK(a.residuals[i] == b.residuals[i]);
  CHECK(a.worst_trajectory == b.worst_trajectory);
}

TEST_CASE("scaling coherence: c * (xi, S) scales residuals by c") {
  SimConfig cfg;
  cfg.T = 2.0;
  const double c = 3.5;
  auto ensemble = make_ensemble(9, 6, 2, 1, 2);
  auto base = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                                icd_rate(true), catalog::sigma1_storage(),
                                StrictnessSpec::none(), ensemble, cfg);
  auto scaled = check_dissipation(catalog::sigma1(), catalog::sigma1_aux(),
                                  scale_supply(icd_rate(true), c),
                                  catalog::sigma1_storage().scaled(c),
                                  StrictnessSpec::none(), ensemble, cfg,
                                  1e-5 * c);
  for (size_t i = 0; i < base.residuals.size(); ++i)
    CHECK(scaled.residuals[i] ==
          doctest::Approx(c * base.residuals[i]).epsilon(1e-12));
  CHECK(base.pass == scaled.pass);
}

TEST_CASE("residual shrinks when the step is refined") {
  SimConfig cfg;
  cfg.T = 5.0;
  auto ensemble = make_ensemble(21, 8, 1, 1, 2);
  auto xi = invert_supply(icd_rate(true));
  auto coarse = check_dissipation(catalog::sigma2(), catalog::sigma2_aux(), xi,
                                  catalog::sigma2_storage(),
                                  StrictnessSpec::output(1.0), ensemble, cfg);
  cfg.h = 5e-4;
  auto fine = check_dissipation(catalog::sigma2(), catalog::sigma2_aux(), xi,
                                catalog::sigma2_storage(),
                                StrictnessSpec::output(1.0), ensemble, cfg);
  CHECK(fine.max_residual <= coarse.max_residual + 1e-12);
}

TEST_CASE("storage bound checks") {
  SUBCASE("exact quadratic bound passes in full mode") {
    ClassKBound bound;  // alpha = beta = 0.5 r^2, full, global
    auto rep = check_storage_bounds({{StorageFn::half_norm_sq(3), 2, 1}},
                                    bound, BoundSampler{1, 500, 2.0, 5.0});
    CHECK(rep.pass);
  }
  SUBCASE("partial mode fails when z is unbounded") {
    ClassKBound bound;
    bound.mode = ClassKBound::Mode::Partial;
    bound.beta = {10.0, 2.0};
    auto rep = check_storage_bounds({{StorageFn::half_norm_sq(2), 1, 1}},
                                    bound, BoundSampler{1, 500, 2.0, 10.0});
    CHECK(!rep.pass);
    CHECK(rep.worst_violation > 0.0);
  }
  SUBCASE("combined closed-loop storage passes") {
    ClassKBound bound;
    auto rep = check_storage_bounds(
        {{catalog::sigma1_storage(), 2, 1}, {catalog::sigma2_storage(), 1, 1}},
        bound, BoundSampler{1, 500, 3.0, 5.0});
    CHECK(rep.pass);
  }
}

TEST_CASE("closed-loop V monotonicity") {
  auto fb = make_feedback(catalog::sigma1(), catalog::sigma2());
  SimConfig cfg;
  cfg.T = 10.0;
  SUBCASE("true storage is nonincreasing") {
    auto rep = check_monotone_V(fb, catalog::sigma1_aux(),
                                catalog::sigma2_aux(),
                                catalog::sigma1_storage(),
                                catalog::sigma2_storage(),
                                {(Vec(3) << 2, -1, 1).finished()}, cfg);
    CHECK(rep.pass);
  }
  SUBCASE("origin gives identically zero V") {
    auto rep = check_monotone_V(fb, catalog::sigma1_aux(),
                                catalog::sigma2_aux(),
                                catalog::sigma1_storage(),
                                catalog::sigma2_storage(), {Vec::Zero(3)}, cfg);
    CHECK(rep.pass);
    CHECK(rep.max_increment == 0.0);
  }
  SUBCASE("adversarial negative storage fails") {
    auto rep = check_monotone_V(
        fb, catalog::sigma1_aux(), catalog::sigma2_aux(),
        StorageFn::quadratic(-0.5 * Mat::Identity(3, 3)),
        StorageFn::quadratic(-0.5 * Mat::Identity(2, 2)),
        {(Vec(3) << 2, -1, 1).finished()}, cfg);
    CHECK(!rep.pass);
  }
}

TEST_CASE("passivity margin") {
  SUBCASE("static diagonal") {
    Mat T = Mat::Zero(2, 2);
    T(0, 0) = 0.1;
    T(1, 1) = 0.2;
    Quadruplet theta = Quadruplet::statics(T.block(0, 0, 1, 1),
                                           T.block(0, 1, 1, 1),
                                           T.block(1, 0, 1, 1),
                                           T.block(1, 1, 1, 1));
    CHECK(passivity_margin(theta) == doctest::Approx(0.1).epsilon(1e-14));
  }
  SUBCASE("singular symmetric part") {
    Mat T(2, 2);
    T << 1, -1, -1, 1;
    Quadruplet theta = Quadruplet::statics(T.block(0, 0, 1, 1),
                                           T.block(0, 1, 1, 1),
                                           T.block(1, 0, 1, 1),
                                           T.block(1, 1, 1, 1));
    CHECK(passivity_margin(theta) == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("dynamic scalar 1 + 1/(s+1)") {
    Quadruplet theta{LinearRealization::scalar(-1, 1, 1, 1), Mat::Zero(1, 0),
                     Mat::Zero(0, 1), Mat::Zero(0, 0)};
    double worst = 0.0;
    double delta = passivity_margin(theta, default_omega_grid(), &worst);
    CHECK(delta == doctest::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("small-gain coupling feasibility") {
  auto run = [](double r1, double r2) {
    return coupling_quadruplet(Quadruplet::small_gain(r1),
                               Quadruplet::small_gain(r2));
  };
  SUBCASE("0.5 and 1.5 is feasible inside the analytic interval") {
    auto rep = run(0.5, 1.5);
    CHECK(rep.feasible);
    CHECK(rep.delta > 0.0);
    CHECK(rep.tau > 0.25);
    CHECK(rep.tau < 1.0 / 2.25);
  }
  SUBCASE("boundary r1 = r2 = 1 is infeasible") { CHECK(!run(1.0, 1.0).feasible); }
  SUBCASE("product slightly above one is infeasible") {
    CHECK(!run(0.9, 1.2).feasible);
  }
  SUBCASE("truth table over the parameter grid") {
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        double r1 = 0.1 + 1.9 * i / 9.0;
        double r2 = 0.1 + 1.9 * j / 9.0;
        bool expect = r1 * r2 < 1.0 - 1e-9;
        auto rep = run(r1, r2);
        CHECK(rep.feasible == expect);
      }
    }
  }
}

TEST_CASE("passivity indices coupling") {
  CHECK(passivity_indices_check(0.1, 0.3, -0.2, 0.25).feasible);
  CHECK(passivity_indices_check(0.1, 0.3, -0.2, 0.25).delta ==
        doctest::Approx(0.1));
  CHECK(!passivity_indices_check(0.1, 0.3, -0.4, 0.25).feasible);
  CHECK(!passivity_indices_check(0, 0, 0, 0).feasible);
}

TEST_CASE("affine coupling test") {
  CHECK(coupling_affine(-Mat::Identity(2, 2), Mat::Zero(2, 2)).feasible);
  Mat P1 = Mat::Zero(2, 2), P2 = Mat::Zero(2, 2);
  P1(0, 0) = 1; P1(1, 1) = -1;
  P2(0, 0) = -1;
  auto rep = coupling_affine(P1, P2);
  CHECK(rep.feasible);
  CHECK(rep.tau >= 1.0 - 1e-9);
  CHECK(!coupling_affine(Mat::Identity(2, 2), Mat::Identity(2, 2)).feasible);
}

TEST_CASE("ioni frequency-domain check") {
  auto plant = catalog::example1_plant();
  CHECK(ioni_check(plant, 0.0, 0.0, 1, 1).pass);
  auto fail = ioni_check(plant, 0.0, 10.0, 1, 1);
  CHECK(!fail.pass);
  CHECK(fail.worst_omega > 0.0);
  auto gain = LinearRealization::static_gain(2.0 * Mat::Identity(1, 1));
  CHECK(ioni_check(gain, 0.0, 0.0, 1, 1).pass);
}

TEST_CASE("stability verdict mapping") {
  EvidenceBundle ev;
  ev.diss1.pass = true;
  ev.diss1.supply_id = "icd_rate";
  ev.diss1.strictness_pattern = "output";
  ev.diss2.pass = true;
  ev.diss2.supply_id = "inverted(icd_rate)";
  ev.diss2.strictness_pattern = "output";
  ev.bounds.pass = true;
  ev.bound_spec = ClassKBound{};  // global Kinf, full mode
  ev.detectable1 = ev.detectable2 = true;
  ev.equilibrium_at_origin = true;

  SUBCASE("output-strict pair with global bounds gives GAS") {
    auto v = stability_verdict(ev);
    CHECK(v.verdict == Verdict::GAS);
    CHECK(v.theorem_path.find("Theorem 3(iv)") != std::string::npos);
    CHECK(v.evidence_label == "numerical");
  }
  SUBCASE("no strictness gives Lyapunov stability") {
    ev.diss1.strictness_pattern = "none";
    ev.diss2.strictness_pattern = "none";
    auto v = stability_verdict(ev);
    CHECK(v.verdict == Verdict::LyapunovStable);
  }
  SUBCASE("failed complementary report is inconclusive") {
    ev.diss2.pass = false;
    CHECK(stability_verdict(ev).verdict == Verdict::Inconclusive);
  }
  SUBCASE("state-strict pair needs no detectability") {
    ev.diss1.strictness_pattern = "state";
    ev.diss2.strictness_pattern = "state";
    ev.detectable1 = ev.detectable2 = false;
    CHECK(stability_verdict(ev).verdict == Verdict::GAS);
  }
  SUBCASE("local bounds cap the verdict at AS") {
    ev.bound_spec.delta = 2.0;
    CHECK(stability_verdict(ev).verdict == Verdict::AS);
  }
  SUBCASE("mismatched rates are rejected") {
    ev.diss2.supply_id = "sector_rate";
    CHECK_THROWS_AS(stability_verdict(ev), DimensionError);
  }
}

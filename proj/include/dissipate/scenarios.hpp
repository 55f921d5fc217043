#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dissipate/certify.hpp"
#include "dissipate/io.hpp"
#include "dissipate/models.hpp"
#include "dissipate/operators.hpp"
#include "dissipate/sim.hpp"

namespace dissipate {

// ---------------------------------------------------------------------------
// Catalog builders shared by scenarios and tests
// ---------------------------------------------------------------------------

namespace catalog {

/// Two-state sector plant instantiated with the numerical-example
/// parameters: a = 1, b_k = 1 for exponents 1, 3, 5, psi = sat(+-5).
inline SystemDef sigma1() {
  return SystemDef::icd(1.0, {1.0, 1.0, 1.0}, {1, 3, 5},
                        StaticMap::saturation(5.0), "sigma1_icd");
}

/// First-order feedthrough plant x' = -5x - sat8(x) + u, y = x - 0.2u.
inline SystemDef sigma2() { return SystemDef::sigma2(StaticMap::saturation(8.0)); }

/// Auxiliary z' = -z + u with z(0) = x2(0) (the second plant state).
inline AuxiliarySystem sigma1_aux() {
  Mat M(1, 2); M << 0, 1;
  return AuxiliarySystem::leaky_integrator_u(InitRule::linear(M));
}

/// Auxiliary z' = -z + y with z(0) = [0 1] xbar.
inline AuxiliarySystem sigma2_aux() {
  Mat M(1, 2); M << 0, 1;
  return AuxiliarySystem::leaky_integrator_y(InitRule::linear(M));
}

/// Storage S1 = (x1^2 + x2^2 + z^2) / 2.
inline StorageFn sigma1_storage() { return StorageFn::half_norm_sq(3); }

/// Storage S2 = (x3^2 + z2^2) / 2.
inline StorageFn sigma2_storage() { return StorageFn::half_norm_sq(2); }

/// Static sector nonlinearity for the saturation example (sector [0, 1]).
inline StaticMap example3_sigma() { return StaticMap::saturation(1.0); }

/// Sector nonlinearity for the fourth example; sat(+-2) keeps the
/// squared-psi drive small enough for short-horizon ensembles.
inline StaticMap example4_psi() { return StaticMap::saturation(2.0); }

inline SystemDef example4_plant() {
  return SystemDef::example4(example4_psi(), "example4");
}

inline LinearRealization example1_phi() {
  return LinearRealization::scalar(-1, 1, -1, 1);
}

inline LinearRealization example1_plant() {
  return LinearRealization::scalar(-1, 1, 1, 0);  // 1/(s+1)
}

}  // namespace catalog

// ---------------------------------------------------------------------------
// Scenario infrastructure
// ---------------------------------------------------------------------------

struct ScenarioOptions {
  std::uint64_t seed = 1;
  int jobs = 1;
  int ensemble_size = 100;
  bool plot = false;
  std::optional<double> step;
  std::optional<double> horizon;
  std::optional<double> tolerance;
};

enum class ScenarioMode { Full, SimulateOnly, VerifyOnly };

struct ScenarioResult {
  std::string id;
  bool ok = false;
  std::string verdict;
  json summary;
  std::vector<std::string> artifacts;
};

struct ScenarioInfo {
  std::string id;
  std::string description;
};

namespace detail {

inline SimConfig scenario_config(const ScenarioOptions& opts,
                                 double default_T) {
  SimConfig cfg;
  cfg.h = opts.step.value_or(1e-3);
  cfg.T = opts.horizon.value_or(default_T);
  return cfg;
}

inline double scenario_tol(const ScenarioOptions& opts, const SimConfig& cfg) {
  return opts.tolerance.value_or(default_residual_tolerance(cfg));
}

inline void emit(ScenarioResult& res, const std::filesystem::path& outdir,
                 const std::string& name, const std::string& content) {
  std::filesystem::create_directories(outdir);
  atomic_write(outdir / name, content);
  res.artifacts.push_back((outdir / name).string());
}

inline void emit_json(ScenarioResult& res, const std::filesystem::path& outdir,
                      const std::string& name, const json& j) {
  emit(res, outdir, name, j.dump(2) + "\n");
}

/// Fill the storage channel of a trajectory from a stacked storage function.
inline void fill_storage(Trajectory& traj, const StorageFn& storage) {
  traj.storage.resize(traj.samples());
  for (int k = 0; k < traj.samples(); ++k)
    traj.storage[k] = storage.eval(traj.x.row(k), traj.z.row(k));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual scenarios
// ---------------------------------------------------------------------------

/// Two-state sector plant with its prime dynamic rate: output-strict
/// dissipation over a seeded ensemble.
inline ScenarioResult run_example2_icd(const std::filesystem::path& outdir,
                                       const ScenarioOptions& opts,
                                       ScenarioMode mode = ScenarioMode::Full) {
  ScenarioResult res;
  res.id = "example2_icd";
  SystemDef sys = catalog::sigma1();
  AuxiliarySystem phi = catalog::sigma1_aux();
  SupplyRate xi = icd_rate(true);
  StorageFn storage = catalog::sigma1_storage();
  SimConfig cfg = detail::scenario_config(opts, 5.0);

  if (mode != ScenarioMode::VerifyOnly) {
    Trajectory traj =
        simulate_open(sys, phi, xi, InputSignal::sinusoid(1.0, 1.0, 0.0),
                      (Vec(2) << 1, 0).finished(), Vec(), cfg);
    detail::fill_storage(traj, storage);
    detail::emit(res, outdir, "example2_icd_trajectory.csv",
                 trajectory_csv(traj));
    if (opts.plot) {
      std::vector<PlotSeries> series;
      for (int i = 0; i < 2; ++i) {
        PlotSeries s;
        s.label = "x" + std::to_string(i + 1);
        s.t = traj.t;
        s.v.assign(traj.x.col(i).data(), traj.x.col(i).data() + traj.samples());
        series.push_back(std::move(s));
      }
      detail::emit(res, outdir, "example2_icd_states.svg",
                   render_svg(series, "sector plant states"));
    }
  }

  res.ok = true;
  res.verdict = "PASS";
  if (mode != ScenarioMode::SimulateOnly) {
    auto ensemble =
        make_ensemble(opts.seed, opts.ensemble_size, 2, 1, 2);
    DissipationReport rep = check_dissipation(
        sys, phi, xi, storage, StrictnessSpec::output(1.0), ensemble, cfg,
        detail::scenario_tol(opts, cfg), opts.jobs);
    res.ok = rep.pass;
    res.verdict = rep.verdict();
    res.summary = report_to_json(rep, "output-strict prime-rate dissipation");
    detail::emit_json(res, outdir, "example2_icd_report.json", res.summary);
  }
  return res;
}

/// First-order feedthrough plant against the inverted rate: output-strict
/// complementary dissipation.
inline ScenarioResult run_sigma2_inverted(const std::filesystem::path& outdir,
                                          const ScenarioOptions& opts,
                                          ScenarioMode mode =
                                              ScenarioMode::Full) {
  ScenarioResult res;
  res.id = "sigma2_inverted";
  SystemDef sys = catalog::sigma2();
  AuxiliarySystem phi = catalog::sigma2_aux();
  SupplyRate xi = invert_supply(icd_rate(true));
  StorageFn storage = catalog::sigma2_storage();
  SimConfig cfg = detail::scenario_config(opts, 5.0);

  if (mode != ScenarioMode::VerifyOnly) {
    Trajectory traj = simulate_open(sys, phi, xi,
                                    InputSignal::sinusoid(1.0, 1.0, 0.0),
                                    Vec::Ones(1), Vec::Zero(2), cfg);
    detail::fill_storage(traj, storage);
    detail::emit(res, outdir, "sigma2_inverted_trajectory.csv",
                 trajectory_csv(traj));
  }

  res.ok = true;
  res.verdict = "PASS";
  if (mode != ScenarioMode::SimulateOnly) {
    auto ensemble = make_ensemble(opts.seed, opts.ensemble_size, 1, 1, 2);
    DissipationReport rep = check_dissipation(
        sys, phi, xi, storage, StrictnessSpec::output(1.0), ensemble, cfg,
        detail::scenario_tol(opts, cfg), opts.jobs);
    res.ok = rep.pass;
    res.verdict = rep.verdict();
    res.summary =
        report_to_json(rep, "output-strict inverted-rate dissipation");
    detail::emit_json(res, outdir, "sigma2_inverted_report.json", res.summary);
  }
  return res;
}

/// Full closed-loop reproduction of the numerical example: three
/// convergent trajectories, monotone V, complementary dissipation
/// evidence, and a GAS verdict.
inline ScenarioResult run_section6_feedback(
    const std::filesystem::path& outdir, const ScenarioOptions& opts,
    ScenarioMode mode = ScenarioMode::Full) {
  ScenarioResult res;
  res.id = "section6_feedback";
  SystemDef s1 = catalog::sigma1();
  SystemDef s2 = catalog::sigma2();
  FeedbackSystem fb = make_feedback(s1, s2);
  AuxiliarySystem phi1 = catalog::sigma1_aux();
  AuxiliarySystem phi2 = catalog::sigma2_aux();
  StorageFn st1 = catalog::sigma1_storage();
  StorageFn st2 = catalog::sigma2_storage();

  const std::vector<Vec> ics = {(Vec(3) << 2, -1, 1).finished(),
                                (Vec(3) << -3, 2, -2).finished(),
                                (Vec(3) << 5, -4, 3).finished()};

  json sims = json::array();
  bool sims_ok = true;

  if (mode != ScenarioMode::VerifyOnly) {
    SimConfig loop_cfg = detail::scenario_config(opts, 40.0);
    std::vector<PlotSeries> series;
    for (size_t i = 0; i < ics.size(); ++i) {
      Trajectory traj = simulate_closed(fb, phi1, phi2, InputSignal::zero(1),
                                        InputSignal::zero(1), ics[i], loop_cfg);
      // V = S1(x1, x2, z1) + S2(x3, z2) recorded in the storage channel
      traj.storage.resize(traj.samples());
      double max_inc = 0.0, prev = 0.0;
      for (int k = 0; k < traj.samples(); ++k) {
        Vec v1(3); v1 << traj.x(k, 0), traj.x(k, 1), traj.z(k, 0);
        Vec v2(2); v2 << traj.x(k, 2), traj.z(k, 1);
        traj.storage[k] = st1(v1) + st2(v2);
        if (k > 0) max_inc = std::max(max_inc, traj.storage[k] - prev);
        prev = traj.storage[k];
      }
      double final_norm = traj.x.bottomRows(1).norm();
      sims_ok = sims_ok && final_norm < 1e-3 && max_inc <= 1e-6;
      sims.push_back(json{{"initial_condition", vec_to_json(ics[i])},
                          {"final_state_norm", final_norm},
                          {"max_V_increment", max_inc}});
      std::string name =
          "section6_trajectory_" + std::to_string(i + 1) + ".csv";
      detail::emit(res, outdir, name, trajectory_csv(traj));
      for (int c = 0; c < 3; ++c) {
        PlotSeries s;
        s.label = "ic" + std::to_string(i + 1) + " x" + std::to_string(c + 1);
        s.t = traj.t;
        s.v.assign(traj.x.col(c).data(), traj.x.col(c).data() + traj.samples());
        series.push_back(std::move(s));
      }
    }
    if (opts.plot)
      detail::emit(res, outdir, "section6_states.svg",
                   render_svg(series, "closed-loop state trajectories"));
  }

  if (mode == ScenarioMode::SimulateOnly) {
    res.ok = sims_ok;
    res.verdict = sims_ok ? "PASS" : "FAIL";
    res.summary = json{{"check", "section6_simulation"},
                       {"verdict", res.verdict},
                       {"trajectories", sims}};
    detail::emit_json(res, outdir, "section6_report.json", res.summary);
    return res;
  }

  // complementary dissipation evidence on short horizons
  SimConfig cfg = detail::scenario_config(opts, 5.0);
  SupplyRate xi1 = icd_rate(true);
  SupplyRate xi2 = invert_supply(xi1);
  EvidenceBundle ev;
  ev.diss1 = check_dissipation(
      s1, phi1, xi1, st1, StrictnessSpec::output(1.0),
      make_ensemble(opts.seed, opts.ensemble_size, 2, 1, 2), cfg,
      detail::scenario_tol(opts, cfg), opts.jobs);
  ev.diss2 = check_dissipation(
      s2, phi2, xi2, st2, StrictnessSpec::output(1.0),
      make_ensemble(splitmix64(opts.seed), opts.ensemble_size, 1, 1, 2), cfg,
      detail::scenario_tol(opts, cfg), opts.jobs);

  // S1 + S2 = ||(x, z)||^2 / 2 globally
  ClassKBound bound;
  bound.alpha = {0.5, 2.0};
  bound.beta = {0.5, 2.0};
  ev.bound_spec = bound;
  ev.bounds = check_storage_bounds(
      {{st1, 2, 1}, {st2, 1, 1}}, bound, BoundSampler{opts.seed, 2000, 3.0, 5.0});

  SimConfig probe_cfg; probe_cfg.h = 1e-3; probe_cfg.T = 20.0;
  ev.detectable1 = detectability_probe(s1, opts.seed, 5, probe_cfg);
  ev.detectable2 = detectability_probe(s2, opts.seed + 1, 5, probe_cfg);
  ev.equilibrium_at_origin = true;

  VerdictReport verdict = stability_verdict(ev);
  res.ok = sims_ok && verdict.verdict == Verdict::GAS;
  res.verdict = to_string(verdict.verdict);
  res.summary = json{
      {"check", "section6_feedback"},
      {"verdict", res.verdict},
      {"theorem_path", verdict.theorem_path},
      {"evidence_label", verdict.evidence_label},
      {"expected_verdict", "GAS"},
      {"trajectories", sims},
      {"dissipation_sigma1", report_to_json(ev.diss1)},
      {"dissipation_sigma2", report_to_json(ev.diss2)},
      {"storage_bounds_pass", ev.bounds.pass},
      {"detectability", {ev.detectable1, ev.detectable2}}};
  detail::emit_json(res, outdir, "section6_report.json", res.summary);
  return res;
}

/// Frequency-domain identities of the first worked example: the filter
/// magnitude identity and the IONI inequality pass/fail pair.
inline ScenarioResult run_ioni_phi_identity(
    const std::filesystem::path& outdir, const ScenarioOptions& opts,
    ScenarioMode mode = ScenarioMode::Full) {
  (void)mode;
  ScenarioResult res;
  res.id = "ioni_phi_identity";
  LinearRealization phi = catalog::example1_phi();
  auto grid = log_grid(1e-3, 1e3, 400);
  double worst = 0.0;
  for (double w : grid) {
    double mag2 = std::norm(frequency_response(phi, w)(0, 0));
    double expect = w * w / (1.0 + w * w);
    worst = std::max(worst, std::abs(mag2 - expect));
  }
  bool identity_ok = worst <= 1e-10;

  IoniReport pass_rep = ioni_check(catalog::example1_plant(), 0.0, 0.0, 1, 1);
  IoniReport fail_rep = ioni_check(catalog::example1_plant(), 0.0, 10.0, 1, 1);

  res.ok = identity_ok && pass_rep.pass && !fail_rep.pass;
  res.verdict = res.ok ? "PASS" : "FAIL";
  res.summary = json{{"check", "ioni_phi_identity"},
                     {"verdict", res.verdict},
                     {"filter_identity_max_error", worst},
                     {"ioni_pass_case", pass_rep.pass},
                     {"ioni_fail_case", fail_rep.pass},
                     {"fail_case_worst_omega", fail_rep.worst_omega},
                     {"evidence_label", "numerical"}};
  detail::emit_json(res, outdir, "ioni_phi_identity_report.json", res.summary);
  (void)opts;
  return res;
}

/// Static saturation in the sector [0, 1] with the sector rate and the
/// integral-of-nonlinearity storage.
inline ScenarioResult run_example3_sector(const std::filesystem::path& outdir,
                                          const ScenarioOptions& opts,
                                          ScenarioMode mode =
                                              ScenarioMode::Full) {
  (void)mode;
  ScenarioResult res;
  res.id = "example3_sector";
  StaticMap sigma = catalog::example3_sigma();
  SystemDef sys = SystemDef::static_sector(sigma, "example3");
  AuxiliarySystem phi =
      AuxiliarySystem::leaky_integrator_u(InitRule::linear(Mat::Identity(1, 1)));
  SupplyRate xi = sector_rate(1.0, InitRule::linear(Mat::Identity(1, 1)));
  StorageFn storage = StorageFn::integral_of_static(sigma);
  SimConfig cfg = detail::scenario_config(opts, 5.0);

  auto ensemble = make_ensemble(opts.seed, opts.ensemble_size, 0, 1, 1);
  DissipationReport rep = check_dissipation(
      sys, phi, xi, storage, StrictnessSpec::none(), ensemble, cfg,
      detail::scenario_tol(opts, cfg), opts.jobs);
  res.ok = rep.pass;
  res.verdict = rep.verdict();
  res.summary = report_to_json(rep, "sector-static dissipation, S = int(sigma)");
  detail::emit_json(res, outdir, "example3_sector_report.json", res.summary);
  return res;
}

/// Double-integrator-like plant with its sector-state rate.
inline ScenarioResult run_example4_dynamic(const std::filesystem::path& outdir,
                                           const ScenarioOptions& opts,
                                           ScenarioMode mode =
                                               ScenarioMode::Full) {
  (void)mode;
  ScenarioResult res;
  res.id = "example4_dynamic";
  StaticMap psi = catalog::example4_psi();
  SystemDef sys = catalog::example4_plant();
  AuxiliarySystem phi =
      AuxiliarySystem::sector_state(psi, InitRule::linear(Mat::Identity(1, 1)));
  SupplyRate xi = example4_rate(psi, InitRule::linear(Mat::Identity(1, 1)));
  StorageFn storage =
      StorageFn::diagonal_powers((Vec(3) << 0.25, 0.5, 0.5).finished(),
                                 {4, 2, 2});
  SimConfig cfg = detail::scenario_config(opts, 5.0);

  auto ensemble = make_ensemble(opts.seed, opts.ensemble_size, 2, 1, 1, 1.0, 1.0);
  DissipationReport rep = check_dissipation(
      sys, phi, xi, storage, StrictnessSpec::none(), ensemble, cfg,
      detail::scenario_tol(opts, cfg), opts.jobs);
  res.ok = rep.pass;
  res.verdict = rep.verdict();
  res.summary = report_to_json(rep, "sector-state dynamic-rate dissipation");
  detail::emit_json(res, outdir, "example4_dynamic_report.json", res.summary);
  return res;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

using ScenarioRunner = std::function<ScenarioResult(
    const std::filesystem::path&, const ScenarioOptions&, ScenarioMode)>;

struct ScenarioEntry {
  ScenarioInfo info;
  ScenarioRunner run;
};

inline const std::vector<ScenarioEntry>& scenario_registry() {
  static const std::vector<ScenarioEntry> entries = {
      {{"example2_icd",
        "two-state sector plant, prime dynamic rate, output-strict "
        "dissipation ensemble"},
       run_example2_icd},
      {{"section6_feedback",
        "closed-loop reproduction: three convergent trajectories, monotone "
        "V, GAS verdict"},
       run_section6_feedback},
      {{"ioni_phi_identity",
        "frequency identities: filter magnitude and the IONI inequality "
        "pass/fail pair"},
       run_ioni_phi_identity},
      {{"example3_sector",
        "static saturation in sector [0,1], sector rate, S = integral of "
        "sigma"},
       run_example3_sector},
      {{"example4_dynamic",
        "cubic-stiffness plant with sector-state dynamic rate"},
       run_example4_dynamic},
      {{"sigma2_inverted",
        "first-order feedthrough plant against the inverted rate"},
       run_sigma2_inverted},
  };
  return entries;
}

inline std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& e : scenario_registry()) out.push_back(e.info);
  return out;
}

inline ScenarioResult run_scenario(const std::string& id,
                                   const std::filesystem::path& outdir,
                                   const ScenarioOptions& opts = {},
                                   ScenarioMode mode = ScenarioMode::Full) {
  for (const auto& e : scenario_registry())
    if (e.info.id == id) return e.run(outdir, opts, mode);
  throw IoError("unknown scenario id: " + id);
}

}  // namespace dissipate

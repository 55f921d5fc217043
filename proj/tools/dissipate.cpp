// Command-line front end: simulation, certification, coupling tests, and
// scenario reproduction. Exit codes: 0 = all verdicts met, 1 = verdict
// mismatch or FAIL, 2 = usage/IO error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dissipate/certify.hpp"
#include "dissipate/io.hpp"
#include "dissipate/models.hpp"
#include "dissipate/scenarios.hpp"
#include "dissipate/sim.hpp"

namespace fs = std::filesystem;
using namespace dissipate;

namespace {

std::uint64_t env_seed() {
  if (const char* s = std::getenv("DISSIPATE_SEED")) {
    try {
      return std::stoull(s);
    } catch (...) {
      throw IoError("DISSIPATE_SEED is not a valid integer");
    }
  }
  return 1;
}

struct CommonOpts {
  std::string scenario;
  std::string outdir = "out";
  std::uint64_t seed = 0;  // 0 = take env/default
  int jobs = 1;
  int count = 100;
  bool plot = false;
  double step = 0.0;
  double horizon = 0.0;
  double tol = 0.0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_scenario) {
  auto* s = cmd->add_option("--scenario", o.scenario, "scenario id");
  if (needs_scenario) s->required();
  cmd->add_option("--out", o.outdir, "output directory");
  cmd->add_option("--seed", o.seed, "ensemble seed (default DISSIPATE_SEED)");
  cmd->add_option("--jobs", o.jobs, "parallel workers for ensembles")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--count", o.count, "ensemble size")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--plot", o.plot, "emit SVG plots");
  cmd->add_option("--step", o.step, "integration step override");
  cmd->add_option("--horizon", o.horizon, "horizon override");
  cmd->add_option("--tol", o.tol, "residual tolerance override");
}

ScenarioOptions to_options(const CommonOpts& o) {
  ScenarioOptions opts;
  opts.seed = o.seed != 0 ? o.seed : env_seed();
  opts.jobs = o.jobs;
  opts.ensemble_size = o.count;
  opts.plot = o.plot;
  if (o.step > 0) opts.step = o.step;
  if (o.horizon > 0) opts.horizon = o.horizon;
  if (o.tol > 0) opts.tolerance = o.tol;
  return opts;
}

int run_scenario_cmd(const CommonOpts& o, ScenarioMode mode) {
  ScenarioResult res = run_scenario(o.scenario, o.outdir, to_options(o), mode);
  std::cout << res.id << ": " << res.verdict << "\n";
  for (const auto& a : res.artifacts) std::cout << "  wrote " << a << "\n";
  return res.ok ? 0 : 1;
}

int simulate_model(const std::string& model_path, const CommonOpts& o,
                   const std::string& input_kind, double amp, double freq) {
  std::ifstream in(model_path);
  if (!in) throw IoError("cannot open model file: " + model_path);
  json doc = json::parse(in);
  SystemDef sys = model_from_json(doc);

  SimConfig cfg;
  if (o.step > 0) cfg.h = o.step;
  if (o.horizon > 0) cfg.T = o.horizon;
  InputSignal u = input_kind == "sinusoid"
                      ? InputSignal::sinusoid(amp, freq, 0.0, sys.m())
                      : InputSignal::zero(sys.m());
  Trajectory traj = simulate_open(sys, std::nullopt, std::nullopt, u,
                                  Vec::Zero(sys.n()), Vec(), cfg);
  fs::create_directories(o.outdir);
  fs::path csv = fs::path(o.outdir) / (sys.name() + "_trajectory.csv");
  write_trajectory_csv(csv, traj);
  std::cout << "wrote " << csv.string() << "\n";
  if (o.plot) {
    std::vector<PlotSeries> series;
    for (int i = 0; i < sys.n(); ++i) {
      PlotSeries s;
      s.label = "x" + std::to_string(i + 1);
      s.t = traj.t;
      s.v.assign(traj.x.col(i).data(), traj.x.col(i).data() + traj.samples());
      series.push_back(std::move(s));
    }
    fs::path svg = fs::path(o.outdir) / (sys.name() + "_states.svg");
    write_svg(svg, series, sys.name() + " states");
    std::cout << "wrote " << svg.string() << "\n";
  }
  return 0;
}

int couple_cmd(const std::vector<double>& small_gain,
               const std::vector<double>& indices,
               const std::string& affine1, const std::string& affine2,
               const std::string& outdir) {
  CouplingReport rep;
  if (small_gain.size() == 2) {
    rep = coupling_quadruplet(Quadruplet::small_gain(small_gain[0]),
                              Quadruplet::small_gain(small_gain[1]));
  } else if (indices.size() == 4) {
    rep = passivity_indices_check(indices[0], indices[1], indices[2],
                                  indices[3]);
  } else if (!affine1.empty() && !affine2.empty()) {
    std::ifstream i1(affine1), i2(affine2);
    if (!i1 || !i2) throw IoError("cannot open matrix file");
    rep = coupling_affine(mat_from_json(json::parse(i1)),
                          mat_from_json(json::parse(i2)));
  } else {
    std::cerr << "couple: provide --small-gain r1 r2, --indices d1 e1 d2 e2, "
                 "or --affine P1.json P2.json\n";
    return 2;
  }
  std::cout << rep.check << ": " << (rep.feasible ? "feasible" : "infeasible")
            << " tau=" << fmt17(rep.tau) << " margin=" << fmt17(rep.delta)
            << "\n";
  if (!outdir.empty()) {
    fs::create_directories(outdir);
    write_report(fs::path(outdir) / (rep.check + "_report.json"),
                 report_to_json(rep));
  }
  return rep.feasible ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dissipativity toolkit: simulation, certification, coupling "
               "tests, and scenario reproduction"};
  app.require_subcommand(1);

  // simulate ----------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "integrate a scenario or a "
                                                 "model file");
  CommonOpts sim_opts;
  std::string model_path, input_kind = "zero";
  double amp = 1.0, freq = 1.0;
  add_common(sim_cmd, sim_opts, false);
  sim_cmd->add_option("--model", model_path, "model JSON file");
  sim_cmd->add_option("--input", input_kind, "input family (zero|sinusoid)")
      ->check(CLI::IsMember({"zero", "sinusoid"}));
  sim_cmd->add_option("--amp", amp, "sinusoid amplitude");
  sim_cmd->add_option("--freq", freq, "sinusoid frequency (rad/s)");

  // verify ------------------------------------------------------------------
  auto* ver_cmd = app.add_subcommand("verify", "run a scenario's "
                                               "certification checks");
  CommonOpts ver_opts;
  add_common(ver_cmd, ver_opts, true);

  // couple ------------------------------------------------------------------
  auto* cpl_cmd = app.add_subcommand("couple", "coupling feasibility tests");
  std::vector<double> small_gain, indices;
  std::vector<std::string> affine;
  std::string cpl_out;
  cpl_cmd->add_option("--small-gain", small_gain,
                      "gain bounds r1 r2")->expected(2);
  cpl_cmd->add_option("--indices", indices,
                      "passivity indices d1 e1 d2 e2")->expected(4);
  cpl_cmd->add_option("--affine", affine,
                      "matrix JSON files P1 P2")->expected(2);
  cpl_cmd->add_option("--out", cpl_out, "output directory for the report");

  // scenario ----------------------------------------------------------------
  auto* scn_cmd = app.add_subcommand("scenario", "list or run scenarios");
  auto* scn_list = scn_cmd->add_subcommand("list", "list scenario ids");
  auto* scn_run = scn_cmd->add_subcommand("run", "run one scenario end to end");
  CommonOpts scn_opts;
  std::string scn_id;
  scn_run->add_option("id", scn_id, "scenario id")->required();
  add_common(scn_run, scn_opts, false);
  scn_cmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) {
      if (!sim_opts.scenario.empty())
        return run_scenario_cmd(sim_opts, ScenarioMode::SimulateOnly);
      if (!model_path.empty())
        return simulate_model(model_path, sim_opts, input_kind, amp, freq);
      std::cerr << "simulate: provide --scenario or --model\n";
      return 2;
    }
    if (ver_cmd->parsed())
      return run_scenario_cmd(ver_opts, ScenarioMode::VerifyOnly);
    if (cpl_cmd->parsed())
      return couple_cmd(small_gain, indices,
                        affine.size() == 2 ? affine[0] : "",
                        affine.size() == 2 ? affine[1] : "", cpl_out);
    if (scn_cmd->parsed()) {
      if (scn_list->parsed()) {
        for (const auto& info : list_scenarios())
          std::cout << info.id << "  " << info.description << "\n";
        return 0;
      }
      scn_opts.scenario = scn_id;
      return run_scenario_cmd(scn_opts, ScenarioMode::Full);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

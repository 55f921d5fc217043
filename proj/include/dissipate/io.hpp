#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dissipate/certify.hpp"
#include "dissipate/common.hpp"
#include "dissipate/models.hpp"
#include "dissipate/operators.hpp"
#include "dissipate/sim.hpp"

namespace dissipate {

using json = nlohmann::ordered_json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Atomic file writes
// ---------------------------------------------------------------------------

/// Writes to <path>.tmp then renames, so readers never observe a partial
/// artifact.
inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Number formatting (17 significant digits, locale-independent)
// ---------------------------------------------------------------------------

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out;
  out.reserve(size_t(traj.samples()) * 64);
  out += "t";
  for (int i = 0; i < traj.x.cols(); ++i) out += ",x" + std::to_string(i + 1);
  for (int i = 0; i < traj.z.cols(); ++i) out += ",z" + std::to_string(i + 1);
  for (int i = 0; i < traj.u.cols(); ++i) out += ",u" + std::to_string(i + 1);
  for (int i = 0; i < traj.y.cols(); ++i) out += ",y" + std::to_string(i + 1);
  out += ",xi,int_xi,S\n";
  for (int k = 0; k < traj.samples(); ++k) {
    out += fmt17(traj.t[k]);
    for (int i = 0; i < traj.x.cols(); ++i) out += "," + fmt17(traj.x(k, i));
    for (int i = 0; i < traj.z.cols(); ++i) out += "," + fmt17(traj.z(k, i));
    for (int i = 0; i < traj.u.cols(); ++i) out += "," + fmt17(traj.u(k, i));
    for (int i = 0; i < traj.y.cols(); ++i) out += "," + fmt17(traj.y(k, i));
    out += "," + fmt17(traj.has_xi() ? traj.xi[k] : 0.0);
    out += "," + fmt17(traj.has_xi() ? traj.int_xi[k] : 0.0);
    out += "," + fmt17(traj.has_storage() ? traj.storage[k] : 0.0);
    out += "\n";
  }
  return out;
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const Trajectory& traj) {
  atomic_write(path, trajectory_csv(traj));
}

// ---------------------------------------------------------------------------
// Matrix <-> JSON (row-major nested arrays)
// ---------------------------------------------------------------------------

inline json mat_to_json(const Mat& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int c = 0; c < M.cols(); ++c) r.push_back(M(i, c));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) return Mat(0, 0);
  const int rows = int(j.size());
  const int cols = int(j[0].size());
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (int(j[i].size()) != cols) throw IoError("ragged matrix in JSON");
    for (int c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
  }
  return M;
}

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[int(i)] = j[i].get<double>();
  return v;
}

// ---------------------------------------------------------------------------
// Static map JSON
// ---------------------------------------------------------------------------

inline json static_map_to_json(const StaticMap& m) {
  json j;
  switch (m.kind()) {
    case StaticMap::Kind::Identity:
      j["kind"] = "identity";
      break;
    case StaticMap::Kind::Saturation:
      j["kind"] = "saturation";
      j["limit"] = m.limit();
      break;
    case StaticMap::Kind::Table:
      throw IoError("table statics are not serializable");
  }
  return j;
}

inline StaticMap static_map_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return StaticMap::identity();
  if (kind == "saturation")
    return StaticMap::saturation(j.at("limit").get<double>());
  throw IoError("unknown static map kind: " + kind);
}

// ---------------------------------------------------------------------------
// Model JSON: {"name", "kind", "params": {..}, "dims": [n, m, p]}
// ---------------------------------------------------------------------------

inline json model_to_json(const SystemDef& sys) {
  std::string kind;
  json params;
  switch (sys.kind()) {
    case SystemDef::Kind::Lti: {
      kind = "lti";
      const auto& r = sys.realization();
      params["A"] = mat_to_json(r.A);
      params["B"] = mat_to_json(r.B);
      params["C"] = mat_to_json(r.C);
      params["D"] = mat_to_json(r.D);
      break;
    }
    case SystemDef::Kind::Icd: {
      kind = "icd";
      params["a"] = sys.icd_a();
      Vec b(int(sys.icd_b().size()));
      for (size_t i = 0; i < sys.icd_b().size(); ++i)
        b[int(i)] = sys.icd_b()[i];
      params["b"] = vec_to_json(b);
      params["odd_exponents"] = sys.icd_exponents();
      params["psi"] = static_map_to_json(sys.nonlinearity());
      break;
    }
    case SystemDef::Kind::Sigma2:
      kind = "sigma2";
      params["psi2"] = static_map_to_json(sys.nonlinearity());
      break;
    case SystemDef::Kind::Example4:
      kind = "example4";
      params["psi"] = static_map_to_json(sys.nonlinearity());
      break;
    case SystemDef::Kind::StaticSector:
      kind = "static_sector";
      params["sigma"] = static_map_to_json(sys.nonlinearity());
      break;
    case SystemDef::Kind::Hook:
      throw IoError("hook systems are not serializable");
  }
  return json{{"name", sys.name()},
              {"kind", kind},
              {"params", params},
              {"dims", {sys.n(), sys.m(), sys.p()}}};
}

inline SystemDef model_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  const json& params = j.at("params");
  if (kind == "lti") {
    LinearRealization r{mat_from_json(params.at("A")),
                        mat_from_json(params.at("B")),
                        mat_from_json(params.at("C")),
                        mat_from_json(params.at("D"))};
    return SystemDef::lti(r, j.value("name", std::string("lti")));
  }
  if (kind == "icd") {
    return SystemDef::icd(params.at("a").get<double>(),
                          params.at("b").get<std::vector<double>>(),
                          params.at("odd_exponents").get<std::vector<int>>(),
                          static_map_from_json(params.at("psi")),
                          j.value("name", std::string("icd")));
  }
  if (kind == "sigma2")
    return SystemDef::sigma2(static_map_from_json(params.at("psi2")));
  if (kind == "example4")
    return SystemDef::example4(static_map_from_json(params.at("psi")));
  if (kind == "static_sector")
    return SystemDef::static_sector(static_map_from_json(params.at("sigma")));
  throw IoError("unknown model kind: " + kind);
}

// ---------------------------------------------------------------------------
// Supply-rate JSON (serializable catalog variants only)
// ---------------------------------------------------------------------------

inline json theta_block_to_json(const ThetaBlock& b) {
  json j;
  if (std::holds_alternative<Mat>(b)) {
    j["type"] = "matrix";
    j["value"] = mat_to_json(std::get<Mat>(b));
  } else {
    const auto& r = std::get<LinearRealization>(b);
    j["type"] = "realization";
    j["A"] = mat_to_json(r.A);
    j["B"] = mat_to_json(r.B);
    j["C"] = mat_to_json(r.C);
    j["D"] = mat_to_json(r.D);
  }
  return j;
}

inline ThetaBlock theta_block_from_json(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "matrix") return mat_from_json(j.at("value"));
  if (type == "realization")
    return LinearRealization{mat_from_json(j.at("A")), mat_from_json(j.at("B")),
                             mat_from_json(j.at("C")), mat_from_json(j.at("D"))};
  throw IoError("unknown quadruplet block type: " + type);
}

inline json quadruplet_to_json(const Quadruplet& t) {
  return json{{"psi", theta_block_to_json(t.psi)},
              {"pi", theta_block_to_json(t.pi)},
              {"upsilon", theta_block_to_json(t.upsilon)},
              {"omega", theta_block_to_json(t.omega)}};
}

inline Quadruplet quadruplet_from_json(const json& j) {
  return Quadruplet{theta_block_from_json(j.at("psi")),
                    theta_block_from_json(j.at("pi")),
                    theta_block_from_json(j.at("upsilon")),
                    theta_block_from_json(j.at("omega"))};
}

inline json supply_to_json(const SupplyRate& xi) {
  json j;
  auto impl = xi.impl_ptr();
  if (auto p = std::dynamic_pointer_cast<const detail::StaticQuadraticImpl>(
          impl)) {
    j["variant"] = "static_quadratic";
    j["P"] = mat_to_json(p->matrix());
  } else if (auto p =
                 std::dynamic_pointer_cast<const detail::InvertedRateImpl>(
                     impl)) {
    j["variant"] = "inverted";
    j["inner"] = supply_to_json(SupplyRate(p->inner(), false));
  } else if (std::dynamic_pointer_cast<const detail::IcdRateImpl>(impl)) {
    j["variant"] = "icd";
  } else if (auto p = std::dynamic_pointer_cast<const detail::SectorRateImpl>(
                 impl)) {
    j["variant"] = "sector";
    j["b"] = p->b();
  } else if (auto p =
                 std::dynamic_pointer_cast<const detail::Example4RateImpl>(
                     impl)) {
    j["variant"] = "example4";
    if (p->psi().kind() != StaticMap::Kind::Saturation)
      throw IoError("only saturation psi is serializable here");
    j["limit"] = p->psi().limit();
  } else if (auto p =
                 std::dynamic_pointer_cast<const detail::QuadrupletRateImpl>(
                     impl)) {
    j["variant"] = "quadruplet";
    j["theta"] = quadruplet_to_json(p->theta());
  } else {
    throw IoError("supply rate '" + xi.id() + "' is not serializable");
  }
  j["prime"] = xi.prime();
  return j;
}

inline SupplyRate supply_from_json(const json& j) {
  std::string variant = j.at("variant").get<std::string>();
  bool prime = j.value("prime", false);
  if (variant == "static_quadratic")
    return static_quadratic_rate(mat_from_json(j.at("P")));
  if (variant == "inverted") return invert_supply(supply_from_json(j.at("inner")));
  if (variant == "icd") return icd_rate(prime);
  if (variant == "sector") return sector_rate(j.at("b").get<double>());
  if (variant == "example4")
    return example4_rate(StaticMap::saturation(j.at("limit").get<double>()));
  if (variant == "quadruplet")
    return quadruplet_rate(quadruplet_from_json(j.at("theta")));
  throw IoError("unknown supply-rate variant: " + variant);
}

// ---------------------------------------------------------------------------
// Report JSON
// ---------------------------------------------------------------------------

inline json report_to_json(const DissipationReport& r,
                           const std::string& theorem_path = "") {
  return json{{"check", r.check},
              {"verdict", r.verdict()},
              {"tolerance", r.tolerance},
              {"max_residual", r.max_residual},
              {"worst_trajectory", r.worst_trajectory},
              {"theorem_path", theorem_path},
              {"evidence_label", r.evidence_label}};
}

inline json report_to_json(const CouplingReport& r) {
  return json{{"check", r.check},
              {"verdict", r.feasible ? "PASS" : "FAIL"},
              {"tolerance", 0.0},
              {"max_residual", -r.delta},
              {"worst_trajectory", -1},
              {"theorem_path", "tau=" + fmt17(r.tau)},
              {"evidence_label", r.evidence_label}};
}

inline json report_to_json(const VerdictReport& r) {
  return json{{"check", "stability_verdict"},
              {"verdict", to_string(r.verdict)},
              {"tolerance", 0.0},
              {"max_residual", 0.0},
              {"worst_trajectory", -1},
              {"theorem_path", r.theorem_path},
              {"evidence_label", r.evidence_label}};
}

inline void write_report(const std::filesystem::path& path, const json& j) {
  atomic_write(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Minimal SVG line plot (time vs selected channels)
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<double> t;
  std::vector<double> v;
};

inline std::string render_svg(const std::vector<PlotSeries>& series,
                              const std::string& title, int width = 760,
                              int height = 420) {
  const int ml = 55, mr = 15, mt = 35, mb = 40;
  double tmin = 0, tmax = 1, vmin = 0, vmax = 1;
  bool first = true;
  for (const auto& s : series)
    for (size_t k = 0; k < s.t.size(); ++k) {
      if (first) {
        tmin = tmax = s.t[k];
        vmin = vmax = s.v[k];
        first = false;
      }
      tmin = std::min(tmin, s.t[k]); tmax = std::max(tmax, s.t[k]);
      vmin = std::min(vmin, s.v[k]); vmax = std::max(vmax, s.v[k]);
    }
  if (tmax == tmin) tmax = tmin + 1;
  if (vmax == vmin) { vmax += 0.5; vmin -= 0.5; }
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double t) { return ml + pw * (t - tmin) / (tmax - tmin); };
  auto py = [&](double v) { return mt + ph * (1.0 - (v - vmin) / (vmax - vmin)); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">" << title
      << "</text>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";
  // axis extremes
  char lbl[64];
  std::snprintf(lbl, sizeof(lbl), "%.3g", vmax);
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 5
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << lbl << "</text>\n";
  std::snprintf(lbl, sizeof(lbl), "%.3g", vmin);
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + ph
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << lbl << "</text>\n";
  std::snprintf(lbl, sizeof(lbl), "%.3g", tmin);
  out << "<text x=\"" << ml << "\" y=\"" << height - 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"11\">" << lbl << "</text>\n";
  std::snprintf(lbl, sizeof(lbl), "%.3g", tmax);
  out << "<text x=\"" << ml + pw << "\" y=\"" << height - 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"11\">" << lbl << "</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    if (s.t.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << colors[i % 6]
        << "\" stroke-width=\"1.2\" points=\"";
    // subsample long series; an SVG does not need 40001 vertices
    const size_t stride = std::max<size_t>(1, s.t.size() / 2000);
    for (size_t k = 0; k < s.t.size(); k += stride) {
      char pt[48];
      std::snprintf(pt, sizeof(pt), "%.2f,%.2f ", px(s.t[k]), py(s.v[k]));
      out << pt;
    }
    char pt[48];
    std::snprintf(pt, sizeof(pt), "%.2f,%.2f", px(s.t.back()), py(s.v.back()));
    out << pt << "\"/>\n";
    out << "<text x=\"" << width - mr - 5 << "\" y=\"" << mt + 16 + 15 * i
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\" fill=\"" << colors[i % 6] << "\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

inline void write_svg(const std::filesystem::path& path,
                      const std::vector<PlotSeries>& series,
                      const std::string& title) {
  atomic_write(path, render_svg(series, title));
}

}  // namespace dissipate

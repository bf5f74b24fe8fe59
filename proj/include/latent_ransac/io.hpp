#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "latent_ransac/errors.hpp"
#include "latent_ransac/estimator.hpp"
#include "latent_ransac/geometry.hpp"
#include "latent_ransac/synth.hpp"

namespace latent_ransac::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

// Match files ---------------------------------------------------------------
//
//   # problem: homography
//   # canvas: 640 480          (optional)
//   x_p y_p x_q y_q            (rigid3d: p_x p_y p_z q_x q_y q_z)
//
// Other lines starting with '#' and blank lines are ignored.

struct MatchFile {
  MatchSet matches;
  std::optional<std::array<double, 2>> canvas;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_reals(std::string_view line, std::size_t line_no) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    double x = 0.0;
    const char* first = line.data() + pos;
    const char* last = line.data() + end;
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, x);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(x)) {
      throw ParseError("invalid number '" + std::string(line.substr(pos, end - pos)) + "'",
                       line_no);
    }
    out.push_back(x);
    pos = end;
  }
  return out;
}

}  // namespace detail

inline MatchFile read_matches(std::istream& in) {
  MatchFile file;
  std::optional<ProblemKind> problem;
  std::vector<Match2D> m2;
  std::vector<Match3D> m3;
  std::string raw;
  std::size_t line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = detail::trim(line.substr(1));
      if (body.starts_with("problem:")) {
        const auto name = detail::trim(body.substr(8));
        const auto kind = problem_from_string(name);
        if (!kind) throw ParseError("unknown problem '" + std::string(name) + "'", line_no);
        if (problem && *problem != *kind) throw ParseError("conflicting problem header", line_no);
        problem = kind;
      } else if (body.starts_with("canvas:")) {
        const auto v = detail::parse_reals(body.substr(7), line_no);
        if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] > 0.0)) {
          throw ParseError("canvas header needs two positive numbers", line_no);
        }
        file.canvas = std::array<double, 2>{v[0], v[1]};
      }
      continue;
    }
    const auto v = detail::parse_reals(line, line_no);
    if (!problem) {
      if (v.size() == 4) {
        problem = ProblemKind::kHomography;
      } else if (v.size() == 6) {
        problem = ProblemKind::kRigid3d;
      } else {
        throw ParseError("expected 4 or 6 columns, got " + std::to_string(v.size()), line_no);
      }
    }
    if (*problem == ProblemKind::kHomography) {
      if (v.size() != 4) {
        throw ParseError("expected 4 columns, got " + std::to_string(v.size()), line_no);
      }
      m2.push_back({Point2(v[0], v[1]), Point2(v[2], v[3])});
    } else {
      if (v.size() != 6) {
        throw ParseError("expected 6 columns, got " + std::to_string(v.size()), line_no);
      }
      m3.push_back({Point3(v[0], v[1], v[2]), Point3(v[3], v[4], v[5])});
    }
  }
  if (!problem) throw ParseError("no problem header and no matches", line_no);
  if (*problem == ProblemKind::kHomography) {
    file.matches.matches = std::move(m2);
  } else {
    file.matches.matches = std::move(m3);
  }
  return file;
}

inline MatchFile read_matches(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_matches(in);
}

inline void write_matches(std::ostream& out, const MatchSet& set,
                          const std::optional<std::array<double, 2>>& canvas = std::nullopt) {
  out << "# problem: " << to_string(set.problem()) << '\n';
  if (canvas) {
    out << "# canvas: " << format_double((*canvas)[0]) << ' ' << format_double((*canvas)[1])
        << '\n';
  }
  std::visit(
      [&](const auto& matches) {
        for (const auto& m : matches) {
          for (Eigen::Index k = 0; k < m.p.size(); ++k) out << format_double(m.p(k)) << ' ';
          for (Eigen::Index k = 0; k < m.q.size(); ++k) {
            out << format_double(m.q(k)) << (k + 1 < m.q.size() ? ' ' : '\n');
          }
        }
      },
      set.matches);
}

// Models -------------------------------------------------------------------

inline Json matrix_json(const Eigen::Matrix3d& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  }
  return a;
}

inline Json model_to_json(const Homography& h) {
  Json j;
  j["type"] = "homography";
  j["H"] = matrix_json(h.matrix());
  return j;
}

inline Json model_to_json(const RigidMotion& f) {
  Json j;
  j["type"] = "rigid3d";
  j["R"] = matrix_json(f.rotation());
  j["t"] = Json::array({f.translation().x(), f.translation().y(), f.translation().z()});
  return j;
}

inline Json model_to_json(const Model& m) {
  return std::visit([](const auto& x) { return model_to_json(x); }, m);
}

inline Eigen::Matrix3d matrix_from_json(const Json& a) {
  if (!a.is_array() || a.size() != 9) throw ParseError("matrix must have 9 entries", 0);
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = a.at(i).get<double>();
  return m;
}

inline Model model_from_json(const Json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "homography") return Homography(matrix_from_json(j.at("H")));
    if (type == "rigid3d") {
      const auto& t = j.at("t");
      if (!t.is_array() || t.size() != 3) throw ParseError("translation must have 3 entries", 0);
      return RigidMotion(matrix_from_json(j.at("R")),
                         Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>()));
    }
    throw ParseError("unknown model type '" + type + "'", 0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model: ") + e.what(), 0);
  } catch (const InvalidModel& e) {
    throw ParseError(std::string("invalid model: ") + e.what(), 0);
  }
}

// Ground truth sidecar ---------------------------------------------------------

/// "inst.txt" -> "inst.truth.json".
inline std::filesystem::path truth_path_for(const std::filesystem::path& match_path) {
  auto p = match_path;
  p.replace_extension(".truth.json");
  return p;
}

inline Json spec_to_json(const InstanceSpec& s) {
  Json j;
  j["problem"] = std::string(to_string(s.problem));
  j["n_matches"] = s.n_matches;
  j["inlier_rate"] = s.inlier_rate;
  j["sigma"] = s.sigma;
  if (s.problem == ProblemKind::kHomography) {
    j["canvas"] = Json::array({s.canvas_w, s.canvas_h});
    j["corner_jitter"] = s.corner_jitter;
  } else {
    j["box"] = s.box;
    j["xi"] = s.xi;
  }
  j["seed"] = s.seed;
  return j;
}

inline Json truth_to_json(const Instance& inst, const InstanceSpec& spec) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["spec"] = spec_to_json(spec);
  j["model"] = model_to_json(inst.truth);
  std::size_t n_in = 0;
  Json mask = Json::array();
  for (bool b : inst.inlier_mask) {
    mask.push_back(b ? 1 : 0);
    n_in += b ? 1 : 0;
  }
  j["planted_inliers"] = n_in;
  j["inlier_mask"] = std::move(mask);
  return j;
}

struct Truth {
  Model model;
  std::vector<bool> inlier_mask;
};

inline Truth truth_from_json(const Json& j) {
  Truth t;
  t.model = model_from_json(j.at("model"));
  for (const auto& b : j.at("inlier_mask")) t.inlier_mask.push_back(b.get<int>() != 0);
  return t;
}

// Results --------------------------------------------------------------------

inline Json config_to_json(const EstimatorConfig& c, ProblemKind problem) {
  Json j;
  j["mode"] = std::string(to_string(c.mode));
  j["p0"] = c.p0;
  j["max_iterations"] = c.max_iterations;
  j["threshold"] = c.threshold;
  if (c.mode == Mode::kLatent) {
    j["tolerance"] = c.tolerance;
    j["cell_factor"] = c.cell_factor;
    j["cell_size"] = c.cell_size();
    j["tables"] = c.tables;
    j["table_bits"] = c.effective_table_bits();
    if (c.analytic_detection) {
      j["detection"] = "analytic";
    } else {
      j["detection"] = c.detection_probability;
    }
    if (problem == ProblemKind::kHomography) {
      j["canvas"] = Json::array({c.embedding.canvas_w, c.embedding.canvas_h});
    } else {
      j["rho"] = c.embedding.rho;
    }
  }
  j["seed"] = c.seed;
  j["min_inliers_to_accept"] = c.min_inliers_to_accept;
  return j;
}

/// Stable key order; wall-clock values live under "timing_ms" only.
template <typename ModelT>
Json result_to_json(const EstimateResult<ModelT>& r, const EstimatorConfig& c,
                    ProblemKind problem, std::size_t n_matches) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["problem"] = std::string(to_string(problem));
  j["n_matches"] = n_matches;
  j["config"] = config_to_json(c, problem);
  j["best_model"] = r.best_model ? model_to_json(*r.best_model) : Json(nullptr);
  j["best_inlier_count"] = r.best_inlier_count;
  j["best_inlier_rate"] = r.best_inlier_rate;
  j["accepted"] = r.accepted;
  j["stop_reason"] = std::string(to_string(r.stop_reason));
  j["iterations_used"] = r.iterations_used;
  if (r.required_iterations == kUnboundedIterations) {
    j["required_iterations"] = nullptr;
  } else {
    j["required_iterations"] = r.required_iterations;
  }
  if (c.mode == Mode::kLatent) j["detection_probability"] = r.detection_probability;
  Json counters;
  counters["samples_drawn"] = r.counters.samples_drawn;
  counters["degenerate_skipped"] = r.counters.degenerate_skipped;
  counters["fits"] = r.counters.fits;
  counters["unstable_skipped"] = r.counters.unstable_skipped;
  counters["embeddings"] = r.counters.embeddings;
  counters["cell_collisions"] = r.counters.cell_collisions;
  counters["collisions_reported"] = r.counters.collisions_reported;
  counters["verifications_run"] = r.counters.verifications_run;
  j["counters"] = std::move(counters);
  Json mask = Json::array();
  for (bool b : r.best_inlier_mask) mask.push_back(b ? 1 : 0);
  j["inlier_mask"] = std::move(mask);
  Json timing;
  timing["sampling"] = r.timing.sampling * 1e3;
  timing["fitting"] = r.timing.fitting * 1e3;
  timing["hashing"] = r.timing.hashing * 1e3;
  timing["verification"] = r.timing.verification * 1e3;
  timing["total"] = r.timing.total() * 1e3;
  j["timing_ms"] = std::move(timing);
  return j;
}

}  // namespace latent_ransac::io

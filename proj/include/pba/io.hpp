#pragma once

// JSON file formats (schema_version 1). Keys are emitted in sorted order and
// doubles in shortest round-trip form, so identical inputs produce identical
// bytes.
//
//   dataset: {"schema_version", "poses": [{"rotation": [w,x,y,z],
//             "translation": [x,y,z]}], "planes": [{"normal": [x,y,z],
//             "offset": d}], "observations": [{"pose", "plane",
//             "points": [[x,y,z], ...]}]}
//   state:   {"schema_version", "poses": [...as above], "plane_cps": [[x,y,z]],
//             optional "report" and "meta" objects}

#include <cmath>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <json.hpp>

#include "pba/errors.hpp"
#include "pba/eval.hpp"
#include "pba/geometry.hpp"
#include "pba/lm.hpp"
#include "pba/problem.hpp"
#include "pba/synth.hpp"

namespace pba::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-element array");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline json pose_to_json(const Pose& p) {
  Eigen::Quaterniond q(p.rotation);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return json{{"rotation", json::array({q.w(), q.x(), q.y(), q.z()})},
              {"translation", vec_to_json(p.translation)}};
}

inline Pose pose_from_json(const json& j) {
  const json& r = j.at("rotation");
  if (!r.is_array() || r.size() != 4) throw InvalidInput("rotation must be [w,x,y,z]");
  const Eigen::Quaterniond q(r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(),
                             r.at(3).get<double>());
  if (std::abs(q.norm() - 1.0) > 1e-9) throw InvalidInput("rotation quaternion is not unit");
  return Pose{q.toRotationMatrix(), vec_from_json(j.at("translation"))};
}

inline json plane_to_json(const PlaneHesse& p) {
  return json{{"normal", vec_to_json(p.normal)}, {"offset", p.offset}};
}

inline PlaneHesse plane_from_json(const json& j) {
  const Vec3 n = vec_from_json(j.at("normal"));
  if (std::abs(n.norm() - 1.0) > 1e-9) throw InvalidInput("plane normal is not unit");
  return PlaneHesse{n, j.at("offset").get<double>()};
}

inline void check_schema(const json& j) {
  if (!j.is_object() || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw InvalidInput("unsupported schema_version");
  }
}

inline json graph_to_json(const ProblemGraph& g) {
  json poses = json::array();
  for (const auto& p : g.poses) poses.push_back(pose_to_json(p));
  json planes = json::array();
  for (const auto& p : g.planes) planes.push_back(plane_to_json(p));
  json observations = json::array();
  for (const auto& obs : g.observations) {
    json pts = json::array();
    for (const auto& p : obs.points) pts.push_back(vec_to_json(p));
    observations.push_back(
        json{{"pose", obs.pose_index}, {"plane", obs.plane_index}, {"points", std::move(pts)}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"poses", std::move(poses)},
              {"planes", std::move(planes)},
              {"observations", std::move(observations)}};
}

/// Parses and validates a dataset (index ranges, unit quaternions and
/// normals, graph invariants).
inline ProblemGraph graph_from_json(const json& j) {
  try {
    check_schema(j);
    ProblemGraph g;
    for (const auto& p : j.at("poses")) g.poses.push_back(pose_from_json(p));
    for (const auto& p : j.at("planes")) g.planes.push_back(plane_from_json(p));
    for (const auto& o : j.at("observations")) {
      Observation obs;
      obs.pose_index = o.at("pose").get<int>();
      obs.plane_index = o.at("plane").get<int>();
      for (const auto& p : o.at("points")) obs.points.push_back(vec_from_json(p));
      g.observations.push_back(std::move(obs));
    }
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed dataset: ") + e.what());
  }
}

inline json state_to_json(const ProblemState& s) {
  json poses = json::array();
  for (const auto& p : s.poses) poses.push_back(pose_to_json(p));
  json cps = json::array();
  for (const auto& c : s.plane_cps) cps.push_back(vec_to_json(c.cp));
  return json{{"schema_version", kSchemaVersion}, {"poses", std::move(poses)},
              {"plane_cps", std::move(cps)}};
}

inline ProblemState state_from_json(const json& j) {
  try {
    check_schema(j);
    ProblemState s;
    for (const auto& p : j.at("poses")) s.poses.push_back(pose_from_json(p));
    for (const auto& c : j.at("plane_cps")) s.plane_cps.push_back({vec_from_json(c)});
    return s;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed state file: ") + e.what());
  }
}

inline json report_to_json(const SolveReport& r) {
  return json{{"method", std::string(to_string(r.method))},
              {"iterations", r.iterations},
              {"initial_cost", r.initial_cost},
              {"final_cost", r.final_cost},
              {"termination", std::string(to_string(r.termination))},
              {"qr_time", r.qr_time},
              {"init_time", r.init_time},
              {"optimization_time", r.optimization_time}};
}

inline SceneSpec scene_spec_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("scene config must be a JSON object");
  SceneSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "room_extent") {
        s.room_extent = vec_from_json(value);
      } else if (key == "extra_planes") {
        s.extra_planes = value.get<int>();
      } else if (key == "trajectory") {
        const auto t = value.get<std::string>();
        if (t == "circle") {
          s.trajectory = TrajectoryKind::circle;
        } else if (t == "random_walk") {
          s.trajectory = TrajectoryKind::random_walk;
        } else {
          throw InvalidInput("trajectory must be circle or random_walk");
        }
      } else if (key == "n_poses") {
        s.n_poses = value.get<int>();
      } else if (key == "points_per_observation") {
        s.points_per_observation = value.get<int>();
      } else if (key == "point_noise_sigma") {
        s.point_noise_sigma = value.get<double>();
      } else if (key == "max_range") {
        s.max_range = value.get<double>();
      } else if (key == "max_incidence") {
        s.max_incidence_deg = value.get<double>();
      } else if (key == "seed") {
        s.seed = value.get<std::uint64_t>();
      } else {
        throw InvalidInput("unknown scene config key: " + key);
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed scene config: ") + e.what());
  }
  s.validate();
  return s;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << j.dump() << '\n';
  if (!out) throw InvalidInput("write failed for " + path);
}

inline constexpr const char* kTraceHeader = "iteration,cost,lambda,step_norm,wall_time_seconds";

inline void write_trace_csv(std::ostream& os, const SolveReport& r) {
  os << kTraceHeader << '\n';
  for (const auto& rec : r.trace) {
    os << rec.iteration << ',' << format_double(rec.cost) << ',' << format_double(rec.lambda)
       << ',' << format_double(rec.step_norm) << ',' << format_double(rec.wall_time) << '\n';
  }
}

}  // namespace pba::io

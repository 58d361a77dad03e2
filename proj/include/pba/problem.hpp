#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "pba/errors.hpp"
#include "pba/geometry.hpp"

namespace pba {

/// Points (sensor frame) that pose `pose_index` records on plane `plane_index`.
struct Observation {
  int pose_index = 0;
  int plane_index = 0;
  std::vector<Vec3> points;
};

/// Poses, global planes and point observations. Pose 0 is the gauge anchor.
/// `poses` and `planes` hold whatever reference values the producer had (the
/// ground truth for synthetic data); solvers work on a separate ProblemState.
struct ProblemGraph {
  std::vector<Pose> poses;
  std::vector<PlaneHesse> planes;
  std::vector<Observation> observations;

  [[nodiscard]] int num_poses() const { return static_cast<int>(poses.size()); }
  [[nodiscard]] int num_planes() const { return static_cast<int>(planes.size()); }

  /// Throws InvalidInput when a structural invariant is violated.
  void validate() const {
    if (poses.size() < 2) throw InvalidInput("graph needs at least 2 poses");
    if (planes.empty()) throw InvalidInput("graph needs at least 1 plane");

    std::vector<bool> pose_seen(poses.size(), false);
    std::vector<bool> plane_seen(planes.size(), false);
    std::set<std::pair<int, int>> pairs;
    for (const Observation& obs : observations) {
      if (obs.pose_index < 0 || obs.pose_index >= num_poses()) {
        throw InvalidInput("observation pose index out of range: " +
                           std::to_string(obs.pose_index));
      }
      if (obs.plane_index < 0 || obs.plane_index >= num_planes()) {
        throw InvalidInput("observation plane index out of range: " +
                           std::to_string(obs.plane_index));
      }
      if (obs.points.empty()) throw InvalidInput("observation without points");
      if (!pairs.emplace(obs.pose_index, obs.plane_index).second) {
        throw InvalidInput("duplicate observation for pose " +
                           std::to_string(obs.pose_index) + ", plane " +
                           std::to_string(obs.plane_index));
      }
      pose_seen[obs.pose_index] = true;
      plane_seen[obs.plane_index] = true;
    }
    for (std::size_t i = 0; i < pose_seen.size(); ++i) {
      if (!pose_seen[i]) throw InvalidInput("pose " + std::to_string(i) + " is never observed");
    }
    for (std::size_t j = 0; j < plane_seen.size(); ++j) {
      if (!plane_seen[j]) throw InvalidInput("plane " + std::to_string(j) + " is never observed");
    }
  }

  [[nodiscard]] std::size_t num_points() const {
    std::size_t n = 0;
    for (const auto& obs : observations) n += obs.points.size();
    return n;
  }
};

/// The iterate: one pose per graph pose, one CP vector per graph plane.
struct ProblemState {
  std::vector<Pose> poses;
  std::vector<PlaneCP> plane_cps;
};

/// State holding the graph's own poses and planes.
inline ProblemState state_from_graph(const ProblemGraph& graph) {
  ProblemState s;
  s.poses = graph.poses;
  s.plane_cps.reserve(graph.planes.size());
  for (const auto& p : graph.planes) s.plane_cps.push_back(plane_to_cp(p));
  return s;
}

/// Sum of squared point-to-plane distances over every observed point.
inline double total_cost(const ProblemGraph& graph, const ProblemState& state) {
  std::vector<PlaneHesse> planes;
  planes.reserve(state.plane_cps.size());
  for (const auto& cp : state.plane_cps) planes.push_back(cp_to_plane(cp));

  double cost = 0.0;
  for (const Observation& obs : graph.observations) {
    const Pose& pose = state.poses[obs.pose_index];
    const PlaneHesse& plane = planes[obs.plane_index];
    for (const Vec3& p : obs.points) {
      const double r = point_to_plane_residual(pose, plane, p);
      cost += r * r;
    }
  }
  return cost;
}

struct ObservabilityWarning {
  int pose_index = 0;
  int normal_rank = 0;
};

struct ObservabilityReport {
  std::vector<int> planes_per_pose;
  std::vector<ObservabilityWarning> warnings;
};

/// Rank of the span of a set of unit normals (singular values above 1e-6 of
/// the largest).
inline int normal_span_rank(const std::vector<Vec3>& normals) {
  if (normals.empty()) return 0;
  Eigen::MatrixX3d n(static_cast<Eigen::Index>(normals.size()), 3);
  for (std::size_t k = 0; k < normals.size(); ++k) n.row(static_cast<Eigen::Index>(k)) = normals[k];
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(n);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv[k] > 1e-6 * sv[0]) ++rank;
  }
  return rank;
}

/// Counts observed planes per pose and flags non-anchor poses whose plane
/// normals do not span R^3 (planar constraints alone leave them underdetermined).
inline ObservabilityReport observability_check(const ProblemGraph& graph) {
  ObservabilityReport report;
  report.planes_per_pose.assign(graph.poses.size(), 0);
  std::vector<std::vector<Vec3>> normals(graph.poses.size());
  for (const Observation& obs : graph.observations) {
    ++report.planes_per_pose[obs.pose_index];
    normals[obs.pose_index].push_back(graph.planes[obs.plane_index].normal);
  }
  for (int i = 1; i < graph.num_poses(); ++i) {
    const int rank = normal_span_rank(normals[i]);
    if (rank < 3) report.warnings.push_back({i, rank});
  }
  return report;
}

}  // namespace pba

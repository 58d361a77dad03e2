#pragma once

// Plane-to-plane baseline: every observation is summarized once by a plane
// fitted in the sensor frame, and the residual is the difference between that
// local CP vector and the CP vector of the current global plane expressed in
// the sensor frame.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pba/errors.hpp"
#include "pba/geometry.hpp"
#include "pba/lm.hpp"
#include "pba/problem.hpp"

namespace pba {

struct PlaneObservationSummary {
  int pose_index = 0;
  int plane_index = 0;
  PlaneHesse local_plane;
  double weight = 1.0;
};

struct SkippedObservation {
  int observation = 0;
  std::string reason;
};

struct Summaries {
  std::vector<PlaneObservationSummary> summaries;
  std::vector<SkippedObservation> skipped;
};

/// Fits one local plane per observation. Observations that cannot be fitted
/// are skipped and listed in `skipped`.
inline Summaries summarize(const ProblemGraph& graph) {
  Summaries out;
  out.summaries.reserve(graph.observations.size());
  for (std::size_t k = 0; k < graph.observations.size(); ++k) {
    const Observation& obs = graph.observations[k];
    try {
      out.summaries.push_back(
          {obs.pose_index, obs.plane_index, fit_plane(std::span<const Vec3>(obs.points)), 1.0});
    } catch (const DegenerateFit& e) {
      out.skipped.push_back({static_cast<int>(k), e.what()});
    }
  }
  return out;
}

/// CP vector of the global plane seen from `pose`: (n.t + d) R^T n. Smooth in
/// the state and independent of the sign convention of (n, d).
inline Vec3 predicted_local_cp(const Pose& pose, const PlaneHesse& global_plane) {
  const double d_s = global_plane.normal.dot(pose.translation) + global_plane.offset;
  return d_s * (pose.rotation.transpose() * global_plane.normal);
}

inline Vec3 pl2pl_residual(const Pose& pose, const PlaneCP& global_plane_cp,
                           const PlaneObservationSummary& summary) {
  const Vec3 predicted = predicted_local_cp(pose, cp_to_plane(global_plane_cp));
  if (predicted.norm() < kCpEpsilon) {
    throw DegeneratePlane("transformed plane passes through the sensor origin");
  }
  return std::sqrt(summary.weight) * (plane_to_cp(summary.local_plane).cp - predicted);
}

struct Pl2plLinearization {
  Vec3 residual;
  Eigen::Matrix<double, 3, 6> j_pose;  // w.r.t. [theta; tau]
  Mat3 j_plane;                        // w.r.t. global cp
};

/// Residual and analytic Jacobians under the solver's increments
/// (R <- R exp([theta]x), t <- t + tau, cp <- cp + dcp).
inline Pl2plLinearization pl2pl_linearize(const Pose& pose, const PlaneCP& global_plane_cp,
                                          const PlaneObservationSummary& summary) {
  const PlaneHesse g = cp_to_plane(global_plane_cp);
  const Vec3 v = pose.rotation.transpose() * g.normal;
  const double d_s = g.normal.dot(pose.translation) + g.offset;
  const Vec3 predicted = d_s * v;
  if (predicted.norm() < kCpEpsilon) {
    throw DegeneratePlane("transformed plane passes through the sensor origin");
  }
  const double w = std::sqrt(summary.weight);

  Pl2plLinearization lin;
  lin.residual = w * (plane_to_cp(summary.local_plane).cp - predicted);

  // R^T <- exp(-[theta]x) R^T, so dv/dtheta = [v]x.
  lin.j_pose.leftCols<3>() = -w * d_s * skew(v);
  lin.j_pose.rightCols<3>() = -w * v * g.normal.transpose();

  const double norm = global_plane_cp.cp.norm();
  const Mat3 dn = -(Mat3::Identity() - g.normal * g.normal.transpose()) / norm;
  const Mat3 df_dn = d_s * pose.rotation.transpose() + v * pose.translation.transpose();
  lin.j_plane = -w * (df_dn * dn + v * g.normal.transpose());
  return lin;
}

class Pl2plModel {
 public:
  Pl2plModel(std::vector<PlaneObservationSummary> summaries, int num_poses, int num_planes)
      : summaries_(std::move(summaries)), num_poses_(num_poses), num_planes_(num_planes) {}

  [[nodiscard]] int num_poses() const { return num_poses_; }
  [[nodiscard]] int num_planes() const { return num_planes_; }
  [[nodiscard]] const std::vector<PlaneObservationSummary>& summaries() const {
    return summaries_;
  }

  /// Residuals whose transformed plane degenerates are left out.
  [[nodiscard]] double cost(const ProblemState& state) const {
    double c = 0.0;
    for (const auto& s : summaries_) {
      try {
        c += pl2pl_residual(state.poses[s.pose_index], state.plane_cps[s.plane_index], s)
                 .squaredNorm();
      } catch (const DegeneratePlane&) {
      }
    }
    return c;
  }

  [[nodiscard]] int degenerate_residuals(const ProblemState& state) const {
    int n = 0;
    for (const auto& s : summaries_) {
      const Vec3 p = predicted_local_cp(state.poses[s.pose_index],
                                        cp_to_plane(state.plane_cps[s.plane_index]));
      if (p.norm() < kCpEpsilon) ++n;
    }
    return n;
  }

  template <typename Sink>
  void for_each_block(const ProblemState& state, Sink&& sink) const {
    for (const auto& s : summaries_) {
      Pl2plLinearization lin;
      try {
        lin = pl2pl_linearize(state.poses[s.pose_index], state.plane_cps[s.plane_index], s);
      } catch (const DegeneratePlane&) {
        continue;
      }
      sink(s.pose_index, s.plane_index, s.pose_index != 0, lin.j_pose, lin.j_plane, lin.residual);
    }
  }

 private:
  std::vector<PlaneObservationSummary> summaries_;
  int num_poses_;
  int num_planes_;
};

inline SolveResult solve_pl2pl(const ProblemGraph& graph, const ProblemState& initial_state,
                               LMConfig config) {
  config.method = Method::pl2pl;
  const auto t0 = std::chrono::steady_clock::now();
  Summaries s = summarize(graph);
  Pl2plModel model(std::move(s.summaries), graph.num_poses(), graph.num_planes());
  const double init_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  SolveResult result = run_lm(model, initial_state, config);
  result.report.init_time = init_time;
  return result;
}

}  // namespace pba

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pba/errors.hpp"
#include "pba/geometry.hpp"
#include "pba/problem.hpp"

namespace pba {

enum class TrajectoryKind { circle, random_walk };

struct SceneSpec {
  Vec3 room_extent{10.0, 8.0, 3.0};
  int extra_planes = 6;
  TrajectoryKind trajectory = TrajectoryKind::circle;
  int n_poses = 100;
  int points_per_observation = 200;
  double point_noise_sigma = 0.01;
  double max_range = 8.0;
  double max_incidence_deg = 80.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(room_extent.minCoeff() > 0.0)) throw InvalidInput("room extent must be positive");
    if (extra_planes < 0) throw InvalidInput("extra_planes must be non-negative");
    if (n_poses < 2) throw InvalidInput("n_poses must be at least 2");
    if (points_per_observation < 1) throw InvalidInput("points_per_observation must be >= 1");
    if (point_noise_sigma < 0.0) throw InvalidInput("point_noise_sigma must be non-negative");
    if (!(max_range > 0.0)) throw InvalidInput("max_range must be positive");
    if (!(max_incidence_deg > 0.0 && max_incidence_deg < 90.0)) {
      throw InvalidInput("max_incidence must lie in (0, 90) degrees");
    }
  }
};

/// Initialization noise: Euler-angle STD in degrees, translation STD in meters.
struct NoiseSpec {
  double sigma_rot = 0.0;
  double sigma_trans = 0.0;
  std::uint64_t seed = 0;
};

/// The three initialization noise levels used for evaluation.
inline NoiseSpec noise_level(int level, std::uint64_t seed = 0) {
  switch (level) {
    case 1: return {0.1, 0.01, seed};
    case 2: return {0.5, 0.03, seed};
    case 3: return {1.0, 0.05, seed};
    default: throw InvalidInput("noise level must be 1, 2 or 3");
  }
}

/// Finite rectangle on a plane; points are sampled from it.
struct PlanePatch {
  PlaneHesse plane;
  Vec3 center;
  Vec3 axis_u;
  Vec3 axis_v;
  double half_u = 0.0;
  double half_v = 0.0;
};

struct GeneratedScene {
  ProblemGraph graph;  // poses and planes are the ground truth
  std::vector<PlanePatch> patches;
  double noise_sum_sq = 0.0;  // sum of squared point displacements drawn
};

namespace detail {

inline Vec3 closest_point_on_patch(const PlanePatch& patch, const Vec3& q) {
  const Vec3 rel = q - patch.center;
  const double a = std::clamp(rel.dot(patch.axis_u), -patch.half_u, patch.half_u);
  const double b = std::clamp(rel.dot(patch.axis_v), -patch.half_v, patch.half_v);
  return patch.center + a * patch.axis_u + b * patch.axis_v;
}

inline PlanePatch make_patch(const Vec3& normal, const Vec3& center, const Vec3& axis_u,
                             double half_u, double half_v) {
  PlanePatch patch;
  patch.plane = PlaneHesse{normal, -normal.dot(center)}.canonical();
  patch.center = center;
  patch.axis_u = axis_u.normalized();
  patch.axis_v = normal.cross(patch.axis_u).normalized();
  patch.half_u = half_u;
  patch.half_v = half_v;
  return patch;
}

inline std::vector<PlanePatch> room_patches(const Vec3& extent) {
  const Vec3 h = extent / 2.0;
  std::vector<PlanePatch> p;
  for (double s : {1.0, -1.0}) {
    p.push_back(make_patch(s * Vec3::UnitX(), Vec3(s * h.x(), 0, 0), Vec3::UnitY(), h.y(), h.z()));
    p.push_back(make_patch(s * Vec3::UnitY(), Vec3(0, s * h.y(), 0), Vec3::UnitX(), h.x(), h.z()));
    p.push_back(make_patch(s * Vec3::UnitZ(), Vec3(0, 0, s * h.z()), Vec3::UnitX(), h.x(), h.y()));
  }
  return p;
}

inline std::vector<Pose> make_trajectory(const SceneSpec& spec, std::mt19937_64& rng) {
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(spec.n_poses));
  const Vec3 h = spec.room_extent / 2.0;
  if (spec.trajectory == TrajectoryKind::circle) {
    const double radius = 0.3 * std::min(spec.room_extent.x(), spec.room_extent.y());
    const double z_amp = std::min(0.2, 0.25 * spec.room_extent.z());
    for (int i = 0; i < spec.n_poses; ++i) {
      const double phi = 2.0 * kPi * i / spec.n_poses;
      Pose p;
      p.translation = Vec3(radius * std::cos(phi), radius * std::sin(phi), z_amp * std::sin(3 * phi));
      p.rotation = rotation_from_euler_zyx(phi + kPi / 2, 0.05 * std::sin(2 * phi),
                                           0.05 * std::cos(5 * phi));
      poses.push_back(p);
    }
    return poses;
  }

  // Random walk with a fixed 10 cm step inside the room shrunk by 1 m.
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * kPi);
  const Vec3 bound = (h - Vec3::Constant(1.0)).cwiseMax(Vec3::Constant(0.1));
  Vec3 pos = Vec3::Zero();
  double yaw = 0.0;
  for (int i = 0; i < spec.n_poses; ++i) {
    Pose p;
    p.translation = pos;
    p.rotation = rotation_from_euler_zyx(yaw, 0.03 * normal(rng), 0.03 * normal(rng));
    poses.push_back(p);
    const double heading = uniform(rng);
    Vec3 next = pos + 0.1 * Vec3(std::cos(heading), std::sin(heading), 0.1 * normal(rng));
    pos = next.cwiseMax(-bound).cwiseMin(bound);
    yaw += deg_to_rad(5.0) * normal(rng);
  }
  return poses;
}

/// Samples a noisy observation of `patch` from `pose`; returns false when the
/// patch is not visible (out of range or too oblique to yield K points).
inline bool observe_patch(const SceneSpec& spec, const Pose& pose, const PlanePatch& patch,
                          std::mt19937_64& rng, std::vector<Vec3>& points, double& noise_sq) {
  const Vec3& s = pose.translation;
  if ((closest_point_on_patch(patch, s) - s).norm() > spec.max_range) return false;
  const double cos_limit = std::cos(deg_to_rad(spec.max_incidence_deg));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int k = spec.points_per_observation;
  const int max_attempts = 50 * k;
  std::vector<Vec3> world;
  world.reserve(static_cast<std::size_t>(k));
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(world.size()) < k; ++attempt) {
    const Vec3 q = patch.center + unit(rng) * patch.half_u * patch.axis_u +
                   unit(rng) * patch.half_v * patch.axis_v;
    const Vec3 ray = q - s;
    const double dist = ray.norm();
    if (dist > spec.max_range || dist < 1e-6) continue;
    if (std::abs(patch.plane.normal.dot(ray)) < cos_limit * dist) continue;
    world.push_back(q);
  }
  if (static_cast<int>(world.size()) < k) return false;

  points.clear();
  points.reserve(world.size());
  const Mat3 rt = pose.rotation.transpose();
  for (const Vec3& q : world) {
    const double e = spec.point_noise_sigma * normal(rng);
    noise_sq += e * e;
    points.push_back(rt * (q + e * patch.plane.normal - s));
  }
  return true;
}

}  // namespace detail

/// Builds a room (6 walls) plus `extra_planes` random patches, a trajectory,
/// and exact-association point observations. Deterministic in `spec`.
inline GeneratedScene generate(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  GeneratedScene scene;
  scene.graph.poses = detail::make_trajectory(spec, rng);
  const auto& poses = scene.graph.poses;

  std::vector<PlanePatch> patches = detail::room_patches(spec.room_extent);
  std::vector<std::vector<Observation>> per_patch(patches.size());
  std::vector<double> noise(patches.size(), 0.0);

  auto observe_all = [&](const PlanePatch& patch, int plane_index, std::vector<Observation>& out,
                         double& noise_sq) {
    for (int i = 0; i < static_cast<int>(poses.size()); ++i) {
      Observation obs{i, plane_index, {}};
      if (detail::observe_patch(spec, poses[i], patch, rng, obs.points, noise_sq)) {
        out.push_back(std::move(obs));
      }
    }
  };
  for (std::size_t j = 0; j < patches.size(); ++j) {
    observe_all(patches[j], static_cast<int>(j), per_patch[j], noise[j]);
  }

  // Extra planes: random orientation inside the room, redrawn until |d| >= 0.1
  // and at least two poses see them.
  const Vec3 inner = (spec.room_extent / 2.0 - Vec3::Constant(0.5)).cwiseMax(Vec3::Constant(0.1));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> half(0.5, 1.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int e = 0; e < spec.extra_planes; ++e) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const Vec3 center(inner.x() * unit(rng), inner.y() * unit(rng), inner.z() * unit(rng));
      Vec3 n(normal(rng), normal(rng), normal(rng));
      if (n.norm() < 1e-6) continue;
      n.normalize();
      const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
      const Vec3 axis_u = n.cross(helper).normalized();
      PlanePatch patch = detail::make_patch(n, center, axis_u, half(rng), half(rng));
      if (std::abs(patch.plane.offset) < 0.1) continue;
      const int index = static_cast<int>(patches.size());
      std::vector<Observation> obs;
      double noise_sq = 0.0;
      observe_all(patch, index, obs, noise_sq);
      if (obs.size() < 2) continue;
      patches.push_back(patch);
      per_patch.push_back(std::move(obs));
      noise.push_back(noise_sq);
      placed = true;
    }
    if (!placed) throw InfeasibleScene("could not place a visible extra plane");
  }

  for (std::size_t j = 0; j < patches.size(); ++j) {
    scene.graph.planes.push_back(patches[j].plane);
    scene.noise_sum_sq += noise[j];
  }
  // Observations ordered by pose, then plane.
  for (int i = 0; i < static_cast<int>(poses.size()); ++i) {
    for (auto& group : per_patch) {
      for (auto& obs : group) {
        if (obs.pose_index == i) scene.graph.observations.push_back(std::move(obs));
      }
    }
  }
  scene.patches = std::move(patches);

  const ObservabilityReport report = observability_check(scene.graph);
  std::vector<Vec3> anchor_normals;
  for (const auto& obs : scene.graph.observations) {
    if (obs.pose_index == 0) anchor_normals.push_back(scene.graph.planes[obs.plane_index].normal);
  }
  if (!report.warnings.empty() || normal_span_rank(anchor_normals) < 3) {
    const int bad = report.warnings.empty() ? 0 : report.warnings.front().pose_index;
    throw InfeasibleScene("pose " + std::to_string(bad) +
                          " does not observe planes spanning three directions");
  }
  for (int i = 0; i < static_cast<int>(poses.size()); ++i) {
    if (report.planes_per_pose[i] < 3) {
      throw InfeasibleScene("pose " + std::to_string(i) + " observes fewer than 3 planes");
    }
  }
  scene.graph.validate();
  return scene;
}

/// Chains per-pose error transforms along the trajectory:
/// hat(T)_0 = T_0 and hat(T)_i = E_i (T_i T_{i-1}^-1) hat(T)_{i-1}.
/// errors[0] is ignored so the anchor stays exact.
inline std::vector<Pose> perturb_with_errors(const std::vector<Pose>& trajectory,
                                             const std::vector<Pose>& errors) {
  if (errors.size() != trajectory.size()) throw LengthMismatch("one error per pose required");
  std::vector<Pose> out;
  out.reserve(trajectory.size());
  if (trajectory.empty()) return out;
  out.push_back(trajectory[0]);
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const Pose relative = pose_compose(trajectory[i], pose_inverse(trajectory[i - 1]));
    out.push_back(pose_compose(errors[i], pose_compose(relative, out.back())));
  }
  return out;
}

/// Draws Z-Y-X Euler-angle and translation errors and chains them along the
/// trajectory (errors accumulate). Pose 0 is left unperturbed.
inline std::vector<Pose> perturb(const std::vector<Pose>& trajectory, const NoiseSpec& noise) {
  if (noise.sigma_rot < 0.0 || noise.sigma_trans < 0.0) {
    throw InvalidInput("noise sigmas must be non-negative");
  }
  if (noise.sigma_rot == 0.0 && noise.sigma_trans == 0.0) return trajectory;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Pose> errors(trajectory.size());
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const double yaw = deg_to_rad(noise.sigma_rot * normal(rng));
    const double pitch = deg_to_rad(noise.sigma_rot * normal(rng));
    const double roll = deg_to_rad(noise.sigma_rot * normal(rng));
    errors[i].rotation = rotation_from_euler_zyx(yaw, pitch, roll);
    for (int a = 0; a < 3; ++a) errors[i].translation[a] = noise.sigma_trans * normal(rng);
  }
  return perturb_with_errors(trajectory, errors);
}

/// Initial global planes: fit each plane at the first pose that observes it
/// and map the fit to the global frame with that pose's (perturbed) value.
inline std::vector<PlaneCP> initialize_planes(const ProblemGraph& graph,
                                              const std::vector<Pose>& poses) {
  if (poses.size() != graph.poses.size()) throw LengthMismatch("pose count differs from graph");
  std::vector<const Observation*> first(graph.planes.size(), nullptr);
  for (const auto& obs : graph.observations) {
    const Observation*& f = first[obs.plane_index];
    if (f == nullptr || obs.pose_index < f->pose_index) f = &obs;
  }
  std::vector<PlaneCP> cps;
  cps.reserve(graph.planes.size());
  for (std::size_t j = 0; j < first.size(); ++j) {
    if (first[j] == nullptr) throw InvalidInput("plane " + std::to_string(j) + " never observed");
    const PlaneHesse local = fit_plane(std::span<const Vec3>(first[j]->points));
    const PlaneHesse global = transform_plane(pose_inverse(poses[first[j]->pose_index]), local);
    cps.push_back(plane_to_cp(global));
  }
  return cps;
}

/// Perturbed poses plus planes initialized from them.
inline ProblemState make_initial_state(const ProblemGraph& graph, const NoiseSpec& noise) {
  ProblemState s;
  s.poses = perturb(graph.poses, noise);
  s.plane_cps = initialize_planes(graph, s.poses);
  return s;
}

}  // namespace pba

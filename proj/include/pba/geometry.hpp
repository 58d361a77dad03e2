#pragma once

#include <cmath>
#include <span>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "pba/errors.hpp"

namespace pba {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Smallest closest-point norm accepted before a plane is treated as passing
/// through the origin.
inline constexpr double kCpEpsilon = 1e-8;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Cross-product matrix: skew(a) * b == a.cross(b).
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues exponential map exp([w]x). Uses the Taylor expansion of the
/// coefficients near zero so tiny increments stay accurate.
inline Mat3 rotation_from_angle_axis(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(w);
  return Mat3::Identity() + a * k + b * k * k;
}

/// Rotation angle in [0, pi] of the angle-axis representation of `r`.
/// atan2 form stays well conditioned near both 0 and pi.
inline double rotation_angle(const Mat3& r) {
  const Vec3 axis_sin(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * axis_sin.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

/// Intrinsic Z-Y-X Euler angles (radians) to a rotation: Rz(yaw) Ry(pitch) Rx(roll).
inline Mat3 rotation_from_euler_zyx(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
          Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

/// Nearest rotation in the Frobenius sense.
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Rigid transform from a sensor frame into the global frame: x_g = R x_s + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
};

/// Applies b first, then a.
inline Pose pose_compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline Pose pose_inverse(const Pose& a) {
  const Mat3 rt = a.rotation.transpose();
  return {rt, -(rt * a.translation)};
}

inline Vec3 pose_apply(const Pose& a, const Vec3& p) {
  return a.rotation * p + a.translation;
}

/// Plane n.x + d = 0 with unit normal. Canonical form has offset <= 0; when
/// the offset is exactly zero the first nonzero normal component is positive.
struct PlaneHesse {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  [[nodiscard]] PlaneHesse canonical() const {
    bool flip = offset > 0.0;
    if (offset == 0.0) {
      for (int k = 0; k < 3; ++k) {
        if (normal[k] != 0.0) {
          flip = normal[k] < 0.0;
          break;
        }
      }
    }
    return flip ? PlaneHesse{-normal, -offset} : *this;
  }

  [[nodiscard]] double signed_distance(const Vec3& p) const {
    return normal.dot(p) + offset;
  }
};

/// Closest-point encoding cp = offset * normal.
struct PlaneCP {
  Vec3 cp = Vec3::Zero();
};

inline PlaneCP plane_to_cp(const PlaneHesse& p) {
  if (p.offset == 0.0) {
    throw DegeneratePlane("plane passes through the origin; CP vector undefined");
  }
  return {p.offset * p.normal};
}

inline PlaneHesse cp_to_plane(const PlaneCP& c, double eps = kCpEpsilon) {
  const double norm = c.cp.norm();
  if (!(norm >= eps)) {
    throw DegeneratePlane("CP vector norm below threshold; plane at the origin");
  }
  return {-c.cp / norm, -norm};
}

/// Expresses a global-frame plane in the frame of `pose` (pi_s = T^T pi_g).
inline PlaneHesse transform_plane(const Pose& pose, const PlaneHesse& global_plane) {
  const Vec3 n = pose.rotation.transpose() * global_plane.normal;
  const double d = global_plane.normal.dot(pose.translation) + global_plane.offset;
  return PlaneHesse{n, d}.canonical();
}

/// Signed distance of the sensor point `point` (mapped to the global frame by
/// `pose`) from the global plane.
inline double point_to_plane_residual(const Pose& pose, const PlaneHesse& plane,
                                      const Vec3& point) {
  return plane.normal.dot(pose.rotation * point + pose.translation) + plane.offset;
}

/// Total-least-squares plane through `points`.
inline PlaneHesse fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) {
    throw DegenerateFit("plane fit needs at least 3 points");
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 q = p - centroid;
    cov.noalias() += q * q.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3& ev = eig.eigenvalues();  // ascending
  if (ev[1] - ev[0] <= 1e-12 * ev[2]) {
    throw DegenerateFit("points are coincident or collinear");
  }
  const Vec3 n = eig.eigenvectors().col(0).normalized();
  return PlaneHesse{n, -n.dot(centroid)}.canonical();
}

}  // namespace pba

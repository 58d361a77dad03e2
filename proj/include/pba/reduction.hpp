#pragma once

// Point-to-plane residuals of one observation factor as delta = C * nu, where
// the K x 13 coefficient matrix C depends only on the measured points and the
// 13-vector nu only on the pose and plane. C has just four distinct columns
// (x, y, z, 1), so a thin QR of those columns E = Q U gives C = Q M with M of
// at most 4 rows. Because Q has orthonormal columns, M can stand in for C in
// every product the normal equations need (J^T J, J^T delta, ||delta||^2).

#include <algorithm>
#include <array>
#include <span>

#include <Eigen/Core>
#include <Eigen/QR>

#include "pba/geometry.hpp"
#include "pba/problem.hpp"

namespace pba {

inline constexpr int kCoeffs = 13;
inline constexpr int kPoseDof = 6;
inline constexpr int kPlaneDof = 3;
inline constexpr int kMaxReducedRows = 4;

using CoefficientRow = Eigen::Matrix<double, 1, kCoeffs>;
using CoefficientMatrix = Eigen::Matrix<double, Eigen::Dynamic, kCoeffs, Eigen::RowMajor>;
using ReducedMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, kCoeffs, Eigen::RowMajor, kMaxReducedRows, kCoeffs>;

/// Which generator column (x=0, y=1, z=2, one=3) each of the 13 coefficient
/// slots copies.
inline constexpr std::array<int, kCoeffs> kSlotSource = {0, 1, 2, 0, 1, 2, 0, 1, 2, 3, 3, 3, 3};

inline CoefficientRow coefficient_row(const Vec3& p) {
  CoefficientRow c;
  c << p.x(), p.y(), p.z(), p.x(), p.y(), p.z(), p.x(), p.y(), p.z(), 1.0, 1.0, 1.0, 1.0;
  return c;
}

inline CoefficientMatrix build_coefficients(std::span<const Vec3> points) {
  CoefficientMatrix c(static_cast<Eigen::Index>(points.size()), kCoeffs);
  for (std::size_t k = 0; k < points.size(); ++k) {
    c.row(static_cast<Eigen::Index>(k)) = coefficient_row(points[k]);
  }
  return c;
}

/// E = [x y z 1], the K x 4 matrix of distinct coefficient columns.
inline Eigen::Matrix<double, Eigen::Dynamic, 4> generator_columns(std::span<const Vec3> points) {
  Eigen::Matrix<double, Eigen::Dynamic, 4> e(static_cast<Eigen::Index>(points.size()), 4);
  for (std::size_t k = 0; k < points.size(); ++k) {
    e.row(static_cast<Eigen::Index>(k)) << points[k].x(), points[k].y(), points[k].z(), 1.0;
  }
  return e;
}

/// Compressed coefficient matrix of one observation: C = Q * m with
/// Q^T Q = I and m of r = min(K, 4) rows.
struct ReducedBlock {
  ReducedMatrix m;
  int pose_index = 0;
  int plane_index = 0;

  [[nodiscard]] Eigen::Index rows() const { return m.rows(); }
};

/// Spreads the r x 4 triangular factor U over the 13 coefficient slots.
inline ReducedMatrix expand_generators(const Eigen::Ref<const Eigen::MatrixXd>& u) {
  ReducedMatrix m(u.rows(), kCoeffs);
  for (int s = 0; s < kCoeffs; ++s) m.col(s) = u.col(kSlotSource[s]);
  return m;
}

/// Both factors of the thin QR of E. Only verification code needs Q; the
/// solver keeps the expanded U alone (see factorize()).
struct ThinQr {
  Eigen::MatrixXd q;                         // K x r, orthonormal columns
  Eigen::Matrix<double, Eigen::Dynamic, 4> u;  // r x 4, upper triangular
};

inline ThinQr thin_qr(std::span<const Vec3> points) {
  const Eigen::Index k = static_cast<Eigen::Index>(points.size());
  const Eigen::Index r = std::min<Eigen::Index>(k, 4);
  Eigen::HouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 4>> qr(generator_columns(points));
  ThinQr out;
  out.u = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  out.q = qr.householderQ() * Eigen::MatrixXd::Identity(k, r);
  return out;
}

/// One-time factorization of an observation's coefficient matrix. Householder
/// QR is defined for any rank of E, so duplicated, collinear and coplanar
/// point sets are all handled.
inline ReducedBlock factorize(std::span<const Vec3> points) {
  const Eigen::Index r = std::min<Eigen::Index>(static_cast<Eigen::Index>(points.size()), 4);
  Eigen::HouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 4>> qr(generator_columns(points));
  const Eigen::MatrixXd u = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  return ReducedBlock{expand_generators(u), 0, 0};
}

inline ReducedBlock factorize(const Observation& obs) {
  ReducedBlock b = factorize(std::span<const Vec3>(obs.points));
  b.pose_index = obs.pose_index;
  b.plane_index = obs.plane_index;
  return b;
}

/// nu and its derivatives for one (pose, plane) pair.
///
/// Layout of nu: slot 3a+b holds R(a,b) n(a) for a,b in {0,1,2}; slot 9+a holds
/// n(a) t(a); slot 12 holds d. The pose increment is [theta; tau] with
/// R <- R exp([theta]x), t <- t + tau. The plane increment is additive on cp.
struct StateCoefficients {
  Eigen::Matrix<double, kCoeffs, 1> nu;
  Eigen::Matrix<double, kCoeffs, kPoseDof> v_pose;
  Eigen::Matrix<double, kCoeffs, kPlaneDof> v_plane;
};

inline Eigen::Matrix<double, kCoeffs, 1> coefficient_vector(const Pose& pose,
                                                            const PlaneHesse& plane) {
  Eigen::Matrix<double, kCoeffs, 1> nu;
  const Vec3& n = plane.normal;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) nu(3 * a + b) = pose.rotation(a, b) * n(a);
    nu(9 + a) = n(a) * pose.translation(a);
  }
  nu(12) = plane.offset;
  return nu;
}

inline StateCoefficients state_coefficients(const Pose& pose, const PlaneCP& plane_cp) {
  const PlaneHesse plane = cp_to_plane(plane_cp);
  const Vec3& n = plane.normal;
  const Mat3& r = pose.rotation;
  const Vec3& t = pose.translation;

  StateCoefficients sc;
  sc.nu = coefficient_vector(pose, plane);

  // d(R exp([theta]x))/d theta_c at theta = 0 is R [e_c]x.
  sc.v_pose.setZero();
  for (int c = 0; c < 3; ++c) {
    const Mat3 dr = r * skew(Vec3::Unit(c));
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) sc.v_pose(3 * a + b, c) = dr(a, b) * n(a);
    }
  }
  for (int a = 0; a < 3; ++a) sc.v_pose(9 + a, 3 + a) = n(a);

  // n = -cp/|cp|, d = -|cp|.
  const double norm = plane_cp.cp.norm();
  const Mat3 dn = -(Mat3::Identity() - n * n.transpose()) / norm;
  for (int c = 0; c < 3; ++c) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) sc.v_plane(3 * a + b, c) = r(a, b) * dn(a, c);
      sc.v_plane(9 + a, c) = t(a) * dn(a, c);
    }
    sc.v_plane(12, c) = n(c);
  }
  return sc;
}

/// Reduced Jacobian rows and residual of one observation. `j_pose` has zero
/// rows for the anchor pose, which carries no variables.
struct ReducedSystemBlocks {
  bool has_pose = true;
  Eigen::Matrix<double, Eigen::Dynamic, kPoseDof, 0, kMaxReducedRows, kPoseDof> j_pose;
  Eigen::Matrix<double, Eigen::Dynamic, kPlaneDof, 0, kMaxReducedRows, kPlaneDof> j_plane;
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxReducedRows, 1> delta_r;
};

inline ReducedSystemBlocks reduced_blocks(const ReducedBlock& block,
                                          const StateCoefficients& coeffs, bool is_anchor) {
  ReducedSystemBlocks out;
  out.has_pose = !is_anchor;
  if (is_anchor) {
    out.j_pose.resize(0, kPoseDof);
  } else {
    out.j_pose.noalias() = block.m * coeffs.v_pose;
  }
  out.j_plane.noalias() = block.m * coeffs.v_plane;
  out.delta_r.noalias() = block.m * coeffs.nu;
  return out;
}

/// Unreduced K-row counterpart of ReducedSystemBlocks (the direct method).
struct FullSystemBlocks {
  bool has_pose = true;
  Eigen::Matrix<double, Eigen::Dynamic, kPoseDof> j_pose;
  Eigen::Matrix<double, Eigen::Dynamic, kPlaneDof> j_plane;
  Eigen::VectorXd delta;
};

inline FullSystemBlocks full_blocks(std::span<const Vec3> points,
                                    const StateCoefficients& coeffs, bool is_anchor) {
  const CoefficientMatrix c = build_coefficients(points);
  FullSystemBlocks out;
  out.has_pose = !is_anchor;
  if (is_anchor) {
    out.j_pose.resize(0, kPoseDof);
  } else {
    out.j_pose.noalias() = c * coeffs.v_pose;
  }
  out.j_plane.noalias() = c * coeffs.v_plane;
  out.delta.noalias() = c * coeffs.nu;
  return out;
}

}  // namespace pba

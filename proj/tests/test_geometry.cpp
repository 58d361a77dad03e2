#include <gtest/gtest.h>

#include "test_util.hpp"

namespace pba {
namespace {

using testing::Rng;

// Hamilton-product rotation of a vector by the quaternion of angle-axis w.
Vec3 quaternion_rotate(const Vec3& w, const Vec3& p) {
  const double theta = w.norm();
  if (theta == 0.0) return p;
  const Vec3 axis = w / theta;
  const double qw = std::cos(theta / 2);
  const Vec3 qv = std::sin(theta / 2) * axis;
  // q * (0, p) * conj(q)
  const double tw = -qv.dot(p);
  const Vec3 tv = qw * p + qv.cross(p);
  return -tw * qv + qw * tv - tv.cross(qv);
}

TEST(RotationFromAngleAxis, ZeroIsIdentity) {
  EXPECT_EQ(rotation_from_angle_axis(Vec3::Zero()), Mat3::Identity());
}

TEST(RotationFromAngleAxis, QuarterTurnAboutZ) {
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((rotation_from_angle_axis(Vec3(0, 0, kPi / 2)) - expected).norm(), 1e-15);
}

TEST(RotationFromAngleAxis, MatchesQuaternionOracle) {
  const Vec3 w(0.3, -0.2, 0.1);
  const Mat3 r = rotation_from_angle_axis(w);
  EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-12);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  EXPECT_NEAR(rotation_angle(r), w.norm(), 1e-12);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LT((r.col(c) - quaternion_rotate(w, Vec3::Unit(c))).norm(), 1e-14);
  }
}

TEST(RotationFromAngleAxis, RandomRotationsAgreeWithQuaternionsAndInvert) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 v = testing::random_unit(rng);
    const double theta = testing::uniform(rng, 0.0, 3.1);
    const Vec3 w = theta * v;
    const Vec3 p = testing::random_vec(rng, 5.0);
    const Mat3 r = rotation_from_angle_axis(w);
    ASSERT_LT((r * p - quaternion_rotate(w, p)).norm(), 1e-12 * (1 + p.norm()));
    ASSERT_LT((r * rotation_from_angle_axis(-w) - Mat3::Identity()).norm(), 1e-12);
    ASSERT_NEAR(rotation_angle(r), theta, 1e-9);
  }
}

TEST(RotationFromAngleAxis, TinyAnglesUseSeriesWithoutLoss) {
  const Vec3 w(1e-9, -2e-9, 3e-9);
  const Mat3 r = rotation_from_angle_axis(w);
  EXPECT_LT((r - (Mat3::Identity() + skew(w))).norm(), 1e-17);
}

TEST(RotationAngle, RobustNearPi) {
  const Vec3 axis = Vec3(1, 2, -1).normalized();
  for (double theta : {kPi - 1e-7, kPi, 1e-8}) {
    const Mat3 r = Eigen::AngleAxisd(theta, axis).toRotationMatrix();
    EXPECT_NEAR(rotation_angle(r), theta, 1e-7);
  }
}

TEST(Pose, ComposeWithIdentity) {
  Rng rng(3);
  const Pose p = testing::random_pose(rng);
  const Pose c = pose_compose(Pose::identity(), p);
  EXPECT_EQ(c.rotation, p.rotation);
  EXPECT_EQ(c.translation, p.translation);
}

TEST(Pose, ComposeWithInverseIsIdentity) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose p = testing::random_pose(rng);
    const Pose c = pose_compose(p, pose_inverse(p));
    EXPECT_LT((c.rotation - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LT(c.translation.norm(), 1e-12);
  }
}

TEST(Pose, ApplyQuarterTurnAndShift) {
  const Pose p{rotation_from_angle_axis(Vec3(0, 0, kPi / 2)), Vec3(1, 0, 0)};
  EXPECT_LT(pose_apply(p, Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(Pose, ComposeAppliesRightOperandFirst) {
  Rng rng(5);
  const Pose a = testing::random_pose(rng);
  const Pose b = testing::random_pose(rng);
  const Vec3 x = testing::random_vec(rng);
  EXPECT_LT((pose_apply(pose_compose(a, b), x) - pose_apply(a, pose_apply(b, x))).norm(), 1e-12);
}

TEST(PlaneCp, ForwardAndBack) {
  const PlaneCP cp = plane_to_cp({Vec3(0, 0, 1), -2.0});
  EXPECT_EQ(cp.cp, Vec3(0, 0, -2));
  const PlaneHesse p = cp_to_plane({Vec3(0, 0, -2)});
  EXPECT_EQ(p.normal, Vec3(0, 0, 1));
  EXPECT_EQ(p.offset, -2.0);
}

TEST(PlaneCp, PlaneThroughOriginIsDegenerate) {
  EXPECT_THROW(plane_to_cp({Vec3(1, 0, 0), 0.0}), DegeneratePlane);
  EXPECT_THROW(cp_to_plane({Vec3(1e-9, 0, 0)}), DegeneratePlane);
  EXPECT_THROW(cp_to_plane({Vec3(std::nan(""), 0, 0)}), DegeneratePlane);
}

TEST(PlaneCp, RoundTripsAreIdentity) {
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const PlaneHesse p = testing::random_plane(rng);
    const PlaneHesse q = cp_to_plane(plane_to_cp(p));
    ASSERT_LT((q.normal - p.normal).norm(), 1e-12);
    ASSERT_NEAR(q.offset, p.offset, 1e-12);

    const Vec3 cp = testing::random_vec(rng, 4.0);
    if (cp.norm() < kCpEpsilon) continue;
    ASSERT_LT((plane_to_cp(cp_to_plane({cp})).cp - cp).norm(), 1e-12 * (1 + cp.norm()));
  }
}

TEST(PlaneHesse, CanonicalSign) {
  const PlaneHesse flipped = PlaneHesse{Vec3(0, 0, -1), 2.0}.canonical();
  EXPECT_EQ(flipped.normal, Vec3(0, 0, 1));
  EXPECT_EQ(flipped.offset, -2.0);
  const PlaneHesse zero = PlaneHesse{Vec3(0, -1, 0), 0.0}.canonical();
  EXPECT_EQ(zero.normal, Vec3(0, 1, 0));
}

TEST(TransformPlane, IdentityPoseKeepsPlane) {
  const PlaneHesse p{Vec3(0.6, 0, 0.8), -3.0};
  const PlaneHesse q = transform_plane(Pose::identity(), p);
  EXPECT_EQ(q.normal, p.normal);
  EXPECT_EQ(q.offset, p.offset);
}

TEST(TransformPlane, TranslationShiftsOffset) {
  const PlaneHesse q = transform_plane({Mat3::Identity(), Vec3(0, 0, 1)}, {Vec3(0, 0, 1), -2.0});
  EXPECT_LT((q.normal - Vec3(0, 0, 1)).norm(), 1e-15);
  EXPECT_NEAR(q.offset, -1.0, 1e-15);
}

TEST(TransformPlane, SensorFramePointsLieOnTransformedPlane) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose pose = testing::random_pose(rng);
    const PlaneHesse plane = testing::random_plane(rng);
    const PlaneHesse local = transform_plane(pose, plane);
    EXPECT_NEAR(local.normal.norm(), 1.0, 1e-12);
    EXPECT_LE(local.offset, 0.0);
    const auto pts = testing::plane_points_in_sensor(rng, pose, plane, 10, 0.0);
    for (const Vec3& p : pts) ASSERT_NEAR(local.signed_distance(p), 0.0, 1e-10);
  }
}

TEST(PointToPlaneResidual, Examples) {
  EXPECT_EQ(point_to_plane_residual(Pose::identity(), {Vec3(0, 0, 1), 0.0}, Vec3(1, 2, 3)), 3.0);
  EXPECT_EQ(point_to_plane_residual(Pose::identity(), {Vec3(0, 0, 1), -2.0}, Vec3(5, 7, 2)), 0.0);
  const Pose p{rotation_from_angle_axis(Vec3(0, 0, kPi / 2)), Vec3(1, 0, 0)};
  EXPECT_NEAR(point_to_plane_residual(p, {Vec3(1, 0, 0), 0.0}, Vec3(0, 1, 0)), 0.0, 1e-15);
}

TEST(PointToPlaneResidual, InvariantUnderGlobalRigidChange) {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Pose pose = testing::random_pose(rng);
    const PlaneHesse plane = testing::random_plane(rng);
    const Vec3 p = testing::random_vec(rng, 3.0);
    const Pose g = testing::random_pose(rng, 50.0);
    const double before = point_to_plane_residual(pose, plane, p);
    const double after = point_to_plane_residual(pose_compose(g, pose),
                                                 transform_plane(pose_inverse(g), plane), p);
    // The canonical form may flip (n, d); the magnitude is what is invariant.
    ASSERT_NEAR(std::abs(after), std::abs(before), 1e-10 * (1 + std::abs(before)));
  }
}

TEST(FitPlane, ExactSquare) {
  const std::vector<Vec3> pts{{0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
  const PlaneHesse p = fit_plane(pts);
  EXPECT_LT((p.normal - Vec3(0, 0, 1)).norm(), 1e-12);
  EXPECT_NEAR(p.offset, -1.0, 1e-12);
}

TEST(FitPlane, DegenerateInputs) {
  const std::vector<Vec3> same(3, Vec3(1, 2, 3));
  EXPECT_THROW(fit_plane(same), DegenerateFit);
  const std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  EXPECT_THROW(fit_plane(line), DegenerateFit);
  const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(fit_plane(two), DegenerateFit);
}

TEST(FitPlane, ExactCoplanarHasZeroResidual) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const PlaneHesse truth = testing::random_plane(rng);
    const auto pts = testing::plane_points_in_sensor(rng, Pose::identity(), truth, 20, 0.0);
    const PlaneHesse fit = fit_plane(pts);
    for (const Vec3& p : pts) ASSERT_NEAR(fit.signed_distance(p), 0.0, 1e-10);
  }
}

TEST(FitPlane, NoisySamplesRecoverNormalAndMatchSvdOracle) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const PlaneHesse truth = testing::random_plane(rng);
    const auto pts = testing::plane_points_in_sensor(rng, Pose::identity(), truth, 100, 0.01);
    const PlaneHesse fit = fit_plane(pts);
    EXPECT_LT(rad_to_deg(std::acos(std::min(1.0, std::abs(fit.normal.dot(truth.normal))))), 1.0);

    Eigen::MatrixX3d centered(pts.size(), 3);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) centered.row(k) = pts[k] - mean;
    Eigen::JacobiSVD<Eigen::MatrixX3d> svd(centered, Eigen::ComputeFullV);
    const Vec3 oracle = svd.matrixV().col(2);
    EXPECT_NEAR(std::abs(oracle.dot(fit.normal)), 1.0, 1e-10);
  }
}

}  // namespace
}  // namespace pba

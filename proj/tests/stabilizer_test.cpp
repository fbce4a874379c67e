#include "flam/stabilizer.hpp"

#include <gtest/gtest.h>

#include <random>

#include "flam/models.hpp"
#include "test_util.hpp"

namespace flam {
namespace {

std::shared_ptr<const BalanceProjectionReconstructor> make_reference(
    StabilizerConfig cfg = {}, int max_len = 145) {
  return std::make_shared<BalanceProjectionReconstructor>(
      canonical_human_skeleton(), cfg, max_len);
}

TEST(SupportPolygon, SingleFootBecomesDisc) {
  const auto human = canonical_human_skeleton();
  std::vector<JointPose> fk(human->joint_count());
  for (auto& p : fk) p.position = Vec3(5.0, 5.0, 5.0);  // park everything away
  const int foot = *human->foot_joints().begin();
  fk[foot].position = Vec3(0.0, 0.0, 0.3);
  // a one-foot skeleton view: use only that foot
  std::vector<JointSpec> joints(1);
  joints[0] = {"foot", kRootParent, JointKind::Fixed, Vec3::Zero(), Vec3::Zero()};
  const SkeletonSpec one({joints[0]}, {1.0}, {0});
  std::vector<JointPose> one_fk(1);
  one_fk[0].position = Vec3(0.0, 0.0, 0.3);
  const SupportPolygon poly = support_polygon(one, one_fk, 0.1);
  EXPECT_EQ(poly.vertices.size(), 16u);
  for (const Vec2& v : poly.vertices) EXPECT_NEAR(v.norm(), 0.1, 1e-12);
  EXPECT_TRUE(poly.contains(Vec2(0.0, 0.0), 1e-12));
  EXPECT_FALSE(poly.contains(Vec2(0.2, 0.0), 1e-6));
}

TEST(SupportPolygon, TwoFeetSpan) {
  std::vector<JointSpec> joints(2);
  joints[0] = {"a", kRootParent, JointKind::Fixed, Vec3::Zero(), Vec3::Zero()};
  joints[1] = {"b", 0, JointKind::Fixed, Vec3::Zero(), Vec3::Zero()};
  const SkeletonSpec feet2(joints, {1.0, 1.0}, {0, 1});
  std::vector<JointPose> fk(2);
  fk[0].position = Vec3(-0.2, 0.0, 0.0);
  fk[1].position = Vec3(0.2, 0.0, 0.0);
  const SupportPolygon poly = support_polygon(feet2, fk, 0.05);
  double lo = 1e9, hi = -1e9;
  for (const Vec2& v : poly.vertices) {
    lo = std::min(lo, v[0]);
    hi = std::max(hi, v[0]);
  }
  EXPECT_NEAR(lo, -0.25, 1e-12);
  EXPECT_NEAR(hi, 0.25, 1e-12);
}

TEST(SupportPolygon, ColinearFeetDegenerateHullStillAnswers) {
  std::vector<JointSpec> joints(3);
  joints[0] = {"a", kRootParent, JointKind::Fixed, Vec3::Zero(), Vec3::Zero()};
  joints[1] = {"b", 0, JointKind::Fixed, Vec3::Zero(), Vec3::Zero()};
  joints[2] = {"c", 1, JointKind::Fixed, Vec3::Zero(), Vec3::Zero()};
  const SkeletonSpec feet3(joints, {1.0, 1.0, 1.0}, {0, 1, 2});
  std::vector<JointPose> fk(3);
  fk[0].position = Vec3(-0.3, 0.0, 0.0);
  fk[1].position = Vec3(0.0, 0.0, 0.0);
  fk[2].position = Vec3(0.3, 0.0, 0.0);
  const SupportPolygon poly = support_polygon(feet3, fk, 0.0);
  ASSERT_EQ(poly.vertices.size(), 2u);  // segment
  EXPECT_TRUE(poly.contains(Vec2(0.1, 0.0), 1e-9));
  EXPECT_FALSE(poly.contains(Vec2(0.0, 0.2), 1e-6));
  EXPECT_NEAR(poly.signed_distance(Vec2(0.0, 0.2)), 0.2, 1e-12);
}

TEST(SupportPolygon, ClosestPointMatchesBruteForce) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 7; ++i) pts.emplace_back(u(rng), u(rng));
    const SupportPolygon poly{convex_hull(pts)};
    if (poly.vertices.size() < 3) continue;
    const Vec2 p(2.0 * u(rng), 2.0 * u(rng));
    const Vec2 got = poly.closest_boundary_point(p);
    const Vec2 want = test::closest_boundary_point_oracle(poly.vertices, p);
    EXPECT_LT((got - want).norm(), 1e-3);  // oracle is sampled
    EXPECT_NEAR((got - p).norm(), (want - p).norm(), 1e-6);
  }
}

TEST(SupportPolygon, ErodedPolygonShrinksByMargin) {
  // unit square
  SupportPolygon poly{{Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)}};
  const SupportPolygon inner = poly.eroded(0.1);
  ASSERT_EQ(inner.vertices.size(), 4u);
  for (const Vec2& v : inner.vertices) {
    EXPECT_GE(v[0], 0.1 - 1e-12);
    EXPECT_LE(v[0], 0.9 + 1e-12);
    EXPECT_GE(v[1], 0.1 - 1e-12);
    EXPECT_LE(v[1], 0.9 + 1e-12);
  }
  // over-eroding collapses to the centroid
  const SupportPolygon gone = poly.eroded(2.0);
  ASSERT_EQ(gone.vertices.size(), 1u);
  EXPECT_LT((gone.vertices[0] - Vec2(0.5, 0.5)).norm(), 1e-9);
}

// -- identity implementation -------------------------------------------------

TEST(IdentityReconstructor, BitIdenticalOutput) {
  const auto human = canonical_human_skeleton();
  std::mt19937_64 rng(32);
  const TrajectorySegment seg = test::make_noisy_segment(*human, 24, rng);
  const IdentityReconstructor identity(145);
  const TrajectorySegment out = identity.reconstruct(seg);
  ASSERT_EQ(out.length(), seg.length());
  for (int f = 0; f < seg.length(); ++f) {
    EXPECT_EQ(out.poses[f].root_translation, seg.poses[f].root_translation);
    EXPECT_EQ(out.poses[f].root_orientation.coeffs(),
              seg.poses[f].root_orientation.coeffs());
    for (size_t r = 0; r < seg.poses[f].joint_rotations.size(); ++r) {
      if (const double* a = std::get_if<double>(&seg.poses[f].joint_rotations[r]))
        EXPECT_EQ(std::get<double>(out.poses[f].joint_rotations[r]), *a);
      else
        EXPECT_EQ(std::get<Quat>(out.poses[f].joint_rotations[r]).coeffs(),
                  std::get<Quat>(seg.poses[f].joint_rotations[r]).coeffs());
    }
  }
}

TEST(IdentityReconstructor, LengthContractEnforced) {
  const auto human = canonical_human_skeleton();
  const IdentityReconstructor identity(10);
  std::mt19937_64 rng(33);
  const TrajectorySegment too_long = test::make_noisy_segment(*human, 11, rng);
  EXPECT_THROW(identity.reconstruct(too_long), ContractError);
  const TrajectorySegment empty;
  EXPECT_THROW(identity.reconstruct(empty), ContractError);
}

// -- reference implementation --------------------------------------------------

TEST(Reference, StableSmoothSegmentIsFixedPoint) {
  const auto ref = make_reference();
  // temporally constant zero pose: CoM inside the shrunk polygon by symmetry
  TrajectorySegment seg;
  for (int f = 0; f < 20; ++f) seg.poses.push_back(zero_pose(ref->skeleton()));
  ASSERT_LT(ref->com_violation(seg.poses[0]), 1e-12);
  const TrajectorySegment out = ref->reconstruct(seg);
  EXPECT_LT(test::max_component_difference(out, seg), 1e-6);
}

TEST(Reference, LengthPreservedOnNoisySegments) {
  const auto ref = make_reference();
  std::mt19937_64 rng(34);
  for (int len : {8, 17, 64, 145}) {
    const TrajectorySegment seg =
        test::make_noisy_segment(ref->skeleton(), len, rng);
    EXPECT_EQ(ref->reconstruct(seg).length(), len);
  }
}

TEST(Reference, SegmentLengthContract) {
  StabilizerConfig cfg;
  cfg.min_length = 8;
  const auto ref = make_reference(cfg, 145);
  std::mt19937_64 rng(35);
  EXPECT_THROW(
      ref->reconstruct(test::make_noisy_segment(ref->skeleton(), 7, rng)),
      ContractError);
  EXPECT_THROW(
      ref->reconstruct(test::make_noisy_segment(ref->skeleton(), 146, rng)),
      ContractError);
}

TEST(Reference, NonFinitePoseRejected) {
  const auto ref = make_reference();
  TrajectorySegment seg;
  for (int f = 0; f < 10; ++f) seg.poses.push_back(zero_pose(ref->skeleton()));
  seg.poses[3].root_translation[0] = std::nan("");
  EXPECT_THROW(ref->reconstruct(seg), InputError);
}

TEST(Reference, ComViolationProjectedOut) {
  // lean a constant segment until the CoM sits ~0.1 m outside the raw
  // support polygon, then check the projection lands the CoM on the shrunk
  // polygon boundary at the closest point.
  const auto ref = make_reference();
  const SkeletonSpec& human = ref->skeleton();
  const double margin = ref->config().com_margin;

  auto leaned_pose = [&](double hip_angle) {
    Pose p = zero_pose(human);
    for (const char* name : {"l_hip", "r_hip"}) {
      const int r = human.rotation_index(human.joint_index(name));
      p.joint_rotations[r] = quat_from_axis_angle(Vec3::UnitY(), hip_angle);
    }
    return p;
  };
  auto raw_violation = [&](const Pose& p) {
    const auto fk = forward_kinematics(human, p);
    const SupportPolygon poly =
        support_polygon(human, fk, ref->config().foot_extent);
    const Vec3 com = center_of_mass(human, fk);
    return poly.signed_distance(Vec2(com[0], com[1]));
  };

  // bisect the hip lean for a 0.1 m raw violation
  double lo = 0.0, hi = 0.6;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (raw_violation(leaned_pose(mid)) < 0.1 ? lo : hi) = mid;
  }
  const Pose leaned = leaned_pose(0.5 * (lo + hi));
  ASSERT_NEAR(raw_violation(leaned), 0.1, 1e-6);

  TrajectorySegment seg;
  for (int f = 0; f < 12; ++f) seg.poses.push_back(leaned);
  const TrajectorySegment out = ref->reconstruct(seg);

  const auto fk_in = forward_kinematics(human, seg.poses[5]);
  const auto fk_out = forward_kinematics(human, out.poses[5]);
  const Vec3 com_in = center_of_mass(human, fk_in);
  const Vec3 com_out = center_of_mass(human, fk_out);
  const Vec2 shift(com_out[0] - com_in[0], com_out[1] - com_in[1]);

  EXPECT_LE(ref->com_violation(out.poses[5]), 1e-6);
  EXPECT_LE(shift.norm(), 0.1 + margin + 2e-5);

  // closest-point oracle: the CoM lands at the nearest point of the shrunk
  // polygon (feet stay planted, so the polygon is the input's)
  const SupportPolygon eroded =
      support_polygon(human, fk_in, ref->config().foot_extent).eroded(margin);
  const Vec2 want =
      test::closest_boundary_point_oracle(eroded.vertices, Vec2(com_in[0], com_in[1]));
  EXPECT_LT((Vec2(com_out[0], com_out[1]) - want).norm(), 2e-3);

  // feet planted through the correction
  for (int foot : human.foot_joints()) {
    EXPECT_LT((fk_out[foot].position - fk_in[foot].position).head<2>().norm(),
              1e-6);
  }
}

TEST(Reference, FarViolationRootShiftEqualsCap) {
  StabilizerConfig cfg;
  cfg.max_root_correction = 0.15;
  const auto ref = make_reference(cfg);
  const SkeletonSpec& human = ref->skeleton();

  Pose p = zero_pose(human);
  for (const char* name : {"l_hip", "r_hip"}) {
    const int r = human.rotation_index(human.joint_index(name));
    p.joint_rotations[r] = quat_from_axis_angle(Vec3::UnitY(), 0.9);
  }
  const auto fk = forward_kinematics(human, p);
  const SupportPolygon poly = support_polygon(human, fk, cfg.foot_extent);
  const Pose out = ref->project_com_to_support(p, poly);
  const Vec3 shift3 = out.root_translation - p.root_translation;
  EXPECT_NEAR(Vec2(shift3[0], shift3[1]).norm(), cfg.max_root_correction, 1e-9);
  EXPECT_EQ(shift3[2], 0.0);
}

TEST(Reference, ProjectInsideIsNoOp) {
  const auto ref = make_reference();
  const Pose p = zero_pose(ref->skeleton());
  const auto fk = forward_kinematics(ref->skeleton(), p);
  const SupportPolygon poly =
      support_polygon(ref->skeleton(), fk, ref->config().foot_extent);
  const Pose out = ref->project_com_to_support(p, poly);
  EXPECT_EQ(out.root_translation, p.root_translation);
}

TEST(Reference, IdempotentOnNoisySegments) {
  const auto ref = make_reference();
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 6; ++trial) {
    const TrajectorySegment seg =
        test::make_noisy_segment(ref->skeleton(), 40, rng);
    const TrajectorySegment once = ref->reconstruct(seg);
    const TrajectorySegment twice = ref->reconstruct(once);
    EXPECT_LT(test::max_component_difference(once, twice), 1e-6);
  }
}

TEST(Reference, BalanceGuaranteeOnNoisySegments) {
  const auto ref = make_reference();
  std::mt19937_64 rng(37);
  int inside = 0, total = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const TrajectorySegment seg =
        test::make_noisy_segment(ref->skeleton(), 40, rng);
    const TrajectorySegment out = ref->reconstruct(seg);
    for (const Pose& p : out.poses) {
      ++total;
      if (ref->com_violation(p) <= 1e-6) ++inside;
    }
  }
  EXPECT_GE(double(inside) / total, 0.99);
}

TEST(Reference, RoughnessDoesNotIncrease) {
  const auto ref = make_reference();
  std::mt19937_64 rng(38);
  for (int trial = 0; trial < 6; ++trial) {
    const TrajectorySegment seg =
        test::make_noisy_segment(ref->skeleton(), 48, rng);
    const TrajectorySegment out = ref->reconstruct(seg);
    EXPECT_LE(temporal_roughness(ref->skeleton(), out),
              temporal_roughness(ref->skeleton(), seg) + 1e-12);
  }
}

TEST(Reference, SmoothingWindowOneLeavesRotationsAlone) {
  StabilizerConfig cfg;
  cfg.smoothing_window = 1;
  cfg.com_margin = 0.0;
  const auto ref = make_reference(cfg);
  std::mt19937_64 rng(39);
  // balanced-but-rough segment: joint noise only on the upper body so the
  // CoM stays above the feet
  TrajectorySegment seg;
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int f = 0; f < 16; ++f) {
    Pose p = zero_pose(ref->skeleton());
    const int elbow = ref->skeleton().rotation_index(
        ref->skeleton().joint_index("l_elbow"));
    p.joint_rotations[elbow] = u(rng);
    seg.poses.push_back(p);
  }
  const TrajectorySegment out = ref->reconstruct(seg);
  EXPECT_LT(test::max_component_difference(out, seg), 1e-9);
}

TEST(Reference, JointLimitsClamp) {
  StabilizerConfig cfg;
  cfg.joint_limits["l_elbow"] = {-0.5, 0.5};
  cfg.joint_limits["l_shoulder"] = {-0.4, 0.4};
  const auto ref = make_reference(cfg);
  const SkeletonSpec& human = ref->skeleton();
  TrajectorySegment seg;
  for (int f = 0; f < 12; ++f) {
    Pose p = zero_pose(human);
    p.joint_rotations[human.rotation_index(human.joint_index("l_elbow"))] = 2.0;
    p.joint_rotations[human.rotation_index(human.joint_index("l_shoulder"))] =
        quat_exp(Vec3(0.9, 0.0, 0.0));
    seg.poses.push_back(p);
  }
  const TrajectorySegment out = ref->reconstruct(seg);
  for (const Pose& p : out.poses) {
    const double elbow = std::get<double>(
        p.joint_rotations[human.rotation_index(human.joint_index("l_elbow"))]);
    EXPECT_LE(elbow, 0.5 + 1e-9);
    const Quat sh = std::get<Quat>(p.joint_rotations[human.rotation_index(
        human.joint_index("l_shoulder"))]);
    EXPECT_LE(quat_log(sh).norm(), 0.4 + 1e-9);
  }
}

TEST(Reference, DiagnosticsReportViolationAndCorrection) {
  const auto ref = make_reference();
  std::mt19937_64 rng(40);
  const TrajectorySegment seg =
      test::make_noisy_segment(ref->skeleton(), 24, rng);
  std::vector<FrameDiagnostics> diag;
  const TrajectorySegment out = ref->reconstruct_diagnosed(seg, &diag);
  ASSERT_EQ(diag.size(), static_cast<size_t>(seg.length()));
  for (int f = 0; f < seg.length(); ++f) {
    EXPECT_NEAR(diag[f].com_violation_distance,
                ref->com_violation(seg.poses[f]), 1e-12);
    const Vec3 d = out.poses[f].root_translation - seg.poses[f].root_translation;
    EXPECT_NEAR(diag[f].correction_magnitude, Vec2(d[0], d[1]).norm(), 1e-12);
  }
}

}  // namespace
}  // namespace flam

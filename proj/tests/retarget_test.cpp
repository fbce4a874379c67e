#include "flam/retarget.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "flam/models.hpp"
#include "test_util.hpp"

namespace flam {
namespace {

std::shared_ptr<const SkeletonSpec> triple_robot() {
  // three revolute joints about x, y, z plus a waist, as a shoulder analog
  std::vector<JointSpec> joints(4);
  joints[0] = {"waist", kRootParent, JointKind::Revolute, Vec3::UnitY(),
               Vec3::Zero()};
  joints[1] = {"sx", 0, JointKind::Revolute, Vec3::UnitX(), Vec3(0, 0, 0.2)};
  joints[2] = {"sy", 1, JointKind::Revolute, Vec3::UnitY(), Vec3::Zero()};
  joints[3] = {"sz", 2, JointKind::Revolute, Vec3::UnitZ(), Vec3::Zero()};
  return std::make_shared<SkeletonSpec>(
      std::move(joints), std::vector<double>{1, 1, 1, 1}, std::set<int>{0});
}

std::shared_ptr<const SkeletonSpec> small_human() {
  std::vector<JointSpec> joints(3);
  joints[0] = {"pelvis", kRootParent, JointKind::Fixed, Vec3::Zero(),
               Vec3::Zero()};
  joints[1] = {"spine", 0, JointKind::Spherical, Vec3::Zero(), Vec3(0, 0, 0.2)};
  joints[2] = {"shoulder", 1, JointKind::Spherical, Vec3::Zero(),
               Vec3(0, 0.2, 0.2)};
  return std::make_shared<SkeletonSpec>(
      std::move(joints), std::vector<double>{1, 1, 1}, std::set<int>{0});
}

MappingTable triple_table() {
  MappingTable t;
  t.robot = triple_robot();
  t.human = small_human();
  t.entries = {
      OneToOne{t.robot->joint_index("waist"), t.human->joint_index("spine")},
      TripleToSpherical{{t.robot->joint_index("sx"), t.robot->joint_index("sy"),
                         t.robot->joint_index("sz")},
                        t.human->joint_index("shoulder")},
  };
  return t;
}

TEST(ValidateMapping, CompleteTableIsClean) {
  EXPECT_TRUE(validate_mapping(triple_table()).empty());
  const auto human = canonical_human_skeleton();
  const MappingTable biped =
      planar_biped_human_mapping(planar_biped_skeleton(), human);
  EXPECT_TRUE(validate_mapping(biped).empty());
  const MappingTable pend =
      pendulum_human_mapping(triple_pendulum_skeleton(), human);
  EXPECT_TRUE(validate_mapping(pend).empty());
}

TEST(ValidateMapping, MissingHumanJointIsNamed) {
  MappingTable t = triple_table();
  t.entries.pop_back();  // drop the shoulder entry
  const auto violations = validate_mapping(t);
  ASSERT_FALSE(violations.empty());
  bool named = false;
  for (const std::string& v : violations)
    if (v.find("shoulder") != std::string::npos &&
        v.find("not covered") != std::string::npos)
      named = true;
  EXPECT_TRUE(named);
}

TEST(ValidateMapping, ParallelTripleAxesAreDegenerate) {
  MappingTable t = triple_table();
  // make sy parallel to sx
  auto joints = t.robot->joints();
  joints[2].axis = Vec3::UnitX();
  t.robot = std::make_shared<SkeletonSpec>(
      std::move(joints), std::vector<double>{1, 1, 1, 1}, std::set<int>{0});
  const auto violations = validate_mapping(t);
  bool degenerate = false;
  for (const std::string& v : violations)
    if (v.find("degenerate axes") != std::string::npos) degenerate = true;
  EXPECT_TRUE(degenerate);
}

TEST(ValidateMapping, DuplicateCoverageReported) {
  MappingTable t = triple_table();
  t.entries.push_back(HumanRedundant{t.human->joint_index("spine")});
  const auto violations = validate_mapping(t);
  bool dup = false;
  for (const std::string& v : violations)
    if (v.find("covered more than once") != std::string::npos) dup = true;
  EXPECT_TRUE(dup);
}

TEST(ComposeTriple, ZeroAnglesGiveIdentity) {
  const std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const Quat q = compose_revolute_triple({0, 0, 0}, axes);
  EXPECT_LT(geodesic_distance(q, Quat::Identity()), 1e-15);
}

TEST(ComposeTriple, SingleAxisCase) {
  const std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const Quat q = compose_revolute_triple({M_PI / 2, 0, 0}, axes);
  const Quat want = quat_from_axis_angle(Vec3::UnitX(), M_PI / 2);
  EXPECT_LT(geodesic_distance(q, want), 1e-15);
}

TEST(ComposeTriple, DegenerateAxesRejected) {
  const std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitX(), Vec3::UnitZ()};
  EXPECT_THROW(compose_revolute_triple({0.1, 0.2, 0.3}, axes), StructuralError);
}

TEST(ComposeTriple, CompositionOrderIsFirstListedFirst) {
  // applying to a vector: R3 R2 R1 v means axis[0] rotation acts first
  const std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const Quat q = compose_revolute_triple({M_PI / 2, M_PI / 2, 0}, axes);
  // v = +z: Rx(pi/2) maps z to -y; Ry(pi/2) keeps -y in place
  const Vec3 got = q * Vec3::UnitZ();
  EXPECT_LT((got - Vec3(0, -1, 0)).norm(), 1e-12);
}

TEST(ComposeTriple, DecomposeRoundTripOrthonormalTriples) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<std::array<Vec3, 3>> triples = {
      {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()},
      {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()},
      {Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitZ()},  // left-handed
      {-Vec3::UnitX(), Vec3::UnitZ(), Vec3::UnitY()},
  };
  for (const auto& axes : triples) {
    for (int i = 0; i < 250; ++i) {
      const std::array<double, 3> angles{2.8 * u(rng), 1.35 * u(rng),
                                         2.8 * u(rng)};
      const Quat q = compose_revolute_triple(angles, axes);
      const auto decomposed = test::decompose_revolute_triple_oracle(q, axes);
      const Quat back = compose_revolute_triple(decomposed, axes);
      EXPECT_LT(geodesic_distance(q, back), 1e-6);
    }
  }
}

TEST(MapRobotToHuman, ZeroPoseFixedPointExact) {
  const MappingTable t = triple_table();
  const Pose human = map_robot_to_human(t, zero_pose(*t.robot));
  const Pose want = zero_pose(*t.human);
  EXPECT_EQ(human.root_translation, want.root_translation);
  ASSERT_EQ(human.joint_rotations.size(), want.joint_rotations.size());
  for (size_t i = 0; i < want.joint_rotations.size(); ++i) {
    const Quat got = std::get<Quat>(human.joint_rotations[i]);
    EXPECT_EQ(got.w(), 1.0);
    EXPECT_EQ(got.x(), 0.0);
    EXPECT_EQ(got.y(), 0.0);
    EXPECT_EQ(got.z(), 0.0);
  }

  const auto human_skel = canonical_human_skeleton();
  const MappingTable biped =
      planar_biped_human_mapping(planar_biped_skeleton(), human_skel);
  const Pose mapped = map_robot_to_human(biped, zero_pose(*biped.robot));
  const Pose zero = zero_pose(*human_skel);
  for (size_t i = 0; i < zero.joint_rotations.size(); ++i) {
    if (const double* a = std::get_if<double>(&mapped.joint_rotations[i])) {
      EXPECT_EQ(*a, 0.0);
    } else {
      EXPECT_EQ(std::get<Quat>(mapped.joint_rotations[i]).w(), 1.0);
    }
  }
}

TEST(MapRobotToHuman, WaistAngleDrivesMappedSpineOnly) {
  const MappingTable t = triple_table();
  Pose robot = zero_pose(*t.robot);
  const double theta = 0.37;
  robot.joint_rotations[t.robot->rotation_index(
      t.robot->joint_index("waist"))] = theta;
  const Pose human = map_robot_to_human(t, robot);
  const Quat spine = std::get<Quat>(human.joint_rotations[t.human->rotation_index(
      t.human->joint_index("spine"))]);
  const Quat want = quat_from_axis_angle(Vec3::UnitY(), theta);
  EXPECT_LT(geodesic_distance(spine, want), 1e-12);
  // the shoulder stays at identity
  const Quat sh = std::get<Quat>(human.joint_rotations[t.human->rotation_index(
      t.human->joint_index("shoulder"))]);
  EXPECT_LT(geodesic_distance(sh, Quat::Identity()), 1e-15);
}

TEST(MapRobotToHuman, ShoulderTripleEqualsExplicitComposition) {
  const MappingTable t = triple_table();
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 50; ++i) {
    const std::array<double, 3> angles{u(rng), u(rng), u(rng)};
    Pose robot = zero_pose(*t.robot);
    robot.joint_rotations[t.robot->rotation_index(t.robot->joint_index("sx"))] =
        angles[0];
    robot.joint_rotations[t.robot->rotation_index(t.robot->joint_index("sy"))] =
        angles[1];
    robot.joint_rotations[t.robot->rotation_index(t.robot->joint_index("sz"))] =
        angles[2];
    const Pose human = map_robot_to_human(t, robot);
    const Quat got = std::get<Quat>(human.joint_rotations[t.human->rotation_index(
        t.human->joint_index("shoulder"))]);
    const Quat want = compose_revolute_triple(
        angles, {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()});
    EXPECT_LT(geodesic_distance(got, want), 1e-12);
  }
}

TEST(MapRobotToHuman, RootPassesThrough) {
  const MappingTable t = triple_table();
  Pose robot = zero_pose(*t.robot);
  robot.root_translation = Vec3(0.4, -0.1, 0.9);
  robot.root_orientation = canonical(quat_from_axis_angle(Vec3(0, 0, 1), 0.8));
  const Pose human = map_robot_to_human(t, robot);
  EXPECT_EQ(human.root_translation, robot.root_translation);
  EXPECT_EQ(human.root_orientation.coeffs(), robot.root_orientation.coeffs());
}

TEST(MapRobotToHuman, DeterministicBitIdentical) {
  const MappingTable t = triple_table();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Pose robot = zero_pose(*t.robot);
  for (auto& r : robot.joint_rotations) r = u(rng);
  const Pose a = map_robot_to_human(t, robot);
  const Pose b = map_robot_to_human(t, robot);
  for (size_t i = 0; i < a.joint_rotations.size(); ++i) {
    const Quat qa = std::get<Quat>(a.joint_rotations[i]);
    const Quat qb = std::get<Quat>(b.joint_rotations[i]);
    EXPECT_EQ(qa.coeffs(), qb.coeffs());
  }
}

TEST(MapSegment, MatchesPerPoseLoopAndPreservesLength) {
  const auto human = canonical_human_skeleton();
  const MappingTable t =
      planar_biped_human_mapping(planar_biped_skeleton(), human);
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TrajectorySegment robot;
  for (int f = 0; f < 9; ++f) {
    Pose p = zero_pose(*t.robot);
    p.root_translation = Vec3(u(rng), 0, 0.9 + 0.05 * u(rng));
    for (auto& r : p.joint_rotations) r = 0.5 * u(rng);
    robot.poses.push_back(p);
  }
  const TrajectorySegment mapped = map_segment(t, robot);
  ASSERT_EQ(mapped.length(), robot.length());
  for (int f = 0; f < robot.length(); ++f) {
    const Pose want = map_robot_to_human(t, robot.poses[f]);
    for (size_t i = 0; i < want.joint_rotations.size(); ++i) {
      if (const double* a = std::get_if<double>(&want.joint_rotations[i]))
        EXPECT_EQ(*a, std::get<double>(mapped.poses[f].joint_rotations[i]));
      else
        EXPECT_EQ(std::get<Quat>(want.joint_rotations[i]).coeffs(),
                  std::get<Quat>(mapped.poses[f].joint_rotations[i]).coeffs());
    }
  }

  TrajectorySegment one;
  one.poses.push_back(zero_pose(*t.robot));
  EXPECT_EQ(map_segment(t, one).length(), 1);
}

TEST(MappingFile, ParseAndBundledFilesMatchBuiltins) {
  const std::string dir = FLAM_DATA_DIR;
  const auto human = canonical_human_skeleton();
  {
    const auto robot = planar_biped_skeleton();
    const MappingTable parsed =
        load_mapping(dir + "/planar_biped_human.map", robot, human);
    const MappingTable builtin = planar_biped_human_mapping(robot, human);
    EXPECT_TRUE(validate_mapping(parsed).empty());
    ASSERT_EQ(parsed.entries.size(), builtin.entries.size());
    EXPECT_EQ(parsed.mapped_human_joints(), builtin.mapped_human_joints());
  }
  {
    const auto robot = triple_pendulum_skeleton();
    const MappingTable parsed =
        load_mapping(dir + "/pendulum3_human.map", robot, human);
    EXPECT_TRUE(validate_mapping(parsed).empty());
    EXPECT_EQ(parsed.mapped_human_joints(),
              pendulum_human_mapping(robot, human).mapped_human_joints());
  }
}

TEST(MappingFile, RobotIgnoredEntriesParse) {
  const auto robot = triple_robot();
  const auto human = small_human();
  std::istringstream in(
      "map waist spine\nignore sx\nignore sy\nignore sz\nredundant shoulder\n");
  const MappingTable t = parse_mapping(in, robot, human, "t.map");
  EXPECT_TRUE(validate_mapping(t).empty());
  // ignored joints are excluded from the mapped set
  EXPECT_EQ(t.mapped_human_joints(),
            std::vector<int>{human->joint_index("spine")});
}

TEST(MappingFile, UnknownDirectiveNamesLine) {
  const auto robot = triple_robot();
  const auto human = small_human();
  std::istringstream in("map waist spine\nbogus x y\n");
  try {
    parse_mapping(in, robot, human, "m.map");
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("m.map:2"), std::string::npos);
  }
}

}  // namespace
}  // namespace flam

#pragma once

#include <array>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "flam/skeleton.hpp"

namespace flam {

/// One robot joint drives one human joint. Revolute -> revolute transfers the
/// angle; revolute -> spherical applies the angle about the robot axis;
/// spherical -> spherical copies the quaternion.
struct OneToOne {
  int robot_joint;
  int human_joint;
};

/// Three ordered revolute robot joints drive one spherical human joint. The
/// listed order is the composition order.
struct TripleToSpherical {
  std::array<int, 3> robot_joints;
  int human_joint;
};

/// Human joint with no robot counterpart; stays at the zero pose.
struct HumanRedundant {
  int human_joint;
};

/// Robot joint with no human counterpart (e.g. finger joints); excluded from
/// the similarity sum.
struct RobotIgnored {
  int robot_joint;
};

using MappingEntry =
    std::variant<OneToOne, TripleToSpherical, HumanRedundant, RobotIgnored>;

/// Robot <-> human joint correspondences over two fixed skeletons.
struct MappingTable {
  std::shared_ptr<const SkeletonSpec> robot;
  std::shared_ptr<const SkeletonSpec> human;
  std::vector<MappingEntry> entries;

  /// Human joint indices covered by a mapped (non-redundant) entry, in entry
  /// order. This is the default participating set of the similarity sum.
  std::vector<int> mapped_human_joints() const {
    std::vector<int> out;
    for (const MappingEntry& e : entries) {
      if (const auto* o = std::get_if<OneToOne>(&e))
        out.push_back(o->human_joint);
      else if (const auto* t = std::get_if<TripleToSpherical>(&e))
        out.push_back(t->human_joint);
    }
    return out;
  }
};

/// Quaternion of R(axes[2],a[2]) * R(axes[1],a[1]) * R(axes[0],a[0]): the
/// first listed joint rotates first.
inline Quat compose_revolute_triple(const std::array<double, 3>& angles,
                                    const std::array<Vec3, 3>& axes) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) m.col(i) = axes[i];
  if (std::abs(m.determinant()) < 1e-9)
    throw StructuralError("compose_revolute_triple: degenerate axes");
  Quat q = Quat::Identity();
  for (int i = 0; i < 3; ++i)
    q = qmul(quat_from_axis_angle(axes[i], angles[i]), q);
  return q;
}

/// Report-style validation; an empty result means the table is usable.
inline std::vector<std::string> validate_mapping(const MappingTable& table) {
  std::vector<std::string> violations;
  if (!table.robot || !table.human) {
    violations.push_back("mapping: skeletons not set");
    return violations;
  }
  const SkeletonSpec& robot = *table.robot;
  const SkeletonSpec& human = *table.human;
  std::vector<int> human_cover(human.joint_count(), 0);
  std::vector<int> robot_cover(robot.joint_count(), 0);

  auto joint_name = [](const SkeletonSpec& s, int i) {
    return s.joints()[i].name;
  };

  for (const MappingEntry& e : table.entries) {
    if (const auto* o = std::get_if<OneToOne>(&e)) {
      ++human_cover[o->human_joint];
      ++robot_cover[o->robot_joint];
      const JointKind rk = robot.joints()[o->robot_joint].kind;
      const JointKind hk = human.joints()[o->human_joint].kind;
      if (rk == JointKind::Fixed)
        violations.push_back("mapping: fixed robot joint '" +
                             joint_name(robot, o->robot_joint) + "' mapped");
      if (hk == JointKind::Fixed)
        violations.push_back("mapping: fixed human joint '" +
                             joint_name(human, o->human_joint) + "' mapped");
      if (rk == JointKind::Spherical && hk == JointKind::Revolute)
        violations.push_back(
            "mapping: spherical robot joint '" +
            joint_name(robot, o->robot_joint) +
            "' cannot drive revolute human joint '" +
            joint_name(human, o->human_joint) + "'");
    } else if (const auto* t = std::get_if<TripleToSpherical>(&e)) {
      ++human_cover[t->human_joint];
      Eigen::Matrix3d axes;
      bool all_revolute = true;
      for (int i = 0; i < 3; ++i) {
        const int rj = t->robot_joints[i];
        ++robot_cover[rj];
        if (robot.joints()[rj].kind != JointKind::Revolute) {
          all_revolute = false;
          violations.push_back("mapping: triple member '" +
                               joint_name(robot, rj) + "' is not revolute");
        } else {
          axes.col(i) = robot.joints()[rj].axis;
        }
      }
      if (t->robot_joints[0] == t->robot_joints[1] ||
          t->robot_joints[0] == t->robot_joints[2] ||
          t->robot_joints[1] == t->robot_joints[2])
        violations.push_back("mapping: triple joints not distinct");
      else if (all_revolute && std::abs(axes.determinant()) < 1e-9)
        violations.push_back("mapping: degenerate axes in triple for '" +
                             joint_name(human, t->human_joint) + "'");
      if (human.joints()[t->human_joint].kind != JointKind::Spherical)
        violations.push_back("mapping: triple target '" +
                             joint_name(human, t->human_joint) +
                             "' is not spherical");
    } else if (const auto* h = std::get_if<HumanRedundant>(&e)) {
      ++human_cover[h->human_joint];
    } else if (const auto* r = std::get_if<RobotIgnored>(&e)) {
      ++robot_cover[r->robot_joint];
    }
  }

  for (int i = 0; i < human.joint_count(); ++i) {
    if (human.joints()[i].kind == JointKind::Fixed) continue;
    if (human_cover[i] == 0)
      violations.push_back("mapping: human joint '" + joint_name(human, i) +
                           "' not covered");
    else if (human_cover[i] > 1)
      violations.push_back("mapping: human joint '" + joint_name(human, i) +
                           "' covered more than once");
  }
  for (int i = 0; i < robot.joint_count(); ++i) {
    if (robot.joints()[i].kind == JointKind::Fixed) continue;
    if (robot_cover[i] == 0)
      violations.push_back("mapping: robot joint '" + joint_name(robot, i) +
                           "' not covered");
    else if (robot_cover[i] > 1)
      violations.push_back("mapping: robot joint '" + joint_name(robot, i) +
                           "' covered more than once");
  }
  return violations;
}

inline void require_valid(const MappingTable& table) {
  const auto violations = validate_mapping(table);
  if (!violations.empty())
    throw StructuralError("mapping table invalid: " + violations.front() +
                          (violations.size() > 1 ? " (+ more)" : ""));
}

/// Maps a robot pose onto the aligned human skeleton. The root transform
/// passes through unchanged; redundant human joints stay at the zero pose.
inline Pose map_robot_to_human(const MappingTable& table,
                               const Pose& robot_pose) {
  require_valid(table);
  const SkeletonSpec& robot = *table.robot;
  const SkeletonSpec& human = *table.human;
  check_pose(robot, robot_pose);

  Pose out = zero_pose(human);
  out.root_translation = robot_pose.root_translation;
  out.root_orientation = robot_pose.root_orientation;

  for (const MappingEntry& e : table.entries) {
    if (const auto* o = std::get_if<OneToOne>(&e)) {
      const JointSpec& rj = robot.joints()[o->robot_joint];
      const JointSpec& hj = human.joints()[o->human_joint];
      const int rr = robot.rotation_index(o->robot_joint);
      const int hr = human.rotation_index(o->human_joint);
      if (rj.kind == JointKind::Revolute) {
        const double angle = std::get<double>(robot_pose.joint_rotations[rr]);
        if (hj.kind == JointKind::Revolute)
          out.joint_rotations[hr] = angle;
        else
          out.joint_rotations[hr] = quat_from_axis_angle(rj.axis, angle);
      } else {
        out.joint_rotations[hr] =
            std::get<Quat>(robot_pose.joint_rotations[rr]);
      }
    } else if (const auto* t = std::get_if<TripleToSpherical>(&e)) {
      std::array<double, 3> angles;
      std::array<Vec3, 3> axes;
      for (int i = 0; i < 3; ++i) {
        const int rj = t->robot_joints[i];
        angles[i] = std::get<double>(
            robot_pose.joint_rotations[robot.rotation_index(rj)]);
        axes[i] = robot.joints()[rj].axis;
      }
      out.joint_rotations[human.rotation_index(t->human_joint)] =
          compose_revolute_triple(angles, axes);
    }
    // HumanRedundant and RobotIgnored entries leave the zero pose in place.
  }
  return out;
}

inline TrajectorySegment map_segment(const MappingTable& table,
                                     const TrajectorySegment& robot_segment) {
  TrajectorySegment out;
  out.poses.reserve(robot_segment.poses.size());
  for (const Pose& p : robot_segment.poses)
    out.poses.push_back(map_robot_to_human(table, p));
  return out;
}

// ---------------------------------------------------------------------------
// Mapping files. One entry per line:
//   map <robot_joint> <human_joint>
//   triple <robot_j1> <robot_j2> <robot_j3> <human_joint>
//   redundant <human_joint>
//   ignore <robot_joint>
// Triple members are listed in composition order. '#' starts a comment.
// ---------------------------------------------------------------------------

inline MappingTable parse_mapping(std::istream& in,
                                  std::shared_ptr<const SkeletonSpec> robot,
                                  std::shared_ptr<const SkeletonSpec> human,
                                  const std::string& source = "<stream>") {
  MappingTable table;
  table.robot = std::move(robot);
  table.human = std::move(human);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (tag == "map") {
      std::string r, h;
      if (!(ls >> r >> h)) throw StructuralError(where + ": malformed map");
      table.entries.push_back(
          OneToOne{table.robot->joint_index(r), table.human->joint_index(h)});
    } else if (tag == "triple") {
      std::string r1, r2, r3, h;
      if (!(ls >> r1 >> r2 >> r3 >> h))
        throw StructuralError(where + ": malformed triple");
      table.entries.push_back(TripleToSpherical{
          {table.robot->joint_index(r1), table.robot->joint_index(r2),
           table.robot->joint_index(r3)},
          table.human->joint_index(h)});
    } else if (tag == "redundant") {
      std::string h;
      if (!(ls >> h)) throw StructuralError(where + ": malformed redundant");
      table.entries.push_back(HumanRedundant{table.human->joint_index(h)});
    } else if (tag == "ignore") {
      std::string r;
      if (!(ls >> r)) throw StructuralError(where + ": malformed ignore");
      table.entries.push_back(RobotIgnored{table.robot->joint_index(r)});
    } else {
      throw StructuralError(where + ": unknown directive '" + tag + "'");
    }
  }
  return table;
}

inline MappingTable load_mapping(const std::string& path,
                                 std::shared_ptr<const SkeletonSpec> robot,
                                 std::shared_ptr<const SkeletonSpec> human) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open mapping file: " + path);
  return parse_mapping(in, std::move(robot), std::move(human), path);
}

}  // namespace flam

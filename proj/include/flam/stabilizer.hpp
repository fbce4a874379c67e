#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "flam/skeleton.hpp"

namespace flam {

// ---------------------------------------------------------------------------
// Support polygon
// ---------------------------------------------------------------------------

/// Convex region on the ground plane, vertices counterclockwise. Degenerate
/// point/segment shapes are allowed.
struct SupportPolygon {
  std::vector<Vec2> vertices;

  bool empty() const { return vertices.empty(); }

  Vec2 centroid() const {
    Vec2 c = Vec2::Zero();
    for (const Vec2& v : vertices) c += v;
    return c / static_cast<double>(vertices.size());
  }

  /// Closest point of the region to p (p itself when inside).
  Vec2 closest_point(const Vec2& p) const {
    if (vertices.size() == 1) return vertices[0];
    if (contains(p, 0.0)) return p;
    return closest_boundary_point(p);
  }

  /// Closest point on the region boundary to p.
  Vec2 closest_boundary_point(const Vec2& p) const {
    if (vertices.size() == 1) return vertices[0];
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_point = vertices[0];
    const size_t n = vertices.size();
    const size_t edges = (n == 2) ? 1 : n;
    for (size_t i = 0; i < edges; ++i) {
      const Vec2& a = vertices[i];
      const Vec2& b = vertices[(i + 1) % n];
      const Vec2 ab = b - a;
      const double len2 = ab.squaredNorm();
      double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 q = a + t * ab;
      const double d = (p - q).norm();
      if (d < best) {
        best = d;
        best_point = q;
      }
    }
    return best_point;
  }

  bool contains(const Vec2& p, double tol) const {
    if (vertices.size() < 3)
      return (p - closest_boundary_point(p)).norm() <= tol;
    const size_t n = vertices.size();
    for (size_t i = 0; i < n; ++i) {
      const Vec2& a = vertices[i];
      const Vec2& b = vertices[(i + 1) % n];
      const Vec2 edge = b - a;
      // outward normal of a CCW edge
      const Vec2 normal(edge[1], -edge[0]);
      const double nn = normal.norm();
      if (nn == 0.0) continue;
      if (normal.dot(p - a) / nn > tol) return false;
    }
    return true;
  }

  /// Positive outside (distance to the region), non-positive inside.
  double signed_distance(const Vec2& p) const {
    if (vertices.size() < 3) return (p - closest_boundary_point(p)).norm();
    if (!contains(p, 0.0)) return (p - closest_boundary_point(p)).norm();
    return -(p - closest_boundary_point(p)).norm();
  }

  /// Inward offset by `margin` (intersection of inward-shifted edge
  /// half-planes). Collapses to the centroid when the offset region vanishes.
  SupportPolygon eroded(double margin) const {
    if (margin <= 0.0) return *this;
    if (vertices.size() < 3) return SupportPolygon{{centroid()}};
    std::vector<Vec2> poly = vertices;
    const size_t n = vertices.size();
    for (size_t i = 0; i < n && !poly.empty(); ++i) {
      const Vec2& a = vertices[i];
      const Vec2& b = vertices[(i + 1) % n];
      Vec2 normal(b[1] - a[1], a[0] - b[0]);
      const double nn = normal.norm();
      if (nn == 0.0) continue;
      normal /= nn;
      const double bound = normal.dot(a) - margin;
      // clip poly against normal . x <= bound
      std::vector<Vec2> next;
      const size_t m = poly.size();
      for (size_t k = 0; k < m; ++k) {
        const Vec2& p = poly[k];
        const Vec2& q = poly[(k + 1) % m];
        const double dp = normal.dot(p) - bound;
        const double dq = normal.dot(q) - bound;
        if (dp <= 0.0) next.push_back(p);
        if ((dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0))
          next.push_back(p + (q - p) * (dp / (dp - dq)));
      }
      poly = std::move(next);
    }
    if (poly.empty()) return SupportPolygon{{centroid()}};
    return SupportPolygon{std::move(poly)};
  }
};

/// Counterclockwise convex hull (monotone chain); collinear inputs produce a
/// degenerate 1- or 2-vertex hull.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) {
                          return a[0] == b[0] && a[1] == b[1];
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n <= 2) return pts;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) {  // all collinear
    std::vector<Vec2> seg{pts.front(), pts.back()};
    return seg;
  }
  return hull;
}

/// Convex hull of the ground-plane projections of the foot joints, inflated
/// outward by `foot_extent` (a 16-gon stands in for the disc).
inline SupportPolygon support_polygon(const SkeletonSpec& skeleton,
                                      const std::vector<JointPose>& joint_poses,
                                      double foot_extent) {
  std::vector<Vec2> pts;
  for (int f : skeleton.foot_joints()) {
    const Vec2 p(joint_poses[f].position[0], joint_poses[f].position[1]);
    if (foot_extent > 0.0) {
      for (int k = 0; k < 16; ++k) {
        const double a = 2.0 * M_PI * k / 16.0;
        pts.emplace_back(p[0] + foot_extent * std::cos(a),
                         p[1] + foot_extent * std::sin(a));
      }
    } else {
      pts.push_back(p);
    }
  }
  return SupportPolygon{convex_hull(std::move(pts))};
}

// ---------------------------------------------------------------------------
// Reconstruction interface
// ---------------------------------------------------------------------------

struct StabilizerConfig {
  int smoothing_window = 9;          // odd, >= 1
  double com_margin = 0.02;          // m, inward shrink of the polygon
  double max_root_correction = 0.5;  // m per frame
  double foot_extent = 0.05;         // m, footprint inflation radius
  int min_length = 8;                // frames of context required
  std::map<std::string, std::pair<double, double>> joint_limits;  // radians

  void validate() const {
    if (smoothing_window < 1 || smoothing_window % 2 == 0)
      throw StructuralError("stabilizer: smoothing_window must be odd >= 1");
    if (com_margin < 0.0)
      throw StructuralError("stabilizer: com_margin must be >= 0");
    if (!(max_root_correction > 0.0))
      throw StructuralError("stabilizer: max_root_correction must be > 0");
    if (min_length < 1)
      throw StructuralError("stabilizer: min_length must be >= 1");
  }
};

struct ReconstructorCapability {
  int min_length = 1;
  int max_length = 145;
};

struct FrameDiagnostics {
  double com_violation_distance = 0.0;  // m outside the shrunk polygon, input
  double correction_magnitude = 0.0;    // m of applied root correction
};

/// Maps a noisy trajectory segment to a stable one. Implementations must be
/// pure: no mutable state across calls, identical input -> identical output.
class MotionReconstructor {
 public:
  virtual ~MotionReconstructor() = default;
  virtual ReconstructorCapability capability() const = 0;
  virtual TrajectorySegment reconstruct(const TrajectorySegment& segment) const = 0;

  virtual TrajectorySegment reconstruct_diagnosed(
      const TrajectorySegment& segment,
      std::vector<FrameDiagnostics>* diagnostics) const {
    if (diagnostics)
      diagnostics->assign(segment.poses.size(), FrameDiagnostics{});
    return reconstruct(segment);
  }

 protected:
  void check_segment(const TrajectorySegment& segment) const {
    const ReconstructorCapability cap = capability();
    if (segment.length() < cap.min_length || segment.length() > cap.max_length)
      throw ContractError("reconstruct: segment length " +
                          std::to_string(segment.length()) +
                          " outside capability [" +
                          std::to_string(cap.min_length) + ", " +
                          std::to_string(cap.max_length) + "]");
  }
};

/// Passes segments through untouched.
class IdentityReconstructor final : public MotionReconstructor {
 public:
  explicit IdentityReconstructor(int max_length = 145)
      : capability_{1, max_length} {}

  ReconstructorCapability capability() const override { return capability_; }

  TrajectorySegment reconstruct(const TrajectorySegment& segment) const override {
    check_segment(segment);
    return segment;
  }

 private:
  ReconstructorCapability capability_;
};

// ---------------------------------------------------------------------------
// Reference implementation: joint-limit clamp, low-pass smoothing of the
// joint rotations, then a per-frame center-of-mass projection onto the
// support polygon with the feet kept planted through analytic leg IK.
//
// Pass order matters for idempotence: the projection runs last and rewrites
// only the root and the leg chains, while smoothing covers exactly the other
// rotation channels. A second reconstruction therefore sees smoothed
// channels that re-smooth to themselves and frames that are already
// balanced, and changes nothing.
// ---------------------------------------------------------------------------

namespace detail {

/// hip (spherical) -> [fixed]* -> knee (revolute) -> [fixed]* -> foot chain
/// used to keep foot positions planted while the root shifts.
struct LegChain {
  int hip = -1;
  int knee = -1;
  int foot = -1;
  Vec3 hip_to_knee = Vec3::Zero();   // hip frame, zero pose
  Vec3 knee_to_foot = Vec3::Zero();  // knee frame, zero pose
};

inline Quat shortest_arc(const Vec3& from, const Vec3& to) {
  const double w = 1.0 + from.dot(to);
  if (w < 1e-12) {
    Vec3 axis = from.cross(Vec3::UnitX());
    if (axis.squaredNorm() < 1e-12) axis = from.cross(Vec3::UnitY());
    return quat_from_axis_angle(axis.normalized(), M_PI);
  }
  const Vec3 v = from.cross(to);
  return Quat(w, v[0], v[1], v[2]).normalized();
}

}  // namespace detail

class BalanceProjectionReconstructor final : public MotionReconstructor {
 public:
  BalanceProjectionReconstructor(std::shared_ptr<const SkeletonSpec> skeleton,
                                 StabilizerConfig config, int max_length = 145)
      : skeleton_(std::move(skeleton)),
        config_(std::move(config)),
        max_length_(max_length) {
    config_.validate();
    discover_legs();
  }

  ReconstructorCapability capability() const override {
    return {config_.min_length, max_length_};
  }

  const SkeletonSpec& skeleton() const { return *skeleton_; }
  const StabilizerConfig& config() const { return config_; }

  TrajectorySegment reconstruct(const TrajectorySegment& segment) const override {
    return reconstruct_diagnosed(segment, nullptr);
  }

  TrajectorySegment reconstruct_diagnosed(
      const TrajectorySegment& segment,
      std::vector<FrameDiagnostics>* diagnostics) const override {
    check_segment(segment);
    for (const Pose& p : segment.poses) check_pose(*skeleton_, p);

    TrajectorySegment out = segment;
    const int n = out.length();
    std::vector<FrameDiagnostics> diag(n);
    std::vector<Vec2> input_roots(n);
    for (int f = 0; f < n; ++f) {
      input_roots[f] = Vec2(segment.poses[f].root_translation[0],
                            segment.poses[f].root_translation[1]);
      diag[f].com_violation_distance = com_violation(segment.poses[f]);
    }

    clamp_segment(out);
    smooth_segment(out);
    project_segment(out, input_roots);

    for (int f = 0; f < n; ++f) {
      const Vec2 root_now(out.poses[f].root_translation[0],
                          out.poses[f].root_translation[1]);
      diag[f].correction_magnitude = (root_now - input_roots[f]).norm();
    }
    if (diagnostics) *diagnostics = std::move(diag);
    return out;
  }

  /// One frame of balance projection against a caller-supplied polygon:
  /// shifts the root horizontally (feet kept planted through leg IK) until
  /// the center-of-mass ground projection reaches the polygon shrunk by
  /// com_margin, capped at max_root_correction of total root motion.
  Pose project_com_to_support(const Pose& pose,
                              const SupportPolygon& polygon) const {
    if (polygon.empty())
      throw StructuralError("project_com_to_support: empty polygon");
    Pose out = pose;
    double spent = 0.0;
    project_frame(out, &polygon, config_.max_root_correction, &spent);
    return out;
  }

  /// Positive distance of the pose's CoM ground projection outside its own
  /// shrunk support polygon; 0 when balanced.
  double com_violation(const Pose& pose) const {
    const auto fk = forward_kinematics(*skeleton_, pose);
    const SupportPolygon poly =
        support_polygon(*skeleton_, fk, config_.foot_extent)
            .eroded(config_.com_margin);
    const Vec3 com = center_of_mass(*skeleton_, fk);
    return std::max(0.0, poly.signed_distance(Vec2(com[0], com[1])));
  }

 private:
  static constexpr double kInsideTol = 1e-9;

  void discover_legs() {
    const SkeletonSpec& s = *skeleton_;
    for (int foot : s.foot_joints()) {
      detail::LegChain leg;
      leg.foot = foot;
      Vec3 acc = Vec3::Zero();
      int j = foot;
      // accumulate fixed offsets up to the first revolute ancestor (knee)
      while (j != kRootParent && s.joints()[j].kind != JointKind::Revolute) {
        acc = s.joints()[j].offset + acc;
        j = s.joints()[j].parent;
        if (j != kRootParent && s.joints()[j].kind == JointKind::Spherical) {
          j = -2;  // hip directly above foot: no knee, give up on this leg
          break;
        }
      }
      if (j < 0) continue;
      leg.knee = j;
      leg.knee_to_foot = acc;
      acc = s.joints()[j].offset;
      j = s.joints()[j].parent;
      while (j != kRootParent && s.joints()[j].kind == JointKind::Fixed) {
        acc = s.joints()[j].offset + acc;
        j = s.joints()[j].parent;
      }
      if (j == kRootParent || s.joints()[j].kind != JointKind::Spherical)
        continue;
      leg.hip = j;
      leg.hip_to_knee = acc;
      if (leg.hip_to_knee.norm() < 1e-9 || leg.knee_to_foot.norm() < 1e-9)
        continue;
      legs_.push_back(leg);
    }
  }

  // -- clamp ----------------------------------------------------------------

  void clamp_segment(TrajectorySegment& seg) const {
    if (config_.joint_limits.empty()) return;
    const SkeletonSpec& s = *skeleton_;
    for (Pose& pose : seg.poses) {
      for (int j = 0; j < s.joint_count(); ++j) {
        const int r = s.rotation_index(j);
        if (r < 0) continue;
        auto it = config_.joint_limits.find(s.joints()[j].name);
        if (it == config_.joint_limits.end()) continue;
        const auto [lo, hi] = it->second;
        if (s.joints()[j].kind == JointKind::Revolute) {
          double& a = std::get<double>(pose.joint_rotations[r]);
          a = std::clamp(a, lo, hi);
        } else {
          // spherical: cap the rotation angle magnitude
          const double cap = std::max(std::abs(lo), std::abs(hi));
          Quat& q = std::get<Quat>(pose.joint_rotations[r]);
          const Vec3 v = quat_log(q);
          const double a = v.norm();
          if (a > cap && a > 0.0) q = quat_exp(v * (cap / a));
        }
      }
    }
  }

  // -- balance projection ---------------------------------------------------

  void project_segment(TrajectorySegment& seg,
                       const std::vector<Vec2>& input_roots) const {
    for (int f = 0; f < seg.length(); ++f) {
      Pose& pose = seg.poses[f];
      const Vec2 root_now(pose.root_translation[0], pose.root_translation[1]);
      double spent = (root_now - input_roots[f]).norm();
      project_frame(pose, nullptr, config_.max_root_correction, &spent);
    }
  }

  struct FrameGeometry {
    std::vector<JointPose> fk;
    SupportPolygon target;  // eroded support polygon
    Vec2 com;
    double violation;
  };

  FrameGeometry frame_geometry(const Pose& pose,
                               const SupportPolygon* fixed_polygon) const {
    FrameGeometry g;
    g.fk = forward_kinematics(*skeleton_, pose);
    const SupportPolygon poly =
        fixed_polygon ? *fixed_polygon
                      : support_polygon(*skeleton_, g.fk, config_.foot_extent);
    g.target = poly.eroded(config_.com_margin);
    const Vec3 com3 = center_of_mass(*skeleton_, g.fk);
    g.com = Vec2(com3[0], com3[1]);
    g.violation = g.target.signed_distance(g.com);
    return g;
  }

  /// Walks the root toward balance. With a fixed polygon the aim never moves;
  /// otherwise the support polygon is re-derived from the current feet each
  /// sub-step, so frames whose legs run out of reach stall and get restored
  /// rather than dragged along the ground.
  void project_frame(Pose& pose, const SupportPolygon* fixed_polygon,
                     double budget, double* spent) const {
    FrameGeometry g = frame_geometry(pose, fixed_polygon);
    if (g.violation <= kInsideTol) return;

    double gain = 1.0;  // violation decrease per unit of root motion
    for (int sub = 0; sub < 40; ++sub) {
      if (g.violation <= kInsideTol) break;
      const double remaining = budget - *spent;
      if (remaining <= 1e-12) break;

      const Vec2 goal = g.target.closest_boundary_point(g.com);
      Vec2 step = (goal - g.com) / gain;
      bool capped = false;
      if (step.norm() > remaining) {
        step *= remaining / step.norm();
        capped = true;
      }

      const Pose saved = pose;
      std::vector<Vec3> planted;
      planted.reserve(legs_.size());
      for (const detail::LegChain& leg : legs_)
        planted.push_back(g.fk[leg.foot].position);

      auto apply = [&](const Vec2& s) {
        pose.root_translation[0] += s[0];
        pose.root_translation[1] += s[1];
        for (size_t i = 0; i < legs_.size(); ++i)
          replant_leg(pose, legs_[i], planted[i]);
      };
      apply(step);
      FrameGeometry next = frame_geometry(pose, fixed_polygon);
      double progress = g.violation - next.violation;
      if (next.violation < -kInsideTol && progress > 0.0) {
        // overshot past the boundary: rescale for an on-boundary landing
        pose = saved;
        step *= g.violation / progress;
        apply(step);
        next = frame_geometry(pose, fixed_polygon);
        progress = g.violation - next.violation;
      }
      if (progress < 0.02 * step.norm()) {
        pose = saved;  // stalled (legs out of reach): keep the frame stable
        break;
      }
      *spent += step.norm();
      gain = std::clamp(progress / step.norm(), 0.05, 1.0);
      g = next;
      if (capped) break;
    }
  }

  /// Solves hip quaternion and knee angle so the foot lands on `target`,
  /// staying as close as possible to the current configuration.
  void replant_leg(Pose& pose, const detail::LegChain& leg,
                   const Vec3& target) const {
    const SkeletonSpec& s = *skeleton_;
    const auto fk = forward_kinematics(*skeleton_, pose);
    const Vec3 hip_pos = fk[leg.hip].position;
    const double a = leg.hip_to_knee.norm();
    const double b = leg.knee_to_foot.norm();

    Vec3 to_target = target - hip_pos;
    double d = to_target.norm();
    if (d < 1e-9) return;
    const double d_min = std::abs(a - b) + 1e-6;
    const double d_max = a + b - 1e-6;
    const double d_clamped = std::clamp(d, d_min, d_max);

    // knee angle from the triangle (law of cosines on |hip->foot|)
    const Vec3 axis = s.joints()[leg.knee].axis;
    const Vec3& u = leg.hip_to_knee;
    const Vec3& v = leg.knee_to_foot;
    const double A = 2.0 * (u.dot(v) - u.dot(axis) * axis.dot(v));
    const double B = 2.0 * u.dot(axis.cross(v));
    const double C = 2.0 * u.dot(axis) * axis.dot(v);
    const double rhs =
        d_clamped * d_clamped - u.squaredNorm() - v.squaredNorm() - C;
    const double amp = std::hypot(A, B);
    const int knee_r = s.rotation_index(leg.knee);
    double theta = std::get<double>(pose.joint_rotations[knee_r]);
    if (amp > 1e-12) {
      const double ratio = std::clamp(rhs / amp, -1.0, 1.0);
      const double base = std::atan2(B, A);
      const double off = std::acos(ratio);
      // two solutions; keep the branch nearest the current knee angle
      const double cand1 = base + off;
      const double cand2 = base - off;
      auto ang_dist = [](double x, double y) {
        double d2 = std::remainder(x - y, 2.0 * M_PI);
        return std::abs(d2);
      };
      theta = ang_dist(cand1, theta) <= ang_dist(cand2, theta) ? cand1 : cand2;
      theta = std::remainder(theta, 2.0 * M_PI);
    }
    pose.joint_rotations[knee_r] = theta;

    // aim the solved leg shape at the target direction with the smallest
    // additional hip rotation
    const Quat knee_local = quat_from_axis_angle(axis, theta);
    const Vec3 leg_local = u + knee_local * v;  // hip frame, foot direction
    const double leg_len = leg_local.norm();
    if (leg_len < 1e-9) return;

    // current world orientation of the hip's parent chain
    const int hip_r = s.rotation_index(leg.hip);
    const Quat hip_world = fk[leg.hip].orientation;
    const Quat hip_local_old = std::get<Quat>(pose.joint_rotations[hip_r]);
    const Quat parent_world =
        canonical(qmul(hip_world, hip_local_old.conjugate()));

    const Vec3 current_dir = (qmul(parent_world, hip_local_old) *
                              (leg_local / leg_len));
    const Vec3 target_dir = to_target / d;
    const Quat align = detail::shortest_arc(current_dir, target_dir);
    const Quat hip_world_new = qmul(align, qmul(parent_world, hip_local_old));
    pose.joint_rotations[hip_r] =
        canonical(qmul(parent_world.conjugate(), hip_world_new));
  }

  // -- smoothing ------------------------------------------------------------

  /// Joints the balance projection rewrites; smoothing leaves them to the
  /// planted-feet IK.
  bool projection_owned(int joint) const {
    for (const detail::LegChain& leg : legs_)
      if (leg.hip == joint || leg.knee == joint) return true;
    return false;
  }

  /// Low-pass projection of the non-leg joint-rotation channels: orthonormal
  /// DCT-II, coefficients above the cutoff zeroed. Reapplying the projection
  /// is a no-op, which reconstruct idempotence relies on.
  void smooth_segment(TrajectorySegment& seg) const {
    const int n = seg.length();
    const int keep = std::clamp(
        static_cast<int>(std::lround(2.0 * n / config_.smoothing_window)), 1,
        n);
    if (keep >= n) return;

    const SkeletonSpec& s = *skeleton_;
    std::vector<double> channel(n);
    for (int j = 0; j < s.joint_count(); ++j) {
      const int r = s.rotation_index(j);
      if (r < 0 || projection_owned(j)) continue;
      if (s.joints()[j].kind == JointKind::Revolute) {
        for (int f = 0; f < n; ++f)
          channel[f] = std::get<double>(seg.poses[f].joint_rotations[r]);
        dct_lowpass(channel, keep);
        for (int f = 0; f < n; ++f) seg.poses[f].joint_rotations[r] = channel[f];
      } else {
        std::array<std::vector<double>, 3> chart;
        chart.fill(std::vector<double>(n));
        for (int f = 0; f < n; ++f) {
          const Vec3 v =
              quat_log(std::get<Quat>(seg.poses[f].joint_rotations[r]));
          for (int d = 0; d < 3; ++d) chart[d][f] = v[d];
        }
        for (int d = 0; d < 3; ++d) dct_lowpass(chart[d], keep);
        for (int f = 0; f < n; ++f)
          seg.poses[f].joint_rotations[r] =
              quat_exp(Vec3(chart[0][f], chart[1][f], chart[2][f]));
      }
    }
  }

  static void dct_lowpass(std::vector<double>& x, int keep) {
    const int n = static_cast<int>(x.size());
    std::vector<double> coef(keep, 0.0);
    for (int k = 0; k < keep; ++k) {
      double acc = 0.0;
      for (int t = 0; t < n; ++t)
        acc += x[t] * std::cos(M_PI * (t + 0.5) * k / n);
      coef[k] = acc * (k == 0 ? 1.0 / n : 2.0 / n);
    }
    for (int t = 0; t < n; ++t) {
      double acc = coef[0];
      for (int k = 1; k < keep; ++k)
        acc += coef[k] * std::cos(M_PI * (t + 0.5) * k / n);
      x[t] = acc;
    }
  }

  std::shared_ptr<const SkeletonSpec> skeleton_;
  StabilizerConfig config_;
  int max_length_;
  std::vector<detail::LegChain> legs_;
};

/// Mean squared frame-to-frame geodesic rotation difference of the joint
/// rotations; the quantity smoothing must not increase.
inline double temporal_roughness(const SkeletonSpec& skeleton,
                                 const TrajectorySegment& seg) {
  if (seg.length() < 2) return 0.0;
  double acc = 0.0;
  int count = 0;
  for (int f = 0; f + 1 < seg.length(); ++f) {
    for (int j = 0; j < skeleton.joint_count(); ++j) {
      const int r = skeleton.rotation_index(j);
      if (r < 0) continue;
      double d = 0.0;
      if (skeleton.joints()[j].kind == JointKind::Revolute) {
        d = std::get<double>(seg.poses[f + 1].joint_rotations[r]) -
            std::get<double>(seg.poses[f].joint_rotations[r]);
      } else {
        d = geodesic_distance(std::get<Quat>(seg.poses[f].joint_rotations[r]),
                              std::get<Quat>(seg.poses[f + 1].joint_rotations[r]));
      }
      acc += d * d;
      ++count;
    }
  }
  return count > 0 ? acc / count : 0.0;
}

}  // namespace flam

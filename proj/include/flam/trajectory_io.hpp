#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flam/nn.hpp"
#include "flam/skeleton.hpp"

namespace flam {

/// One line of the trajectory dump format.
struct TrajFrame {
  int time_step = 0;
  VectorXd observation;
  Pose pose;
  VectorXd action;
  double task_reward = 0.0;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Line format, one frame per line:
//   frame <t> obs <n> v.. pose <tx> <ty> <tz> <qw> <qx> <qy> <qz>
//   joints <k> { <name> r <angle> | <name> s <qw> <qx> <qy> <qz> }..
//   action <m> v.. reward <r>
// Doubles are printed with 17 significant digits so a round trip is exact.

inline void write_trajectory(std::ostream& out, const SkeletonSpec& skeleton,
                             const std::vector<TrajFrame>& frames) {
  using detail::fmt_double;
  for (const TrajFrame& f : frames) {
    out << "frame " << f.time_step;
    out << " obs " << f.observation.size();
    for (Eigen::Index i = 0; i < f.observation.size(); ++i)
      out << ' ' << fmt_double(f.observation[i]);
    out << " pose";
    for (int i = 0; i < 3; ++i) out << ' ' << fmt_double(f.pose.root_translation[i]);
    const Quat& q = f.pose.root_orientation;
    out << ' ' << fmt_double(q.w()) << ' ' << fmt_double(q.x()) << ' '
        << fmt_double(q.y()) << ' ' << fmt_double(q.z());
    out << " joints " << skeleton.rotation_count();
    for (int j = 0; j < skeleton.joint_count(); ++j) {
      const int r = skeleton.rotation_index(j);
      if (r < 0) continue;
      out << ' ' << skeleton.joints()[j].name;
      const JointRotation& rot = f.pose.joint_rotations[r];
      if (const double* a = std::get_if<double>(&rot)) {
        out << " r " << fmt_double(*a);
      } else {
        const Quat& jq = std::get<Quat>(rot);
        out << " s " << fmt_double(jq.w()) << ' ' << fmt_double(jq.x()) << ' '
            << fmt_double(jq.y()) << ' ' << fmt_double(jq.z());
      }
    }
    out << " action " << f.action.size();
    for (Eigen::Index i = 0; i < f.action.size(); ++i)
      out << ' ' << fmt_double(f.action[i]);
    out << " reward " << fmt_double(f.task_reward) << '\n';
  }
}

inline void save_trajectory(const std::string& path,
                            const SkeletonSpec& skeleton,
                            const std::vector<TrajFrame>& frames) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open trajectory file for write: " + path);
  write_trajectory(out, skeleton, frames);
}

inline std::vector<TrajFrame> read_trajectory(std::istream& in,
                                              const SkeletonSpec& skeleton,
                                              const std::string& source) {
  std::vector<TrajFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::string tag;
    TrajFrame f;
    auto fail = [&where](const std::string& what) {
      return InputError(where + ": " + what);
    };
    if (!(ls >> tag) || tag != "frame") throw fail("expected 'frame'");
    if (!(ls >> f.time_step)) throw fail("bad time step");
    int n = 0;
    if (!(ls >> tag) || tag != "obs" || !(ls >> n) || n < 0)
      throw fail("expected 'obs <n>'");
    f.observation.resize(n);
    for (int i = 0; i < n; ++i)
      if (!(ls >> f.observation[i])) throw fail("bad observation value");
    if (!(ls >> tag) || tag != "pose") throw fail("expected 'pose'");
    double qw, qx, qy, qz;
    for (int i = 0; i < 3; ++i)
      if (!(ls >> f.pose.root_translation[i])) throw fail("bad root translation");
    if (!(ls >> qw >> qx >> qy >> qz)) throw fail("bad root orientation");
    f.pose.root_orientation = Quat(qw, qx, qy, qz);
    int k = 0;
    if (!(ls >> tag) || tag != "joints" || !(ls >> k))
      throw fail("expected 'joints <k>'");
    if (k != skeleton.rotation_count())
      throw fail("joint rotation count mismatch with skeleton");
    f.pose.joint_rotations.assign(k, JointRotation{0.0});
    for (int i = 0; i < k; ++i) {
      std::string name, kind;
      if (!(ls >> name >> kind)) throw fail("bad joint entry");
      const int joint = skeleton.joint_index(name);
      const int r = skeleton.rotation_index(joint);
      if (r < 0) throw fail("joint '" + name + "' carries no rotation");
      if (kind == "r") {
        double a;
        if (!(ls >> a)) throw fail("bad revolute angle");
        f.pose.joint_rotations[r] = a;
      } else if (kind == "s") {
        if (!(ls >> qw >> qx >> qy >> qz)) throw fail("bad joint quaternion");
        f.pose.joint_rotations[r] = Quat(qw, qx, qy, qz);
      } else {
        throw fail("unknown rotation kind '" + kind + "'");
      }
    }
    int m = 0;
    if (!(ls >> tag) || tag != "action" || !(ls >> m) || m < 0)
      throw fail("expected 'action <m>'");
    f.action.resize(m);
    for (int i = 0; i < m; ++i)
      if (!(ls >> f.action[i])) throw fail("bad action value");
    if (!(ls >> tag) || tag != "reward" || !(ls >> f.task_reward))
      throw fail("expected 'reward <r>'");
    frames.push_back(std::move(f));
  }
  return frames;
}

inline std::vector<TrajFrame> load_trajectory(const std::string& path,
                                              const SkeletonSpec& skeleton) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trajectory file: " + path);
  return read_trajectory(in, skeleton, path);
}

/// Minimal CSV writer used by the metrics and diagnostics outputs.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw InputError("cannot open csv for write: " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
    width_ = columns.size();
  }

  void row(const std::vector<std::string>& values) {
    if (values.size() != width_)
      throw ContractError("csv row width mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << values[i];
    }
    out_ << '\n';
    out_.flush();
  }

  static std::string num(double v) { return detail::fmt_double(v); }
  static std::string num(long v) { return std::to_string(v); }
  static std::string num(int v) { return std::to_string(v); }

 private:
  std::ofstream out_;
  size_t width_ = 0;
};

}  // namespace flam

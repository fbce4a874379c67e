#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flam/models.hpp"
#include "flam/trainer.hpp"

namespace flam {

/// Run configuration file: INI-style sections {task, reward, planner,
/// stabilizer, trainer, run}. Unknown keys are rejected with line-level
/// diagnostics; missing keys take the documented defaults; the fully
/// resolved config echoes into the run directory.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile from_string(const std::string& text,
                                const std::string& source = "<string>") {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::string where = source + ":" + std::to_string(line_no);
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw StructuralError(where + ": malformed section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        if (!known_section(section))
          throw StructuralError(where + ": unknown section '" + section + "'");
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw StructuralError(where + ": expected 'key = value'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (section.empty())
        throw StructuralError(where + ": key outside any section");
      cfg.set_checked(section + "." + key, value, where);
    }
    return cfg;
  }

  static ConfigFile from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
  }

  /// Applies a dotted-key override, e.g. set("reward.lambda", "0.5").
  void set(const std::string& dotted_key, const std::string& value) {
    set_checked(dotted_key, value, "override '" + dotted_key + "'");
  }

  /// Canonical echo of every key with its resolved value. Feeding this text
  /// back through from_string reproduces the configuration.
  std::string resolved_text() const {
    std::ostringstream o;
    o.precision(17);
    o << "[task]\n";
    o << "name = " << task << "\n\n";
    o << "[reward]\n";
    o << "r_j = " << r_j << "\n";
    o << "t_j = " << t_j << "\n";
    o << "n_bar = " << n_bar << "\n";
    o << "t_s = " << (t_s_override ? *t_s_override : n_bar * r_j) << "\n";
    o << "lambda = " << lambda << "\n";
    o << "q = " << q << "\n";
    o << "l_e = " << l_e << "\n";
    o << "participating_joints = " << join(participating_joints) << "\n\n";
    o << "[planner]\n";
    o << "horizon = " << planner.horizon << "\n";
    o << "population = " << planner.population << "\n";
    o << "elites = " << planner.elites << "\n";
    o << "iterations = " << planner.iterations << "\n";
    o << "discount = " << planner.discount << "\n";
    o << "sigma_init = " << planner.sigma_init << "\n";
    o << "sigma_floor = " << planner.sigma_floor << "\n";
    o << "prior_fraction = " << planner.prior_fraction << "\n\n";
    o << "[stabilizer]\n";
    o << "smoothing_window = " << stabilizer.smoothing_window << "\n";
    o << "com_margin = " << stabilizer.com_margin << "\n";
    o << "max_root_correction = " << stabilizer.max_root_correction << "\n";
    o << "foot_extent = " << stabilizer.foot_extent << "\n";
    o << "min_length = " << stabilizer.min_length << "\n";
    o << "reconstructor = " << reconstructor << "\n";
    o << "bypass = " << (bypass ? "true" : "false") << "\n";
    o << "joint_limits = " << format_limits() << "\n\n";
    o << "[trainer]\n";
    o << "l_s = " << l_s << "\n";
    o << "batch_size = " << batch_size << "\n";
    o << "buffer_capacity = " << buffer_capacity << "\n";
    o << "latent_dim = " << model.latent_dim << "\n";
    o << "hidden = " << model.hidden << "\n";
    o << "gamma = " << model.gamma << "\n";
    o << "tau = " << model.tau << "\n";
    o << "learning_rate = " << model.learning_rate << "\n";
    o << "entropy_coef = " << model.entropy_coef << "\n\n";
    o << "[run]\n";
    o << "seed = " << seed << "\n";
    o << "total_steps = " << total_steps << "\n";
    o << "eval_interval = " << eval_interval << "\n";
    o << "eval_episodes = " << eval_episodes << "\n";
    o << "checkpoint_interval = " << checkpoint_interval << "\n";
    o << "out_dir = " << out_dir << "\n";
    return o.str();
  }

  uint64_t hash() const { return fnv1a(resolved_text()); }

  /// Materializes the validated RunConfig (resolving joint names against the
  /// canonical human skeleton).
  RunConfig to_run_config() const {
    RunConfig rc;
    rc.task = task;
    rc.seed = seed;
    rc.total_steps = total_steps;
    rc.max_episode_steps = static_cast<int>(l_e);
    rc.segment_length = l_s;
    rc.buffer_capacity = buffer_capacity;
    rc.batch_size = batch_size;
    rc.eval_interval = eval_interval;
    rc.eval_episodes = eval_episodes;
    rc.checkpoint_interval = checkpoint_interval;

    rc.reward.r_j = r_j;
    rc.reward.t_j = t_j;
    rc.reward.n_bar = n_bar;
    rc.reward.t_s = t_s_override ? *t_s_override : n_bar * r_j;
    rc.reward.lambda = lambda;
    rc.reward.q = q;
    rc.reward.l_e = l_e;
    if (!participating_joints.empty()) {
      const auto human = canonical_human_skeleton();
      for (const std::string& name : participating_joints)
        rc.reward.participating_joints.push_back(human->joint_index(name));
    }

    rc.planner = planner;
    rc.stabilizer = stabilizer;
    rc.model = model;
    rc.reconstructor = reconstructor;
    rc.stabilizer_bypass = bypass;
    rc.out_dir = out_dir;
    rc.config_hash = hash();

    rc.reward.validate();
    rc.stabilizer.validate();
    if (rc.task != "planar_stand" && rc.task != "planar_walk" &&
        rc.task != "pendulum_balance")
      throw StructuralError("config: unknown task '" + rc.task + "'");
    rc.validate();
    return rc;
  }

  // resolved fields (public so the CLI can post-process out_dir)
  std::string task = "planar_stand";
  double r_j = 0.1;
  double t_j = 0.1;
  int n_bar = 15;
  std::optional<double> t_s_override;
  double lambda = 1.0;
  double q = 750.0;
  double l_e = 1000.0;
  std::vector<std::string> participating_joints;
  PlannerConfig planner;
  StabilizerConfig stabilizer;
  std::string reconstructor = "reference";
  bool bypass = false;
  int l_s = 145;
  int batch_size = 64;
  int buffer_capacity = 200000;
  WorldModelConfig model;
  uint64_t seed = 1;
  long total_steps = 20000;
  long eval_interval = 5000;
  int eval_episodes = 2;
  long checkpoint_interval = 0;
  std::string out_dir;

 private:
  static bool known_section(const std::string& s) {
    return s == "task" || s == "reward" || s == "planner" ||
           s == "stabilizer" || s == "trainer" || s == "run";
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out += ",";
      out += v[i];
    }
    return out;
  }

  std::string format_limits() const {
    std::ostringstream o;
    o.precision(17);
    bool first = true;
    for (const auto& [name, lim] : stabilizer.joint_limits) {
      if (!first) o << ",";
      o << name << ":" << lim.first << ":" << lim.second;
      first = false;
    }
    return o.str();
  }

  void set_checked(const std::string& dotted, const std::string& value,
                   const std::string& where) {
    auto bad_value = [&](const std::string& what) -> StructuralError {
      return StructuralError(where + ": " + what + " (got '" + value + "')");
    };
    auto as_double = [&]() {
      try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
      } catch (...) {
        throw bad_value("expected a number");
      }
    };
    auto as_long = [&]() {
      try {
        size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
      } catch (...) {
        throw bad_value("expected an integer");
      }
    };
    auto as_int = [&]() { return static_cast<int>(as_long()); };
    auto as_bool = [&]() {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw bad_value("expected true/false");
    };
    auto as_list = [&]() {
      std::vector<std::string> parts;
      std::string cur;
      for (char c : value) {
        if (c == ',') {
          if (!trim(cur).empty()) parts.push_back(trim(cur));
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!trim(cur).empty()) parts.push_back(trim(cur));
      return parts;
    };

    if (dotted == "task.name") task = value;
    else if (dotted == "reward.r_j") r_j = as_double();
    else if (dotted == "reward.t_j") t_j = as_double();
    else if (dotted == "reward.n_bar") n_bar = as_int();
    else if (dotted == "reward.t_s") t_s_override = as_double();
    else if (dotted == "reward.lambda") lambda = as_double();
    else if (dotted == "reward.q") q = as_double();
    else if (dotted == "reward.l_e") l_e = as_double();
    else if (dotted == "reward.participating_joints") participating_joints = as_list();
    else if (dotted == "planner.horizon") planner.horizon = as_int();
    else if (dotted == "planner.population") planner.population = as_int();
    else if (dotted == "planner.elites") planner.elites = as_int();
    else if (dotted == "planner.iterations") planner.iterations = as_int();
    else if (dotted == "planner.discount") planner.discount = as_double();
    else if (dotted == "planner.sigma_init") planner.sigma_init = as_double();
    else if (dotted == "planner.sigma_floor") planner.sigma_floor = as_double();
    else if (dotted == "planner.prior_fraction") planner.prior_fraction = as_double();
    else if (dotted == "stabilizer.smoothing_window") stabilizer.smoothing_window = as_int();
    else if (dotted == "stabilizer.com_margin") stabilizer.com_margin = as_double();
    else if (dotted == "stabilizer.max_root_correction") stabilizer.max_root_correction = as_double();
    else if (dotted == "stabilizer.foot_extent") stabilizer.foot_extent = as_double();
    else if (dotted == "stabilizer.min_length") stabilizer.min_length = as_int();
    else if (dotted == "stabilizer.reconstructor") {
      if (value != "reference" && value != "identity")
        throw bad_value("expected reference|identity");
      reconstructor = value;
    } else if (dotted == "stabilizer.bypass") bypass = as_bool();
    else if (dotted == "stabilizer.joint_limits") {
      stabilizer.joint_limits.clear();
      for (const std::string& part : as_list()) {
        const auto c1 = part.find(':');
        const auto c2 = part.rfind(':');
        if (c1 == std::string::npos || c2 == c1)
          throw bad_value("expected name:lo:hi");
        try {
          const std::string name = part.substr(0, c1);
          const double lo = std::stod(part.substr(c1 + 1, c2 - c1 - 1));
          const double hi = std::stod(part.substr(c2 + 1));
          stabilizer.joint_limits[name] = {lo, hi};
        } catch (...) {
          throw bad_value("expected name:lo:hi");
        }
      }
    }
    else if (dotted == "trainer.l_s") l_s = as_int();
    else if (dotted == "trainer.batch_size") batch_size = as_int();
    else if (dotted == "trainer.buffer_capacity") buffer_capacity = as_int();
    else if (dotted == "trainer.latent_dim") model.latent_dim = as_int();
    else if (dotted == "trainer.hidden") model.hidden = as_int();
    else if (dotted == "trainer.gamma") model.gamma = as_double();
    else if (dotted == "trainer.tau") model.tau = as_double();
    else if (dotted == "trainer.learning_rate") model.learning_rate = as_double();
    else if (dotted == "trainer.entropy_coef") model.entropy_coef = as_double();
    else if (dotted == "run.seed") seed = static_cast<uint64_t>(as_long());
    else if (dotted == "run.total_steps") total_steps = as_long();
    else if (dotted == "run.eval_interval") eval_interval = as_long();
    else if (dotted == "run.eval_episodes") eval_episodes = as_int();
    else if (dotted == "run.checkpoint_interval") checkpoint_interval = as_long();
    else if (dotted == "run.out_dir") out_dir = value;
    else throw StructuralError(where + ": unknown key '" + dotted + "'");
  }
};

}  // namespace flam

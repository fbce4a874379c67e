#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "flam/config.hpp"

namespace flam::cli {

// exit codes shared by every subcommand
constexpr int kOk = 0;
constexpr int kRuntimeFault = 1;
constexpr int kUsageError = 2;
constexpr int kIntegrityError = 3;

inline std::string output_root() {
  const char* env = std::getenv("FLAM_OUTPUT_ROOT");
  return env && *env ? env : "runs";
}

inline std::string resolve_out_dir(const ConfigFile& cfg,
                                   const std::string& fallback_name) {
  namespace fs = std::filesystem;
  std::string dir = cfg.out_dir.empty() ? fallback_name : cfg.out_dir;
  fs::path p(dir);
  if (p.is_relative()) p = fs::path(output_root()) / p;
  return p.string();
}

inline ConfigFile load_config(const std::string& path,
                              const std::vector<std::string>& overrides) {
  ConfigFile cfg = ConfigFile::from_file(path);
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos)
      throw StructuralError("override must look like section.key=value: " + o);
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return cfg;
}

// -- skeleton / mapping resolution ------------------------------------------

inline std::shared_ptr<const SkeletonSpec> skeleton_by_name(
    const std::string& name) {
  if (name == "human") return canonical_human_skeleton();
  if (name == "planar_biped") return planar_biped_skeleton();
  if (name == "pendulum") return triple_pendulum_skeleton();
  if (std::filesystem::exists(name))
    return std::make_shared<SkeletonSpec>(load_skeleton(name));
  throw StructuralError("unknown skeleton '" + name +
                        "' (not a builtin, not a file)");
}

inline MappingTable mapping_by_name(const std::string& name,
                                    std::shared_ptr<const SkeletonSpec> robot,
                                    std::shared_ptr<const SkeletonSpec> human) {
  if (name == "planar_biped_human")
    return planar_biped_human_mapping(std::move(robot), std::move(human));
  if (name == "pendulum_human")
    return pendulum_human_mapping(std::move(robot), std::move(human));
  if (std::filesystem::exists(name))
    return load_mapping(name, std::move(robot), std::move(human));
  throw StructuralError("unknown mapping '" + name +
                        "' (not a builtin, not a file)");
}

// -- train -------------------------------------------------------------------

inline int cmd_train(const std::string& config_path,
                     const std::vector<std::string>& overrides,
                     std::ostream& out, std::ostream& err,
                     RunResult* result_out = nullptr) {
  try {
    if (!std::filesystem::exists(config_path)) {
      err << "config file not found: " << config_path << "\n";
      return kUsageError;
    }
    ConfigFile cfg = load_config(config_path, overrides);
    RunConfig rc = cfg.to_run_config();
    rc.out_dir = resolve_out_dir(
        cfg, cfg.task + "-seed" + std::to_string(cfg.seed));

    std::filesystem::create_directories(rc.out_dir);
    {
      std::ofstream echo(rc.out_dir + "/config_resolved.cfg");
      echo << cfg.resolved_text();
    }

    const RunResult result = run(rc);
    out << "run dir: " << result.run_dir << "\n";
    out << "env steps: " << result.env_steps
        << "  finalized: " << result.finalized_count
        << "  dropped: " << result.dropped_steps
        << "  episodes: " << result.episodes.size() << "\n";
    if (!result.eval_returns.empty())
      out << "last eval return: " << result.eval_returns.back() << "\n";
    if (result_out) *result_out = result;
    return kOk;
  } catch (const StructuralError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << "\n";
    return kIntegrityError;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return kRuntimeFault;
  }
}

// -- eval ---------------------------------------------------------------------

inline int cmd_eval(const std::string& checkpoint_path,
                    const std::string& config_path_in, int episodes,
                    uint64_t seed, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    std::string config_path = config_path_in;
    if (config_path.empty()) {
      // default: the resolved config beside the checkpoint's run directory
      const fs::path run_dir = fs::path(checkpoint_path).parent_path().parent_path();
      config_path = (run_dir / "config_resolved.cfg").string();
    }
    if (!fs::exists(config_path)) {
      err << "config file not found: " << config_path << "\n";
      return kUsageError;
    }
    ConfigFile cfg = ConfigFile::from_file(config_path);
    RunConfig rc = cfg.to_run_config();

    const Checkpoint ck = Checkpoint::load(checkpoint_path);
    if (ck.config_hash != cfg.hash()) {
      err << "checkpoint/config hash mismatch: the checkpoint was written "
             "under a different resolved configuration; refusing to "
             "evaluate\n";
      return kIntegrityError;
    }

    PlanarEnv env(rc.task, rc.max_episode_steps);
    WorldModelConfig mc = rc.model;
    mc.state_dim = env.observation_dim();
    mc.action_dim = env.action_dim();
    WorldModel model(mc, 0);
    model_from_checkpoint(ck, model);

    const fs::path run_dir = fs::path(checkpoint_path).parent_path().parent_path();
    CsvWriter csv((run_dir / "eval.csv").string(),
                  {"episode", "seed", "return"});
    double mean = 0.0;
    for (int e = 0; e < episodes; ++e) {
      const uint64_t ep_seed = seed + static_cast<uint64_t>(e);
      const double ret = evaluation_return(rc, model, ep_seed);
      mean += ret;
      out << "episode " << e << " seed " << ep_seed << " return "
          << CsvWriter::num(ret) << "\n";
      csv.row({CsvWriter::num(e), CsvWriter::num(static_cast<long>(ep_seed)),
               CsvWriter::num(ret)});
    }
    mean /= episodes;
    out << "mean return " << CsvWriter::num(mean) << "\n";
    return kOk;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << "\n";
    return kIntegrityError;
  } catch (const StructuralError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "eval failed: " << e.what() << "\n";
    return kRuntimeFault;
  }
}

// -- offline retarget / stabilize ---------------------------------------------

inline int cmd_retarget(const std::string& in_path, const std::string& out_path,
                        const std::string& robot_name,
                        const std::string& human_name,
                        const std::string& mapping_name, std::ostream& err) {
  try {
    auto robot = skeleton_by_name(robot_name);
    auto human = skeleton_by_name(human_name);
    const MappingTable table = mapping_by_name(mapping_name, robot, human);
    require_valid(table);
    const std::vector<TrajFrame> frames = load_trajectory(in_path, *robot);
    std::vector<TrajFrame> out_frames;
    out_frames.reserve(frames.size());
    for (const TrajFrame& f : frames) {
      TrajFrame g = f;
      g.pose = map_robot_to_human(table, f.pose);
      out_frames.push_back(std::move(g));
    }
    save_trajectory(out_path, *human, out_frames);
    return kOk;
  } catch (const StructuralError& e) {
    err << "retarget error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "retarget failed: " << e.what() << "\n";
    return kRuntimeFault;
  }
}

inline int cmd_stabilize(const std::string& in_path,
                         const std::string& out_path,
                         const std::string& diagnostics_path,
                         const std::string& skeleton_name,
                         const std::string& config_path,
                         const std::vector<std::string>& overrides,
                         std::ostream& err) {
  try {
    auto skeleton = skeleton_by_name(skeleton_name);
    StabilizerConfig sc;
    std::string kind = "reference";
    int l_s = 145;
    if (!config_path.empty()) {
      ConfigFile cfg = load_config(config_path, overrides);
      sc = cfg.stabilizer;
      kind = cfg.reconstructor;
      l_s = cfg.l_s;
    } else if (!overrides.empty()) {
      ConfigFile cfg;
      for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos)
          throw StructuralError("override must look like section.key=value: " + o);
        cfg.set(o.substr(0, eq), o.substr(eq + 1));
      }
      sc = cfg.stabilizer;
      kind = cfg.reconstructor;
      l_s = cfg.l_s;
    }

    std::shared_ptr<MotionReconstructor> rec;
    if (kind == "identity")
      rec = std::make_shared<IdentityReconstructor>(l_s);
    else
      rec = std::make_shared<BalanceProjectionReconstructor>(skeleton, sc, l_s);

    const std::vector<TrajFrame> frames = load_trajectory(in_path, *skeleton);
    std::vector<TrajFrame> out_frames = frames;
    CsvWriter diag(diagnostics_path,
                   {"frame", "com_violation_distance", "correction_magnitude"});

    const int min_len = rec->capability().min_length;
    int start = 0;
    while (start < static_cast<int>(frames.size())) {
      const int len =
          std::min<int>(l_s, static_cast<int>(frames.size()) - start);
      TrajectorySegment seg;
      for (int i = 0; i < len; ++i)
        seg.poses.push_back(frames[start + i].pose);
      while (seg.length() < min_len) seg.poses.push_back(seg.poses.back());
      std::vector<FrameDiagnostics> fd;
      const TrajectorySegment stable = rec->reconstruct_diagnosed(seg, &fd);
      for (int i = 0; i < len; ++i) {
        out_frames[start + i].pose = stable.poses[i];
        diag.row({CsvWriter::num(start + i),
                  CsvWriter::num(fd[i].com_violation_distance),
                  CsvWriter::num(fd[i].correction_magnitude)});
      }
      start += len;
    }
    save_trajectory(out_path, *skeleton, out_frames);
    return kOk;
  } catch (const StructuralError& e) {
    err << "stabilize error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "stabilize failed: " << e.what() << "\n";
    return kRuntimeFault;
  }
}

// -- lambda sweep ---------------------------------------------------------------

inline int cmd_sweep_lambda(const std::string& config_path,
                            const std::vector<std::string>& lambdas,
                            const std::vector<std::string>& seeds, int jobs,
                            const std::string& out_dir_in, std::ostream& out,
                            std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    if (lambdas.empty() || seeds.empty()) {
      err << "sweep-lambda: need at least one lambda and one seed\n";
      return kUsageError;
    }
    if (!fs::exists(config_path)) {
      err << "config file not found: " << config_path << "\n";
      return kUsageError;
    }
    fs::path sweep_dir(out_dir_in.empty() ? "sweep-lambda" : out_dir_in);
    if (sweep_dir.is_relative())
      sweep_dir = fs::path(output_root()) / sweep_dir;
    fs::create_directories(sweep_dir);

    struct Job {
      std::string lambda, seed;
    };
    std::vector<Job> grid;
    for (const std::string& l : lambdas)
      for (const std::string& s : seeds) grid.push_back({l, s});

    struct RowBlock {
      std::vector<std::array<std::string, 4>> rows;
      bool failed = false;
      std::string error;
    };
    std::vector<RowBlock> results(grid.size());
    std::atomic<size_t> next{0};

    auto worker = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= grid.size()) return;
        const Job& job = grid[i];
        try {
          ConfigFile cfg = ConfigFile::from_file(config_path);
          cfg.set("reward.lambda", job.lambda);
          cfg.set("run.seed", job.seed);
          RunConfig rc = cfg.to_run_config();
          rc.out_dir =
              (sweep_dir / ("l" + job.lambda + "-s" + job.seed)).string();
          fs::create_directories(rc.out_dir);
          {
            std::ofstream echo(rc.out_dir + "/config_resolved.cfg");
            echo << cfg.resolved_text();
          }
          const RunResult r = run(rc);
          for (size_t k = 0; k < r.eval_returns.size(); ++k) {
            const long step = static_cast<long>(k + 1) * rc.eval_interval;
            results[i].rows.push_back({job.lambda, job.seed,
                                       std::to_string(step),
                                       CsvWriter::num(r.eval_returns[k])});
          }
        } catch (const std::exception& e) {
          results[i].failed = true;
          results[i].error = e.what();
        }
      }
    };

    const int n_workers =
        std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    CsvWriter csv((sweep_dir / "sweep.csv").string(),
                  {"lambda", "seed", "step", "eval_return"});
    int failures = 0;
    for (size_t i = 0; i < grid.size(); ++i) {
      if (results[i].failed) {
        ++failures;
        err << "sweep run lambda=" << grid[i].lambda
            << " seed=" << grid[i].seed << " failed: " << results[i].error
            << "\n";
        continue;
      }
      for (const auto& r : results[i].rows)
        csv.row({r[0], r[1], r[2], r[3]});
    }
    out << "sweep csv: " << (sweep_dir / "sweep.csv").string() << "\n";
    out << "runs: " << grid.size() << "  failed: " << failures << "\n";
    return failures == 0 ? kOk : kRuntimeFault;
  } catch (const StructuralError& e) {
    err << "sweep error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "sweep failed: " << e.what() << "\n";
    return kRuntimeFault;
  }
}

// -- inspect-config ----------------------------------------------------------

inline int cmd_inspect_config(const std::string& config_path,
                              const std::vector<std::string>& overrides,
                              std::ostream& out, std::ostream& err) {
  try {
    if (!std::filesystem::exists(config_path)) {
      err << "config file not found: " << config_path << "\n";
      return kUsageError;
    }
    ConfigFile cfg = load_config(config_path, overrides);
    cfg.to_run_config();  // validate
    out << cfg.resolved_text();
    return kOk;
  } catch (const StructuralError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "inspect failed: " << e.what() << "\n";
    return kRuntimeFault;
  }
}

}  // namespace flam::cli

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "flam/env.hpp"
#include "flam/policy.hpp"
#include "flam/reward.hpp"
#include "flam/trajectory_io.hpp"

namespace flam {

// ---------------------------------------------------------------------------
// Replay storage. Transitions become sampleable only after their segment has
// been finalized; the `finalized` flag instruments that ordering.
// ---------------------------------------------------------------------------

struct FinalizedTransition {
  VectorXd state;
  VectorXd action;
  double combined_reward = 0.0;
  VectorXd next_state;
  bool done = false;
  // reward decomposition kept for diagnostics and the lambda=0 checks
  double task_reward = 0.0;
  double stab_reward = 0.0;
  bool finalized = false;
};

/// Transitions collected over at most l_s steps, awaiting reward
/// finalization. robot_poses[i] is the pose reached by transitions[i].
struct PendingSegment {
  std::vector<Transition> transitions;  // reward field holds the task reward
  TrajectorySegment robot_poses;
  bool finalized = false;

  int length() const { return static_cast<int>(transitions.size()); }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity <= 0) throw StructuralError("replay buffer: capacity must be > 0");
  }

  int size() const { return static_cast<int>(storage_.size()); }
  int capacity() const { return capacity_; }

  void push(FinalizedTransition t) {
    if (!t.finalized)
      throw ContractError("replay buffer: transition not finalized");
    if (size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[cursor_] = std::move(t);  // FIFO eviction
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  const FinalizedTransition& at(int i) const { return storage_[i]; }

  TdBatch sample(int batch_size, std::mt19937_64& rng) const {
    if (size() < batch_size)
      throw ContractError("replay buffer: not enough transitions");
    std::uniform_int_distribution<int> pick(0, size() - 1);
    std::vector<Transition> ts;
    ts.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
      const FinalizedTransition& f = storage_[pick(rng)];
      if (!f.finalized)
        throw ContractError("replay buffer: sampled unfinalized transition");
      ts.push_back({f.state, f.action, f.combined_reward, f.next_state, f.done});
    }
    return TdBatch::from(ts);
  }

 private:
  int capacity_;
  std::vector<FinalizedTransition> storage_;
  int cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Segment collection and finalization
// ---------------------------------------------------------------------------

using ActionFn = std::function<VectorXd(const EnvState&)>;

/// Runs the policy for at most l_s steps, stopping early at episode
/// termination. The pose stored per transition is the post-step robot pose.
inline PendingSegment collect_segment(const ActionFn& policy, PlanarEnv& env,
                                      const EnvState& start, int l_s,
                                      EnvState* end_state) {
  if (env.done()) throw ContractError("collect_segment: env already done");
  PendingSegment seg;
  EnvState state = start;
  for (int i = 0; i < l_s; ++i) {
    const VectorXd action = policy(state);
    const PlanarEnv::StepResult r = env.step(action);
    Transition t;
    t.state = state.observation;
    t.action = action;
    t.reward = r.reward;  // task reward; combination happens at finalization
    t.next_state = r.state.observation;
    t.done = r.done;
    seg.transitions.push_back(std::move(t));
    seg.robot_poses.poses.push_back(extract_robot_pose(r.state));
    state = r.state;
    if (r.done) break;
  }
  if (end_state) *end_state = state;
  return seg;
}

/// Computes per-frame stabilizing rewards for the segment (padding short
/// segments by repeating the last frame up to the reconstructor's minimum
/// length; padded rewards are discarded) and combines them with the task
/// rewards. Passing a null reconstructor bypasses the stabilizer entirely.
inline std::vector<FinalizedTransition> finalize_segment(
    PendingSegment& segment, const MappingTable& mapping,
    const MotionReconstructor* reconstructor, const RewardParams& params) {
  if (segment.length() < 1)
    throw ContractError("finalize_segment: empty segment");
  if (segment.finalized)
    throw ContractError("finalize_segment: segment already finalized");
  if (segment.robot_poses.length() != segment.length())
    throw StructuralError("finalize_segment: pose/transition count mismatch");

  const int n = segment.length();
  std::vector<double> stab(n, 0.0);
  if (reconstructor) {
    TrajectorySegment robot = segment.robot_poses;
    const int min_len = reconstructor->capability().min_length;
    while (robot.length() < min_len)
      robot.poses.push_back(robot.poses.back());
    const std::vector<double> rewards =
        segment_stabilizing_rewards(robot, mapping, *reconstructor, params);
    for (int i = 0; i < n; ++i) stab[i] = rewards[i];  // padded tail dropped
  }

  std::vector<FinalizedTransition> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Transition& t = segment.transitions[i];
    FinalizedTransition f;
    f.state = t.state;
    f.action = t.action;
    f.task_reward = t.reward;
    f.stab_reward = stab[i];
    f.combined_reward =
        reconstructor ? combine_rewards(t.reward, stab[i], params) : t.reward;
    f.next_state = t.next_state;
    f.done = t.done;
    f.finalized = true;
    out.push_back(std::move(f));
  }
  segment.finalized = true;
  return out;
}

struct TrainIterationStats {
  int updates = 0;
  bool skipped = false;
  TdStats mean_losses;
};

/// l_s sampled updates per collected segment; skipped while the buffer is
/// still warming up.
inline TrainIterationStats train_iteration(WorldModel& model,
                                           const ReplayBuffer& buffer, int l_s,
                                           int batch_size,
                                           std::mt19937_64& rng) {
  TrainIterationStats stats;
  if (buffer.size() < batch_size) {
    stats.skipped = true;
    return stats;
  }
  for (int i = 0; i < l_s; ++i) {
    const TdBatch batch = buffer.sample(batch_size, rng);
    const TdStats s = model.td_update(batch, rng);
    stats.mean_losses.consistency_loss += s.consistency_loss;
    stats.mean_losses.reward_loss += s.reward_loss;
    stats.mean_losses.value_loss += s.value_loss;
    stats.mean_losses.policy_loss += s.policy_loss;
    stats.mean_losses.total_loss += s.total_loss;
    ++stats.updates;
  }
  if (stats.updates > 0) {
    const double inv = 1.0 / stats.updates;
    stats.mean_losses.consistency_loss *= inv;
    stats.mean_losses.reward_loss *= inv;
    stats.mean_losses.value_loss *= inv;
    stats.mean_losses.policy_loss *= inv;
    stats.mean_losses.total_loss *= inv;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string task = "planar_stand";
  uint64_t seed = 1;
  long total_steps = 20000;
  int max_episode_steps = 1000;  // l_e
  int segment_length = 145;      // l_s
  int buffer_capacity = 200000;
  int batch_size = 64;
  long eval_interval = 5000;
  int eval_episodes = 2;
  long checkpoint_interval = 0;  // 0: only the final checkpoint

  RewardParams reward;
  PlannerConfig planner;           // action bounds filled from the task
  StabilizerConfig stabilizer;
  WorldModelConfig model;          // state/action dims filled from the task
  std::string reconstructor = "reference";  // reference | identity
  bool stabilizer_bypass = false;

  std::string out_dir = "runs/run";
  uint64_t config_hash = 0;  // hash of the resolved config text

  /// When positive, collection stops after the first completed training
  /// episode whose task return reaches this value (time-to-threshold runs).
  double stop_at_task_return = 0.0;

  void validate() const {
    if (total_steps <= 0) throw StructuralError("run: total_steps must be > 0");
    if (segment_length < 1 || segment_length > buffer_capacity)
      throw StructuralError("run: need 1 <= l_s <= buffer capacity");
    if (max_episode_steps < 1)
      throw StructuralError("run: max_episode_steps must be >= 1");
    if (batch_size < 1) throw StructuralError("run: batch_size must be >= 1");
    if (eval_interval <= 0)
      throw StructuralError("run: eval_interval must be > 0");
    if (eval_episodes < 1)
      throw StructuralError("run: eval_episodes must be >= 1");
    if (reconstructor != "reference" && reconstructor != "identity")
      throw StructuralError("run: unknown reconstructor '" + reconstructor +
                            "'");
    stabilizer.validate();
    reward.validate();
  }
};

struct EpisodeRecord {
  long end_step = 0;
  double task_return = 0.0;
  int length = 0;
};

struct RunResult {
  std::string run_dir;
  long env_steps = 0;
  long finalized_count = 0;
  long dropped_steps = 0;
  int fault_count = 0;
  std::vector<EpisodeRecord> episodes;
  // per-transition reward decomposition, in collection order
  std::vector<double> training_rewards;       // combined
  std::vector<double> training_task_rewards;  // task component
  std::vector<double> training_stab_rewards;  // stabilizing component
  std::vector<double> eval_returns;           // one mean per metrics row
  std::string final_checkpoint;
};

namespace detail {

inline uint64_t mix_seed(uint64_t seed, uint64_t stream, uint64_t index) {
  uint64_t h = seed ^ (0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
  h ^= stream * 0xb5026f5aa96619e9ull;
  h ^= index * 0x2545f4914f6cdd1dull;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

}  // namespace detail

/// Builds the mapping and reconstructor for a task's robot skeleton.
struct StabilizationPipeline {
  MappingTable mapping;
  std::shared_ptr<const MotionReconstructor> reconstructor;

  static StabilizationPipeline for_task(const std::string& task,
                                        const RunConfig& cfg) {
    StabilizationPipeline p;
    auto human = canonical_human_skeleton();
    if (task == "pendulum_balance") {
      p.mapping = pendulum_human_mapping(triple_pendulum_skeleton(), human);
    } else {
      p.mapping = planar_biped_human_mapping(planar_biped_skeleton(), human);
    }
    require_valid(p.mapping);
    if (cfg.reconstructor == "identity") {
      p.reconstructor =
          std::make_shared<IdentityReconstructor>(cfg.segment_length);
    } else {
      p.reconstructor = std::make_shared<BalanceProjectionReconstructor>(
          human, cfg.stabilizer, cfg.segment_length);
    }
    return p;
  }
};

/// Evaluation episode: plan greedily, sum unshaped task rewards.
inline double evaluation_return(const RunConfig& cfg, WorldModel& model,
                                uint64_t seed) {
  PlanarEnv env(cfg.task, cfg.max_episode_steps);
  PlannerConfig pc = cfg.planner;
  pc.action_low = env.spec().action_low;
  pc.action_high = env.spec().action_high;
  Planner<WorldModel> planner(pc, detail::mix_seed(seed, 7, 0));
  EnvState state = env.reset(seed);
  double total = 0.0;
  while (!env.done()) {
    const VectorXd a = planner.plan(model, state.observation);
    const PlanarEnv::StepResult r = env.step(a);
    total += r.reward;
    state = r.state;
  }
  return total;
}

inline RunResult run(const RunConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;

  PlanarEnv env(cfg.task, cfg.max_episode_steps);
  WorldModelConfig mc = cfg.model;
  mc.state_dim = env.observation_dim();
  mc.action_dim = env.action_dim();
  WorldModel model(mc, detail::mix_seed(cfg.seed, 1, 0));

  PlannerConfig pc = cfg.planner;
  pc.action_low = env.spec().action_low;
  pc.action_high = env.spec().action_high;
  Planner<WorldModel> planner(pc, detail::mix_seed(cfg.seed, 2, 0));

  RewardParams reward = cfg.reward;
  StabilizationPipeline pipeline;
  if (!cfg.stabilizer_bypass) {
    pipeline = StabilizationPipeline::for_task(cfg.task, cfg);
    if (reward.participating_joints.empty())
      reward.participating_joints = pipeline.mapping.mapped_human_joints();
  }

  ReplayBuffer buffer(cfg.buffer_capacity);
  std::mt19937_64 train_rng(detail::mix_seed(cfg.seed, 3, 0));

  RunResult result;
  fs::create_directories(cfg.out_dir);
  fs::create_directories(cfg.out_dir + "/checkpoints");
  result.run_dir = cfg.out_dir;
  std::ofstream faults(cfg.out_dir + "/faults.log");

  CsvWriter metrics(
      cfg.out_dir + "/metrics.csv",
      {"step", "episode", "eval_return", "train_return", "mean_R_S",
       "mean_combined_reward", "frac_segments_rewarded", "wall_time_s",
       "loss_consistency", "loss_reward", "loss_value", "loss_policy"});

  const auto t0 = std::chrono::steady_clock::now();
  const uint64_t config_hash =
      cfg.config_hash != 0 ? cfg.config_hash : (fnv1a(cfg.task) ^ cfg.seed);

  long steps = 0;
  long next_eval = cfg.eval_interval;
  long next_checkpoint =
      cfg.checkpoint_interval > 0 ? cfg.checkpoint_interval : -1;
  int episode_index = 0;
  double episode_return = 0.0;
  int episode_length = 0;
  double last_train_return = 0.0;

  // accumulators since the last metrics row
  double acc_stab = 0.0, acc_combined = 0.0;
  long acc_frames = 0;
  long acc_segments = 0, acc_segments_rewarded = 0;
  TdStats acc_losses;
  long acc_updates = 0;

  EnvState state = env.reset(detail::mix_seed(cfg.seed, 4, episode_index));

  while (steps < cfg.total_steps) {
    const int want = static_cast<int>(
        std::min<long>(cfg.segment_length, cfg.total_steps - steps));
    PendingSegment segment = collect_segment(
        [&](const EnvState& s) { return planner.plan(model, s.observation); },
        env, state, want, &state);
    steps += segment.length();
    result.env_steps += segment.length();

    for (const Transition& t : segment.transitions) {
      episode_return += t.reward;
      ++episode_length;
    }

    bool episode_finished = env.done();

    try {
      std::vector<FinalizedTransition> finalized = finalize_segment(
          segment, pipeline.mapping,
          cfg.stabilizer_bypass ? nullptr : pipeline.reconstructor.get(),
          reward);
      bool rewarded = false;
      for (FinalizedTransition& f : finalized) {
        acc_stab += f.stab_reward;
        acc_combined += f.combined_reward;
        ++acc_frames;
        if (f.stab_reward > 0.0) rewarded = true;
        result.training_rewards.push_back(f.combined_reward);
        result.training_task_rewards.push_back(f.task_reward);
        result.training_stab_rewards.push_back(f.stab_reward);
        buffer.push(std::move(f));
        ++result.finalized_count;
      }
      ++acc_segments;
      if (rewarded) ++acc_segments_rewarded;
    } catch (const std::exception& e) {
      faults << "step " << steps << " segment dropped: " << e.what() << '\n';
      faults.flush();
      result.dropped_steps += segment.length();
      ++result.fault_count;
    }

    const TrainIterationStats ts = train_iteration(
        model, buffer, cfg.segment_length, cfg.batch_size, train_rng);
    if (!ts.skipped) {
      acc_losses.consistency_loss += ts.mean_losses.consistency_loss;
      acc_losses.reward_loss += ts.mean_losses.reward_loss;
      acc_losses.value_loss += ts.mean_losses.value_loss;
      acc_losses.policy_loss += ts.mean_losses.policy_loss;
      ++acc_updates;
    }

    bool reached_threshold = false;
    if (episode_finished) {
      result.episodes.push_back({steps, episode_return, episode_length});
      last_train_return = episode_return;
      reached_threshold = cfg.stop_at_task_return > 0.0 &&
                          episode_return >= cfg.stop_at_task_return;
      episode_return = 0.0;
      episode_length = 0;
      ++episode_index;
      planner.reset();
      state = env.reset(detail::mix_seed(cfg.seed, 4, episode_index));
    }

    while (steps >= next_eval) {
      double eval_mean = 0.0;
      for (int e = 0; e < cfg.eval_episodes; ++e)
        eval_mean += evaluation_return(
            cfg, model, detail::mix_seed(cfg.seed, 5, next_eval + e));
      eval_mean /= cfg.eval_episodes;
      result.eval_returns.push_back(eval_mean);

      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      const double inv_frames = acc_frames > 0 ? 1.0 / acc_frames : 0.0;
      const double inv_updates = acc_updates > 0 ? 1.0 / acc_updates : 0.0;
      metrics.row({CsvWriter::num(next_eval), CsvWriter::num(episode_index),
                   CsvWriter::num(eval_mean),
                   CsvWriter::num(last_train_return),
                   CsvWriter::num(acc_stab * inv_frames),
                   CsvWriter::num(acc_combined * inv_frames),
                   CsvWriter::num(acc_segments > 0
                                      ? double(acc_segments_rewarded) /
                                            double(acc_segments)
                                      : 0.0),
                   CsvWriter::num(wall),
                   CsvWriter::num(acc_losses.consistency_loss * inv_updates),
                   CsvWriter::num(acc_losses.reward_loss * inv_updates),
                   CsvWriter::num(acc_losses.value_loss * inv_updates),
                   CsvWriter::num(acc_losses.policy_loss * inv_updates)});
      acc_stab = acc_combined = 0.0;
      acc_frames = 0;
      acc_segments = acc_segments_rewarded = 0;
      acc_losses = TdStats{};
      acc_updates = 0;
      next_eval += cfg.eval_interval;
    }

    if (next_checkpoint > 0 && steps >= next_checkpoint) {
      model_to_checkpoint(model, config_hash)
          .save(cfg.out_dir + "/checkpoints/ckpt_" + std::to_string(steps) +
                ".bin");
      next_checkpoint += cfg.checkpoint_interval;
    }

    if (reached_threshold) break;
  }

  result.final_checkpoint = cfg.out_dir + "/checkpoints/final.bin";
  model_to_checkpoint(model, config_hash).save(result.final_checkpoint);
  return result;
}

}  // namespace flam

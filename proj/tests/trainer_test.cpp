#include "flam/trainer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

namespace flam {
namespace {

ActionFn random_policy(PlanarEnv& env, uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  const int dim = env.action_dim();
  return [rng, dim](const EnvState&) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorXd a(dim);
    for (int i = 0; i < dim; ++i) a[i] = u(*rng);
    return a;
  };
}

TEST(CollectSegment, FullLengthWithoutTermination) {
  PlanarEnv env("pendulum_balance", 1000);
  EnvState state = env.reset(1);
  EnvState end;
  const PendingSegment seg =
      collect_segment(random_policy(env, 2), env, state, 145, &end);
  EXPECT_EQ(seg.length(), 145);
  EXPECT_EQ(seg.robot_poses.length(), 145);
  EXPECT_EQ(end.time_step, 145);
}

TEST(CollectSegment, StopsEarlyAtTermination) {
  PlanarEnv env("pendulum_balance", 60);  // short episode cap forces the stop
  EnvState state = env.reset(3);
  const PendingSegment seg =
      collect_segment(random_policy(env, 4), env, state, 145, nullptr);
  EXPECT_EQ(seg.length(), 60);
  EXPECT_TRUE(seg.transitions.back().done);
  EXPECT_THROW(collect_segment(random_policy(env, 5), env, state, 145, nullptr),
               ContractError);
}

TEST(CollectSegment, EpisodeSplitsInto145x6Plus130) {
  PlanarEnv env("pendulum_balance", 1000);
  EnvState state = env.reset(6);
  const ActionFn policy = random_policy(env, 7);
  std::vector<int> lengths;
  while (!env.done()) {
    const PendingSegment seg = collect_segment(policy, env, state, 145, &state);
    lengths.push_back(seg.length());
  }
  const std::vector<int> want{145, 145, 145, 145, 145, 145, 130};
  EXPECT_EQ(lengths, want);
}

struct FinalizeFixture {
  std::shared_ptr<const SkeletonSpec> human = canonical_human_skeleton();
  MappingTable mapping =
      pendulum_human_mapping(triple_pendulum_skeleton(), human);
  IdentityReconstructor identity{145};
  RewardParams params;

  FinalizeFixture() {
    params.participating_joints = mapping.mapped_human_joints();
    params.n_bar = 2;
    params.t_s = 0.2;
    params.q = 750.0;
    params.l_e = 1000.0;
    params.lambda = 1.0;
  }

  PendingSegment collect(int cap, int l_s, uint64_t seed) {
    PlanarEnv env("pendulum_balance", cap);
    EnvState state = env.reset(seed);
    return collect_segment(random_policy(env, seed + 1), env, state, l_s,
                           nullptr);
  }
};

TEST(FinalizeSegment, IdentityReconstructorGivesMaximalBonusEverywhere) {
  FinalizeFixture fx;
  PendingSegment seg = fx.collect(1000, 40, 8);
  const auto finalized =
      finalize_segment(seg, fx.mapping, &fx.identity, fx.params);
  ASSERT_EQ(finalized.size(), 40u);
  const double max_rs = fx.params.participating_joints.size() * fx.params.r_j;
  for (size_t i = 0; i < finalized.size(); ++i) {
    EXPECT_EQ(finalized[i].task_reward, seg.transitions[i].reward);
    EXPECT_NEAR(finalized[i].stab_reward, max_rs, 1e-15);
    EXPECT_EQ(finalized[i].combined_reward,
              combine_rewards(finalized[i].task_reward, finalized[i].stab_reward,
                              fx.params));
    EXPECT_TRUE(finalized[i].finalized);
  }
  EXPECT_TRUE(seg.finalized);
  EXPECT_THROW(finalize_segment(seg, fx.mapping, &fx.identity, fx.params),
               ContractError);
}

TEST(FinalizeSegment, LambdaZeroEqualsTaskRewardBitwise) {
  FinalizeFixture fx;
  fx.params.lambda = 0.0;
  PendingSegment seg = fx.collect(1000, 30, 9);
  const auto finalized =
      finalize_segment(seg, fx.mapping, &fx.identity, fx.params);
  for (const FinalizedTransition& f : finalized) {
    EXPECT_EQ(f.combined_reward, f.task_reward);  // bit-identical
  }
}

TEST(FinalizeSegment, BypassSkipsThePipeline) {
  FinalizeFixture fx;
  PendingSegment seg = fx.collect(1000, 12, 10);
  const auto finalized = finalize_segment(seg, fx.mapping, nullptr, fx.params);
  for (const FinalizedTransition& f : finalized) {
    EXPECT_EQ(f.combined_reward, f.task_reward);
    EXPECT_EQ(f.stab_reward, 0.0);
  }
}

TEST(FinalizeSegment, ShortSegmentsPaddedAndPaddingDiscarded) {
  FinalizeFixture fx;
  BalanceProjectionReconstructor ref(fx.human, {}, 145);
  ASSERT_EQ(ref.capability().min_length, 8);
  PendingSegment seg = fx.collect(3, 145, 11);  // 3-step episode
  ASSERT_EQ(seg.length(), 3);
  const auto finalized = finalize_segment(seg, fx.mapping, &ref, fx.params);
  EXPECT_EQ(finalized.size(), 3u);  // padded frames produce no transitions
}

TEST(ReplayBuffer, OnlyFinalizedTransitionsEnter) {
  ReplayBuffer buffer(16);
  FinalizedTransition t;
  t.state = VectorXd::Zero(2);
  t.action = VectorXd::Zero(1);
  t.next_state = VectorXd::Zero(2);
  EXPECT_THROW(buffer.push(t), ContractError);  // not finalized
  t.finalized = true;
  buffer.push(t);
  EXPECT_EQ(buffer.size(), 1);
}

TEST(ReplayBuffer, FifoEvictionAtCapacity) {
  ReplayBuffer buffer(4);
  for (int i = 0; i < 6; ++i) {
    FinalizedTransition t;
    t.state = VectorXd::Constant(1, i);
    t.action = VectorXd::Zero(1);
    t.next_state = VectorXd::Zero(1);
    t.combined_reward = i;
    t.finalized = true;
    buffer.push(t);
  }
  EXPECT_EQ(buffer.size(), 4);
  std::vector<double> kept;
  for (int i = 0; i < 4; ++i) kept.push_back(buffer.at(i).combined_reward);
  std::sort(kept.begin(), kept.end());
  EXPECT_EQ(kept, (std::vector<double>{2, 3, 4, 5}));  // oldest two evicted
}

TEST(TrainIteration, WarmupSkipsAndFullIterationRunsLsUpdates) {
  WorldModelConfig mc;
  mc.state_dim = 3;
  mc.action_dim = 1;
  mc.latent_dim = 4;
  mc.hidden = 6;
  WorldModel model(mc, 13);
  ReplayBuffer buffer(64);
  std::mt19937_64 rng(14);

  const auto skipped = train_iteration(model, buffer, 9, 8, rng);
  EXPECT_TRUE(skipped.skipped);
  EXPECT_EQ(skipped.updates, 0);

  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    FinalizedTransition t;
    t.state = VectorXd::NullaryExpr(3, [&] { return n(rng); });
    t.action = VectorXd::NullaryExpr(1, [&] { return n(rng); });
    t.next_state = VectorXd::NullaryExpr(3, [&] { return n(rng); });
    t.combined_reward = n(rng);
    t.finalized = true;
    buffer.push(t);
  }
  const auto full = train_iteration(model, buffer, 9, 8, rng);
  EXPECT_FALSE(full.skipped);
  EXPECT_EQ(full.updates, 9);  // exactly l_s update calls
}

// ---------------------------------------------------------------------------
// run() orchestration
// ---------------------------------------------------------------------------

RunConfig smoke_config(const std::string& dir) {
  RunConfig rc;
  rc.task = "pendulum_balance";
  rc.seed = 5;
  rc.total_steps = 2000;
  rc.max_episode_steps = 250;
  rc.segment_length = 145;
  rc.buffer_capacity = 4000;
  rc.batch_size = 16;
  rc.eval_interval = 1000;
  rc.eval_episodes = 1;
  rc.reward.n_bar = 2;
  rc.reward.t_s = 0.2;
  rc.reward.l_e = 250.0;
  rc.planner.population = 16;
  rc.planner.elites = 4;
  rc.planner.iterations = 1;
  rc.planner.horizon = 2;
  rc.model.latent_dim = 8;
  rc.model.hidden = 12;
  rc.out_dir = dir;
  return rc;
}

TEST(Run, SmokeRunWritesAllArtifacts) {
  namespace fs = std::filesystem;
  const std::string dir = ::testing::TempDir() + "/smoke_run";
  fs::remove_all(dir);
  const RunConfig rc = smoke_config(dir);
  const RunResult result = run(rc);

  EXPECT_EQ(result.env_steps, 2000);
  EXPECT_EQ(result.finalized_count, 2000);
  EXPECT_EQ(result.dropped_steps, 0);
  EXPECT_TRUE(fs::exists(dir + "/metrics.csv"));
  EXPECT_TRUE(fs::exists(dir + "/faults.log"));
  EXPECT_TRUE(fs::exists(dir + "/checkpoints/final.bin"));

  // metrics rows = total_steps / eval_interval
  std::ifstream metrics(dir + "/metrics.csv");
  std::string line;
  int rows = -1;  // header
  while (std::getline(metrics, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(result.eval_returns.size(), 2u);

  // per-episode accounting: episodes of exactly 250 steps
  ASSERT_EQ(result.episodes.size(), 8u);
  for (const EpisodeRecord& e : result.episodes) EXPECT_EQ(e.length, 250);
}

TEST(Run, RewardDecompositionHoldsToTolerance) {
  namespace fs = std::filesystem;
  const std::string dir = ::testing::TempDir() + "/decomp_run";
  fs::remove_all(dir);
  RunConfig rc = smoke_config(dir);
  rc.total_steps = 600;
  const RunResult result = run(rc);
  ASSERT_EQ(result.training_rewards.size(), 600u);
  const double scale = rc.reward.lambda * (rc.reward.q / rc.reward.l_e);
  for (size_t i = 0; i < result.training_rewards.size(); ++i) {
    const double want = result.training_task_rewards[i] +
                        scale * result.training_stab_rewards[i];
    EXPECT_NEAR(result.training_rewards[i], want, 1e-12);
  }
}

TEST(Run, BufferAccountingAfterTenSegments) {
  namespace fs = std::filesystem;
  const std::string dir = ::testing::TempDir() + "/buffer_run";
  fs::remove_all(dir);
  RunConfig rc = smoke_config(dir);
  rc.total_steps = 10 * 145;
  rc.max_episode_steps = 2000;  // no early resets
  rc.reward.l_e = 2000.0;
  rc.eval_interval = 1450;
  const RunResult result = run(rc);
  EXPECT_EQ(result.finalized_count, 10 * 145);
}

}  // namespace
}  // namespace flam

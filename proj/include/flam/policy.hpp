#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "flam/nn.hpp"

namespace flam {

// ---------------------------------------------------------------------------
// World model: encoder, latent dynamics, reward head, two value heads, policy
// prior, plus Polyak-averaged targets. All heads are Mlp with analytic
// gradients; finite differences stay in the tests.
// ---------------------------------------------------------------------------

struct WorldModelConfig {
  int state_dim = 0;
  int action_dim = 0;
  int latent_dim = 32;
  int hidden = 64;
  double log_std_min = std::log(0.05);
  double log_std_max = std::log(1.0);
  double gamma = 0.99;
  double tau = 0.005;
  double learning_rate = 3e-4;
  double entropy_coef = 1e-3;

  void validate() const {
    if (state_dim <= 0 || action_dim <= 0)
      throw StructuralError("world model: state/action dims must be set");
    if (latent_dim <= 0 || hidden <= 0)
      throw StructuralError("world model: latent/hidden dims must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw StructuralError("world model: gamma must be in (0, 1]");
    if (!(tau > 0.0 && tau <= 1.0))
      throw StructuralError("world model: tau must be in (0, 1]");
    if (log_std_min >= log_std_max)
      throw StructuralError("world model: log_std bounds inverted");
  }
};

struct Transition {
  VectorXd state;
  VectorXd action;
  double reward = 0.0;
  VectorXd next_state;
  bool done = false;
};

struct TdBatch {
  MatrixXd states;       // state_dim x B
  MatrixXd actions;      // action_dim x B
  VectorXd rewards;      // B
  MatrixXd next_states;  // state_dim x B
  VectorXd done;         // B, 1.0 when terminal

  int size() const { return static_cast<int>(rewards.size()); }

  static TdBatch from(const std::vector<Transition>& ts) {
    TdBatch b;
    const int n = static_cast<int>(ts.size());
    if (n == 0) throw ContractError("td batch: empty");
    b.states.resize(ts[0].state.size(), n);
    b.actions.resize(ts[0].action.size(), n);
    b.next_states.resize(ts[0].next_state.size(), n);
    b.rewards.resize(n);
    b.done.resize(n);
    for (int i = 0; i < n; ++i) {
      b.states.col(i) = ts[i].state;
      b.actions.col(i) = ts[i].action;
      b.next_states.col(i) = ts[i].next_state;
      b.rewards[i] = ts[i].reward;
      b.done[i] = ts[i].done ? 1.0 : 0.0;
    }
    return b;
  }
};

struct TdStats {
  double consistency_loss = 0.0;
  double reward_loss = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  double total_loss = 0.0;
};

/// Scales of the four loss terms in the joint objective. The gradient tests
/// use one-hot weights to probe each term in isolation.
struct TdLossWeights {
  double consistency = 1.0;
  double reward = 1.0;
  double value = 1.0;
  double policy = 1.0;
};

class WorldModel {
 public:
  WorldModel() = default;

  explicit WorldModel(const WorldModelConfig& cfg, uint64_t seed = 0)
      : cfg_(cfg),
        encoder_(cfg.state_dim, cfg.hidden, cfg.latent_dim),
        dynamics_(cfg.latent_dim + cfg.action_dim, cfg.hidden, cfg.latent_dim),
        reward_(cfg.latent_dim + cfg.action_dim, cfg.hidden, 1),
        q1_(cfg.latent_dim + cfg.action_dim, cfg.hidden, 1),
        q2_(cfg.latent_dim + cfg.action_dim, cfg.hidden, 1),
        policy_(cfg.latent_dim, cfg.hidden, 2 * cfg.action_dim) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    encoder_.init(rng);
    dynamics_.init(rng);
    reward_.init(rng);
    q1_.init(rng);
    q2_.init(rng);
    policy_.init(rng);
    encoder_target_ = encoder_;
    q1_target_ = q1_;
    q2_target_ = q2_;
    adam_.lr = cfg_.learning_rate;
  }

  const WorldModelConfig& config() const { return cfg_; }
  int action_dim() const { return cfg_.action_dim; }
  int latent_dim() const { return cfg_.latent_dim; }

  // -- planner-facing surface (batched, column-major) -----------------------

  VectorXd encode(const VectorXd& state) const {
    if (state.size() != cfg_.state_dim)
      throw StructuralError("encode: state dimension mismatch");
    return encoder_.forward(state);
  }

  MatrixXd dynamics_batch(const MatrixXd& z, const MatrixXd& a) const {
    return dynamics_.forward(stack(z, a));
  }

  RowVectorXd reward_batch(const MatrixXd& z, const MatrixXd& a) const {
    return reward_.forward(stack(z, a)).row(0);
  }

  RowVectorXd value_min_batch(const MatrixXd& z, const MatrixXd& a) const {
    const MatrixXd za = stack(z, a);
    return q1_.forward(za).row(0).cwiseMin(q2_.forward(za).row(0));
  }

  void prior_batch(const MatrixXd& z, MatrixXd* mean,
                   MatrixXd* log_std) const {
    const MatrixXd out = policy_.forward(z);
    *mean = out.topRows(cfg_.action_dim);
    if (log_std)
      *log_std = squash_log_std(out.bottomRows(cfg_.action_dim));
  }

  // -- training --------------------------------------------------------------

  /// One gradient step on the joint objective followed by the Polyak target
  /// update. Rejects the step on a non-finite loss.
  TdStats td_update(const TdBatch& batch, std::mt19937_64& rng) {
    MatrixXd noise(cfg_.action_dim, batch.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index c = 0; c < noise.cols(); ++c)
      for (Eigen::Index r = 0; r < noise.rows(); ++r) noise(r, c) = normal(rng);

    Grads grads(cfg_);
    const TdStats stats = td_losses(batch, noise, &grads);
    if (!std::isfinite(stats.total_loss))
      throw TrainingFault("td_update: non-finite loss, step rejected");

    VectorXd flat_grad(param_count());
    grads.write_flat(flat_grad.data());
    if (!flat_grad.allFinite())
      throw TrainingFault("td_update: non-finite gradient, step rejected");
    VectorXd params(param_count());
    write_online_flat(params.data());
    params += adam_.step(flat_grad);
    read_online_flat(params.data());

    polyak(cfg_.tau);
    return stats;
  }

  struct Grads {
    Mlp encoder, dynamics, reward, q1, q2, policy;
    explicit Grads(const WorldModelConfig& c)
        : encoder(c.state_dim, c.hidden, c.latent_dim),
          dynamics(c.latent_dim + c.action_dim, c.hidden, c.latent_dim),
          reward(c.latent_dim + c.action_dim, c.hidden, 1),
          q1(c.latent_dim + c.action_dim, c.hidden, 1),
          q2(c.latent_dim + c.action_dim, c.hidden, 1),
          policy(c.latent_dim, c.hidden, 2 * c.action_dim) {}
    void write_flat(double* out) const {
      encoder.write_flat(out);
      out += encoder.param_count();
      dynamics.write_flat(out);
      out += dynamics.param_count();
      reward.write_flat(out);
      out += reward.param_count();
      q1.write_flat(out);
      out += q1.param_count();
      q2.write_flat(out);
      out += q2.param_count();
      policy.write_flat(out);
    }
  };

  /// TD target y = r + gamma (1 - done) min target-Q(E(s'), P_mean(E(s'))).
  /// Gradients never flow through it; the gradient tests freeze it when
  /// probing with finite differences.
  RowVectorXd td_targets(const TdBatch& batch) const {
    const int b = batch.size();
    const MatrixXd z_next = encoder_.forward(batch.next_states);
    MatrixXd next_mean;
    prior_batch(z_next, &next_mean, nullptr);
    const MatrixXd za_next = stack(z_next, next_mean);
    const RowVectorXd q_next = q1_target_.forward(za_next).row(0).cwiseMin(
        q2_target_.forward(za_next).row(0));
    return batch.rewards.transpose() +
           cfg_.gamma * (RowVectorXd::Ones(b) - batch.done.transpose())
                            .cwiseProduct(q_next);
  }

  /// Loss evaluation with explicit policy noise; the deterministic core that
  /// td_update wraps and the gradient tests probe against finite differences.
  /// `targets` overrides the TD target (used to hold it fixed across probes).
  TdStats td_losses(const TdBatch& batch, const MatrixXd& policy_noise,
                    Grads* grads, const TdLossWeights& weights = {},
                    const RowVectorXd* targets = nullptr) const {
    const int b = batch.size();
    const double inv_b = 1.0 / b;

    Mlp::Cache enc_cache, dyn_cache, rew_cache, q1_cache, q2_cache;
    Mlp::Cache pol_cache, q1_pi_cache, q2_pi_cache;

    const MatrixXd z = encoder_.forward(batch.states, enc_cache);
    const MatrixXd z_next_target = encoder_target_.forward(batch.next_states);
    const MatrixXd za = stack(z, batch.actions);

    // latent consistency: || D(E(s), a) - stopgrad(E_target(s')) ||^2
    const MatrixXd z_pred = dynamics_.forward(za, dyn_cache);
    const MatrixXd dc = z_pred - z_next_target;
    const double loss_c = dc.squaredNorm() * inv_b;

    // reward head
    const RowVectorXd r_pred = reward_.forward(za, rew_cache).row(0);
    const RowVectorXd r_err = r_pred - batch.rewards.transpose();
    const double loss_r = r_err.squaredNorm() * inv_b;

    const RowVectorXd y = targets ? *targets : td_targets(batch);

    const RowVectorXd q1_pred = q1_.forward(za, q1_cache).row(0);
    const RowVectorXd q2_pred = q2_.forward(za, q2_cache).row(0);
    const RowVectorXd q1_err = q1_pred - y;
    const RowVectorXd q2_err = q2_pred - y;
    const double loss_q = (q1_err.squaredNorm() + q2_err.squaredNorm()) * inv_b;

    // policy prior: maximize min-Q(z, a_pi) + entropy bonus, z detached
    const MatrixXd pol_out = policy_.forward(z, pol_cache);
    const MatrixXd mean = pol_out.topRows(cfg_.action_dim);
    const MatrixXd raw = pol_out.bottomRows(cfg_.action_dim);
    const MatrixXd log_std = squash_log_std(raw);
    const MatrixXd std_dev = log_std.array().exp();
    const MatrixXd a_pi = mean + std_dev.cwiseProduct(policy_noise);
    const MatrixXd za_pi = stack(z, a_pi);
    const RowVectorXd q1_pi = q1_.forward(za_pi, q1_pi_cache).row(0);
    const RowVectorXd q2_pi = q2_.forward(za_pi, q2_pi_cache).row(0);
    const RowVectorXd q_pi = q1_pi.cwiseMin(q2_pi);
    const double loss_p =
        -q_pi.sum() * inv_b - cfg_.entropy_coef * log_std.sum() * inv_b;

    TdStats stats;
    stats.consistency_loss = loss_c;
    stats.reward_loss = loss_r;
    stats.value_loss = loss_q;
    stats.policy_loss = loss_p;
    stats.total_loss = weights.consistency * loss_c + weights.reward * loss_r +
                       weights.value * loss_q + weights.policy * loss_p;
    if (!grads) return stats;

    MatrixXd dz = MatrixXd::Zero(cfg_.latent_dim, b);

    // consistency backward
    if (weights.consistency != 0.0) {
      const MatrixXd dy = weights.consistency * 2.0 * inv_b * dc;
      const MatrixXd dza = dynamics_.backward(dyn_cache, dy, &grads->dynamics);
      dz += dza.topRows(cfg_.latent_dim);
    }
    // reward backward
    if (weights.reward != 0.0) {
      MatrixXd dy = MatrixXd::Zero(1, b);
      dy.row(0) = weights.reward * 2.0 * inv_b * r_err;
      const MatrixXd dza = reward_.backward(rew_cache, dy, &grads->reward);
      dz += dza.topRows(cfg_.latent_dim);
    }
    // value backward
    if (weights.value != 0.0) {
      MatrixXd dy1 = MatrixXd::Zero(1, b), dy2 = MatrixXd::Zero(1, b);
      dy1.row(0) = weights.value * 2.0 * inv_b * q1_err;
      dy2.row(0) = weights.value * 2.0 * inv_b * q2_err;
      dz += q1_.backward(q1_cache, dy1, &grads->q1).topRows(cfg_.latent_dim);
      dz += q2_.backward(q2_cache, dy2, &grads->q2).topRows(cfg_.latent_dim);
    }
    // policy backward: into the prior only; Q params frozen, z detached
    if (weights.policy != 0.0) {
      MatrixXd da = MatrixXd::Zero(cfg_.action_dim, b);
      for (int i = 0; i < b; ++i) {
        const bool use_q1 = q1_pi(i) <= q2_pi(i);
        const Mlp& head = use_q1 ? q1_ : q2_;
        const Mlp::Cache& cache = use_q1 ? q1_pi_cache : q2_pi_cache;
        // per-sample input gradient of the selected head
        Mlp::Cache col_cache;
        col_cache.x = cache.x.col(i);
        col_cache.a1 = cache.a1.col(i);
        col_cache.a2 = cache.a2.col(i);
        MatrixXd dy(1, 1);
        dy(0, 0) = -weights.policy * inv_b;
        const MatrixXd dza = head.backward(col_cache, dy, nullptr);
        da.col(i) = dza.bottomRows(cfg_.action_dim).col(0);
      }
      MatrixXd dmean = da;
      MatrixXd dlog_std = da.cwiseProduct(policy_noise).cwiseProduct(std_dev);
      dlog_std.array() -= weights.policy * cfg_.entropy_coef * inv_b;
      const MatrixXd draw = dlog_std.cwiseProduct(squash_log_std_grad(raw));
      MatrixXd dpol(2 * cfg_.action_dim, b);
      dpol.topRows(cfg_.action_dim) = dmean;
      dpol.bottomRows(cfg_.action_dim) = draw;
      policy_.backward(pol_cache, dpol, &grads->policy);
    }
    encoder_.backward(enc_cache, dz, &grads->encoder);
    return stats;
  }

  /// Targets move toward the online parameters at rate t.
  void polyak(double t) {
    encoder_target_.lerp_toward(encoder_, t);
    q1_target_.lerp_toward(q1_, t);
    q2_target_.lerp_toward(q2_, t);
  }

  // -- parameter access -------------------------------------------------------

  int param_count() const {
    return encoder_.param_count() + dynamics_.param_count() +
           reward_.param_count() + q1_.param_count() + q2_.param_count() +
           policy_.param_count();
  }

  /// Offset of the policy-prior parameters inside the flat vector; the
  /// policy loss trains exactly that slice.
  int policy_param_offset() const {
    return encoder_.param_count() + dynamics_.param_count() +
           reward_.param_count() + q1_.param_count() + q2_.param_count();
  }

  void write_online_flat(double* out) const {
    encoder_.write_flat(out);
    out += encoder_.param_count();
    dynamics_.write_flat(out);
    out += dynamics_.param_count();
    reward_.write_flat(out);
    out += reward_.param_count();
    q1_.write_flat(out);
    out += q1_.param_count();
    q2_.write_flat(out);
    out += q2_.param_count();
    policy_.write_flat(out);
  }

  void read_online_flat(const double* in) {
    encoder_.read_flat(in);
    in += encoder_.param_count();
    dynamics_.read_flat(in);
    in += dynamics_.param_count();
    reward_.read_flat(in);
    in += reward_.param_count();
    q1_.read_flat(in);
    in += q1_.param_count();
    q2_.read_flat(in);
    in += q2_.param_count();
    policy_.read_flat(in);
  }

  Mlp& encoder() { return encoder_; }
  Mlp& dynamics() { return dynamics_; }
  Mlp& reward_head() { return reward_; }
  Mlp& q1() { return q1_; }
  Mlp& q2() { return q2_; }
  Mlp& policy_prior() { return policy_; }
  Mlp& encoder_target() { return encoder_target_; }
  Mlp& q1_target() { return q1_target_; }
  Mlp& q2_target() { return q2_target_; }
  const Mlp& encoder() const { return encoder_; }
  const Mlp& encoder_target() const { return encoder_target_; }
  const Mlp& q1_target() const { return q1_target_; }

  MatrixXd squash_log_std(const MatrixXd& raw) const {
    const double lo = cfg_.log_std_min, hi = cfg_.log_std_max;
    return (lo + (hi - lo) / (1.0 + (-raw.array()).exp())).matrix();
  }

  MatrixXd squash_log_std_grad(const MatrixXd& raw) const {
    const double lo = cfg_.log_std_min, hi = cfg_.log_std_max;
    const auto sig = 1.0 / (1.0 + (-raw.array()).exp());
    return ((hi - lo) * sig * (1.0 - sig)).matrix();
  }

 private:
  static MatrixXd stack(const MatrixXd& top, const MatrixXd& bottom) {
    MatrixXd out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
  }

  WorldModelConfig cfg_;
  Mlp encoder_, dynamics_, reward_, q1_, q2_, policy_;
  Mlp encoder_target_, q1_target_, q2_target_;
  Adam adam_;
};

// ---------------------------------------------------------------------------
// Sampling planner (cross-entropy method over action sequences).
// Any model exposing encode / dynamics_batch / reward_batch / value_min_batch
// / prior_batch / action_dim can be planned with, which keeps the planner
// testable against analytic toy models.
// ---------------------------------------------------------------------------

struct PlannerConfig {
  int horizon = 3;
  int population = 256;
  int elites = 32;
  int iterations = 4;
  double discount = 0.99;
  double sigma_init = 0.5;      // fraction of the half action range
  double sigma_floor = 0.05;    // fraction of the half action range
  double prior_fraction = 0.25;
  VectorXd action_low, action_high;

  void validate() const {
    if (horizon < 1) throw StructuralError("planner: horizon must be >= 1");
    if (elites < 1 || elites > population)
      throw StructuralError("planner: need 1 <= elites <= population");
    if (iterations < 1)
      throw StructuralError("planner: iterations must be >= 1");
    if (!(discount > 0.0 && discount <= 1.0))
      throw StructuralError("planner: discount must be in (0, 1]");
    if (action_low.size() == 0 || action_low.size() != action_high.size())
      throw StructuralError("planner: action bounds not set");
    if (sigma_floor < 0.0 || sigma_init < 0.0)
      throw StructuralError("planner: sigma must be >= 0");
    if (prior_fraction < 0.0 || prior_fraction > 1.0)
      throw StructuralError("planner: prior_fraction must be in [0, 1]");
  }
};

/// Discounted model return of one action sequence: sum of predicted rewards
/// plus the discounted terminal value at the prior-mean action.
template <class Model>
double rollout_score(const Model& model, const VectorXd& z0,
                     const MatrixXd& actions, double discount, int horizon) {
  if (actions.cols() != horizon)
    throw StructuralError("rollout_score: sequence length != horizon");
  MatrixXd z = z0;
  double total = 0.0;
  double scale = 1.0;
  for (int t = 0; t < horizon; ++t) {
    const MatrixXd a = actions.col(t);
    total += scale * model.reward_batch(z, a)(0);
    z = model.dynamics_batch(z, a);
    scale *= discount;
  }
  MatrixXd mean;
  model.prior_batch(z, &mean, nullptr);
  total += scale * model.value_min_batch(z, mean)(0);
  return total;
}

template <class Model>
RowVectorXd rollout_scores_batch(const Model& model, const MatrixXd& z0,
                                 const std::vector<MatrixXd>& actions,
                                 double discount, int horizon) {
  MatrixXd z = z0;
  RowVectorXd total = RowVectorXd::Zero(z0.cols());
  double scale = 1.0;
  for (int t = 0; t < horizon; ++t) {
    total += scale * model.reward_batch(z, actions[t]);
    z = model.dynamics_batch(z, actions[t]);
    scale *= discount;
  }
  MatrixXd mean;
  model.prior_batch(z, &mean, nullptr);
  total += scale * model.value_min_batch(z, mean);
  return total;
}

struct PlanResult {
  VectorXd action;
  MatrixXd mean;  // action_dim x horizon, warm start for the next call
};

template <class Model>
PlanResult cem_plan(const Model& model, const VectorXd& state,
                    const PlannerConfig& cfg, const MatrixXd* previous,
                    std::mt19937_64& rng) {
  cfg.validate();
  const int a_dim = static_cast<int>(cfg.action_low.size());
  const int h = cfg.horizon;
  const int k = cfg.population;
  const VectorXd half_range = 0.5 * (cfg.action_high - cfg.action_low);
  const VectorXd mid = 0.5 * (cfg.action_high + cfg.action_low);

  MatrixXd mean(a_dim, h);
  if (previous && previous->rows() == a_dim && previous->cols() == h) {
    // shift one step; repeat the last column
    mean.leftCols(h - 1) = previous->rightCols(h - 1);
    mean.col(h - 1) = previous->col(h - 1);
  } else {
    mean.colwise() = mid;
  }
  MatrixXd sigma(a_dim, h);
  sigma.colwise() = (cfg.sigma_init * half_range).eval();
  const VectorXd floor_vec = cfg.sigma_floor * half_range;

  const VectorXd z0 = model.encode(state);
  const int n_prior =
      std::min(k, static_cast<int>(std::floor(cfg.prior_fraction * k)));
  std::normal_distribution<double> normal(0.0, 1.0);

  auto clamp_actions = [&](MatrixXd& a) {
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        a(r, c) = std::clamp(a(r, c), cfg.action_low[r], cfg.action_high[r]);
  };

  std::vector<MatrixXd> actions(h, MatrixXd(a_dim, k));
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // policy-prior rollouts fill the first n_prior sequences
    if (n_prior > 0) {
      MatrixXd z = z0.replicate(1, n_prior);
      for (int t = 0; t < h; ++t) {
        MatrixXd pm, pls;
        model.prior_batch(z, &pm, &pls);
        MatrixXd a = pm;
        for (Eigen::Index c = 0; c < a.cols(); ++c)
          for (Eigen::Index r = 0; r < a.rows(); ++r)
            a(r, c) += std::exp(pls(r, c)) * normal(rng);
        clamp_actions(a);
        actions[t].leftCols(n_prior) = a;
        z = model.dynamics_batch(z, a);
      }
    }
    // Gaussian sampling around the current mean for the rest
    for (int t = 0; t < h; ++t) {
      for (int c = n_prior; c < k; ++c)
        for (int r = 0; r < a_dim; ++r)
          actions[t](r, c) = mean(r, t) + sigma(r, t) * normal(rng);
      MatrixXd block = actions[t].rightCols(k - n_prior);
      clamp_actions(block);
      actions[t].rightCols(k - n_prior) = block;
    }

    const MatrixXd z_rep = z0.replicate(1, k);
    const RowVectorXd scores =
        rollout_scores_batch(model, z_rep, actions, cfg.discount, h);

    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return scores(a) > scores(b);
    });

    for (int t = 0; t < h; ++t) {
      VectorXd m = VectorXd::Zero(a_dim);
      for (int e = 0; e < cfg.elites; ++e) m += actions[t].col(order[e]);
      m /= cfg.elites;
      VectorXd var = VectorXd::Zero(a_dim);
      for (int e = 0; e < cfg.elites; ++e) {
        const VectorXd d = actions[t].col(order[e]) - m;
        var += d.cwiseProduct(d);
      }
      var /= cfg.elites;
      mean.col(t) = m;
      sigma.col(t) = var.cwiseSqrt().cwiseMax(floor_vec);
    }
  }

  PlanResult result;
  result.mean = mean;
  result.action = mean.col(0);
  for (int r = 0; r < a_dim; ++r)
    result.action[r] =
        std::clamp(result.action[r], cfg.action_low[r], cfg.action_high[r]);
  return result;
}

/// Stateful convenience wrapper owning the warm start and the RNG stream.
template <class Model>
class Planner {
 public:
  Planner(PlannerConfig cfg, uint64_t seed)
      : cfg_(std::move(cfg)), rng_(seed) {}

  VectorXd plan(const Model& model, const VectorXd& state) {
    const PlanResult r =
        cem_plan(model, state, cfg_, have_prev_ ? &prev_ : nullptr, rng_);
    prev_ = r.mean;
    have_prev_ = true;
    return r.action;
  }

  void reset() { have_prev_ = false; }
  const PlannerConfig& config() const { return cfg_; }

 private:
  PlannerConfig cfg_;
  std::mt19937_64 rng_;
  MatrixXd prev_;
  bool have_prev_ = false;
};

// ---------------------------------------------------------------------------
// Checkpoints: a self-describing container of named arrays plus the config
// hash; saving a loaded checkpoint is byte-identical.
// ---------------------------------------------------------------------------

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934666037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

struct NamedArray {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
};

struct Checkpoint {
  uint64_t config_hash = 0;
  std::vector<NamedArray> arrays;

  void add(const std::string& name, const MatrixXd& m) {
    NamedArray a;
    a.name = name;
    a.rows = static_cast<int>(m.rows());
    a.cols = static_cast<int>(m.cols());
    a.data.assign(m.data(), m.data() + m.size());
    arrays.push_back(std::move(a));
  }

  void add(const std::string& name, const VectorXd& v) {
    NamedArray a;
    a.name = name;
    a.rows = static_cast<int>(v.size());
    a.cols = 1;
    a.data.assign(v.data(), v.data() + v.size());
    arrays.push_back(std::move(a));
  }

  const NamedArray& get(const std::string& name) const {
    for (const NamedArray& a : arrays)
      if (a.name == name) return a;
    throw StructuralError("checkpoint: missing array '" + name + "'");
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("checkpoint: cannot open for write: " + path);
    const char magic[8] = {'F', 'L', 'A', 'M', 'C', 'K', 'P', '1'};
    out.write(magic, 8);
    write_u64(out, config_hash);
    write_u64(out, arrays.size());
    uint64_t checksum = 1469598103934666037ull;
    for (const NamedArray& a : arrays) {
      write_u64(out, a.name.size());
      out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      write_u64(out, static_cast<uint64_t>(a.rows));
      write_u64(out, static_cast<uint64_t>(a.cols));
      out.write(reinterpret_cast<const char*>(a.data.data()),
                static_cast<std::streamsize>(a.data.size() * sizeof(double)));
      checksum = fnv1a(a.name.data(), a.name.size(), checksum);
      checksum = fnv1a(a.data.data(), a.data.size() * sizeof(double), checksum);
    }
    write_u64(out, checksum);
    if (!out) throw InputError("checkpoint: write failed: " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("checkpoint: cannot open: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "FLAMCKP1")
      throw IntegrityError("checkpoint: bad magic in " + path);
    Checkpoint ck;
    ck.config_hash = read_u64(in);
    const uint64_t count = read_u64(in);
    uint64_t checksum = 1469598103934666037ull;
    for (uint64_t i = 0; i < count; ++i) {
      NamedArray a;
      const uint64_t name_len = read_u64(in);
      if (name_len > 4096) throw IntegrityError("checkpoint: corrupt name length");
      a.name.resize(name_len);
      in.read(a.name.data(), static_cast<std::streamsize>(name_len));
      a.rows = static_cast<int>(read_u64(in));
      a.cols = static_cast<int>(read_u64(in));
      if (a.rows < 0 || a.cols < 0 ||
          static_cast<uint64_t>(a.rows) * a.cols > (1ull << 32))
        throw IntegrityError("checkpoint: corrupt array shape");
      a.data.resize(static_cast<size_t>(a.rows) * a.cols);
      in.read(reinterpret_cast<char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
      if (!in) throw IntegrityError("checkpoint: truncated file " + path);
      checksum = fnv1a(a.name.data(), a.name.size(), checksum);
      checksum = fnv1a(a.data.data(), a.data.size() * sizeof(double), checksum);
      ck.arrays.push_back(std::move(a));
    }
    const uint64_t stored = read_u64(in);
    if (!in || stored != checksum)
      throw IntegrityError("checkpoint: checksum mismatch in " + path);
    return ck;
  }

 private:
  static void write_u64(std::ostream& out, uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(buf), 8);
  }
  static uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
  }
};

inline void mlp_to_checkpoint(Checkpoint& ck, const std::string& prefix,
                              const Mlp& m) {
  ck.add(prefix + ".w1", m.w1);
  ck.add(prefix + ".b1", m.b1);
  ck.add(prefix + ".w2", m.w2);
  ck.add(prefix + ".b2", m.b2);
  ck.add(prefix + ".w3", m.w3);
  ck.add(prefix + ".b3", m.b3);
}

inline void mlp_from_checkpoint(const Checkpoint& ck, const std::string& prefix,
                                Mlp& m) {
  auto read = [&](const std::string& name, auto& target) {
    const NamedArray& a = ck.get(prefix + name);
    if (a.rows != target.rows() || a.cols != target.cols())
      throw StructuralError("checkpoint: shape mismatch for " + prefix + name);
    std::copy(a.data.begin(), a.data.end(), target.data());
  };
  read(".w1", m.w1);
  read(".b1", m.b1);
  read(".w2", m.w2);
  read(".b2", m.b2);
  read(".w3", m.w3);
  read(".b3", m.b3);
}

inline Checkpoint model_to_checkpoint(WorldModel& model, uint64_t config_hash) {
  Checkpoint ck;
  ck.config_hash = config_hash;
  mlp_to_checkpoint(ck, "encoder", model.encoder());
  mlp_to_checkpoint(ck, "dynamics", model.dynamics());
  mlp_to_checkpoint(ck, "reward", model.reward_head());
  mlp_to_checkpoint(ck, "q1", model.q1());
  mlp_to_checkpoint(ck, "q2", model.q2());
  mlp_to_checkpoint(ck, "policy", model.policy_prior());
  mlp_to_checkpoint(ck, "encoder_target", model.encoder_target());
  mlp_to_checkpoint(ck, "q1_target", model.q1_target());
  mlp_to_checkpoint(ck, "q2_target", model.q2_target());
  return ck;
}

inline void model_from_checkpoint(const Checkpoint& ck, WorldModel& model) {
  mlp_from_checkpoint(ck, "encoder", model.encoder());
  mlp_from_checkpoint(ck, "dynamics", model.dynamics());
  mlp_from_checkpoint(ck, "reward", model.reward_head());
  mlp_from_checkpoint(ck, "q1", model.q1());
  mlp_from_checkpoint(ck, "q2", model.q2());
  mlp_from_checkpoint(ck, "policy", model.policy_prior());
  mlp_from_checkpoint(ck, "encoder_target", model.encoder_target());
  mlp_from_checkpoint(ck, "q1_target", model.q1_target());
  mlp_from_checkpoint(ck, "q2_target", model.q2_target());
}

}  // namespace flam

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "flam/errors.hpp"

namespace flam {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// Two-hidden-layer perceptron with tanh activations and a hand-derived
/// backward pass. Forward/backward operate on column-batched inputs.
struct Mlp {
  MatrixXd w1, w2, w3;
  VectorXd b1, b2, b3;

  Mlp() = default;

  Mlp(int in, int hidden, int out)
      : w1(MatrixXd::Zero(hidden, in)),
        w2(MatrixXd::Zero(hidden, hidden)),
        w3(MatrixXd::Zero(out, hidden)),
        b1(VectorXd::Zero(hidden)),
        b2(VectorXd::Zero(hidden)),
        b3(VectorXd::Zero(out)) {}

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int out_dim() const { return static_cast<int>(w3.rows()); }

  void init(std::mt19937_64& rng) {
    auto fill = [&rng](MatrixXd& m) {
      const double s = std::sqrt(6.0 / (m.rows() + m.cols()));
      std::uniform_real_distribution<double> dist(-s, s);
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
    };
    fill(w1);
    fill(w2);
    fill(w3);
    b1.setZero();
    b2.setZero();
    b3.setZero();
  }

  struct Cache {
    MatrixXd x, a1, a2;  // input and post-tanh activations
  };

  MatrixXd forward(const MatrixXd& x, Cache* cache = nullptr) const {
    MatrixXd a1 = ((w1 * x).colwise() + b1).array().tanh();
    MatrixXd a2 = ((w2 * a1).colwise() + b2).array().tanh();
    MatrixXd y = (w3 * a2).colwise() + b3;
    if (cache) {
      cache->x = x;
      cache->a1 = std::move(a1);
      cache->a2 = std::move(a2);
      return y;
    }
    return y;
  }

  MatrixXd forward(const MatrixXd& x, Cache& cache) const {
    return forward(x, &cache);
  }

  /// Backpropagates dy; accumulates parameter gradients into `grad` when
  /// non-null and returns the gradient with respect to the input.
  MatrixXd backward(const Cache& cache, const MatrixXd& dy,
                    Mlp* grad = nullptr) const {
    if (grad) {
      grad->w3 += dy * cache.a2.transpose();
      grad->b3 += dy.rowwise().sum();
    }
    MatrixXd da2 = w3.transpose() * dy;
    MatrixXd dz2 =
        da2.array() * (1.0 - cache.a2.array() * cache.a2.array());
    if (grad) {
      grad->w2 += dz2 * cache.a1.transpose();
      grad->b2 += dz2.rowwise().sum();
    }
    MatrixXd da1 = w2.transpose() * dz2;
    MatrixXd dz1 =
        da1.array() * (1.0 - cache.a1.array() * cache.a1.array());
    if (grad) {
      grad->w1 += dz1 * cache.x.transpose();
      grad->b1 += dz1.rowwise().sum();
    }
    return w1.transpose() * dz1;
  }

  int param_count() const {
    return static_cast<int>(w1.size() + w2.size() + w3.size() + b1.size() +
                            b2.size() + b3.size());
  }

  void write_flat(double* out) const {
    auto put = [&out](const auto& m) {
      std::copy(m.data(), m.data() + m.size(), out);
      out += m.size();
    };
    put(w1);
    put(b1);
    put(w2);
    put(b2);
    put(w3);
    put(b3);
  }

  void read_flat(const double* in) {
    auto get = [&in](auto& m) {
      std::copy(in, in + m.size(), m.data());
      in += m.size();
    };
    get(w1);
    get(b1);
    get(w2);
    get(b2);
    get(w3);
    get(b3);
  }

  void set_zero() {
    w1.setZero();
    w2.setZero();
    w3.setZero();
    b1.setZero();
    b2.setZero();
    b3.setZero();
  }

  /// this = (1 - t) * this + t * other; the Polyak target update.
  void lerp_toward(const Mlp& other, double t) {
    w1 = (1.0 - t) * w1 + t * other.w1;
    w2 = (1.0 - t) * w2 + t * other.w2;
    w3 = (1.0 - t) * w3 + t * other.w3;
    b1 = (1.0 - t) * b1 + t * other.b1;
    b2 = (1.0 - t) * b2 + t * other.b2;
    b3 = (1.0 - t) * b3 + t * other.b3;
  }
};

/// Adam over a flat parameter vector.
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  VectorXd m, v;
  long step_count = 0;

  void reset(int n) {
    m = VectorXd::Zero(n);
    v = VectorXd::Zero(n);
    step_count = 0;
  }

  /// Returns the update to add to the parameters for gradient `g`.
  VectorXd step(const VectorXd& g) {
    if (m.size() != g.size()) reset(static_cast<int>(g.size()));
    ++step_count;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(beta1, step_count);
    const double bc2 = 1.0 - std::pow(beta2, step_count);
    VectorXd m_hat = m / bc1;
    VectorXd v_hat = v / bc2;
    return (-lr) * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
  }
};

}  // namespace flam

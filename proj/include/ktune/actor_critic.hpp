#ifndef KTUNE_ACTOR_CRITIC_HPP
#define KTUNE_ACTOR_CRITIC_HPP

#include <Eigen/Core>

#include <cstdint>

namespace ktune {

/// Policy/value network over normalized configurations. One tanh layer is
/// shared by both heads (single storage, so gradients from either head reach
/// it); each head adds one tanh hidden layer and a linear output. The policy
/// head emits, per knob, logits for a 3-way categorical over
/// {decrement, stay, increment}; the value head emits a scalar.
///
/// Parameters live in one flat vector (layout below), which keeps the Adam
/// state and gradient checking trivial.
class ActorCritic {
 public:
  ActorCritic(int num_knobs, int hidden_dim, int head_hidden, std::uint64_t seed);

  int num_knobs() const { return num_knobs_; }
  int hidden_dim() const { return hidden_dim_; }
  int head_hidden() const { return head_hidden_; }
  int num_parameters() const { return static_cast<int>(params_.size()); }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  /// Cached activations of one batched forward pass (rows = states).
  struct Forward {
    Eigen::MatrixXd states;     // B x n
    Eigen::MatrixXd h0;         // B x hidden
    Eigen::MatrixXd hp;         // B x head_hidden
    Eigen::MatrixXd hv;         // B x head_hidden
    Eigen::MatrixXd log_probs;  // B x 3n, per-knob log-softmax blocks
    Eigen::MatrixXd probs;      // B x 3n
    Eigen::VectorXd values;     // B
  };

  /// Deterministic batched forward pass; softmax per knob is strictly
  /// positive. Safe to call concurrently on an immutable parameter snapshot.
  Forward forward(const Eigen::MatrixXd& states) const;

  /// Backpropagates upstream gradients (w.r.t. the policy logits and the
  /// value output) into a flat parameter gradient. `cache` must come from
  /// forward() on the same parameters.
  Eigen::VectorXd backward(const Forward& cache, const Eigen::MatrixXd& d_logits,
                           const Eigen::VectorXd& d_values) const;

 private:
  // Flat layout: [W0 (h x n), b0 (h), Wp1 (g x h), bp1 (g), Wp2 (3n x g),
  // bp2 (3n), Wv1 (g x h), bv1 (g), wv2 (g), bv2 (1)].
  struct Offsets {
    int w0, b0, wp1, bp1, wp2, bp2, wv1, bv1, wv2, bv2, total;
  };
  static Offsets layout(int n, int h, int g);

  int num_knobs_;
  int hidden_dim_;
  int head_hidden_;
  Offsets offsets_;
  Eigen::VectorXd params_;
};

/// Adam with persistent first/second moment state; step size fixed at
/// construction, bias correction per step.
class AdamOptimizer {
 public:
  AdamOptimizer(int dim, double step_size, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double step_size_, beta1_, beta2_, epsilon_;
  long long t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace ktune

#endif  // KTUNE_ACTOR_CRITIC_HPP

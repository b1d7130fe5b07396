#pragma once

// Fully connected network with SiLU hidden activations and a linear output,
// with hand-written reverse-mode gradients.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace tweedie {

struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out_l x in_l)
  std::vector<Eigen::VectorXd> biases;

  /// Layer widths including input and output, e.g. {81, 128, 128, 1}.
  std::vector<int> widths() const;
  std::size_t parameter_count() const;
  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;

  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);

  /// this <- m * this + (1 - m) * other
  void blend_toward(const MlpParams& other, double m);
  double distance(const MlpParams& other) const;

  bool operator==(const MlpParams& other) const;
};

/// Gaussian init scaled by 1/sqrt(fan_in); biases zero. Deterministic in seed.
MlpParams init_mlp(const std::vector<int>& widths, std::uint64_t seed);

/// Same shape, every entry zero.
MlpParams zeros_like(const MlpParams& params);

/// Intermediate values kept for the backward pass.
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

/// Columns of `x` are samples. Returns (out x N).
Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x, MlpTape* tape = nullptr);

/// Parameter gradients given dLoss/dOutput (out x N) and the forward tape.
MlpParams mlp_backward(const MlpParams& params, const MlpTape& tape, const Eigen::MatrixXd& grad_out);

}  // namespace tweedie

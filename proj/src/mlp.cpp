#include "tweedie/mlp.hpp"

#include <cmath>

#include "tweedie/errors.hpp"
#include "tweedie/rng.hpp"

namespace tweedie {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v * sigmoid(v); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

}  // namespace

std::vector<int> MlpParams::widths() const {
  std::vector<int> w;
  if (weights.empty()) return w;
  w.push_back(static_cast<int>(weights.front().cols()));
  for (const auto& m : weights) w.push_back(static_cast<int>(m.rows()));
  return w;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols() ||
        biases[l].size() != other.biases[l].size()) {
      return false;
    }
  }
  return true;
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.insert(flat.end(), weights[l].data(), weights[l].data() + weights[l].size());
    flat.insert(flat.end(), biases[l].data(), biases[l].data() + biases[l].size());
  }
  return flat;
}

void MlpParams::unflatten(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw ValidationError("parameter vector has the wrong length");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::copy_n(flat.begin() + k, weights[l].size(), weights[l].data());
    k += weights[l].size();
    std::copy_n(flat.begin() + k, biases[l].size(), biases[l].data());
    k += biases[l].size();
  }
}

void MlpParams::blend_toward(const MlpParams& other, double m) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] = m * weights[l] + (1.0 - m) * other.weights[l];
    biases[l] = m * biases[l] + (1.0 - m) * other.biases[l];
  }
}

double MlpParams::distance(const MlpParams& other) const {
  double sq = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    sq += (weights[l] - other.weights[l]).squaredNorm() + (biases[l] - other.biases[l]).squaredNorm();
  }
  return std::sqrt(sq);
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

MlpParams init_mlp(const std::vector<int>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw ValidationError("network needs at least input and output widths");
  for (int w : widths) {
    if (w < 1) throw ValidationError("layer widths must be positive");
  }
  MlpParams p;
  RandomStream rng(seed, StreamPurpose::Initialization);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * standard_normal(rng);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    z.weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols()));
    z.biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  return z;
}

Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x, MlpTape* tape) {
  if (params.weights.empty()) throw ValidationError("empty network");
  if (x.rows() != params.weights.front().cols()) throw ValidationError("network input width mismatch");
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Eigen::MatrixXd h = x;
  const std::size_t layers = params.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = params.weights[l] * h;
    z.colwise() += params.biases[l];
    if (tape) {
      tape->inputs.push_back(h);
      tape->pre.push_back(z);
    }
    h = (l + 1 < layers) ? silu(z) : std::move(z);
  }
  return h;
}

MlpParams mlp_backward(const MlpParams& params, const MlpTape& tape, const Eigen::MatrixXd& grad_out) {
  const std::size_t layers = params.weights.size();
  if (tape.inputs.size() != layers) throw ValidationError("tape does not match network");
  MlpParams g = zeros_like(params);
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) delta = delta.cwiseProduct(silu_grad(tape.pre[l]));
    g.weights[l] = delta * tape.inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) delta = params.weights[l].transpose() * delta;
  }
  return g;
}

}  // namespace tweedie

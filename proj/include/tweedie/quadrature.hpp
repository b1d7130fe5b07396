#pragma once

#include <vector>

namespace tweedie {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes and weights of the given order (>= 1), computed once by Newton
/// iteration on P_n and cached. Thread-safe.
const GaussLegendreRule& gauss_legendre(int order);

}  // namespace tweedie

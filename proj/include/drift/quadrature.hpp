#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "drift/model.hpp"

namespace drift::quad {

/// Vector-valued integrand evaluated on a batch of nodes: component c at
/// node j goes to out[c * nodes.size() + j].
using BatchIntegrand = std::function<void(std::span<const double> nodes, std::span<double> out)>;

struct Options {
  double abs_tol = 1e-10;
  int max_panels = 4000;
  int initial_panels = 8;
};

struct Result {
  Vec value;
  double error = 0.0;  ///< sum over panels of max-component |K15 - G7|
  int panels = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Adaptive Gauss-Kronrod (7/15) on [a, b]. Every refinement round bisects all
/// panels whose error exceeds their length share of the tolerance, and
/// evaluates all new nodes in one batch.
Result gauss_kronrod(const BatchIntegrand& f, std::size_t dim, double a, double b,
                     const Options& opt);

}  // namespace drift::quad

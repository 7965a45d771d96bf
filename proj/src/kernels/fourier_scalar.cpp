#include <cmath>

#include "drift/kernels.hpp"

namespace drift::kernels::detail {

void sincos_scalar(const double* x, double* s, double* c, std::size_t count) {
  for (std::size_t j = 0; j < count; ++j) {
    s[j] = std::sin(x[j]);
    c[j] = std::cos(x[j]);
  }
}

void evaluate_jets_scalar(const ModeTable& modes, const PointBatch& pts, JetBatch& out,
                          bool with_hessian, std::size_t begin, std::size_t end) {
  const std::size_t n = modes.n;
  const std::size_t d = modes.d;
  const std::size_t N = pts.size;
  for (std::size_t j = begin; j < end; ++j) {
    out.value[j] = 0.0;
    out.d_t[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) out.grad_q[i * N + j] = 0.0;
    for (std::size_t i = 0; i < d; ++i) out.grad_phi[i * N + j] = 0.0;
    if (with_hessian) {
      for (std::size_t i = 0; i < n * n; ++i) out.hess_q[i * N + j] = 0.0;
    }
  }
  for (std::size_t mi = 0; mi < modes.count; ++mi) {
    const double* k = &modes.k[mi * n];
    const double* l = &modes.l[mi * d];
    const double a = modes.amp[mi];
    const double mm = modes.m[mi];
    for (std::size_t j = begin; j < end; ++j) {
      double psi = mm * pts.t[j] + modes.phase[mi];
      for (std::size_t i = 0; i < n; ++i) psi += k[i] * pts.q[i * N + j];
      for (std::size_t i = 0; i < d; ++i) psi += l[i] * pts.phi[i * N + j];
      const double ac = a * std::cos(psi);
      const double as = a * std::sin(psi);
      out.value[j] += ac;
      out.d_t[j] -= mm * as;
      for (std::size_t i = 0; i < n; ++i) out.grad_q[i * N + j] -= k[i] * as;
      for (std::size_t i = 0; i < d; ++i) out.grad_phi[i * N + j] -= l[i] * as;
      if (with_hessian) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < n; ++c) out.hess_q[(r * n + c) * N + j] -= k[r] * k[c] * ac;
        }
      }
    }
  }
}

}  // namespace drift::kernels::detail

#pragma once

// Batched evaluation of Fourier-mode perturbations and their derivatives.
//
// The Melnikov quadrature spends nearly all of its time evaluating
// sum_m a_m cos(k_m.q + l_m.phi + m_m t + chi_m) and its partials at the
// nodes of each Gauss-Kronrod panel. The kernel here takes a batch of points
// in structure-of-arrays layout and fills the jets for all of them. A scalar
// reference variant (libm sin/cos) and an AVX2+FMA variant (4 doubles per
// lane group, polynomial sincos) exist; the variant is picked at runtime from
// CPUID unless forced.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "drift/model.hpp"

namespace drift::kernels {

/// Modes of a PerturbationSpec flattened for the kernel.
struct ModeTable {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t count = 0;
  std::vector<double> k;  ///< count x n
  std::vector<double> l;  ///< count x d
  std::vector<double> m;
  std::vector<double> amp;
  std::vector<double> phase;

  static ModeTable from(const SystemSpec& spec);
  static ModeTable from(const PerturbationSpec& pert, std::size_t n, std::size_t d);
};

/// Points in SoA layout: coordinate i of point j lives at [i * size + j].
struct PointBatch {
  std::size_t size = 0;
  std::span<const double> q;    ///< n x size
  std::span<const double> phi;  ///< d x size
  std::span<const double> t;    ///< size
};

/// Jets in SoA layout, same convention as PointBatch.
struct JetBatch {
  std::vector<double> value;
  std::vector<double> grad_q;    ///< n x size
  std::vector<double> hess_q;    ///< (n*n) x size, entry (a,b) at [(a*n+b)*size + j]
  std::vector<double> grad_phi;  ///< d x size
  std::vector<double> d_t;

  void resize(std::size_t n, std::size_t d, std::size_t size, bool with_hessian);
};

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);
/// Best variant the CPU and the build support.
Isa detect();
/// Variant used when no explicit choice is passed. Defaults to detect();
/// the DRIFT_KERNEL environment variable ("scalar"/"avx2") overrides.
Isa active();
void force(Isa isa);
bool available(Isa isa);

/// Fills `out` for every point in `pts`. `out` must be sized via resize().
void evaluate_jets(const ModeTable& modes, const PointBatch& pts, JetBatch& out,
                   bool with_hessian, Isa isa);
inline void evaluate_jets(const ModeTable& modes, const PointBatch& pts, JetBatch& out,
                          bool with_hessian) {
  evaluate_jets(modes, pts, out, with_hessian, active());
}

/// sin/cos over arrays; exposed for the equivalence tests.
void sincos(std::span<const double> x, std::span<double> s, std::span<double> c, Isa isa);

namespace detail {
void evaluate_jets_scalar(const ModeTable& modes, const PointBatch& pts, JetBatch& out,
                          bool with_hessian, std::size_t begin, std::size_t end);
void sincos_scalar(const double* x, double* s, double* c, std::size_t count);
#if defined(DRIFT_HAVE_AVX2)
/// Returns the first index not processed (the remainder is left to the scalar path).
std::size_t evaluate_jets_avx2(const ModeTable& modes, const PointBatch& pts, JetBatch& out,
                               bool with_hessian);
std::size_t sincos_avx2(const double* x, double* s, double* c, std::size_t count);
#endif
}  // namespace detail

}  // namespace drift::kernels

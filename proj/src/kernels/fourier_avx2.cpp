// AVX2+FMA variant of the Fourier jet kernel.
//
// Every function that touches 256-bit intrinsics carries DRIFT_AVX2_ATTR
// instead of compiling the translation unit with -mavx2, so inline library
// code instantiated here keeps the baseline ISA and cannot leak AVX2
// instructions into callers on older CPUs.

#include "drift/kernels.hpp"

#if defined(DRIFT_HAVE_AVX2)

#include <immintrin.h>

#include <cstdlib>
#include <memory>

#define DRIFT_AVX2_ATTR __attribute__((target("avx2,fma")))

namespace drift::kernels::detail {

namespace {

// pi/2 split for Cody-Waite reduction; the FMA keeps x - n*hi exact.
constexpr double kPio2Hi = 1.5707963267948966192;
constexpr double kPio2Lo = 6.123233995736766036e-17;
constexpr double kTwoOverPi = 0.63661977236758134308;
// 1.5 * 2^52: adding it leaves round(x) in the low mantissa bits.
constexpr double kIntMagic = 6755399441055744.0;

// fdlibm kernel_sin / kernel_cos minimax coefficients on [-pi/4, pi/4].
constexpr double S1 = -1.66666666666666324348e-01;
constexpr double S2 = 8.33333333332248946124e-03;
constexpr double S3 = -1.98412698298579493134e-04;
constexpr double S4 = 2.75573137070700676789e-06;
constexpr double S5 = -2.50507602534068634195e-08;
constexpr double S6 = 1.58969099521155010221e-10;
constexpr double C1 = 4.16666666666666019037e-02;
constexpr double C2 = -1.38888888888741095749e-03;
constexpr double C3 = 2.48015872894767294178e-05;
constexpr double C4 = -2.75573143513906633035e-07;
constexpr double C5 = 2.08757232129817482790e-09;
constexpr double C6 = -1.13596475577881948265e-11;

DRIFT_AVX2_ATTR inline void sincos4(__m256d x, __m256d& s_out, __m256d& c_out) {
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kTwoOverPi)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kPio2Hi), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kPio2Lo), r);
  const __m256i quadrant = _mm256_castpd_si256(_mm256_add_pd(n, _mm256_set1_pd(kIntMagic)));

  const __m256d z = _mm256_mul_pd(r, r);

  __m256d ps = _mm256_set1_pd(S6);
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S5));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S4));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S3));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S2));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S1));
  const __m256d sin_r = _mm256_fmadd_pd(_mm256_mul_pd(z, r), ps, r);

  __m256d pc = _mm256_set1_pd(C6);
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C5));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C4));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C3));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C2));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C1));
  const __m256d cos_r = _mm256_fmadd_pd(_mm256_mul_pd(z, z), pc,
                                        _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z,
                                                         _mm256_set1_pd(1.0)));

  const __m256i one = _mm256_set1_epi64x(1);
  const __m256i two = _mm256_set1_epi64x(2);
  const __m256d swap =
      _mm256_castsi256_pd(_mm256_cmpeq_epi64(_mm256_and_si256(quadrant, one), one));
  const __m256d sin_sign =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_and_si256(quadrant, two), 62));
  const __m256d cos_sign = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_and_si256(_mm256_add_epi64(quadrant, one), two), 62));

  s_out = _mm256_xor_pd(_mm256_blendv_pd(sin_r, cos_r, swap), sin_sign);
  c_out = _mm256_xor_pd(_mm256_blendv_pd(cos_r, sin_r, swap), cos_sign);
}

DRIFT_AVX2_ATTR std::size_t jets_impl(const ModeTable& modes, const PointBatch& pts,
                                      JetBatch& out, bool with_hessian) {
  const std::size_t n = modes.n;
  const std::size_t d = modes.d;
  const std::size_t N = pts.size;
  const std::size_t nn = with_hessian ? n * n : 0;

  const double* k_tab = modes.k.data();
  const double* l_tab = modes.l.data();
  const double* m_tab = modes.m.data();
  const double* a_tab = modes.amp.data();
  const double* ph_tab = modes.phase.data();
  const double* q_in = pts.q.data();
  const double* phi_in = pts.phi.data();
  const double* t_in = pts.t.data();
  double* value_out = out.value.data();
  double* dt_out = out.d_t.data();
  double* gq_out = out.grad_q.data();
  double* gphi_out = out.grad_phi.data();
  double* hq_out = with_hessian ? out.hess_q.data() : nullptr;

  // Registers for coordinates and accumulators: [q(n) | phi(d) | gq(n) | gphi(d) | hq(nn)].
  const std::size_t reg_count = 2 * n + 2 * d + nn;
  std::unique_ptr<void, decltype(&std::free)> storage(
      std::aligned_alloc(32, 32 * (reg_count + 1)), &std::free);
  __m256d* qv = static_cast<__m256d*>(storage.get());
  __m256d* phiv = qv + n;
  __m256d* gq = phiv + d;
  __m256d* gphi = gq + n;
  __m256d* hq = gphi + d;

  std::size_t j = 0;
  for (; j + 4 <= N; j += 4) {
    for (std::size_t i = 0; i < n; ++i) qv[i] = _mm256_loadu_pd(q_in + i * N + j);
    for (std::size_t i = 0; i < d; ++i) phiv[i] = _mm256_loadu_pd(phi_in + i * N + j);
    const __m256d tv = _mm256_loadu_pd(t_in + j);
    __m256d val = _mm256_setzero_pd();
    __m256d dt = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n; ++i) gq[i] = _mm256_setzero_pd();
    for (std::size_t i = 0; i < d; ++i) gphi[i] = _mm256_setzero_pd();
    for (std::size_t i = 0; i < nn; ++i) hq[i] = _mm256_setzero_pd();

    for (std::size_t mi = 0; mi < modes.count; ++mi) {
      const double* k = k_tab + mi * n;
      const double* l = l_tab + mi * d;
      const __m256d mv = _mm256_set1_pd(m_tab[mi]);
      __m256d psi = _mm256_fmadd_pd(mv, tv, _mm256_set1_pd(ph_tab[mi]));
      for (std::size_t i = 0; i < n; ++i) {
        if (k[i] != 0.0) psi = _mm256_fmadd_pd(_mm256_set1_pd(k[i]), qv[i], psi);
      }
      for (std::size_t i = 0; i < d; ++i) {
        if (l[i] != 0.0) psi = _mm256_fmadd_pd(_mm256_set1_pd(l[i]), phiv[i], psi);
      }
      __m256d s, c;
      sincos4(psi, s, c);
      const __m256d av = _mm256_set1_pd(a_tab[mi]);
      const __m256d ac = _mm256_mul_pd(av, c);
      const __m256d as = _mm256_mul_pd(av, s);
      val = _mm256_add_pd(val, ac);
      dt = _mm256_fnmadd_pd(mv, as, dt);
      for (std::size_t i = 0; i < n; ++i) gq[i] = _mm256_fnmadd_pd(_mm256_set1_pd(k[i]), as, gq[i]);
      for (std::size_t i = 0; i < d; ++i) {
        gphi[i] = _mm256_fnmadd_pd(_mm256_set1_pd(l[i]), as, gphi[i]);
      }
      for (std::size_t r = 0; r < n && nn; ++r) {
        for (std::size_t cc = 0; cc < n; ++cc) {
          hq[r * n + cc] = _mm256_fnmadd_pd(_mm256_set1_pd(k[r] * k[cc]), ac, hq[r * n + cc]);
        }
      }
    }

    _mm256_storeu_pd(value_out + j, val);
    _mm256_storeu_pd(dt_out + j, dt);
    for (std::size_t i = 0; i < n; ++i) _mm256_storeu_pd(gq_out + i * N + j, gq[i]);
    for (std::size_t i = 0; i < d; ++i) _mm256_storeu_pd(gphi_out + i * N + j, gphi[i]);
    for (std::size_t i = 0; i < nn; ++i) _mm256_storeu_pd(hq_out + i * N + j, hq[i]);
  }
  return j;
}

DRIFT_AVX2_ATTR std::size_t sincos_impl(const double* x, double* s, double* c,
                                        std::size_t count) {
  std::size_t j = 0;
  for (; j + 4 <= count; j += 4) {
    __m256d sv, cv;
    sincos4(_mm256_loadu_pd(x + j), sv, cv);
    _mm256_storeu_pd(s + j, sv);
    _mm256_storeu_pd(c + j, cv);
  }
  return j;
}

}  // namespace

std::size_t evaluate_jets_avx2(const ModeTable& modes, const PointBatch& pts, JetBatch& out,
                               bool with_hessian) {
  return jets_impl(modes, pts, out, with_hessian);
}

std::size_t sincos_avx2(const double* x, double* s, double* c, std::size_t count) {
  return sincos_impl(x, s, c, count);
}

}  // namespace drift::kernels::detail

#endif  // DRIFT_HAVE_AVX2

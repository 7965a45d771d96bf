#include <atomic>
#include <cstdlib>
#include <cstring>

#include "drift/error.hpp"
#include "drift/kernels.hpp"

namespace drift::kernels {

namespace {

std::atomic<int> g_forced{-1};

Isa from_env() {
  const char* env = std::getenv("DRIFT_KERNEL");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    if (std::strcmp(env, "avx2") == 0 && available(Isa::Avx2)) return Isa::Avx2;
  }
  return detect();
}

}  // namespace

ModeTable ModeTable::from(const PerturbationSpec& pert, std::size_t n, std::size_t d) {
  ModeTable t;
  t.n = n;
  t.d = d;
  t.count = pert.modes().size();
  t.k.reserve(t.count * n);
  t.l.reserve(t.count * d);
  for (const auto& m : pert.modes()) {
    if (m.k.size() != n || m.l.size() != d) throw InputError("mode dimension mismatch");
    for (int v : m.k) t.k.push_back(v);
    for (int v : m.l) t.l.push_back(v);
    t.m.push_back(m.m);
    t.amp.push_back(m.amplitude);
    t.phase.push_back(m.phase);
  }
  return t;
}

ModeTable ModeTable::from(const SystemSpec& spec) {
  return from(spec.perturbation(), spec.n(), spec.d());
}

void JetBatch::resize(std::size_t n, std::size_t d, std::size_t size, bool with_hessian) {
  value.resize(size);
  d_t.resize(size);
  grad_q.resize(n * size);
  grad_phi.resize(d * size);
  hess_q.resize(with_hessian ? n * n * size : 0);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool available(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if defined(DRIFT_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() { return available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar; }

Isa active() {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Isa>(forced);
  static const Isa chosen = from_env();
  return chosen;
}

void force(Isa isa) {
  if (!available(isa)) throw InputError("kernel variant not available on this CPU");
  g_forced.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void evaluate_jets(const ModeTable& modes, const PointBatch& pts, JetBatch& out,
                   bool with_hessian, Isa isa) {
  std::size_t done = 0;
#if defined(DRIFT_HAVE_AVX2)
  if (isa == Isa::Avx2) done = detail::evaluate_jets_avx2(modes, pts, out, with_hessian);
#else
  (void)isa;
#endif
  detail::evaluate_jets_scalar(modes, pts, out, with_hessian, done, pts.size);
}

void sincos(std::span<const double> x, std::span<double> s, std::span<double> c, Isa isa) {
  std::size_t done = 0;
#if defined(DRIFT_HAVE_AVX2)
  if (isa == Isa::Avx2) done = detail::sincos_avx2(x.data(), s.data(), c.data(), x.size());
#else
  (void)isa;
#endif
  detail::sincos_scalar(x.data() + done, s.data() + done, c.data() + done, x.size() - done);
}

}  // namespace drift::kernels

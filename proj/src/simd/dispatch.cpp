#include <atomic>

#include "fsmean/errors.hpp"
#include "fsmean/simd/kernels.hpp"

namespace fsmean::simd {

namespace {

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() {
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) throw Error(ErrorKind::InvalidArgument, std::string("ISA not supported: ") + isa_name(isa));
  active().store(isa, std::memory_order_relaxed);
}

void poly_moments(std::span<const double> u, std::span<const double> w, std::span<const double> y0,
                  std::span<const double> y1, std::span<const double> y2, PolyMoments& out) {
  const std::size_t n = u.size();
  require(w.size() == n && y0.size() == n && y1.size() == n && y2.size() == n, "poly_moments: size mismatch");
  switch (active_isa()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return detail::poly_moments_avx2(u.data(), w.data(), y0.data(), y1.data(), y2.data(), n, out);
#endif
#if defined(__aarch64__)
    case Isa::Neon: return detail::poly_moments_neon(u.data(), w.data(), y0.data(), y1.data(), y2.data(), n, out);
#endif
    default: return detail::poly_moments_scalar(u.data(), w.data(), y0.data(), y1.data(), y2.data(), n, out);
  }
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "sum_sq_diff: size mismatch");
  switch (active_isa()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return detail::sum_sq_diff_avx2(a.data(), b.data(), a.size());
#endif
#if defined(__aarch64__)
    case Isa::Neon: return detail::sum_sq_diff_neon(a.data(), b.data(), a.size());
#endif
    default: return detail::sum_sq_diff_scalar(a.data(), b.data(), a.size());
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: size mismatch");
  switch (active_isa()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return detail::dot_avx2(a.data(), b.data(), a.size());
#endif
#if defined(__aarch64__)
    case Isa::Neon: return detail::dot_neon(a.data(), b.data(), a.size());
#endif
    default: return detail::dot_scalar(a.data(), b.data(), a.size());
  }
}

}  // namespace fsmean::simd

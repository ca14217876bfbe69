#pragma once

// Data-parallel inner loops with scalar, AVX2 and NEON implementations.
// The active implementation is picked once at runtime from CPU features;
// tests can pin a specific one with set_isa().

#include <array>
#include <span>

namespace fsmean::simd {

enum class Isa { Scalar, Avx2, Neon };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
/// Best implementation supported by this CPU.
Isa detected_isa();
Isa active_isa();
/// Pins an implementation; throws InvalidArgument if unsupported.
void set_isa(Isa isa);

/// Weighted power sums for a degree-4 local polynomial fit:
///   s[k]    = Σ w_i u_i^k        (k = 0..8)
///   t[c][k] = Σ w_i u_i^k y_c,i  (k = 0..4, c = 0..2)
struct PolyMoments {
  std::array<double, 9> s{};
  std::array<std::array<double, 5>, 3> t{};
};

void poly_moments(std::span<const double> u, std::span<const double> w, std::span<const double> y0,
                  std::span<const double> y1, std::span<const double> y2, PolyMoments& out);

/// Σ (a_i − b_i)².
double sum_sq_diff(std::span<const double> a, std::span<const double> b);

/// Σ a_i b_i.
double dot(std::span<const double> a, std::span<const double> b);

namespace detail {

void poly_moments_scalar(const double* u, const double* w, const double* y0, const double* y1, const double* y2,
                         std::size_t n, PolyMoments& out);
double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n);
double dot_scalar(const double* a, const double* b, std::size_t n);

#if defined(__x86_64__) || defined(_M_X64)
void poly_moments_avx2(const double* u, const double* w, const double* y0, const double* y1, const double* y2,
                       std::size_t n, PolyMoments& out);
double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n);
double dot_avx2(const double* a, const double* b, std::size_t n);
#endif

#if defined(__aarch64__)
void poly_moments_neon(const double* u, const double* w, const double* y0, const double* y1, const double* y2,
                       std::size_t n, PolyMoments& out);
double sum_sq_diff_neon(const double* a, const double* b, std::size_t n);
double dot_neon(const double* a, const double* b, std::size_t n);
#endif

}  // namespace detail
}  // namespace fsmean::simd

#include "massdirac/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define MASSDIRAC_HAVE_AVX2_VARIANT 1
#endif

namespace massdirac::kernels {

#ifdef MASSDIRAC_HAVE_AVX2_VARIANT
namespace {

// Two complex doubles per register: [re0, im0, re1, im1]. Only AVX2 is
// enabled for this translation unit (no FMA), so every product and sum is
// rounded exactly like the scalar reference.

#define MD_AVX2 __attribute__((target("avx2")))

MD_AVX2 inline __m256d cmul_bcast(__m256d a, __m256d br, __m256d bi) {
  const __m256d t1 = _mm256_mul_pd(a, br);
  const __m256d t2 = _mm256_mul_pd(_mm256_permute_pd(a, 0b0101), bi);
  return _mm256_addsub_pd(t1, t2);
}

MD_AVX2 void block_matvec_add(std::size_t blocks, std::size_t dim, const cplx* mats,
                              const cplx* x, cplx* y) {
  if (dim % 2 != 0) {
    scalar_table().block_matvec_add(blocks, dim, mats, x, y);
    return;
  }
  const auto* a = reinterpret_cast<const double*>(mats);
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  const std::size_t msize = dim * dim;
  for (std::size_t b = 0; b < blocks; ++b) {
    const double* ab = a + 2 * b * msize;
    const double* xb = xv + 2 * b * dim;
    double* yb = yv + 2 * b * dim;
    for (std::size_t c = 0; c < dim; ++c) {
      const __m256d xr = _mm256_set1_pd(xb[2 * c]);
      const __m256d xi = _mm256_set1_pd(xb[2 * c + 1]);
      const double* col = ab + 2 * c * dim;
      for (std::size_t r = 0; r < dim; r += 2) {
        const __m256d av = _mm256_loadu_pd(col + 2 * r);
        const __m256d prod = cmul_bcast(av, xr, xi);
        _mm256_storeu_pd(yb + 2 * r, _mm256_add_pd(_mm256_loadu_pd(yb + 2 * r), prod));
      }
    }
  }
}

MD_AVX2 void axpy(std::size_t len, cplx a, const cplx* x, cplx* y) {
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set1_pd(a.imag());
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) {
    const __m256d xv4 = _mm256_loadu_pd(xv + 2 * i);
    const __m256d prod = cmul_bcast(xv4, ar, ai);
    _mm256_storeu_pd(yv + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yv + 2 * i), prod));
  }
  for (; i < len; ++i) {
    const double re = xv[2 * i] * a.real() - xv[2 * i + 1] * a.imag();
    const double im = xv[2 * i + 1] * a.real() + xv[2 * i] * a.imag();
    yv[2 * i] = yv[2 * i] + re;
    yv[2 * i + 1] = yv[2 * i + 1] + im;
  }
}

MD_AVX2 cplx weighted_dot(std::size_t len, std::size_t block, const double* w,
                          const cplx* x, const cplx* y) {
  const auto* xv = reinterpret_cast<const double*>(x);
  const auto* yv = reinterpret_cast<const double*>(y);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) {
    const __m256d xv4 = _mm256_loadu_pd(xv + 2 * i);
    const __m256d yv4 = _mm256_loadu_pd(yv + 2 * i);
    const __m256d p = _mm256_mul_pd(xv4, yv4);
    const __m256d q = _mm256_mul_pd(xv4, _mm256_permute_pd(yv4, 0b0101));
    const __m256d re = _mm256_hadd_pd(p, p);
    const __m256d im = _mm256_hsub_pd(q, q);
    const __m256d t = _mm256_blend_pd(re, im, 0b1010);
    const double w0 = w[i / block];
    const double w1 = w[(i + 1) / block];
    const __m256d wv = _mm256_set_pd(w1, w1, w0, w0);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(t, wv));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  if (i < len) {
    // Remaining entry has even index: lanes 0 and 1.
    const double xr = xv[2 * i];
    const double xi = xv[2 * i + 1];
    const double yr = yv[2 * i];
    const double yi = yv[2 * i + 1];
    const double re = xr * yr + xi * yi;
    const double im = xr * yi - xi * yr;
    const double wi = w[i / block];
    lanes[0] = lanes[0] + re * wi;
    lanes[1] = lanes[1] + im * wi;
  }
  return {lanes[0] + lanes[2], lanes[1] + lanes[3]};
}

MD_AVX2 void node_scale(std::size_t len, std::size_t block, const cplx* s, const cplx* x,
                        cplx* y) {
  const auto* sv = reinterpret_cast<const double*>(s);
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) {
    const std::size_t n0 = i / block;
    const std::size_t n1 = (i + 1) / block;
    const __m256d sr = _mm256_set_pd(sv[2 * n1], sv[2 * n1], sv[2 * n0], sv[2 * n0]);
    const __m256d si =
        _mm256_set_pd(sv[2 * n1 + 1], sv[2 * n1 + 1], sv[2 * n0 + 1], sv[2 * n0 + 1]);
    _mm256_storeu_pd(yv + 2 * i, cmul_bcast(_mm256_loadu_pd(xv + 2 * i), sr, si));
  }
  for (; i < len; ++i) {
    const std::size_t node = i / block;
    const double re = xv[2 * i] * sv[2 * node] - xv[2 * i + 1] * sv[2 * node + 1];
    const double im = xv[2 * i + 1] * sv[2 * node] + xv[2 * i] * sv[2 * node + 1];
    yv[2 * i] = re;
    yv[2 * i + 1] = im;
  }
}

MD_AVX2 void node_imag_axpy(std::size_t len, std::size_t block, const double* s,
                            const cplx* x, cplx* y) {
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) {
    const double s0 = s[i / block];
    const double s1 = s[(i + 1) / block];
    const __m256d sv = _mm256_set_pd(s1, s1, s0, s0);
    const __m256d t = _mm256_mul_pd(_mm256_permute_pd(_mm256_loadu_pd(xv + 2 * i), 0b0101), sv);
    _mm256_storeu_pd(yv + 2 * i, _mm256_addsub_pd(_mm256_loadu_pd(yv + 2 * i), t));
  }
  for (; i < len; ++i) {
    const double si = s[i / block];
    yv[2 * i] = yv[2 * i] - xv[2 * i + 1] * si;
    yv[2 * i + 1] = yv[2 * i + 1] + xv[2 * i] * si;
  }
}

#undef MD_AVX2

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", block_matvec_add, axpy, weighted_dot, node_scale,
                                 node_imag_axpy};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace massdirac::kernels

#include "massdirac/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace massdirac::kernels {
namespace {

// Complex products are spelled out so that the operation order matches the
// AVX2 addsub sequence exactly (std::complex multiplication may take a
// NaN-recovery path).
inline void cmul(double ar, double ai, double br, double bi, double& re, double& im) {
  re = ar * br - ai * bi;
  im = ai * br + ar * bi;
}

void block_matvec_add(std::size_t blocks, std::size_t dim, const cplx* mats,
                      const cplx* x, cplx* y) {
  const auto* a = reinterpret_cast<const double*>(mats);
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  const std::size_t msize = dim * dim;
  for (std::size_t b = 0; b < blocks; ++b) {
    const double* ab = a + 2 * b * msize;
    const double* xb = xv + 2 * b * dim;
    double* yb = yv + 2 * b * dim;
    for (std::size_t c = 0; c < dim; ++c) {
      const double xr = xb[2 * c];
      const double xi = xb[2 * c + 1];
      const double* col = ab + 2 * c * dim;
      for (std::size_t r = 0; r < dim; ++r) {
        double re, im;
        cmul(col[2 * r], col[2 * r + 1], xr, xi, re, im);
        yb[2 * r] = yb[2 * r] + re;
        yb[2 * r + 1] = yb[2 * r + 1] + im;
      }
    }
  }
}

void axpy(std::size_t len, cplx a, const cplx* x, cplx* y) {
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  const double ar = a.real();
  const double ai = a.imag();
  for (std::size_t i = 0; i < len; ++i) {
    double re, im;
    cmul(xv[2 * i], xv[2 * i + 1], ar, ai, re, im);
    yv[2 * i] = yv[2 * i] + re;
    yv[2 * i + 1] = yv[2 * i + 1] + im;
  }
}

cplx weighted_dot(std::size_t len, std::size_t block, const double* w, const cplx* x,
                  const cplx* y) {
  const auto* xv = reinterpret_cast<const double*>(x);
  const auto* yv = reinterpret_cast<const double*>(y);
  // acc[0..1]: even entries (re, im); acc[2..3]: odd entries.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < len; ++i) {
    const double xr = xv[2 * i];
    const double xi = xv[2 * i + 1];
    const double yr = yv[2 * i];
    const double yi = yv[2 * i + 1];
    const double re = xr * yr + xi * yi;
    const double im = xr * yi - xi * yr;
    const double wi = w[i / block];
    const std::size_t lane = (i & 1U) * 2;
    acc[lane] = acc[lane] + re * wi;
    acc[lane + 1] = acc[lane + 1] + im * wi;
  }
  return {acc[0] + acc[2], acc[1] + acc[3]};
}

void node_scale(std::size_t len, std::size_t block, const cplx* s, const cplx* x, cplx* y) {
  const auto* sv = reinterpret_cast<const double*>(s);
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t node = i / block;
    double re, im;
    cmul(xv[2 * i], xv[2 * i + 1], sv[2 * node], sv[2 * node + 1], re, im);
    yv[2 * i] = re;
    yv[2 * i + 1] = im;
  }
}

void node_imag_axpy(std::size_t len, std::size_t block, const double* s, const cplx* x,
                    cplx* y) {
  const auto* xv = reinterpret_cast<const double*>(x);
  auto* yv = reinterpret_cast<double*>(y);
  for (std::size_t i = 0; i < len; ++i) {
    const double si = s[i / block];
    // i * s * (xr + i xi) = -s xi + i s xr
    yv[2 * i] = yv[2 * i] - xv[2 * i + 1] * si;
    yv[2 * i + 1] = yv[2 * i + 1] + xv[2 * i] * si;
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", block_matvec_add, axpy, weighted_dot, node_scale,
                                 node_imag_axpy};
  return table;
}

const KernelTable& active() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("MASSDIRAC_KERNELS");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (const KernelTable* simd = avx2_table()) return simd;
    return &scalar_table();
  }();
  return *chosen;
}

}  // namespace massdirac::kernels

#pragma once

// Data-parallel inner loops of the spinor-field arithmetic.
//
// Fields are stored node-major: entry (node, c) lives at node * block + c,
// where block is the spinor dimension N. Every kernel exists as a scalar
// reference and, when the CPU supports it, an AVX2 variant. The two variants
// follow the same floating-point operation order (including the lane layout
// of the reductions), so they agree bit for bit. The active table is chosen
// once at first use; MASSDIRAC_KERNELS=scalar forces the reference path.

#include <complex>
#include <cstddef>
#include <string_view>

namespace massdirac::kernels {

using cplx = std::complex<double>;

struct KernelTable {
  std::string_view name;

  // y[b] += A[b] * x[b] for `blocks` independent dim x dim complex matrices.
  // Matrices are column-major, stored consecutively.
  void (*block_matvec_add)(std::size_t blocks, std::size_t dim, const cplx* mats,
                           const cplx* x, cplx* y);

  // y += a * x
  void (*axpy)(std::size_t len, cplx a, const cplx* x, cplx* y);

  // sum_i w[i / block] * conj(x[i]) * y[i], with a fixed two-accumulator
  // schedule (even / odd entries) that both variants reproduce.
  cplx (*weighted_dot)(std::size_t len, std::size_t block, const double* w,
                       const cplx* x, const cplx* y);

  // y[i] = s[i / block] * x[i]   (complex per-node factor)
  void (*node_scale)(std::size_t len, std::size_t block, const cplx* s,
                     const cplx* x, cplx* y);

  // y[i] += i * s[i / block] * x[i]   (real per-node factor)
  void (*node_imag_axpy)(std::size_t len, std::size_t block, const double* s,
                         const cplx* x, cplx* y);
};

const KernelTable& scalar_table();

// nullptr when the build has no AVX2 variant or the CPU lacks AVX2.
const KernelTable* avx2_table();

const KernelTable& active();

}  // namespace massdirac::kernels

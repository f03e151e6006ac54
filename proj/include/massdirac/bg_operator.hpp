#pragma once

// Dirac operator of a metric h acting on spinors of the flat background g
// through the Bourguignon-Gauduchon identification.
//
// With b = b^g_h (h(bX, bY) = g(X, Y)) and the global flat frame e_i,
//
//   D^h_g phi = sum_i e_i . d_{b e_i} phi + sum_i e_i . rho(T_i) . phi,
//   T_i       = b^{-1} nabla^h_{b e_i} b - nabla^g_{b e_i},
//
// where rho is the spin lift of the g-antisymmetric T_i. The operator is
// symmetric in L^2(dv^h). On the grid it is applied in the split form
//
//   D phi = 1/2 sum_j [ M_j d_j phi + W^{-1} d_j (W M_j phi) ] + C_h phi,
//
// with M_j = sum_i b_ji gamma_i, W = sqrt(det h) and C_h the Hermitian part
// of sum_i gamma_i rho(T_i). Both halves agree in the continuum; the split
// form is exactly W-self-adjoint on the grid. Derivatives are spectral.

#include <memory>
#include <ostream>
#include <optional>
#include <span>
#include <vector>

#include "massdirac/fourier.hpp"
#include "massdirac/torus.hpp"

namespace massdirac {

struct FrameMap {
  int n = 0;
  std::size_t nodes = 0;
  std::vector<double> a;  // [node][i][j], g(X, Y) = h(aX, Y)  =>  a = h^{-1}
  std::vector<double> b;  // [node][i][j], b = h^{-1/2}

  RMatrix a_at(std::size_t node) const;
  RMatrix b_at(std::size_t node) const;
};

FrameMap frame_map(const MetricField& h);

class DiracOperator {
 public:
  DiracOperator(std::shared_ptr<const SpinorBundle> bundle, MetricField metric);

  const SpinorBundle& bundle() const noexcept { return *bundle_; }
  std::shared_ptr<const SpinorBundle> bundle_ptr() const noexcept { return bundle_; }
  const MetricField& metric() const noexcept { return metric_; }
  std::size_t size() const noexcept { return bundle_->field_size(); }

  void apply(std::span<const cplx> in, std::span<cplx> out) const;
  // Exact flat Dirac operator (Fourier multiplier i xi.gamma).
  void background_apply(std::span<const cplx> in, std::span<cplx> out) const;

  // Per-mode symbols of (D^g - shift)^{-1}. Where the symbol is singular
  // (xi = 0, shift = 0) the identity is used, giving a pseudo-inverse that
  // still serves as a preconditioner.
  std::vector<cplx> flat_resolvent(cplx shift) const;
  void apply_fourier_multiplier(std::span<const cplx> symbols, std::span<const cplx> in, std::span<cplx> out) const;

  // Weighted inner product <a, b>_W = sum_x dv^h(x) <a(x), b(x)>.
  cplx inner(std::span<const cplx> a, std::span<const cplx> b) const;
  double norm(std::span<const cplx> a) const;
  const std::vector<double>& weights() const noexcept { return weights_; }

  // dim ker D when it is known a priori (globally flat metric), else empty.
  std::optional<std::size_t> known_kernel_dimension() const;

  // Largest |T_i + T_i^T| over nodes and i (the correction must be antisymmetric).
  double correction_antisymmetry() const noexcept { return antisymmetry_; }
  // Largest |k + delta/2| on the grid.
  double spectral_scale() const noexcept { return scale_; }

  // Dense matrix of the discrete operator; size() must not exceed 4096.
  CMatrix dense() const;

 private:
  std::shared_ptr<const SpinorBundle> bundle_;
  MetricField metric_;
  SpectralTransform transform_;
  std::vector<std::vector<cplx>> half_m_;   // per axis: nodes x N x N
  std::vector<std::vector<cplx>> half_wm_;  // per axis: W/2 * M_j
  std::vector<cplx> c_herm_;                // nodes x N x N
  std::vector<cplx> symbols_;               // i xi.gamma per mode
  std::vector<double> weights_;
  std::vector<cplx> inv_weights_;
  std::vector<std::vector<double>> xi_;     // per axis, per mode
  double antisymmetry_ = 0.0;
  double scale_ = 0.0;
};

using DiracOperatorHandle = std::shared_ptr<const DiracOperator>;

// Row-major, little-endian, two float64 (re, im) per entry.
void write_dense_binary(const CMatrix& dense, std::ostream& out);

DiracOperatorHandle assemble_bg_dirac(std::shared_ptr<const SpinorBundle> bundle, MetricField metric);

}  // namespace massdirac

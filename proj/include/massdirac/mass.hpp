#pragma once

// Regular part of the Green's function at the base point and the mass
// endomorphism.
//
// With S(x) = -(x .)/(omega_{n-1} |x|^n) the flat Green kernel and eta a
// cutoff equal to 1 near p, G psi0 = eta S psi0 + v with
//
//   D v = f = -D(eta S psi0) + delta_p psi0 = rho(|x|) psi0,
//   rho(r)  = -eta'(r) / (omega_{n-1} r^{n-1}),
//
// a smooth bump on the annulus r1 <= |x| <= r2 with unit integral. Only v is
// ever put on the grid; alpha(psi0) = v(p).

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "massdirac/spectral.hpp"

namespace massdirac {

// omega_{n-1} = |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)
double sphere_volume(int n);

class SingularKernel {
 public:
  explicit SingularKernel(int n);

  int dimension() const noexcept { return n_; }
  double omega() const noexcept { return omega_; }
  // -(x .)/(omega |x|^n); x must not be the origin.
  CMatrix evaluate(const CliffordRep& clifford, std::span<const double> x) const;

 private:
  int n_;
  double omega_;
};

enum class SourceMode {
  Projected,  // exact Fourier coefficients of rho psi0 on the grid band
  Sampled,    // rho psi0 sampled at the nodes
};

struct GreenOptions {
  SourceMode source = SourceMode::Projected;
  SolverOptions solver{};
};

// Radial source rho and its Fourier transform rho_hat(s) = int rho(x) e^{-i xi.x} dx, |xi| = s.
double source_density(const CutoffProfile& eta, int n, double r);
double source_transform(const CutoffProfile& eta, int n, double s);

// f = rho psi0 on the grid of `bundle`.
std::vector<cplx> green_source(const SpinorBundle& bundle, const CutoffProfile& eta, const CVector& psi0,
                               SourceMode mode);

struct GreenData {
  CVector psi0;
  std::vector<cplx> v_field;
  double rhs_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  CutoffProfile eta{0.2, 0.45};
  double high_band_fraction = 0.0;  // spectral energy of v beyond 2/3 of the band
};

GreenData green_regular_part(const DiracOperator& op, const CVector& psi0, const CutoffProfile& eta,
                             const GreenOptions& options = {});

// alpha is evaluated in the mean-value form alpha_cj = <f_c, v_j>: in the
// continuum this equals v_j(p) (the regular part is harmonic on the source
// annulus and rho is radial with unit mass), and on the grid it converges
// much faster than the node value, which needs the cutoff scale resolved.
// The node read v_j(p) is kept as a cross-check.
struct MassEndomorphism {
  CMatrix alpha;
  CMatrix alpha_node;                // column j = v_j(p)
  double node_read_deviation = 0.0;  // |alpha - alpha_node|_2
  double interpolation_deviation = 0.0;  // |node read - interpolant at p|
  double hermitian_deviation = 0.0;  // |alpha - alpha^*|_2
  double inversion_deviation = 0.0;  // |alpha - w alpha w^{-1}|_2, w = volume element
  std::vector<double> residuals;
  std::vector<int> iterations;
  bool converged = false;
  double high_band_fraction = 0.0;
  int points_per_axis = 0;
  double r1 = 0.0;
  double r2 = 0.0;
};

// Throws NotInvertible for operators with a known kernel and
// NonConvergence when a column solve misses the tolerance.
MassEndomorphism mass_endomorphism(const DiracOperator& op, const CutoffProfile& eta, const GreenOptions& options = {});

struct MassSpectrum {
  std::vector<double> eigenvalues;  // of (alpha + alpha^*)/2, descending |lambda|
  double norm = 0.0;                // operator norm of alpha
};

MassSpectrum mass_spectrum(const CMatrix& alpha);

void to_json(nlohmann::json& j, const MassEndomorphism& m);

}  // namespace massdirac

#pragma once

// Flat tori T^n = R^n / (2 pi Z)^n, their spin structures and grids, the
// cutoff around the base point p = 0, and metrics that agree with the flat
// metric on the ball U = B(p, r_U).

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "massdirac/clifford.hpp"

namespace massdirac {

inline constexpr double kPi = 3.14159265358979323846;

// delta_j = 0: periodic along axis j; delta_j = 1: antiperiodic.
// delta = 0 is the Lie group spin structure (parallel spinors).
struct TorusSpec {
  int n = 3;
  std::vector<int> delta;

  void validate() const;
};

struct GridSpec {
  int points_per_axis = 12;  // even, >= 8; p sits on node 0

  void validate() const;
};

// Trivialized spinor bundle on the grid.
//
// Nodes use the fundamental domain [-pi, pi)^n with p at the origin; node
// index = sum_j i_j m^(n-1-j) (axis 0 slowest, FFTW row-major). Fourier
// index j carries momentum k + delta/2 with k = j for j < m/2 and j - m
// otherwise. A field phi is stored by its node values; u = e^{-i delta.x/2} phi
// is periodic and is what the FFT sees.
class SpinorBundle {
 public:
  SpinorBundle(TorusSpec torus, GridSpec grid);

  const TorusSpec& torus() const noexcept { return torus_; }
  const GridSpec& grid() const noexcept { return grid_; }
  const CliffordRep& clifford() const noexcept { return clifford_; }

  int dimension() const noexcept { return torus_.n; }
  int points_per_axis() const noexcept { return grid_.points_per_axis; }
  int spinor_dim() const noexcept { return clifford_.spinor_dim(); }
  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t field_size() const noexcept { return nodes_ * static_cast<std::size_t>(spinor_dim()); }
  double spacing() const noexcept { return spacing_; }
  double cell_volume() const noexcept { return cell_volume_; }

  std::span<const double> coordinates(std::size_t node) const {
    return {coords_.data() + node * static_cast<std::size_t>(torus_.n), static_cast<std::size_t>(torus_.n)};
  }
  // Momentum xi = k + delta/2 of Fourier index `mode`.
  std::span<const double> momentum(std::size_t mode) const {
    return {momenta_.data() + mode * static_cast<std::size_t>(torus_.n), static_cast<std::size_t>(torus_.n)};
  }
  double momentum_norm(std::size_t mode) const;
  // True when every component of k lies strictly inside the symmetric band,
  // i.e. the mode has a partner -xi on the grid (excludes periodic Nyquist).
  bool symmetric_mode(std::size_t mode) const;
  double distance_to_base(std::size_t node) const;
  const std::vector<cplx>& phase() const noexcept { return phase_; }          // e^{ i delta.x/2}
  const std::vector<cplx>& inverse_phase() const noexcept { return inv_phase_; }  // e^{-i delta.x/2}

  // Number of modes with xi = 0 (one when delta = 0, zero otherwise).
  std::size_t zero_modes() const;

 private:
  TorusSpec torus_;
  GridSpec grid_;
  CliffordRep clifford_;
  std::size_t nodes_ = 0;
  double spacing_ = 0.0;
  double cell_volume_ = 0.0;
  std::vector<double> coords_;
  std::vector<double> momenta_;
  std::vector<int> kindex_;
  std::vector<cplx> phase_;
  std::vector<cplx> inv_phase_;
};

std::shared_ptr<const SpinorBundle> make_flat_torus(const TorusSpec& torus, const GridSpec& grid);

// eta = 1 on B(p, r1), 0 outside B(p, r2), quintic smoothstep in between.
class CutoffProfile {
 public:
  CutoffProfile(double r1, double r2);

  double inner() const noexcept { return r1_; }
  double outer() const noexcept { return r2_; }
  double value(double r) const;
  double radial_derivative(double r) const;  // d eta / dr, <= 0
  // max |d eta| over the grid nodes of `bundle` (at most 15/8 / (r2 - r1)).
  double max_gradient_on(const SpinorBundle& bundle) const;
  // Admissible in U = B(p, r_U): 0 < r1 < r2 < r_U.
  void check_within(double flat_radius) const;

 private:
  double r1_;
  double r2_;
};

// h(x) and d_k h_ij(x) at a point; sizes n*n and n*n*n ([k][i][j]).
using PointwiseMetric = std::function<void(std::span<const double> x, std::span<double> h, std::span<double> dh)>;

struct MetricField {
  int n = 0;
  std::size_t nodes = 0;
  double flat_region_radius = 0.0;
  std::vector<double> values;       // [node][i][j]
  std::vector<double> derivatives;  // [node][k][i][j] = d_k h_ij

  RMatrix at(std::size_t node) const;
  RMatrix derivative(std::size_t node, int k) const;
  bool is_identity(std::size_t node) const;
  bool is_flat() const;  // identity at every node
  double min_eigenvalue() const;
};

// Samples `metric` on the grid and checks the invariants: identity on U
// (enforced bitwise), symmetric, positive definite. A negative flat_radius
// drops the U constraint (used for whole-torus test metrics).
MetricField sample_metric(const SpinorBundle& bundle, const PointwiseMetric& metric, double flat_radius);

MetricField flat_metric(const SpinorBundle& bundle, double flat_radius);

// Smooth symmetric bump B(x) = amplitude * beta(|x|) * M(x) supported in
// the annulus r_inner <= |x| <= r_outer; beta is the C-infinity bump of the
// annulus and M a short trigonometric polynomial drawn from `seed`, with
// |M|_op <= 1.
class BumpPerturbation {
 public:
  BumpPerturbation(int n, double amplitude, std::uint64_t seed, double r_inner = 0.8, double r_outer = 2.2);

  int dimension() const noexcept { return n_; }
  double r_inner() const noexcept { return r_inner_; }
  double r_outer() const noexcept { return r_outer_; }
  double amplitude() const noexcept { return amplitude_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // Adds coeff * B(x) to h and coeff * dB(x) to dh; returns false (and
  // leaves h, dh untouched) outside the support.
  bool accumulate(std::span<const double> x, double coeff, std::span<double> h, std::span<double> dh) const;

 private:
  struct Term {
    int i, j;
    double coeff;
    std::vector<double> wave;
    double shift;
  };
  int n_;
  double amplitude_;
  std::uint64_t seed_;
  double r_inner_;
  double r_outer_;
  std::vector<Term> terms_;
};

// h = Id + sum_l c_l B_l(x)
PointwiseMetric affine_metric(int n, std::vector<std::pair<double, BumpPerturbation>> terms);

// t -> Id + t B(x), the interpolation g_t = t g_1 + (1 - t) g_0 with
// g_0 flat and g_1 = Id + B.
class MetricFamily {
 public:
  MetricFamily(std::shared_ptr<const SpinorBundle> bundle, BumpPerturbation bump, double flat_radius);

  const BumpPerturbation& bump() const noexcept { return bump_; }
  double flat_radius() const noexcept { return flat_radius_; }
  PointwiseMetric pointwise(double t) const;
  MetricField at(double t) const;

 private:
  std::shared_ptr<const SpinorBundle> bundle_;
  BumpPerturbation bump_;
  double flat_radius_;
};

inline constexpr double kFlatRadius = 0.6;
inline constexpr double kFamilyInner = 0.8;
inline constexpr double kFamilyOuter = 2.2;

// Rejects amplitudes for which Id + B fails to be positive definite on
// the grid (then Id + t B is positive definite for all t in [0, 1]).
MetricFamily standard_family(std::shared_ptr<const SpinorBundle> bundle, double amplitude, std::uint64_t shape_seed,
                             double flat_radius = kFlatRadius);

// Gamma^k_ij = 1/2 h^{kl} (d_i h_jl + d_j h_il - d_l h_ij), stored [node][k][i][j].
std::vector<double> christoffel(const MetricField& h);

}  // namespace massdirac

#pragma once

// Linear solves and the low-lying spectrum of a DiracOperator.
//
// solve() runs restarted GMRES in the weighted inner product of the
// operator, right-preconditioned by the exact inverse of the flat operator
// (a Fourier multiplier). low_spectrum() builds block Krylov spaces of the
// shift-invert operator (D - i sigma)^{-1}, extracts harmonic Ritz pairs
// for the target 0, and certifies every reported pair by its residual.
// All reductions use a fixed order, so results are reproducible run to run.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "massdirac/bg_operator.hpp"

namespace massdirac {

struct SolverOptions {
  double tol = 1e-10;        // relative residual, weighted norm
  int max_iterations = 500;  // total Krylov iterations over all restarts
  int restart = 60;
};

struct SolveResult {
  std::vector<cplx> solution;
  double residual = 0.0;  // achieved |(D - s) x - b| / |b|
  int iterations = 0;
  bool converged = false;
};

// Solves (D - shift) x = rhs. Throws NotInvertible when shift = 0 and the
// operator has a known kernel. When the budget runs out the best iterate
// is returned with converged = false.
SolveResult solve(const DiracOperator& op, std::span<const cplx> rhs, const SolverOptions& options = {},
                  cplx shift = 0.0);

// Like solve() but throws NonConvergence when the tolerance is not reached.
std::vector<cplx> solve_or_throw(const DiracOperator& op, std::span<const cplx> rhs,
                                 const SolverOptions& options = {}, cplx shift = 0.0);

struct EigenOptions {
  double sigma = 0.1;  // imaginary shift of the inverse iteration
  double eig_tol = 1e-8;
  double gap_threshold = 1e-6;
  double cluster_rel_tol = 1e-8;  // times the grid Dirac scale
  int krylov_blocks = 3;
  int max_restarts = 40;
  std::uint64_t seed = 0x5eed;
  SolverOptions inner{1e-12, 2000, 80};
};

struct SpectrumReport {
  std::vector<double> eigenvalues;  // sorted by |lambda|, ties by value descending
  std::vector<double> residuals;    // |D phi - lambda phi| / |phi|
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::vector<cplx>> eigenvectors;  // weighted-orthonormal
  double gap = 0.0;
  bool invertible = false;
  double cluster_tol = 0.0;
  double gap_threshold = 0.0;
  int restarts = 0;
  std::size_t inner_solves = 0;
};

// The k eigenvalues of smallest modulus. Throws NonConvergence when the
// residual certificates are not reached within the restart budget.
SpectrumReport low_spectrum(const DiracOperator& op, int k, const EigenOptions& options = {});

struct InvertibilityReport {
  bool invertible = false;
  double gap = 0.0;
};

InvertibilityReport is_invertible(const DiracOperator& op, double gap_threshold, const EigenOptions& options = {});

// Groups sorted eigenvalues whose values lie within tol of a neighbour.
std::vector<std::vector<std::size_t>> cluster_eigenvalues(const std::vector<double>& values, double tol);

void to_json(nlohmann::json& j, const SpectrumReport& r);

}  // namespace massdirac

#pragma once

// Complex representations of the Clifford algebra of R^n.
//
// Convention: unit vectors square to -1 and every gamma matrix is
// anti-Hermitian, so  gamma_i gamma_j + gamma_j gamma_i = -2 delta_ij.
// With this choice the Dirac operator sum_i gamma_i d_i is symmetric.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace massdirac {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;

class CliffordRep {
 public:
  // Deterministic tensor-product construction. Even n extends n-2 by
  // chirality (x) i sigma_{1,2}; odd n appends i * chirality of the
  // first n-1 gammas.
  static CliffordRep build(int n);

  int dimension() const noexcept { return n_; }
  int spinor_dim() const noexcept { return static_cast<int>(spinor_dim_); }
  const CMatrix& gamma(int i) const { return gammas_.at(static_cast<std::size_t>(i)); }
  const std::vector<CMatrix>& gammas() const noexcept { return gammas_; }

  // sum_i v_i gamma_i
  CMatrix vector_action(std::span<const double> v) const;

  // (v .) psi
  CVector multiply(std::span<const double> v, const CVector& psi) const;

  // Spin lift of an antisymmetric endomorphism T of R^n:
  //   rho(T) = 1/2 sum_{j<k} <T e_j, e_k> gamma_j gamma_k,
  // so that [rho(T), v.] = (T v).
  CMatrix bivector_action(const RMatrix& t) const;

  // gamma_1 ... gamma_n
  CMatrix volume_element() const;

 private:
  int n_ = 0;
  long spinor_dim_ = 1;
  std::vector<CMatrix> gammas_;
};

}  // namespace massdirac

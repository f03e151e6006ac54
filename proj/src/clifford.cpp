#include "massdirac/clifford.hpp"

#include <string>

#include "massdirac/error.hpp"

namespace massdirac {
namespace {

// Hermitian chirality i^{k/2} gamma_1...gamma_k for even k (identity for k = 0).
CMatrix chirality(const std::vector<CMatrix>& gammas, long dim) {
  CMatrix w = CMatrix::Identity(dim, dim);
  for (const auto& g : gammas) w = w * g;
  cplx phase{1.0, 0.0};
  for (std::size_t i = 0; i < gammas.size() / 2; ++i) phase *= cplx{0.0, 1.0};
  return phase * w;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

CliffordRep CliffordRep::build(int n) {
  if (n < 2) fail(ErrorKind::InvalidArgument, "Clifford representation needs n >= 2, got " + std::to_string(n));

  const cplx I{0.0, 1.0};
  CMatrix s1(2, 2), s2(2, 2);
  s1 << 0.0, 1.0, 1.0, 0.0;
  s2 << 0.0, -I, I, 0.0;
  const CMatrix is1 = I * s1;
  const CMatrix is2 = I * s2;

  CliffordRep rep;
  rep.n_ = n;
  std::vector<CMatrix> g;
  long dim = 1;
  const int even = n - n % 2;
  for (int k = 0; k < even; k += 2) {
    const CMatrix c = chirality(g, dim);
    const CMatrix id2 = CMatrix::Identity(2, 2);
    for (auto& m : g) m = kron(m, id2);
    g.push_back(kron(c, is1));
    g.push_back(kron(c, is2));
    dim *= 2;
  }
  if (n % 2 == 1) g.push_back(I * chirality(g, dim));
  rep.spinor_dim_ = dim;
  rep.gammas_ = std::move(g);
  return rep;
}

CMatrix CliffordRep::vector_action(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != n_) fail(ErrorKind::InvalidArgument, "vector dimension mismatch in Clifford action");
  CMatrix out = CMatrix::Zero(spinor_dim_, spinor_dim_);
  for (int i = 0; i < n_; ++i) out += v[static_cast<std::size_t>(i)] * gammas_[static_cast<std::size_t>(i)];
  return out;
}

CVector CliffordRep::multiply(std::span<const double> v, const CVector& psi) const {
  if (psi.size() != spinor_dim_) fail(ErrorKind::InvalidArgument, "spinor dimension mismatch in Clifford action");
  return vector_action(v) * psi;
}

CMatrix CliffordRep::bivector_action(const RMatrix& t) const {
  if (t.rows() != n_ || t.cols() != n_) fail(ErrorKind::InvalidArgument, "bivector dimension mismatch");
  CMatrix out = CMatrix::Zero(spinor_dim_, spinor_dim_);
  for (int j = 0; j < n_; ++j)
    for (int k = j + 1; k < n_; ++k) {
      const double c = 0.5 * t(k, j);
      if (c != 0.0) out += c * (gammas_[static_cast<std::size_t>(j)] * gammas_[static_cast<std::size_t>(k)]);
    }
  return out;
}

CMatrix CliffordRep::volume_element() const {
  CMatrix w = CMatrix::Identity(spinor_dim_, spinor_dim_);
  for (const auto& g : gammas_) w = w * g;
  return w;
}

}  // namespace massdirac

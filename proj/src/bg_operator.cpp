#include "massdirac/bg_operator.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "massdirac/error.hpp"
#include "massdirac/kernels.hpp"

namespace massdirac {
namespace {

RMatrix read_matrix(const std::vector<double>& data, std::size_t node, int n) {
  RMatrix out(n, n);
  const double* v = data.data() + node * static_cast<std::size_t>(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = v[i * n + j];
  return out;
}

void write_matrix(std::vector<double>& data, std::size_t node, const RMatrix& m) {
  const auto n = static_cast<int>(m.rows());
  double* v = data.data() + node * static_cast<std::size_t>(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v[i * n + j] = m(i, j);
}

void store_column_major(std::vector<cplx>& data, std::size_t node, const CMatrix& m) {
  const auto dim = static_cast<std::size_t>(m.rows());
  cplx* v = data.data() + node * dim * dim;
  for (std::size_t c = 0; c < dim; ++c)
    for (std::size_t r = 0; r < dim; ++r) v[c * dim + r] = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

struct PointFrame {
  RMatrix b;      // h^{-1/2}
  RMatrix binv;   // h^{1/2}
  RMatrix a;      // h^{-1}
  std::vector<RMatrix> db;  // d_k b
};

PointFrame point_frame(const RMatrix& h, const std::vector<RMatrix>& dh) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
  if (es.info() != Eigen::Success || !(es.eigenvalues().array() > 0.0).all())
    fail(ErrorKind::NotPositiveDefinite, "metric is not positive definite");
  const RMatrix& q = es.eigenvectors();
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::VectorXd root = lam.array().sqrt();
  PointFrame f;
  f.b = q * root.cwiseInverse().asDiagonal() * q.transpose();
  f.binv = q * root.asDiagonal() * q.transpose();
  f.a = q * lam.cwiseInverse().asDiagonal() * q.transpose();
  // Daleckii-Krein: d f(h) = Q [ (Q^T dh Q) o F ] Q^T with divided
  // differences of f(x) = x^{-1/2}, which have this closed form (also
  // valid on the diagonal).
  const auto n = h.rows();
  RMatrix divided(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) divided(i, j) = -1.0 / (root(i) * root(j) * (root(i) + root(j)));
  for (const RMatrix& d : dh) {
    const RMatrix rotated = q.transpose() * d * q;
    f.db.push_back(q * rotated.cwiseProduct(divided) * q.transpose());
  }
  return f;
}

}  // namespace

RMatrix FrameMap::a_at(std::size_t node) const { return read_matrix(a, node, n); }
RMatrix FrameMap::b_at(std::size_t node) const { return read_matrix(b, node, n); }

FrameMap frame_map(const MetricField& h) {
  const int n = h.n;
  FrameMap fm;
  fm.n = n;
  fm.nodes = h.nodes;
  fm.a.assign(h.nodes * static_cast<std::size_t>(n * n), 0.0);
  fm.b.assign(h.nodes * static_cast<std::size_t>(n * n), 0.0);
  for (std::size_t node = 0; node < h.nodes; ++node) {
    if (h.is_identity(node)) {
      write_matrix(fm.a, node, RMatrix::Identity(n, n));
      write_matrix(fm.b, node, RMatrix::Identity(n, n));
      continue;
    }
    const PointFrame f = point_frame(h.at(node), {});
    write_matrix(fm.a, node, f.a);
    write_matrix(fm.b, node, f.b);
  }
  return fm;
}

DiracOperator::DiracOperator(std::shared_ptr<const SpinorBundle> bundle, MetricField metric)
    : bundle_(std::move(bundle)), metric_(std::move(metric)), transform_(bundle_) {
  const int n = bundle_->dimension();
  const int dim = bundle_->spinor_dim();
  const std::size_t nodes = bundle_->nodes();
  if (metric_.n != n || metric_.nodes != nodes) fail(ErrorKind::InvalidArgument, "metric does not match the grid");
  const CliffordRep& cl = bundle_->clifford();
  const auto msize = static_cast<std::size_t>(dim * dim);

  half_m_.assign(static_cast<std::size_t>(n), std::vector<cplx>(nodes * msize));
  half_wm_.assign(static_cast<std::size_t>(n), std::vector<cplx>(nodes * msize));
  c_herm_.assign(nodes * msize, cplx{});
  weights_.assign(nodes, 0.0);
  inv_weights_.assign(nodes, cplx{});

  const std::vector<double> gamma = christoffel(metric_);
  const auto n3 = static_cast<std::size_t>(n * n * n);
  const double cell = bundle_->cell_volume();

  for (std::size_t node = 0; node < nodes; ++node) {
    if (metric_.is_identity(node)) {
      weights_[node] = cell;
      inv_weights_[node] = 1.0 / cell;
      for (int j = 0; j < n; ++j) {
        store_column_major(half_m_[static_cast<std::size_t>(j)], node, 0.5 * cl.gamma(j));
        store_column_major(half_wm_[static_cast<std::size_t>(j)], node, (0.5 * cell) * cl.gamma(j));
      }
      continue;
    }
    const RMatrix h = metric_.at(node);
    std::vector<RMatrix> dh;
    for (int k = 0; k < n; ++k) dh.push_back(metric_.derivative(node, k));
    const PointFrame f = point_frame(h, dh);
    const double w = std::sqrt(h.determinant()) * cell;
    weights_[node] = w;
    inv_weights_[node] = 1.0 / w;

    const double* g = gamma.data() + node * n3;
    CMatrix c = CMatrix::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = f.b.col(i);
      RMatrix dxb = RMatrix::Zero(n, n);
      RMatrix gx = RMatrix::Zero(n, n);  // (Gamma_X)^a_c = sum_j X^j Gamma^a_{jc}
      for (int j = 0; j < n; ++j) {
        dxb += x(j) * f.db[static_cast<std::size_t>(j)];
        for (int aa = 0; aa < n; ++aa)
          for (int cc = 0; cc < n; ++cc) gx(aa, cc) += x(j) * g[aa * n * n + j * n + cc];
      }
      const RMatrix t = f.binv * (dxb + gx * f.b);
      antisymmetry_ = std::max(antisymmetry_, (t + t.transpose()).cwiseAbs().maxCoeff());
      c += cl.gamma(i) * cl.bivector_action(0.5 * (t - t.transpose()));
    }
    store_column_major(c_herm_, node, 0.5 * (c + c.adjoint()));
    for (int j = 0; j < n; ++j) {
      CMatrix mj = CMatrix::Zero(dim, dim);
      for (int i = 0; i < n; ++i) mj += f.b(j, i) * cl.gamma(i);
      store_column_major(half_m_[static_cast<std::size_t>(j)], node, 0.5 * mj);
      store_column_major(half_wm_[static_cast<std::size_t>(j)], node, (0.5 * w) * mj);
    }
  }

  symbols_.assign(nodes * msize, cplx{});
  xi_.assign(static_cast<std::size_t>(n), std::vector<double>(nodes));
  for (std::size_t mode = 0; mode < nodes; ++mode) {
    const auto xi = bundle_->momentum(mode);
    for (int j = 0; j < n; ++j) xi_[static_cast<std::size_t>(j)][mode] = xi[static_cast<std::size_t>(j)];
    store_column_major(symbols_, mode, cplx{0.0, 1.0} * cl.vector_action(xi));
    scale_ = std::max(scale_, bundle_->momentum_norm(mode));
  }
}

void DiracOperator::apply(std::span<const cplx> in, std::span<cplx> out) const {
  const auto& k = kernels::active();
  const std::size_t len = size();
  const std::size_t nodes = bundle_->nodes();
  const auto dim = static_cast<std::size_t>(bundle_->spinor_dim());
  const int n = bundle_->dimension();
  if (in.size() != len || out.size() != len) fail(ErrorKind::InvalidArgument, "field size mismatch");

  FieldBuffer modes(len);
  transform_.to_modes(in, modes);
  FieldBuffer result(len);
  FieldBuffer work_modes(len);
  FieldBuffer work(len);
  FieldBuffer acc(len);
  for (int j = 0; j < n; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    work_modes.zero();
    k.node_imag_axpy(len, dim, xi_[ju].data(), modes.data(), work_modes.data());
    transform_.to_nodes(work_modes, work.span());
    k.block_matvec_add(nodes, dim, half_m_[ju].data(), work.data(), result.data());

    work.zero();
    k.block_matvec_add(nodes, dim, half_wm_[ju].data(), in.data(), work.data());
    transform_.to_modes(work.span(), work_modes);
    k.node_imag_axpy(len, dim, xi_[ju].data(), work_modes.data(), acc.data());
  }
  transform_.to_nodes(acc, work.span());
  k.node_scale(len, dim, inv_weights_.data(), work.data(), work_modes.data());
  k.axpy(len, cplx{1.0, 0.0}, work_modes.data(), result.data());
  k.block_matvec_add(nodes, dim, c_herm_.data(), in.data(), result.data());
  std::copy_n(result.data(), len, out.data());
}

void DiracOperator::background_apply(std::span<const cplx> in, std::span<cplx> out) const {
  apply_fourier_multiplier(symbols_, in, out);
}

std::vector<cplx> DiracOperator::flat_resolvent(cplx shift) const {
  const std::size_t nodes = bundle_->nodes();
  const int dim = bundle_->spinor_dim();
  const auto msize = static_cast<std::size_t>(dim * dim);
  std::vector<cplx> out(nodes * msize);
  for (std::size_t mode = 0; mode < nodes; ++mode) {
    const double xi2 = std::pow(bundle_->momentum_norm(mode), 2);
    const cplx det = xi2 - shift * shift;
    cplx* m = out.data() + mode * msize;
    if (det == cplx{0.0, 0.0}) {
      for (int r = 0; r < dim; ++r) m[r * dim + r] = 1.0;
      continue;
    }
    // (A - s)^{-1} = (A + s) / (|xi|^2 - s^2)  since A^2 = |xi|^2.
    const cplx* a = symbols_.data() + mode * msize;
    for (std::size_t e = 0; e < msize; ++e) m[e] = a[e] / det;
    for (int r = 0; r < dim; ++r) m[r * dim + r] += shift / det;
  }
  return out;
}

void DiracOperator::apply_fourier_multiplier(std::span<const cplx> symbols, std::span<const cplx> in,
                                             std::span<cplx> out) const {
  const std::size_t len = size();
  const auto dim = static_cast<std::size_t>(bundle_->spinor_dim());
  FieldBuffer modes(len);
  transform_.to_modes(in, modes);
  FieldBuffer product(len);
  kernels::active().block_matvec_add(bundle_->nodes(), dim, symbols.data(), modes.data(), product.data());
  transform_.to_nodes(product, out);
}

cplx DiracOperator::inner(std::span<const cplx> a, std::span<const cplx> b) const {
  return kernels::active().weighted_dot(size(), static_cast<std::size_t>(bundle_->spinor_dim()), weights_.data(),
                                        a.data(), b.data());
}

double DiracOperator::norm(std::span<const cplx> a) const { return std::sqrt(std::max(0.0, inner(a, a).real())); }

std::optional<std::size_t> DiracOperator::known_kernel_dimension() const {
  if (!metric_.is_flat()) return std::nullopt;
  return bundle_->zero_modes() * static_cast<std::size_t>(bundle_->spinor_dim());
}

CMatrix DiracOperator::dense() const {
  const std::size_t len = size();
  if (len > 4096) fail(ErrorKind::InvalidArgument, "dense materialization limited to 4096 unknowns, got " + std::to_string(len));
  const auto dl = static_cast<Eigen::Index>(len);
  CMatrix out(dl, dl);
  std::vector<cplx> e(len), col(len);
  for (std::size_t j = 0; j < len; ++j) {
    std::fill(e.begin(), e.end(), cplx{});
    e[j] = 1.0;
    apply(e, col);
    for (std::size_t i = 0; i < len; ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return out;
}

void write_dense_binary(const CMatrix& dense, std::ostream& out) {
  static_assert(std::endian::native == std::endian::little, "dense export assumes a little-endian host");
  for (Eigen::Index r = 0; r < dense.rows(); ++r)
    for (Eigen::Index c = 0; c < dense.cols(); ++c) {
      const double v[2] = {dense(r, c).real(), dense(r, c).imag()};
      out.write(reinterpret_cast<const char*>(v), sizeof v);
    }
}

DiracOperatorHandle assemble_bg_dirac(std::shared_ptr<const SpinorBundle> bundle, MetricField metric) {
  return std::make_shared<const DiracOperator>(std::move(bundle), std::move(metric));
}

}  // namespace massdirac

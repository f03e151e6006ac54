#include "massdirac/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "massdirac/error.hpp"
#include "massdirac/kernels.hpp"

namespace massdirac {
namespace {

using Field = std::vector<cplx>;

void axpy(cplx a, const Field& x, Field& y) { kernels::active().axpy(y.size(), a, x.data(), y.data()); }

void shifted_apply(const DiracOperator& op, cplx shift, std::span<const cplx> in, Field& out) {
  op.apply(in, out);
  if (shift != cplx{0.0, 0.0}) kernels::active().axpy(out.size(), -shift, in.data(), out.data());
}

// Complex Givens rotation [c s; -conj(s) c] zeroing b in (a, b).
struct Givens {
  double c = 1.0;
  cplx s = 0.0;

  static Givens zeroing(cplx a, cplx b) {
    Givens g;
    const double aa = std::abs(a);
    const double t = std::hypot(aa, std::abs(b));
    if (t == 0.0) return g;
    if (aa == 0.0) {
      g.c = 0.0;
      g.s = std::conj(b) / t;
      return g;
    }
    g.c = aa / t;
    g.s = (a / aa) * std::conj(b) / t;
    return g;
  }
  void apply(cplx& a, cplx& b) const {
    const cplx na = c * a + s * b;
    b = -std::conj(s) * a + c * b;
    a = na;
  }
};

// Weighted Gram-Schmidt (two passes) of v against basis; returns the norm
// left after orthogonalization (v is normalized when it is not negligible).
double orthonormalize_against(const DiracOperator& op, const std::vector<Field>& basis, Field& v) {
  const double before = op.norm(v);
  for (int pass = 0; pass < 2; ++pass)
    for (const Field& q : basis) axpy(-op.inner(q, v), q, v);
  const double after = op.norm(v);
  if (after > 1e-10 * before && after > 0.0)
    for (cplx& e : v) e /= after;
  return before > 0.0 ? after / before : 0.0;
}

}  // namespace

SolveResult solve(const DiracOperator& op, std::span<const cplx> rhs, const SolverOptions& options, cplx shift) {
  if (options.tol <= 0.0 || options.max_iterations < 1 || options.restart < 1)
    fail(ErrorKind::InvalidArgument, "solver options must be positive");
  const std::size_t len = op.size();
  if (rhs.size() != len) fail(ErrorKind::InvalidArgument, "right-hand side has the wrong size");
  for (const cplx& e : rhs)
    if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) fail(ErrorKind::InvalidArgument, "right-hand side is not finite");
  if (shift == cplx{0.0, 0.0}) {
    const auto kernel = op.known_kernel_dimension();
    if (kernel && *kernel > 0) fail(ErrorKind::NotInvertible, "operator not invertible");
  }

  SolveResult result;
  result.solution.assign(len, cplx{});
  const Field b(rhs.begin(), rhs.end());
  const double bnorm = op.norm(b);
  if (bnorm == 0.0) {
    result.converged = true;
    return result;
  }
  const std::vector<cplx> precond = op.flat_resolvent(shift);
  const int m = options.restart;

  Field x(len, cplx{}), r = b, w(len), z(len);
  double rnorm = bnorm;
  while (result.iterations < options.max_iterations) {
    std::vector<Field> v;
    v.push_back(r);
    for (cplx& e : v[0]) e /= rnorm;
    CMatrix h = CMatrix::Zero(m + 1, m);
    std::vector<Givens> rot;
    CVector g = CVector::Zero(m + 1);
    g(0) = rnorm;
    int j = 0;
    for (; j < m && result.iterations < options.max_iterations; ++j) {
      ++result.iterations;
      op.apply_fourier_multiplier(precond, v[static_cast<std::size_t>(j)], z);
      shifted_apply(op, shift, z, w);
      for (int i = 0; i <= j; ++i) {
        const cplx hij = op.inner(v[static_cast<std::size_t>(i)], w);
        h(i, j) = hij;
        axpy(-hij, v[static_cast<std::size_t>(i)], w);
      }
      const double hn = op.norm(w);
      h(j + 1, j) = hn;
      for (int i = 0; i < j; ++i) rot[static_cast<std::size_t>(i)].apply(h(i, j), h(i + 1, j));
      rot.push_back(Givens::zeroing(h(j, j), h(j + 1, j)));
      rot.back().apply(h(j, j), h(j + 1, j));
      rot.back().apply(g(j), g(j + 1));
      if (std::abs(g(j + 1)) <= options.tol * bnorm || hn == 0.0) {
        ++j;
        break;
      }
      for (cplx& e : w) e /= hn;
      v.push_back(w);
    }
    // Back substitution on the rotated Hessenberg system.
    CVector y = CVector::Zero(j);
    for (int i = j - 1; i >= 0; --i) {
      cplx acc = g(i);
      for (int l = i + 1; l < j; ++l) acc -= h(i, l) * y(l);
      y(i) = acc / h(i, i);
    }
    Field update(len, cplx{});
    for (int i = 0; i < j; ++i) axpy(y(i), v[static_cast<std::size_t>(i)], update);
    op.apply_fourier_multiplier(precond, update, z);
    axpy(1.0, z, x);
    shifted_apply(op, shift, x, w);
    r = b;
    axpy(-1.0, w, r);
    rnorm = op.norm(r);
    // Restarted GMRES never increases the residual, so x is the best iterate.
    if (rnorm <= options.tol * bnorm) break;
  }
  result.solution = x;
  result.residual = rnorm / bnorm;
  result.converged = result.residual <= options.tol;
  return result;
}

std::vector<cplx> solve_or_throw(const DiracOperator& op, std::span<const cplx> rhs, const SolverOptions& options,
                                 cplx shift) {
  SolveResult r = solve(op, rhs, options, shift);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "linear solve did not converge: residual " << r.residual << " after " << r.iterations
        << " iterations (tol " << options.tol << ")";
    fail(ErrorKind::NonConvergence, msg.str());
  }
  return std::move(r.solution);
}

std::vector<std::vector<std::size_t>> cluster_eigenvalues(const std::vector<double>& values, double tol) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    if (idx == 0 || values[order[idx]] - values[order[idx - 1]] > tol) clusters.emplace_back();
    clusters.back().push_back(order[idx]);
  }
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end());
  return clusters;
}

SpectrumReport low_spectrum(const DiracOperator& op, int k, const EigenOptions& options) {
  const std::size_t len = op.size();
  if (k < 1) fail(ErrorKind::InvalidArgument, "k must be at least 1");
  if (options.sigma <= 0.0 || options.eig_tol <= 0.0 || options.krylov_blocks < 1 || options.max_restarts < 1)
    fail(ErrorKind::InvalidArgument, "eigensolver options must be positive");
  const auto ku = static_cast<std::size_t>(k);
  if (ku * 2 > len) fail(ErrorKind::InvalidArgument, "k must be small compared with the operator size");
  // The block has to hold whole clusters: eigenvalues of a perturbed
  // operator split from flat multiplets only slowly. Size it from the flat
  // symbol, which puts N eigenvalues of modulus |xi| at every mode.
  std::vector<double> flat;
  const SpinorBundle& bundle = op.bundle();
  for (std::size_t mode = 0; mode < bundle.nodes(); ++mode)
    flat.insert(flat.end(), static_cast<std::size_t>(bundle.spinor_dim()), bundle.momentum_norm(mode));
  std::sort(flat.begin(), flat.end());
  const double reach = 1.5 * flat[ku - 1] + 1e-12;
  const auto multiplet = static_cast<std::size_t>(std::upper_bound(flat.begin(), flat.end(), reach) - flat.begin());
  const std::size_t p = std::min(len / 2, std::max(ku + std::max<std::size_t>(4, ku), multiplet + 4));
  const cplx shift{0.0, options.sigma};

  SpectrumReport report;
  report.cluster_tol = options.cluster_rel_tol * op.spectral_scale();
  report.gap_threshold = options.gap_threshold;

  // Deterministic start block.
  std::mt19937_64 rng(options.seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  std::vector<Field> block;
  while (block.size() < p) {
    Field v(len);
    for (cplx& e : v) e = cplx(uniform(), uniform());
    if (orthonormalize_against(op, block, v) > 1e-8) block.push_back(std::move(v));
  }

  std::vector<double> values;
  std::vector<double> residuals;
  for (int restart = 0; restart < options.max_restarts; ++restart) {
    report.restarts = restart + 1;
    // Block Krylov basis of (D - i sigma)^{-1}.
    std::vector<Field> basis = block;
    std::vector<Field> last = block;
    for (int s = 0; s < options.krylov_blocks && basis.size() < len; ++s) {
      std::vector<Field> next;
      for (const Field& q : last) {
        SolveResult r = solve(op, q, options.inner, shift);
        ++report.inner_solves;
        if (!r.converged && r.residual > 1e3 * options.inner.tol)
          fail(ErrorKind::NonConvergence, "inner solve of the eigensolver did not converge");
        if (orthonormalize_against(op, basis, r.solution) > 1e-10) {
          basis.push_back(r.solution);
          next.push_back(std::move(r.solution));
        }
        if (basis.size() >= len) break;
      }
      if (next.empty()) break;
      last = std::move(next);
    }

    // Harmonic Ritz extraction for the target i sigma.
    const auto nb = static_cast<Eigen::Index>(basis.size());
    std::vector<Field> dv(basis.size(), Field(len));
    for (std::size_t i = 0; i < basis.size(); ++i) op.apply(basis[i], dv[i]);
    CMatrix a(nb, nb), bmat(nb, nb), c(nb, nb);
    for (Eigen::Index i = 0; i < nb; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) a(i, j) = op.inner(basis[static_cast<std::size_t>(i)], dv[static_cast<std::size_t>(j)]);
    a = 0.5 * (a + a.adjoint()).eval();
    // B = ((D - shift)V)^* W (D - shift)V = V^*W D^2 V + sigma^2 (using symmetry of D)
    for (Eigen::Index i = 0; i < nb; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) bmat(i, j) = op.inner(dv[static_cast<std::size_t>(i)], dv[static_cast<std::size_t>(j)]);
    bmat = 0.5 * (bmat + bmat.adjoint()).eval();
    bmat += options.sigma * options.sigma * CMatrix::Identity(nb, nb);
    c = a - std::conj(shift) * CMatrix::Identity(nb, nb);
    Eigen::LLT<CMatrix> llt(bmat);
    if (llt.info() != Eigen::Success) fail(ErrorKind::NonConvergence, "harmonic projection lost definiteness");
    const CMatrix linv = llt.matrixL().solve(CMatrix::Identity(nb, nb));
    Eigen::ComplexEigenSolver<CMatrix> ces(linv * c * linv.adjoint());
    const CMatrix y = linv.adjoint() * ces.eigenvectors();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(nb));
    for (Eigen::Index i = 0; i < nb; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return std::abs(ces.eigenvalues()(l)) > std::abs(ces.eigenvalues()(r)); });

    // Rayleigh-Ritz with D on the span of the p selected harmonic vectors.
    std::vector<Field> sel;
    for (std::size_t idx = 0; idx < order.size() && sel.size() < p; ++idx) {
      Field z(len, cplx{});
      for (Eigen::Index i = 0; i < nb; ++i) axpy(y(i, order[idx]), basis[static_cast<std::size_t>(i)], z);
      if (orthonormalize_against(op, sel, z) > 1e-8) sel.push_back(std::move(z));
    }
    const auto ns = static_cast<Eigen::Index>(sel.size());
    std::vector<Field> ds(sel.size(), Field(len));
    for (std::size_t i = 0; i < sel.size(); ++i) op.apply(sel[i], ds[i]);
    CMatrix rr(ns, ns);
    for (Eigen::Index i = 0; i < ns; ++i)
      for (Eigen::Index j = 0; j < ns; ++j) rr(i, j) = op.inner(sel[static_cast<std::size_t>(i)], ds[static_cast<std::size_t>(j)]);
    rr = 0.5 * (rr + rr.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rr);

    std::vector<std::size_t> idx(static_cast<std::size_t>(ns));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const auto& ev = es.eigenvalues();
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) {
      return std::abs(ev(static_cast<Eigen::Index>(l))) < std::abs(ev(static_cast<Eigen::Index>(r)));
    });
    std::vector<Field> ritz;
    values.clear();
    residuals.clear();
    for (std::size_t col : idx) {
      Field z(len, cplx{}), dz(len, cplx{});
      for (Eigen::Index i = 0; i < ns; ++i) {
        const cplx coef = es.eigenvectors()(i, static_cast<Eigen::Index>(col));
        axpy(coef, sel[static_cast<std::size_t>(i)], z);
        axpy(coef, ds[static_cast<std::size_t>(i)], dz);
      }
      const double lambda = ev(static_cast<Eigen::Index>(col));
      const double zn = op.norm(z);
      for (cplx& e : z) e /= zn;
      for (cplx& e : dz) e /= zn;
      axpy(-lambda, z, dz);
      values.push_back(lambda);
      residuals.push_back(op.norm(dz));
      ritz.push_back(std::move(z));
    }
    bool done = values.size() >= ku;
    for (std::size_t i = 0; done && i < ku; ++i) done = residuals[i] <= options.eig_tol;
    if (done) {
      block = std::move(ritz);
      break;
    }
    if (restart + 1 == options.max_restarts) {
      std::ostringstream msg;
      msg << "eigensolver did not converge after " << options.max_restarts << " restarts; worst residual ";
      double worst = 0.0;
      for (std::size_t i = 0; i < std::min(ku, residuals.size()); ++i) worst = std::max(worst, residuals[i]);
      msg << worst << " (tol " << options.eig_tol << ")";
      fail(ErrorKind::NonConvergence, msg.str());
    }
    // Fill the block back up if the extraction lost rank.
    block = std::move(ritz);
    while (block.size() < p) {
      Field v(len);
      for (cplx& e : v) e = cplx(uniform(), uniform());
      if (orthonormalize_against(op, block, v) > 1e-8) block.push_back(std::move(v));
    }
  }

  // Order by |lambda|; inside a cluster of equal modulus, positive first.
  std::vector<std::size_t> order(ku);
  for (std::size_t i = 0; i < ku; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return std::abs(values[l]) < std::abs(values[r]); });
  for (std::size_t lo = 0; lo < ku;) {
    std::size_t hi = lo + 1;
    while (hi < ku && std::abs(values[order[hi]]) - std::abs(values[order[hi - 1]]) <= report.cluster_tol) ++hi;
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](std::size_t l, std::size_t r) { return values[l] > values[r]; });
    lo = hi;
  }
  for (std::size_t i : order) {
    report.eigenvalues.push_back(values[i]);
    report.residuals.push_back(residuals[i]);
    report.eigenvectors.push_back(block[i]);
  }
  report.clusters = cluster_eigenvalues(report.eigenvalues, report.cluster_tol);
  report.gap = std::abs(report.eigenvalues.front());
  report.invertible = report.gap > options.gap_threshold;
  return report;
}

InvertibilityReport is_invertible(const DiracOperator& op, double gap_threshold, const EigenOptions& options) {
  if (gap_threshold <= 0.0) fail(ErrorKind::InvalidArgument, "gap threshold must be positive");
  EigenOptions o = options;
  o.gap_threshold = gap_threshold;
  const SpectrumReport r = low_spectrum(op, 1, o);
  return {r.invertible, r.gap};
}

void to_json(nlohmann::json& j, const SpectrumReport& r) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : r.clusters) clusters.push_back(c);
  j = nlohmann::json{{"eigenvalues", r.eigenvalues},
                     {"residuals", r.residuals},
                     {"multiplicity_clusters", clusters},
                     {"gap", r.gap},
                     {"invertible", r.invertible},
                     {"gap_threshold", r.gap_threshold},
                     {"cluster_tol", r.cluster_tol},
                     {"restarts", r.restarts},
                     {"inner_solves", r.inner_solves}};
}

}  // namespace massdirac

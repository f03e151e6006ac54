#include "massdirac/mass.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "massdirac/error.hpp"
#include "massdirac/fourier.hpp"

namespace massdirac {
namespace {

// Mean of e^{-i s u.e} over the unit sphere S^{n-1}:
// Gamma(n/2) (2/s)^{n/2-1} J_{n/2-1}(s).
double sphere_average(int n, double s) {
  if (s == 0.0) return 1.0;
  const double nu = 0.5 * n - 1.0;
  if (nu == 0.0) return std::cyl_bessel_j(0.0, s);
  if (s < 1e-6) return 1.0 - s * s / (2.0 * n);
  return std::tgamma(0.5 * n) * std::pow(2.0 / s, nu) * std::cyl_bessel_j(nu, s);
}

double spectral_norm(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(a);
  return svd.singularValues()(0);
}

nlohmann::json matrix_json(const CMatrix& a) {
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    std::vector<double> rr, ii;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      rr.push_back(a(r, c).real());
      ii.push_back(a(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  return {{"real", re}, {"imag", im}};
}

}  // namespace

double sphere_volume(int n) { return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n); }

SingularKernel::SingularKernel(int n) : n_(n), omega_(sphere_volume(n)) {
  if (n < 2) fail(ErrorKind::InvalidArgument, "dimension must be >= 2");
}

CMatrix SingularKernel::evaluate(const CliffordRep& clifford, std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_ || clifford.dimension() != n_)
    fail(ErrorKind::InvalidArgument, "point dimension mismatch");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  if (r2 == 0.0) fail(ErrorKind::InvalidArgument, "singular kernel is undefined at p");
  const double r = std::sqrt(r2);
  return clifford.vector_action(x) * (-1.0 / (omega_ * std::pow(r, n_)));
}

double source_density(const CutoffProfile& eta, int n, double r) {
  if (r <= eta.inner() || r >= eta.outer()) return 0.0;
  return -eta.radial_derivative(r) / (sphere_volume(n) * std::pow(r, n - 1));
}

double source_transform(const CutoffProfile& eta, int n, double s) {
  // rho_hat(s) = int_{r1}^{r2} -eta'(r) A_n(s r) dr, since rho r^{n-1} omega = -eta'.
  using boost::math::quadrature::gauss;
  return gauss<double, 64>::integrate(
      [&](double r) { return -eta.radial_derivative(r) * sphere_average(n, s * r); }, eta.inner(), eta.outer());
}

std::vector<cplx> green_source(const SpinorBundle& bundle, const CutoffProfile& eta, const CVector& psi0,
                               SourceMode mode) {
  const int n = bundle.dimension();
  const auto dim = static_cast<std::size_t>(bundle.spinor_dim());
  if (static_cast<std::size_t>(psi0.size()) != dim) fail(ErrorKind::InvalidArgument, "psi0 has the wrong dimension");
  std::vector<cplx> f(bundle.field_size(), cplx{});
  if (mode == SourceMode::Sampled) {
    const double cells = (eta.outer() - eta.inner()) / bundle.spacing();
    if (cells < 4.0) {
      std::ostringstream msg;
      msg << "cutoff annulus unresolved: " << cells << " grid cells across r2 - r1 (need 4)";
      fail(ErrorKind::AnnulusUnresolved, msg.str());
    }
    for (std::size_t node = 0; node < bundle.nodes(); ++node) {
      const double rho = source_density(eta, n, bundle.distance_to_base(node));
      if (rho == 0.0) continue;
      for (std::size_t c = 0; c < dim; ++c) f[node * dim + c] = rho * psi0(static_cast<Eigen::Index>(c));
    }
    return f;
  }
  // Band-limited projection: the grid coefficients of the continuous source.
  // The unpaired periodic Nyquist modes are left out so that the source keeps
  // the inversion symmetry of rho.
  auto shared = std::shared_ptr<const SpinorBundle>(&bundle, [](const SpinorBundle*) {});
  SpectralTransform transform(shared);
  FieldBuffer modes(bundle.field_size());
  std::vector<std::pair<double, double>> cache;
  const double inv_cell = 1.0 / bundle.cell_volume();
  for (std::size_t mode_index = 0; mode_index < bundle.nodes(); ++mode_index) {
    if (!bundle.symmetric_mode(mode_index)) continue;
    const double s = bundle.momentum_norm(mode_index);
    auto it = std::find_if(cache.begin(), cache.end(), [s](const auto& e) { return e.first == s; });
    double value;
    if (it == cache.end()) {
      value = source_transform(eta, n, s);
      cache.emplace_back(s, value);
    } else {
      value = it->second;
    }
    for (std::size_t c = 0; c < dim; ++c)
      modes.data()[mode_index * dim + c] = (value * inv_cell) * psi0(static_cast<Eigen::Index>(c));
  }
  transform.to_nodes(modes, f);
  return f;
}

GreenData green_regular_part(const DiracOperator& op, const CVector& psi0, const CutoffProfile& eta,
                             const GreenOptions& options) {
  const SpinorBundle& bundle = op.bundle();
  eta.check_within(op.metric().flat_region_radius);
  if (psi0.norm() == 0.0) fail(ErrorKind::InvalidArgument, "psi0 must be nonzero");
  const auto kernel = op.known_kernel_dimension();
  if (kernel && *kernel > 0) fail(ErrorKind::NotInvertible, "operator not invertible");

  const std::vector<cplx> f = green_source(bundle, eta, psi0, options.source);
  SolveResult r = solve(op, f, options.solver);

  GreenData out{psi0, std::move(r.solution), r.residual, r.iterations, r.converged, eta, 0.0};
  // Spectral smoothness: energy share of the outer third of the band.
  auto shared = std::shared_ptr<const SpinorBundle>(&bundle, [](const SpinorBundle*) {});
  SpectralTransform transform(shared);
  FieldBuffer modes(bundle.field_size());
  transform.to_modes(out.v_field, modes);
  const auto dim = static_cast<std::size_t>(bundle.spinor_dim());
  const double cut = bundle.points_per_axis() / 3.0;
  double total = 0.0, high = 0.0;
  for (std::size_t mode = 0; mode < bundle.nodes(); ++mode) {
    double e = 0.0;
    for (std::size_t c = 0; c < dim; ++c) e += std::norm(modes.data()[mode * dim + c]);
    total += e;
    const auto xi = bundle.momentum(mode);
    if (std::any_of(xi.begin(), xi.end(), [cut](double v) { return std::abs(v) > cut; })) high += e;
  }
  out.high_band_fraction = total > 0.0 ? std::sqrt(high / total) : 0.0;
  return out;
}

MassEndomorphism mass_endomorphism(const DiracOperator& op, const CutoffProfile& eta, const GreenOptions& options) {
  const SpinorBundle& bundle = op.bundle();
  const int dim = bundle.spinor_dim();
  auto shared = std::shared_ptr<const SpinorBundle>(&bundle, [](const SpinorBundle*) {});
  SpectralTransform transform(shared);
  const std::vector<double> origin(static_cast<std::size_t>(bundle.dimension()), 0.0);

  MassEndomorphism m;
  m.alpha = CMatrix::Zero(dim, dim);
  m.alpha_node = CMatrix::Zero(dim, dim);
  std::vector<std::vector<cplx>> sources;
  for (int c = 0; c < dim; ++c) {
    CVector e = CVector::Zero(dim);
    e(c) = 1.0;
    sources.push_back(green_source(bundle, eta, e, options.source));
  }
  m.converged = true;
  m.points_per_axis = bundle.points_per_axis();
  m.r1 = eta.inner();
  m.r2 = eta.outer();
  for (int j = 0; j < dim; ++j) {
    CVector psi0 = CVector::Zero(dim);
    psi0(j) = 1.0;
    const GreenData g = green_regular_part(op, psi0, eta, options);
    if (!g.converged) {
      std::ostringstream msg;
      msg << "Green's function solve for column " << j << " did not converge (residual " << g.rhs_residual << ")";
      fail(ErrorKind::NonConvergence, msg.str());
    }
    // p is node 0.
    for (int c = 0; c < dim; ++c) {
      m.alpha_node(c, j) = g.v_field[static_cast<std::size_t>(c)];
      m.alpha(c, j) = op.inner(sources[static_cast<std::size_t>(c)], g.v_field);
    }
    const CVector interp = transform.interpolate(g.v_field, origin);
    m.interpolation_deviation = std::max(m.interpolation_deviation, (interp - m.alpha_node.col(j)).norm());
    m.residuals.push_back(g.rhs_residual);
    m.iterations.push_back(g.iterations);
    m.high_band_fraction = std::max(m.high_band_fraction, g.high_band_fraction);
  }
  m.hermitian_deviation = spectral_norm(m.alpha - m.alpha.adjoint());
  m.node_read_deviation = spectral_norm(m.alpha - m.alpha_node);
  const CMatrix w = bundle.clifford().volume_element();
  m.inversion_deviation = spectral_norm(m.alpha - w * m.alpha * w.inverse());
  return m;
}

MassSpectrum mass_spectrum(const CMatrix& alpha) {
  MassSpectrum s;
  if (alpha.size() == 0) return s;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const cplx v = alpha.data()[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) fail(ErrorKind::InvalidArgument, "alpha is not finite");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (alpha + alpha.adjoint()));
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) s.eigenvalues.push_back(es.eigenvalues()(i));
  std::stable_sort(s.eigenvalues.begin(), s.eigenvalues.end(),
                   [](double a, double b) { return std::abs(a) > std::abs(b); });
  s.norm = spectral_norm(alpha);
  return s;
}

void to_json(nlohmann::json& j, const MassEndomorphism& m) {
  const MassSpectrum s = mass_spectrum(m.alpha);
  j = nlohmann::json{{"alpha", matrix_json(m.alpha)},
                     {"alpha_node", matrix_json(m.alpha_node)},
                     {"norm", s.norm},
                     {"hermitian_eigenvalues", s.eigenvalues},
                     {"hermitian_deviation", m.hermitian_deviation},
                     {"residuals", m.residuals},
                     {"iterations", m.iterations},
                     {"interpolation_deviation", m.interpolation_deviation},
                     {"node_read_deviation", m.node_read_deviation},
                     {"inversion_deviation", m.inversion_deviation},
                     {"high_band_fraction", m.high_band_fraction},
                     {"grid", {{"points_per_axis", m.points_per_axis}}},
                     {"cutoff", {{"r1", m.r1}, {"r2", m.r2}}}};
}

}  // namespace massdirac

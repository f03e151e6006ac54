#include "massdirac/torus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "massdirac/error.hpp"

namespace massdirac {

void TorusSpec::validate() const {
  if (n < 2) fail(ErrorKind::InvalidArgument, "torus dimension must be >= 2");
  if (static_cast<int>(delta.size()) != n) fail(ErrorKind::InvalidArgument, "spin structure vector must have n entries");
  for (int d : delta)
    if (d != 0 && d != 1) fail(ErrorKind::InvalidArgument, "spin structure entries must be 0 or 1");
}

void GridSpec::validate() const {
  if (points_per_axis < 8 || points_per_axis % 2 != 0)
    fail(ErrorKind::InvalidArgument, "points per axis must be even and >= 8, got " + std::to_string(points_per_axis));
}

SpinorBundle::SpinorBundle(TorusSpec torus, GridSpec grid)
    : torus_(std::move(torus)), grid_(grid), clifford_((torus_.validate(), grid_.validate(), CliffordRep::build(torus_.n))) {
  const int n = torus_.n;
  const int m = grid_.points_per_axis;
  nodes_ = 1;
  for (int j = 0; j < n; ++j) nodes_ *= static_cast<std::size_t>(m);
  spacing_ = 2.0 * kPi / m;
  cell_volume_ = std::pow(spacing_, n);

  coords_.resize(nodes_ * static_cast<std::size_t>(n));
  momenta_.resize(nodes_ * static_cast<std::size_t>(n));
  kindex_.resize(nodes_ * static_cast<std::size_t>(n));
  phase_.resize(nodes_);
  inv_phase_.resize(nodes_);
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (std::size_t node = 0; node < nodes_; ++node) {
    std::size_t rem = node;
    for (int j = n - 1; j >= 0; --j) {
      idx[static_cast<std::size_t>(j)] = static_cast<int>(rem % static_cast<std::size_t>(m));
      rem /= static_cast<std::size_t>(m);
    }
    double arg = 0.0;
    for (int j = 0; j < n; ++j) {
      const int i = idx[static_cast<std::size_t>(j)];
      const int k = i < m / 2 ? i : i - m;
      const std::size_t at = node * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
      coords_[at] = spacing_ * k;
      kindex_[at] = k;
      momenta_[at] = k + 0.5 * torus_.delta[static_cast<std::size_t>(j)];
      arg += 0.5 * torus_.delta[static_cast<std::size_t>(j)] * coords_[at];
    }
    phase_[node] = {std::cos(arg), std::sin(arg)};
    inv_phase_[node] = std::conj(phase_[node]);
  }
}

double SpinorBundle::momentum_norm(std::size_t mode) const {
  double s = 0.0;
  for (double x : momentum(mode)) s += x * x;
  return std::sqrt(s);
}

bool SpinorBundle::symmetric_mode(std::size_t mode) const {
  const int n = torus_.n;
  const int m = grid_.points_per_axis;
  for (int j = 0; j < n; ++j) {
    const std::size_t at = mode * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
    if (torus_.delta[static_cast<std::size_t>(j)] == 0 && kindex_[at] == -m / 2) return false;
  }
  return true;
}

double SpinorBundle::distance_to_base(std::size_t node) const {
  double s = 0.0;
  for (double x : coordinates(node)) s += x * x;
  return std::sqrt(s);
}

std::size_t SpinorBundle::zero_modes() const {
  return std::all_of(torus_.delta.begin(), torus_.delta.end(), [](int d) { return d == 0; }) ? 1 : 0;
}

std::shared_ptr<const SpinorBundle> make_flat_torus(const TorusSpec& torus, const GridSpec& grid) {
  return std::make_shared<const SpinorBundle>(torus, grid);
}

// --- cutoff ---------------------------------------------------------------

CutoffProfile::CutoffProfile(double r1, double r2) : r1_(r1), r2_(r2) {
  if (!(r1 > 0.0 && r2 > r1)) fail(ErrorKind::InvalidArgument, "cutoff radii must satisfy 0 < r1 < r2");
}

double CutoffProfile::value(double r) const {
  if (r <= r1_) return 1.0;
  if (r >= r2_) return 0.0;
  const double s = (r - r1_) / (r2_ - r1_);
  return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double CutoffProfile::radial_derivative(double r) const {
  if (r <= r1_ || r >= r2_) return 0.0;
  const double s = (r - r1_) / (r2_ - r1_);
  return -30.0 * s * s * (1.0 - s) * (1.0 - s) / (r2_ - r1_);
}

double CutoffProfile::max_gradient_on(const SpinorBundle& bundle) const {
  double g = 0.0;
  for (std::size_t node = 0; node < bundle.nodes(); ++node)
    g = std::max(g, std::abs(radial_derivative(bundle.distance_to_base(node))));
  return g;
}

void CutoffProfile::check_within(double flat_radius) const {
  if (r2_ >= flat_radius)
    fail(ErrorKind::SupportViolation, "cutoff support B(p, r2) must lie inside U = B(p, " + std::to_string(flat_radius) + ")");
}

// --- metric fields --------------------------------------------------------

RMatrix MetricField::at(std::size_t node) const {
  RMatrix h(n, n);
  const double* v = values.data() + node * static_cast<std::size_t>(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = v[i * n + j];
  return h;
}

RMatrix MetricField::derivative(std::size_t node, int k) const {
  RMatrix d(n, n);
  const double* v = derivatives.data() + node * static_cast<std::size_t>(n * n * n) + static_cast<std::size_t>(k * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = v[i * n + j];
  return d;
}

bool MetricField::is_identity(std::size_t node) const {
  const double* v = values.data() + node * static_cast<std::size_t>(n * n);
  const double* d = derivatives.data() + node * static_cast<std::size_t>(n * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (v[i * n + j] != (i == j ? 1.0 : 0.0)) return false;
  for (int i = 0; i < n * n * n; ++i)
    if (d[i] != 0.0) return false;
  return true;
}

bool MetricField::is_flat() const {
  for (std::size_t node = 0; node < nodes; ++node)
    if (!is_identity(node)) return false;
  return true;
}

double MetricField::min_eigenvalue() const {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < nodes; ++node) {
    if (is_identity(node)) {
      lo = std::min(lo, 1.0);
      continue;
    }
    Eigen::SelfAdjointEigenSolver<RMatrix> es(at(node), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()(0));
  }
  return lo;
}

MetricField sample_metric(const SpinorBundle& bundle, const PointwiseMetric& metric, double flat_radius) {
  const int n = bundle.dimension();
  const auto nn = static_cast<std::size_t>(n * n);
  MetricField f;
  f.n = n;
  f.nodes = bundle.nodes();
  f.flat_region_radius = flat_radius;
  f.values.assign(f.nodes * nn, 0.0);
  f.derivatives.assign(f.nodes * nn * static_cast<std::size_t>(n), 0.0);
  for (std::size_t node = 0; node < f.nodes; ++node) {
    std::span<double> h{f.values.data() + node * nn, nn};
    std::span<double> dh{f.derivatives.data() + node * nn * static_cast<std::size_t>(n), nn * static_cast<std::size_t>(n)};
    const bool in_u = flat_radius >= 0.0 && bundle.distance_to_base(node) <= flat_radius;
    metric(bundle.coordinates(node), h, dh);
    if (in_u) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double want = i == j ? 1.0 : 0.0;
          if (std::abs(h[static_cast<std::size_t>(i * n + j)] - want) > 0.0)
            fail(ErrorKind::SupportViolation, "metric differs from the flat metric inside U");
        }
      for (double d : dh)
        if (d != 0.0) fail(ErrorKind::SupportViolation, "metric derivative nonzero inside U");
      // canonical bit pattern (no -0.0) on U
      std::fill(h.begin(), h.end(), 0.0);
      for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i * n + i)] = 1.0;
      std::fill(dh.begin(), dh.end(), 0.0);
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (h[static_cast<std::size_t>(i * n + j)] != h[static_cast<std::size_t>(j * n + i)])
          fail(ErrorKind::InvalidArgument, "metric is not symmetric");
  }
  if (!(f.min_eigenvalue() > 0.0)) fail(ErrorKind::NotPositiveDefinite, "metric is not positive definite on the grid");
  return f;
}

MetricField flat_metric(const SpinorBundle& bundle, double flat_radius) {
  const int n = bundle.dimension();
  return sample_metric(
      bundle,
      [n](std::span<const double>, std::span<double> h, std::span<double> dh) {
        std::fill(h.begin(), h.end(), 0.0);
        for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i * n + i)] = 1.0;
        std::fill(dh.begin(), dh.end(), 0.0);
      },
      flat_radius);
}

// --- bump perturbations ---------------------------------------------------

namespace {

// Platform-independent uniform double in [0, 1) from the 64-bit Mersenne twister.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

constexpr int kTermsPerEntry = 1;

}  // namespace

BumpPerturbation::BumpPerturbation(int n, double amplitude, std::uint64_t seed, double r_inner, double r_outer)
    : n_(n), amplitude_(amplitude), seed_(seed), r_inner_(r_inner), r_outer_(r_outer) {
  if (n < 2) fail(ErrorKind::InvalidArgument, "bump dimension must be >= 2");
  if (!(r_inner > 0.0 && r_outer > r_inner && r_outer < kPi))
    fail(ErrorKind::InvalidArgument, "bump annulus must satisfy 0 < r_inner < r_outer < pi");
  std::mt19937_64 rng(seed);
  // |M_ij| <= 1/n entrywise, hence |M|_op <= 1 (Gershgorin). Coefficients
  // take the full magnitude with a random sign.
  const double scale = 1.0 / (kTermsPerEntry * n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int l = 0; l < kTermsPerEntry; ++l) {
        const double sign = unit_uniform(rng) < 0.5 ? -1.0 : 1.0;
        Term term{i, j, scale * sign, std::vector<double>(static_cast<std::size_t>(n)), 0.0};
        for (auto& w : term.wave) w = static_cast<double>(static_cast<int>(rng() % 3U) - 1);
        term.shift = 2.0 * kPi * unit_uniform(rng);
        terms_.push_back(std::move(term));
      }
}

bool BumpPerturbation::accumulate(std::span<const double> x, double coeff, std::span<double> h,
                                  std::span<double> dh) const {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double r = std::sqrt(r2);
  if (r <= r_inner_ || r >= r_outer_) return false;
  const double c = 0.5 * (r_inner_ + r_outer_);
  const double w = 0.5 * (r_outer_ - r_inner_);
  const double u = (r - c) / w;
  const double q = 1.0 - u * u;
  const double beta = std::exp(1.0 - 1.0 / q);
  const double dbeta = beta * (-2.0 * u / (q * q)) / w;
  const int n = n_;
  const double a = coeff * amplitude_;
  for (const Term& term : terms_) {
    double phase = term.shift;
    for (int k = 0; k < n; ++k) phase += term.wave[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
    const double cv = term.coeff * std::cos(phase);
    const double sv = term.coeff * std::sin(phase);
    const double val = a * beta * cv;
    h[static_cast<std::size_t>(term.i * n + term.j)] += val;
    if (term.i != term.j) h[static_cast<std::size_t>(term.j * n + term.i)] += val;
    for (int k = 0; k < n; ++k) {
      const double d = a * (dbeta * x[static_cast<std::size_t>(k)] / r * cv - beta * term.wave[static_cast<std::size_t>(k)] * sv);
      dh[static_cast<std::size_t>(k * n * n + term.i * n + term.j)] += d;
      if (term.i != term.j) dh[static_cast<std::size_t>(k * n * n + term.j * n + term.i)] += d;
    }
  }
  return true;
}

PointwiseMetric affine_metric(int n, std::vector<std::pair<double, BumpPerturbation>> terms) {
  for (const auto& [c, b] : terms) {
    (void)c;
    if (b.dimension() != n) fail(ErrorKind::InvalidArgument, "perturbation dimension mismatch");
  }
  return [n, terms = std::move(terms)](std::span<const double> x, std::span<double> h, std::span<double> dh) {
    std::fill(h.begin(), h.end(), 0.0);
    std::fill(dh.begin(), dh.end(), 0.0);
    for (const auto& [c, b] : terms)
      if (c != 0.0) b.accumulate(x, c, h, dh);
    for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i * n + i)] += 1.0;
  };
}

MetricFamily::MetricFamily(std::shared_ptr<const SpinorBundle> bundle, BumpPerturbation bump, double flat_radius)
    : bundle_(std::move(bundle)), bump_(std::move(bump)), flat_radius_(flat_radius) {
  if (bump_.r_inner() <= flat_radius_)
    fail(ErrorKind::SupportViolation, "perturbation support reaches into U");
}

PointwiseMetric MetricFamily::pointwise(double t) const { return affine_metric(bump_.dimension(), {{t, bump_}}); }

MetricField MetricFamily::at(double t) const { return sample_metric(*bundle_, pointwise(t), flat_radius_); }

MetricFamily standard_family(std::shared_ptr<const SpinorBundle> bundle, double amplitude, std::uint64_t shape_seed,
                             double flat_radius) {
  MetricFamily fam(bundle, BumpPerturbation(bundle->dimension(), amplitude, shape_seed, kFamilyInner, kFamilyOuter),
                   flat_radius);
  try {
    (void)fam.at(1.0);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotPositiveDefinite)
      fail(ErrorKind::NotPositiveDefinite, "amplitude " + std::to_string(amplitude) + " makes Id + B indefinite");
    throw;
  }
  return fam;
}

// --- Levi-Civita ----------------------------------------------------------

std::vector<double> christoffel(const MetricField& h) {
  const int n = h.n;
  const auto n3 = static_cast<std::size_t>(n * n * n);
  std::vector<double> gamma(h.nodes * n3, 0.0);
  for (std::size_t node = 0; node < h.nodes; ++node) {
    if (h.is_identity(node)) continue;
    const RMatrix hm = h.at(node);
    Eigen::LDLT<RMatrix> ldlt(hm);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
      fail(ErrorKind::NotPositiveDefinite, "singular metric at node " + std::to_string(node));
    const RMatrix hinv = ldlt.solve(RMatrix::Identity(n, n));
    const double* d = h.derivatives.data() + node * n3;
    auto dh = [&](int k, int i, int j) { return d[k * n * n + i * n + j]; };
    double* g = gamma.data() + node * n3;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) s += hinv(k, l) * (dh(i, j, l) + dh(j, i, l) - dh(l, i, j));
          g[k * n * n + i * n + j] = 0.5 * s;
          g[k * n * n + j * n + i] = 0.5 * s;
        }
      }
  }
  return gamma;
}

}  // namespace massdirac

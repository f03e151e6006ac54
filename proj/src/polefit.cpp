#include "massdirac/polefit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "massdirac/error.hpp"

namespace massdirac {
namespace {

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<std::complex<double>> polynomial_roots(std::vector<double> c) {
  while (!c.empty() && c.back() == 0.0) c.pop_back();
  std::vector<std::complex<double>> roots;
  const int deg = static_cast<int>(c.size()) - 1;
  if (deg < 1) return roots;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -c[static_cast<std::size_t>(i)] / c.back();
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  for (int i = 0; i < deg; ++i) roots.push_back(es.eigenvalues()(i));
  std::sort(roots.begin(), roots.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return roots;
}

double relative_misfit(const RationalFit& f, const std::vector<double>& t, const std::vector<double>& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = (f(t[i]) - y[i]) / y[i];
    acc += std::isfinite(e) ? e * e : std::numeric_limits<double>::infinity();
  }
  return std::sqrt(acc / static_cast<double>(t.size()));
}

}  // namespace

double RationalFit::operator()(double t) const {
  const double x = (t - center) / half_span;
  return y_scale * horner(p, x) / horner(q, x);
}

RationalFit fit_rational(const std::vector<double>& t, const std::vector<double>& y, int num_degree, int den_degree) {
  if (t.size() != y.size() || t.empty()) fail(ErrorKind::InvalidArgument, "sample vectors must be nonempty and of equal length");
  if (num_degree < 0 || den_degree < 0) fail(ErrorKind::InvalidArgument, "degrees must be nonnegative");
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  RationalFit f;
  f.center = 0.5 * (*lo + *hi);
  f.half_span = *hi > *lo ? 0.5 * (*hi - *lo) : 1.0;
  f.y_scale = 0.0;
  for (double v : y) f.y_scale = std::max(f.y_scale, std::abs(v));
  if (f.y_scale == 0.0) f.y_scale = 1.0;

  const int np = num_degree + 1;
  const int nq = den_degree + 1;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(t.size()), np + nq);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double x = (t[i] - f.center) / f.half_span;
    const double yi = y[i] / f.y_scale;
    const double w = yi != 0.0 ? 1.0 / std::abs(yi) : 1.0;
    double pw = 1.0;
    for (int k = 0; k < std::max(np, nq); ++k) {
      if (k < np) a(static_cast<Eigen::Index>(i), k) = w * pw;
      if (k < nq) a(static_cast<Eigen::Index>(i), np + k) = -w * yi * pw;
      pw *= x;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  Eigen::VectorXd c = svd.matrixV().col(a.cols() - 1);
  // Fix the sign so that Q is positive at the center of the range.
  if (c(np) < 0.0) c = -c;
  f.p.assign(c.data(), c.data() + np);
  f.q.assign(c.data() + np, c.data() + np + nq);
  return f;
}

PoleReport pole_fit(const std::vector<double>& t, const std::vector<double>& y, const PoleFitOptions& options) {
  if (t.size() != y.size()) fail(ErrorKind::InvalidArgument, "sample vectors differ in length");
  if (t.size() < 6) fail(ErrorKind::InvalidArgument, "pole fit needs at least 6 samples");
  {
    std::vector<double> s = t;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) fail(ErrorKind::InvalidArgument, "sample t values must be distinct");
  }
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i]) || !std::isfinite(y[i]) || y[i] == 0.0)
      fail(ErrorKind::InvalidArgument, "samples must be finite with nonzero values");

  const std::size_t count = t.size();
  struct Candidate {
    int p, q;
    double score;
  };
  std::vector<Candidate> candidates;
  for (int q = 0; q <= options.max_denominator_degree; ++q)
    for (int p = 0; p <= options.max_numerator_degree; ++p) {
      // Leave-one-out needs count - 1 equations for p + q + 1 free coefficients.
      if (static_cast<std::size_t>(p + q + 2) > count - 1) continue;
      double acc = 0.0;
      for (std::size_t leave = 0; leave < count; ++leave) {
        std::vector<double> tt, yy;
        for (std::size_t i = 0; i < count; ++i)
          if (i != leave) {
            tt.push_back(t[i]);
            yy.push_back(y[i]);
          }
        const RationalFit f = fit_rational(tt, yy, p, q);
        const double e = (f(t[leave]) - y[leave]) / y[leave];
        acc += std::isfinite(e) ? e * e : std::numeric_limits<double>::infinity();
      }
      candidates.push_back({p, q, std::sqrt(acc / static_cast<double>(count))});
    }
  if (candidates.empty()) fail(ErrorKind::InvalidArgument, "not enough samples for any degree pair");

  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best = std::min(best, c.score);
  const double cut = std::max(best * options.tie_factor, options.tie_floor);
  const Candidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (!(c.score <= cut)) continue;
    if (chosen == nullptr || c.p + c.q < chosen->p + chosen->q ||
        (c.p + c.q == chosen->p + chosen->q && c.score < chosen->score))
      chosen = &c;
  }
  if (chosen == nullptr) fail(ErrorKind::InvalidArgument, "rational fit failed on every degree pair");

  const RationalFit fit = fit_rational(t, y, chosen->p, chosen->q);
  PoleReport r;
  r.numerator_degree = chosen->p;
  r.denominator_degree = chosen->q;
  r.cv_score = chosen->score;
  r.residual = relative_misfit(fit, t, y);
  for (const auto& z : polynomial_roots(fit.q)) r.denominator_roots.push_back(fit.center + fit.half_span * z);

  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  const double span = *hi - *lo;
  auto distance_to_range = [&](std::complex<double> z) {
    const double dx = z.real() < *lo ? *lo - z.real() : (z.real() > *hi ? z.real() - *hi : 0.0);
    return std::hypot(dx, z.imag());
  };
  if (r.denominator_roots.empty()) {
    r.message = "no pole detected";
    return r;
  }
  const auto nearest = *std::min_element(r.denominator_roots.begin(), r.denominator_roots.end(),
                                         [&](auto a, auto b) { return distance_to_range(a) < distance_to_range(b); });
  const double radius = options.cluster_radius * span;
  std::complex<double> sum = 0.0;
  int order = 0;
  for (const auto& z : r.denominator_roots)
    if (std::abs(z - nearest) <= radius) {
      sum += z;
      ++order;
    }
  const std::complex<double> center = sum / static_cast<double>(order);
  if (std::abs(center.imag()) > radius || distance_to_range(center) > options.max_pole_distance * span) {
    r.message = "no pole detected";
    return r;
  }
  r.detected = true;
  r.location = center.real();
  r.order = order;
  r.message = "pole detected";
  return r;
}

void to_json(nlohmann::json& j, const PoleReport& r) {
  nlohmann::json roots = nlohmann::json::array();
  for (const auto& z : r.denominator_roots) roots.push_back({z.real(), z.imag()});
  j = nlohmann::json{{"detected", r.detected},
                     {"location", r.detected ? nlohmann::json(r.location) : nlohmann::json(nullptr)},
                     {"order", r.detected ? nlohmann::json(r.order) : nlohmann::json(nullptr)},
                     {"residual", r.residual},
                     {"numerator_degree", r.numerator_degree},
                     {"denominator_degree", r.denominator_degree},
                     {"cv_score", r.cv_score},
                     {"denominator_roots", roots},
                     {"message", r.message}};
}

}  // namespace massdirac

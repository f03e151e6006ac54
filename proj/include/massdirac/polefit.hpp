#pragma once

// Rational least-squares fits y(t) ~ P(t)/Q(t) and pole detection.
//
// The fit is linearized (minimize sum w_i^2 |P(t_i) - y_i Q(t_i)|^2 with
// w_i = 1/|y_i| and a unit-norm coefficient vector, solved by SVD) after
// mapping the sample range onto [-1, 1] and normalizing y. Degrees are
// picked by leave-one-out cross-validation; near-ties go to the smaller
// total degree.

#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

namespace massdirac {

struct PoleFitOptions {
  int max_numerator_degree = 3;
  int max_denominator_degree = 3;
  double tie_factor = 1.5;        // scores within this factor of the best count as tied
  double tie_floor = 1e-9;        // scores below this are treated as exact
  double cluster_radius = 0.1;    // root clustering, in units of the sample span
  double max_pole_distance = 1.0; // poles farther than this many spans from the samples are ignored
};

struct PoleReport {
  bool detected = false;
  double location = 0.0;
  int order = 0;
  double residual = 0.0;  // relative RMS misfit of the chosen fit on all samples
  int numerator_degree = 0;
  int denominator_degree = 0;
  double cv_score = 0.0;
  std::vector<std::complex<double>> denominator_roots;
  std::string message;
};

struct RationalFit {
  std::vector<double> p;  // coefficients in the scaled variable, ascending
  std::vector<double> q;
  double center = 0.0;
  double half_span = 1.0;
  double y_scale = 1.0;

  double operator()(double t) const;
};

RationalFit fit_rational(const std::vector<double>& t, const std::vector<double>& y, int num_degree, int den_degree);

// Requires at least 6 samples at distinct t.
PoleReport pole_fit(const std::vector<double>& t, const std::vector<double>& y, const PoleFitOptions& options = {});

void to_json(nlohmann::json& j, const PoleReport& r);

}  // namespace massdirac

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "massdirac/error.hpp"
#include "massdirac/experiment.hpp"

using namespace massdirac;

namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

int failures = 0;

void criterion(int id, double limit_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.require(secs < limit_seconds, "runtime " + num(secs) + " s < " + num(limit_seconds) + " s");
  if (!out.pass) ++failures;
  std::printf("criterion %2d: %s  %s\n", id, out.pass ? "PASS" : "FAIL", out.detail.c_str());
  std::fflush(stdout);
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "massdirac_acceptance";
  fs::create_directories(dir);
  return dir;
}

using Table = std::map<std::string, std::vector<std::string>>;

Table parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  Table table;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (const auto& h : header) {
      std::getline(ss, cell, ',');
      table[h].push_back(cell);
    }
  }
  return table;
}

double as_double(const std::string& s) { return s == "NA" ? std::nan("") : std::stod(s); }

std::vector<cplx> random_field(std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<cplx> v(len);
  for (auto& x : v) x = {nd(rng), nd(rng)};
  return v;
}

// Smooth field: a few low Fourier modes per spinor component.
std::vector<cplx> smooth_field(const SpinorBundle& bundle, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const auto dim = static_cast<std::size_t>(bundle.spinor_dim());
  std::vector<cplx> f(bundle.field_size());
  for (int term = 0; term < 6; ++term) {
    std::vector<double> k(static_cast<std::size_t>(bundle.dimension()));
    for (auto& v : k) v = static_cast<double>(static_cast<int>(rng() % 5U) - 2);
    std::vector<cplx> amp(dim);
    for (auto& a : amp) a = {nd(rng), nd(rng)};
    for (std::size_t node = 0; node < bundle.nodes(); ++node) {
      const auto x = bundle.coordinates(node);
      double phase = 0.0;
      for (std::size_t j = 0; j < k.size(); ++j) phase += k[j] * x[j];
      const cplx e = std::polar(1.0, phase) * bundle.phase()[node];
      for (std::size_t c = 0; c < dim; ++c) f[node * dim + c] += amp[c] * e;
    }
  }
  return f;
}

double diff_norm(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

double plain_norm(const std::vector<cplx>& a) {
  double s = 0.0;
  for (const auto& x : a) s += std::norm(x);
  return std::sqrt(s);
}

// Flat Dirac spectrum by enumeration: +-|xi| with multiplicity N/2 per grid mode.
std::vector<double> flat_oracle(const SpinorBundle& bundle) {
  std::vector<double> values;
  const int half = bundle.spinor_dim() / 2;
  for (std::size_t mode = 0; mode < bundle.nodes(); ++mode) {
    const double s = bundle.momentum_norm(mode);
    for (int i = 0; i < half; ++i) {
      values.push_back(s);
      values.push_back(-s);
    }
  }
  std::sort(values.begin(), values.end(), [](double a, double b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a > b;
  });
  return values;
}

// Sorted-by-modulus spectra compared entrywise in modulus, plus a sign
// check against any entry of the reference (equal moduli may come in either
// order).
double spectrum_distance(const std::vector<double>& got, const std::vector<double>& want) {
  double err = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    double nearest = 1e300;
    for (double w : want) nearest = std::min(nearest, std::abs(got[i] - w));
    err = std::max({err, std::abs(std::abs(got[i]) - std::abs(want[i])), nearest});
  }
  return err;
}

ExperimentConfig base_config(std::vector<int> delta, int m) {
  ExperimentConfig c;
  c.family.n = static_cast<int>(delta.size());
  c.family.delta = std::move(delta);
  c.family.m = m;
  c.output_path = (work_dir() / "run").string();
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  criterion(1, 1.0, [] {
    Outcome o;
    double worst = 0.0;
    for (int n = 2; n <= 8; ++n) {
      const CliffordRep c = CliffordRep::build(n);
      const auto dim = c.spinor_dim();
      const CMatrix id = CMatrix::Identity(dim, dim);
      for (int i = 0; i < n; ++i) {
        worst = std::max(worst, (c.gamma(i).adjoint() + c.gamma(i)).cwiseAbs().maxCoeff());
        for (int j = 0; j < n; ++j) {
          const CMatrix r = c.gamma(i) * c.gamma(j) + c.gamma(j) * c.gamma(i) + (i == j ? 2.0 : 0.0) * id;
          worst = std::max(worst, r.cwiseAbs().maxCoeff());
        }
      }
    }
    o.require(worst <= 1e-14, "n=2..8 max entry error " + num(worst));
    return o;
  });

  criterion(2, 30.0, [] {
    Outcome o;
    for (const auto& delta : {std::vector<int>{1, 0}, std::vector<int>{1, 1, 1}}) {
      auto bundle = make_flat_torus(TorusSpec{static_cast<int>(delta.size()), delta}, GridSpec{8});
      const auto op = assemble_bg_dirac(bundle, flat_metric(*bundle, kFlatRadius));
      const SpectrumReport r = low_spectrum(*op, 8);
      const auto oracle = flat_oracle(*bundle);
      const double err = spectrum_distance(r.eigenvalues, oracle);
      o.require(err <= 1e-10, "T^" + std::to_string(delta.size()) + " oracle error " + num(err));
    }
    for (int n : {2, 3}) {
      auto bundle = make_flat_torus(TorusSpec{n, std::vector<int>(static_cast<std::size_t>(n), 0)}, GridSpec{8});
      const auto op = assemble_bg_dirac(bundle, flat_metric(*bundle, kFlatRadius));
      const std::size_t want = std::size_t{1} << (n / 2);
      const SpectrumReport r = low_spectrum(*op, static_cast<int>(want) + 2);
      std::size_t zero = 0;
      for (double v : r.eigenvalues) zero += std::abs(v) < 1e-10 ? 1 : 0;
      o.require(zero == want && op->known_kernel_dimension() == want,
                "T^" + std::to_string(n) + " delta=0 kernel " + std::to_string(zero) + " (want " + std::to_string(want) + ")");
    }
    return o;
  });

  criterion(3, 60.0, [] {
    Outcome o;
    auto bundle = make_flat_torus(TorusSpec{3, {1, 1, 1}}, GridSpec{12});
    const auto flat = assemble_bg_dirac(bundle, flat_metric(*bundle, kFlatRadius));
    double identity = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto phi = smooth_field(*bundle, seed);
      std::vector<cplx> a(phi.size()), b(phi.size());
      flat->apply(phi, a);
      flat->background_apply(phi, b);
      identity = std::max(identity, diff_norm(a, b) / plain_norm(b));
    }
    o.require(identity <= 1e-12, "D^g_g vs D^g relative " + num(identity));

    auto small = make_flat_torus(TorusSpec{3, {1, 1, 1}}, GridSpec{8});
    const PointwiseMetric four = [](std::span<const double>, std::span<double> h, std::span<double> dh) {
      std::fill(h.begin(), h.end(), 0.0);
      std::fill(dh.begin(), dh.end(), 0.0);
      for (int i = 0; i < 3; ++i) h[static_cast<std::size_t>(4 * i)] = 4.0;
    };
    const auto scaled = assemble_bg_dirac(small, sample_metric(*small, four, -1.0));
    const auto unit = assemble_bg_dirac(small, flat_metric(*small, kFlatRadius));
    const SpectrumReport rs = low_spectrum(*scaled, 8), ru = low_spectrum(*unit, 8);
    std::vector<double> half = ru.eigenvalues;
    for (auto& v : half) v *= 0.5;
    const double halving = spectrum_distance(rs.eigenvalues, half);
    o.require(halving <= 1e-9, "h = 4g halving error " + num(halving));

    const MetricFamily family = standard_family(bundle, 1.2, 1);
    const auto phi = random_field(bundle->field_size(), 11);
    std::vector<cplx> base(phi.size()), out(phi.size());
    flat->apply(phi, base);
    std::vector<double> slopes;
    for (double t : {0.2, 0.1, 0.05}) {
      assemble_bg_dirac(bundle, family.at(t))->apply(phi, out);
      slopes.push_back(diff_norm(out, base) / t);
    }
    const double spread = *std::max_element(slopes.begin(), slopes.end()) / *std::min_element(slopes.begin(), slopes.end());
    o.require(spread <= 1.1, "|(D^h(t)_g - D^g) phi| / t spread " + num(spread) + " (" + num(slopes[0]) + ", " +
                                 num(slopes[1]) + ", " + num(slopes[2]) + ")");
    return o;
  });

  criterion(4, 10.0, [] {
    Outcome o;
    auto bundle = make_flat_torus(TorusSpec{2, {1, 0}}, GridSpec{8});
    const auto op = assemble_bg_dirac(bundle, standard_family(bundle, 0.9, 1).at(0.5));
    const CMatrix dense = op->dense();
    const auto rhs = random_field(op->size(), 5);
    const SolveResult s = solve(*op, rhs);
    const CVector b = Eigen::Map<const CVector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    const CVector x = dense.partialPivLu().solve(b);
    const CVector got = Eigen::Map<const CVector>(s.solution.data(), static_cast<Eigen::Index>(s.solution.size()));
    const double solve_err = (got - x).norm() / x.norm();
    o.require(solve_err <= 1e-8, "solve vs LU relative " + num(solve_err));

    Eigen::ComplexEigenSolver<CMatrix> es(dense, false);
    std::vector<double> ev;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ev.push_back(es.eigenvalues()(i).real());
    std::sort(ev.begin(), ev.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    const SpectrumReport r = low_spectrum(*op, 8);
    double eig_err = 0.0;
    for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
      // match against the nearest dense eigenvalue (sorting ties may differ)
      double best = 1e300;
      for (double d : ev) best = std::min(best, std::abs(d - r.eigenvalues[i]));
      eig_err = std::max(eig_err, best / std::abs(r.eigenvalues[i]));
    }
    o.require(eig_err <= 1e-8, "low_spectrum vs dense relative " + num(eig_err));
    return o;
  });

  criterion(5, 120.0, [] {
    Outcome o;
    const CutoffProfile eta(0.2, 0.45);
    std::vector<double> norm16, change;
    for (std::uint64_t seed = 0; seed <= 3; ++seed) {
      CMatrix a[2];
      int idx = 0;
      for (int m : {16, 32}) {
        auto bundle = make_flat_torus(TorusSpec{2, {1, 0}}, GridSpec{m});
        const MetricField h = seed == 0 ? flat_metric(*bundle, kFlatRadius) : standard_family(bundle, 0.9, seed).at(0.3);
        a[idx++] = mass_endomorphism(*assemble_bg_dirac(bundle, h), eta).alpha;
      }
      norm16.push_back(mass_spectrum(a[0]).norm);
      change.push_back(mass_spectrum(a[0] - a[1]).norm);
    }
    const double tol = *std::max_element(change.begin(), change.end());
    const double worst = *std::max_element(norm16.begin(), norm16.end());
    o.require(worst <= 5.0 * tol, "max |alpha| at m=16 " + num(worst) + " vs 5 x |alpha16 - alpha32| = " + num(5.0 * tol));
    return o;
  });

  criterion(6, 300.0, [] {
    Outcome o;
    auto bundle = make_flat_torus(TorusSpec{3, {1, 1, 1}}, GridSpec{16});
    const auto op = assemble_bg_dirac(bundle, flat_metric(*bundle, kFlatRadius));
    const CMatrix a = mass_endomorphism(*op, CutoffProfile(0.15, 0.3)).alpha;
    const CMatrix b = mass_endomorphism(*op, CutoffProfile(0.2, 0.45)).alpha;
    const double worst = (a - b).cwiseAbs().maxCoeff();
    o.require(worst <= 1e-4, "max entry difference " + num(worst));
    return o;
  });

  // Blow-up. The seven point schedule contains the four scheduled t and
  // gives the pole fit the six samples it needs.
  criterion(7, 1200.0, [] {
    Outcome o;
    ExperimentConfig c = base_config({0, 0, 0}, 16);
    c.t_schedule = {0.4, 0.3, 0.2, 0.15, 0.1, 0.075, 0.05};
    c.output_path = (work_dir() / "blowup_sweep").string();
    const Artifact sweep = cmd_sweep(c);
    write_artifact(sweep, c.output_path);
    Table t = parse_csv(sweep.csv);
    std::vector<double> norms, e1, e2;
    bool invertible = true;
    for (std::size_t i = 0; i < t["t"].size(); ++i) {
      invertible = invertible && t["invertible"][i] == "true";
      const double tv = as_double(t["t"][i]);
      if (tv == 0.4 || tv == 0.2 || tv == 0.1 || tv == 0.05) {
        norms.push_back(as_double(t["alpha_norm"][i]));
        e1.push_back(std::abs(as_double(t["alpha_eig_1"][i])));
        e2.push_back(std::abs(as_double(t["alpha_eig_2"][i])));
      }
    }
    o.require(invertible, "every t invertible");
    bool increasing = norms.size() == 4;
    double growth = 1e300;
    for (std::size_t i = 1; i < norms.size(); ++i) {
      increasing = increasing && norms[i] > norms[i - 1];
      growth = std::min({growth, e1[i] / e1[i - 1], e2[i] / e2[i - 1]});
    }
    o.require(increasing, "|alpha| strictly increasing (" + num(norms.front()) + " -> " + num(norms.back()) + ")");
    o.require(growth >= 1.5, "top-2 eigenvalue growth per halving >= 1.5 (min " + num(growth) + ")");

    ExperimentConfig p = c;
    p.polefit.input_csv = c.output_path + ".csv";
    p.output_path = (work_dir() / "blowup_polefit").string();
    const Artifact fit = cmd_pole_fit(p);
    const auto& r = fit.meta["result"];
    const bool found = r["detected"].get<bool>();
    o.require(found && std::abs(r["location"].get<double>()) <= 0.02,
              "pole within 0.02 of t=0 (" + (found ? num(r["location"].get<double>()) : std::string("none")) + ")");
    o.require(r["residual"].get<double>() < 1e-2, "fit residual " + num(r["residual"].get<double>()));
    if (found) o.detail += "; order " + std::to_string(r["order"].get<int>());
    return o;
  });

  criterion(8, 1200.0, [] {
    Outcome o;
    ExperimentConfig c = base_config({1, 1, 1}, 16);
    c.output_path = (work_dir() / "control_sweep").string();
    Table t = parse_csv(cmd_sweep(c).csv);
    std::vector<double> norms;
    for (const auto& s : t["alpha_norm"]) norms.push_back(as_double(s));
    const double hi = *std::max_element(norms.begin(), norms.end());
    const double lo = *std::min_element(norms.begin(), norms.end());
    o.require(hi / lo < 2.0, "|alpha| max/min over schedule " + num(hi / lo) + " (" + num(norms.front()) + " at t=0.4, " +
                                 num(norms.back()) + " at t=0.05)");
    return o;
  });

  criterion(9, 600.0, [] {
    Outcome o;
    ExperimentConfig c = base_config({1, 1, 1}, 12);
    c.continuity.s_schedule = {0.08, 0.04, 0.02, 0.01, 0.0};
    c.output_path = (work_dir() / "continuity").string();
    Table t = parse_csv(cmd_continuity(c).csv);
    bool in_range = true;
    std::string ratios;
    double zero_diff = -1.0;
    for (std::size_t i = 0; i < t["s"].size(); ++i) {
      if (as_double(t["s"][i]) == 0.0) zero_diff = as_double(t["diff"][i]);
      if (t["ratio"][i] == "NA") continue;
      const double r = as_double(t["ratio"][i]);
      in_range = in_range && r >= 0.4 && r <= 0.6;
      ratios += (ratios.empty() ? "" : ", ") + num(r);
    }
    o.require(in_range && !ratios.empty(), "ratios in [0.4, 0.6]: " + ratios);
    o.require(zero_diff == 0.0, "s = 0 difference exactly 0");
    return o;
  });

  criterion(10, 1.0, [] {
    Outcome o;
    const char* table[8] = {"Z", "Z/2Z", "Z/2Z", "0", "Z", "0", "0", "0"};
    bool ok = true;
    for (int n = 0; n <= 16; ++n) ok = ok && ko_group(n) == table[n % 8];
    ok = ok && ko_group(4) == "Z" && ko_group(9) == "Z/2Z" && ko_group(3) == "0" && ko_group(2) == "Z/2Z";
    o.require(ok, "n = 0..16 match the table");
    bool rejected = false;
    try {
      (void)ko_group(-1);
    } catch (const Error&) {
      rejected = true;
    }
    o.require(rejected, "negative n rejected");
    return o;
  });

  criterion(11, 600.0, [] {
    Outcome o;
    std::vector<std::pair<std::string, ExperimentConfig>> runs;
    ExperimentConfig c = base_config({0, 0, 0}, 8);
    c.k_eigs = 4;
    c.dump_dense = true;
    runs.emplace_back("spectrum", c);
    c = base_config({1, 1, 1}, 8);
    runs.emplace_back("mass", c);
    c = base_config({0, 0, 0}, 8);
    c.t_schedule = {0.3, 0.1, 0.0};
    runs.emplace_back("sweep", c);
    c = base_config({1, 1, 1}, 8);
    c.continuity.s_schedule = {0.02, 0.01, 0.0};
    runs.emplace_back("continuity", c);
    c = base_config({0, 0, 0}, 8);
    for (double t : {0.4, 0.3, 0.2, 0.15, 0.1, 0.05}) {
      c.polefit.t.push_back(t);
      c.polefit.y.push_back(2.0 / t + 1.0);
    }
    runs.emplace_back("polefit", c);
    runs.emplace_back("ko", base_config({0, 0, 0}, 8));
    for (auto& [verb, config] : runs) {
      config.output_path = (work_dir() / ("det_" + verb)).string();
      std::string first;
      bool same = true;
      for (int pass = 0; pass < 2; ++pass) {
        // reload from the serialized config each time
        const ExperimentConfig again = parse_config(nlohmann::json::parse(config_to_json(config).dump()));
        write_artifact(run_command(verb, again), again.output_path);
        std::string bytes = slurp(again.output_path + ".csv") + slurp(again.output_path + ".json");
        if (fs::exists(again.output_path + ".dense.bin")) bytes += slurp(again.output_path + ".dense.bin");
        if (pass == 0) first = std::move(bytes);
        else same = first == bytes;
      }
      o.require(same, verb);
    }
    return o;
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include "massdirac/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "massdirac/error.hpp"

namespace massdirac {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::Config, what); }

// Strict reader for one JSON object: typed getters, unknown keys rejected
// by finish().
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) config_error(label("") + " must be an object");
  }

  template <class F>
  void field(const char* key, F&& read) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    read(j_.at(key), label(key));
  }

  void integer(const char* key, int& out) {
    field(key, [&](const json& v, const std::string& at) { out = as_int(v, at); });
  }
  void unsigned_integer(const char* key, std::uint64_t& out) {
    field(key, [&](const json& v, const std::string& at) {
      if (!v.is_number_unsigned()) config_error(at + " must be a nonnegative integer");
      out = v.get<std::uint64_t>();
    });
  }
  void real(const char* key, double& out) {
    field(key, [&](const json& v, const std::string& at) { out = as_real(v, at); });
  }
  void boolean(const char* key, bool& out) {
    field(key, [&](const json& v, const std::string& at) {
      if (!v.is_boolean()) config_error(at + " must be true or false");
      out = v.get<bool>();
    });
  }
  void string(const char* key, std::string& out) {
    field(key, [&](const json& v, const std::string& at) {
      if (!v.is_string()) config_error(at + " must be a string");
      out = v.get<std::string>();
    });
  }
  void reals(const char* key, std::vector<double>& out) {
    field(key, [&](const json& v, const std::string& at) {
      if (!v.is_array()) config_error(at + " must be an array of numbers");
      out.clear();
      for (const auto& e : v) out.push_back(as_real(e, at));
    });
  }
  void integers(const char* key, std::vector<int>& out) {
    field(key, [&](const json& v, const std::string& at) {
      if (!v.is_array()) config_error(at + " must be an array of integers");
      out.clear();
      for (const auto& e : v) out.push_back(as_int(e, at));
    });
  }
  template <class F>
  void object(const char* key, F&& read) {
    field(key, [&](const json& v, const std::string& at) {
      ObjectReader sub(v, at);
      read(sub);
      sub.finish();
    });
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) config_error("unknown config key " + label(item.key()));
  }

 private:
  std::string label(const std::string& key) const {
    if (where_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? where_ : where_ + "." + key;
  }
  static int as_int(const json& v, const std::string& at) {
    if (!v.is_number_integer()) config_error(at + " must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < -1000000000 || x > 1000000000) config_error(at + " is out of range");
    return static_cast<int>(x);
  }
  static double as_real(const json& v, const std::string& at) {
    if (!v.is_number()) config_error(at + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) config_error(at + " must be finite");
    return x;
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

bool strictly_monotone(const std::vector<double>& v) {
  if (v.size() < 2) return true;
  bool up = true, down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    up = up && v[i] > v[i - 1];
    down = down && v[i] < v[i - 1];
  }
  return up || down;
}

void validate(const ExperimentConfig& c) {
  const FamilyDocument& f = c.family;
  if (f.n < 2 || f.n > 8) config_error("family.n must lie in 2..8");
  if (static_cast<int>(f.delta.size()) != f.n) config_error("family.delta must have n entries");
  for (int d : f.delta)
    if (d != 0 && d != 1) config_error("family.delta entries must be 0 or 1");
  if (f.m < 8 || f.m % 2 != 0) config_error("family.m must be even and >= 8");
  if (!(f.r1 > 0.0 && f.r1 < f.r2 && f.r2 < f.r_U)) config_error("need 0 < family.r1 < family.r2 < family.r_U");
  if (!(f.r_U < kFamilyInner))
    config_error("family.r_U must stay below the inner radius of the family perturbation (0.8)");
  if (!(f.amplitude >= 0.0)) config_error("family.amplitude must be nonnegative");
  if (!(f.t >= 0.0 && f.t <= 1.0)) config_error("family.t must lie in [0, 1]");

  if (c.t_schedule.empty()) config_error("t_schedule must not be empty");
  for (double t : c.t_schedule)
    if (!(t >= 0.0 && t <= 1.0)) config_error("t_schedule values must lie in [0, 1]");
  if (!strictly_monotone(c.t_schedule)) config_error("t_schedule must be sorted with distinct values");
  if (c.k_eigs < 1) config_error("k_eigs must be >= 1");
  if (c.top_n < 1) config_error("top_n must be >= 1");

  const Tolerances& tol = c.tolerances;
  if (!(tol.solve > 0.0 && tol.eig > 0.0 && tol.gap_threshold > 0.0 && tol.sigma > 0.0))
    config_error("tolerances must be positive");
  if (tol.max_iterations < 1 || tol.restart < 1) config_error("tolerances.max_iterations and restart must be >= 1");
  if (c.source != "projected" && c.source != "sampled") config_error("source must be \"projected\" or \"sampled\"");
  if (c.output_path.empty()) config_error("output_path must not be empty");

  const ContinuitySettings& k = c.continuity;
  if (k.s_schedule.empty()) config_error("continuity.s_schedule must not be empty");
  for (double s : k.s_schedule)
    if (!(s >= 0.0)) config_error("continuity.s_schedule values must be nonnegative");
  if (!strictly_monotone(k.s_schedule)) config_error("continuity.s_schedule must be sorted with distinct values");
  if (!(k.direction_r_inner > 0.0 && k.direction_r_inner < k.direction_r_outer && k.direction_r_outer < kPi))
    config_error("need 0 < continuity.direction_r_inner < direction_r_outer < pi");

  const PoleFitSettings& p = c.polefit;
  if (p.t.size() != p.y.size()) config_error("polefit.t and polefit.y differ in length");
  if (!p.input_csv.empty() && !p.t.empty()) config_error("give polefit samples inline or via input_csv, not both");
  if (p.max_numerator_degree < 0 || p.max_denominator_degree < 0) config_error("polefit degree caps must be >= 0");
  for (int n : c.ko_dimensions)
    if (n < 0) config_error("ko_dimensions must be nonnegative");
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
  return s;
}

std::string flag(bool b) { return b ? "true" : "false"; }

json base_meta(const std::string& command, const ExperimentConfig& c) {
  return json{{"tool", "massdirac"},
              {"tool_version", kToolVersion},
              {"command", command},
              {"config_hash", config_hash_hex(c)},
              {"config", config_to_json(c)},
              {"csv_null", "NA"}};
}

class Stopwatch {
 public:
  explicit Stopwatch(bool on) : on_(on), start_(std::chrono::steady_clock::now()) {}
  std::string seconds() const {
    if (!on_) return "NA";
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    return format_double(d.count());
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point start_;
};

bool row_failure(const Error& e) {
  return e.kind() == ErrorKind::NonConvergence || e.kind() == ErrorKind::NotInvertible;
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

int sum_of(const std::vector<int>& v) {
  int s = 0;
  for (int x : v) s += x;
  return s;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  ObjectReader r(doc, "");
  r.object("family", [&](ObjectReader& f) {
    f.integer("n", c.family.n);
    f.integers("delta", c.family.delta);
    f.integer("m", c.family.m);
    f.real("r_U", c.family.r_U);
    f.real("r1", c.family.r1);
    f.real("r2", c.family.r2);
    f.real("amplitude", c.family.amplitude);
    f.unsigned_integer("shape_seed", c.family.shape_seed);
    f.real("t", c.family.t);
  });
  r.reals("t_schedule", c.t_schedule);
  r.integer("k_eigs", c.k_eigs);
  r.integer("top_n", c.top_n);
  r.object("tolerances", [&](ObjectReader& t) {
    t.real("solve", c.tolerances.solve);
    t.integer("max_iterations", c.tolerances.max_iterations);
    t.integer("restart", c.tolerances.restart);
    t.real("eig", c.tolerances.eig);
    t.real("gap_threshold", c.tolerances.gap_threshold);
    t.real("sigma", c.tolerances.sigma);
  });
  r.string("output_path", c.output_path);
  r.string("source", c.source);
  r.boolean("record_timing", c.record_timing);
  r.boolean("dump_dense", c.dump_dense);
  r.object("continuity", [&](ObjectReader& k) {
    k.unsigned_integer("direction_seed", c.continuity.direction_seed);
    k.real("direction_amplitude", c.continuity.direction_amplitude);
    k.real("direction_r_inner", c.continuity.direction_r_inner);
    k.real("direction_r_outer", c.continuity.direction_r_outer);
    k.reals("s_schedule", c.continuity.s_schedule);
  });
  r.object("polefit", [&](ObjectReader& p) {
    p.reals("t", c.polefit.t);
    p.reals("y", c.polefit.y);
    p.string("input_csv", c.polefit.input_csv);
    p.string("column", c.polefit.column);
    p.integer("max_numerator_degree", c.polefit.max_numerator_degree);
    p.integer("max_denominator_degree", c.polefit.max_denominator_degree);
  });
  r.integers("ko_dimensions", c.ko_dimensions);
  r.finish();
  validate(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const FamilyDocument& f = c.family;
  return json{{"family",
               {{"n", f.n},
                {"delta", f.delta},
                {"m", f.m},
                {"r_U", f.r_U},
                {"r1", f.r1},
                {"r2", f.r2},
                {"amplitude", f.amplitude},
                {"shape_seed", f.shape_seed},
                {"t", f.t}}},
              {"t_schedule", c.t_schedule},
              {"k_eigs", c.k_eigs},
              {"top_n", c.top_n},
              {"tolerances",
               {{"solve", c.tolerances.solve},
                {"max_iterations", c.tolerances.max_iterations},
                {"restart", c.tolerances.restart},
                {"eig", c.tolerances.eig},
                {"gap_threshold", c.tolerances.gap_threshold},
                {"sigma", c.tolerances.sigma}}},
              {"output_path", c.output_path},
              {"source", c.source},
              {"record_timing", c.record_timing},
              {"dump_dense", c.dump_dense},
              {"continuity",
               {{"direction_seed", c.continuity.direction_seed},
                {"direction_amplitude", c.continuity.direction_amplitude},
                {"direction_r_inner", c.continuity.direction_r_inner},
                {"direction_r_outer", c.continuity.direction_r_outer},
                {"s_schedule", c.continuity.s_schedule}}},
              {"polefit",
               {{"t", c.polefit.t},
                {"y", c.polefit.y},
                {"input_csv", c.polefit.input_csv},
                {"column", c.polefit.column},
                {"max_numerator_degree", c.polefit.max_numerator_degree},
                {"max_denominator_degree", c.polefit.max_denominator_degree}}},
              {"ko_dimensions", c.ko_dimensions}};
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    config_error("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

void apply_override(json& doc, const std::string& key, const std::string& value) {
  if (key.empty()) config_error("--set needs key=value");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) config_error("bad override key " + key);
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) config_error("override " + key + " descends into a non-object");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = parsed;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_artifact(const Artifact& artifact, const std::string& prefix) {
  const std::filesystem::path base(prefix);
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  auto write = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path);
  };
  write(prefix + ".csv", artifact.csv);
  write(prefix + ".json", artifact.meta.dump(2) + "\n");
  if (!artifact.dense.empty()) write(prefix + ".dense.bin", artifact.dense);
}

std::string ko_group(int n) {
  if (n < 0) fail(ErrorKind::InvalidArgument, "KO group of a negative dimension");
  if (n % 4 == 0) return "Z";
  if (n % 8 == 1 || n % 8 == 2) return "Z/2Z";
  return "0";
}

std::shared_ptr<const SpinorBundle> make_bundle(const FamilyDocument& f) {
  return make_flat_torus(TorusSpec{f.n, f.delta}, GridSpec{f.m});
}

MetricFamily make_family(std::shared_ptr<const SpinorBundle> bundle, const FamilyDocument& f) {
  return standard_family(std::move(bundle), f.amplitude, f.shape_seed, f.r_U);
}

GreenOptions green_options(const ExperimentConfig& c) {
  GreenOptions g;
  g.source = c.source == "sampled" ? SourceMode::Sampled : SourceMode::Projected;
  g.solver = SolverOptions{c.tolerances.solve, c.tolerances.max_iterations, c.tolerances.restart};
  return g;
}

EigenOptions eigen_options(const ExperimentConfig& c) {
  EigenOptions e;
  e.sigma = c.tolerances.sigma;
  e.eig_tol = c.tolerances.eig;
  e.gap_threshold = c.tolerances.gap_threshold;
  return e;
}

// --- commands -------------------------------------------------------------

Artifact cmd_spectrum(const ExperimentConfig& c) {
  auto bundle = make_bundle(c.family);
  const MetricFamily family = make_family(bundle, c.family);
  const auto op = assemble_bg_dirac(bundle, family.at(c.family.t));
  if (c.dump_dense && op->size() > 4096) config_error("dump_dense needs at most 4096 unknowns");

  const SpectrumReport report = low_spectrum(*op, c.k_eigs, eigen_options(c));
  std::ostringstream csv;
  csv << "index,eigenvalue,residual,cluster\n";
  std::vector<std::size_t> cluster_of(report.eigenvalues.size(), 0);
  for (std::size_t k = 0; k < report.clusters.size(); ++k)
    for (std::size_t i : report.clusters[k]) cluster_of[i] = k;
  for (std::size_t i = 0; i < report.eigenvalues.size(); ++i)
    csv << i << ',' << format_double(report.eigenvalues[i]) << ',' << format_double(report.residuals[i]) << ','
        << cluster_of[i] << '\n';

  Artifact a;
  a.csv = csv.str();
  a.meta = base_meta("spectrum", c);
  json result = report;
  const auto kernel = op->known_kernel_dimension();
  result["known_kernel_dimension"] = kernel ? json(*kernel) : json(nullptr);
  result["metric_min_eigenvalue"] = op->metric().min_eigenvalue();
  result["correction_antisymmetry"] = op->correction_antisymmetry();
  result["unknowns"] = op->size();
  a.meta["result"] = result;
  if (c.dump_dense) {
    std::ostringstream bin(std::ios::binary);
    write_dense_binary(op->dense(), bin);
    a.dense = bin.str();
    a.meta["dense"] = {{"rows", op->size()}, {"layout", "row-major complex128 little-endian"}};
  }
  return a;
}

Artifact cmd_mass(const ExperimentConfig& c) {
  auto bundle = make_bundle(c.family);
  const MetricFamily family = make_family(bundle, c.family);
  const auto op = assemble_bg_dirac(bundle, family.at(c.family.t));
  const CutoffProfile eta(c.family.r1, c.family.r2);
  const MassEndomorphism m = mass_endomorphism(*op, eta, green_options(c));

  std::ostringstream csv;
  csv << "row,col,alpha_re,alpha_im,alpha_node_re,alpha_node_im\n";
  for (Eigen::Index r = 0; r < m.alpha.rows(); ++r)
    for (Eigen::Index col = 0; col < m.alpha.cols(); ++col)
      csv << r << ',' << col << ',' << format_double(m.alpha(r, col).real()) << ','
          << format_double(m.alpha(r, col).imag()) << ',' << format_double(m.alpha_node(r, col).real()) << ','
          << format_double(m.alpha_node(r, col).imag()) << '\n';
  Artifact a;
  a.csv = csv.str();
  a.meta = base_meta("mass", c);
  json result = m;
  result["family"] = config_to_json(c)["family"];
  a.meta["result"] = result;
  return a;
}

Artifact cmd_sweep(const ExperimentConfig& c) {
  auto bundle = make_bundle(c.family);
  const MetricFamily family = make_family(bundle, c.family);
  const CutoffProfile eta(c.family.r1, c.family.r2);
  eta.check_within(c.family.r_U);
  const GreenOptions green = green_options(c);
  const EigenOptions eig = eigen_options(c);
  const int top = std::min(c.top_n, bundle->spinor_dim());

  std::ostringstream csv;
  csv << "t,invertible,gap,lambda_1,alpha_norm";
  for (int i = 1; i <= top; ++i) csv << ",alpha_eig_" << i;
  csv << ",hermitian_deviation,node_read_deviation,max_residual,iterations,wall_time,reason\n";

  int failures = 0, run = 0, longest_run = 0;
  json rows = json::array();
  for (double t : c.t_schedule) {
    const Stopwatch clock(c.record_timing);
    std::string invertible = "NA", gap = "NA", lambda = "NA", norm = "NA", herm = "NA", node = "NA", iters = "NA";
    std::vector<std::string> eigs(static_cast<std::size_t>(top), "NA");
    double max_residual = std::nan("");
    std::string reason;
    bool ok = false;
    try {
      const auto op = assemble_bg_dirac(bundle, family.at(t));
      const SpectrumReport s = low_spectrum(*op, 1, eig);
      invertible = flag(s.invertible);
      gap = format_double(s.gap);
      lambda = format_double(s.eigenvalues.front());
      max_residual = max_of(s.residuals);
      if (!s.invertible) {
        reason = "operator not invertible: gap below threshold";
      } else {
        const MassEndomorphism m = mass_endomorphism(*op, eta, green);
        const MassSpectrum ms = mass_spectrum(m.alpha);
        norm = format_double(ms.norm);
        for (int i = 0; i < top; ++i) eigs[static_cast<std::size_t>(i)] = format_double(ms.eigenvalues[static_cast<std::size_t>(i)]);
        herm = format_double(m.hermitian_deviation);
        node = format_double(m.node_read_deviation);
        iters = std::to_string(sum_of(m.iterations));
        max_residual = std::max(max_residual, max_of(m.residuals));
        ok = true;
      }
    } catch (const Error& e) {
      if (!row_failure(e)) throw;
      reason = sanitize(e.what());
    }
    if (ok) {
      run = 0;
    } else {
      ++failures;
      longest_run = std::max(longest_run, ++run);
    }
    csv << format_double(t) << ',' << invertible << ',' << gap << ',' << lambda << ',' << norm;
    for (const auto& e : eigs) csv << ',' << e;
    csv << ',' << herm << ',' << node << ',' << format_double(max_residual) << ',' << iters << ','
        << clock.seconds() << ',' << (reason.empty() ? "NA" : reason) << '\n';
  }
  Artifact a;
  a.csv = csv.str();
  a.meta = base_meta("sweep", c);
  a.meta["result"] = {{"rows", c.t_schedule.size()},
                      {"failed_rows", failures},
                      {"longest_failure_run", longest_run},
                      {"spinor_dim", bundle->spinor_dim()}};
  return a;
}

Artifact cmd_continuity(const ExperimentConfig& c) {
  const FamilyDocument& f = c.family;
  const ContinuitySettings& k = c.continuity;
  auto bundle = make_bundle(f);
  const MetricFamily family = make_family(bundle, f);
  const BumpPerturbation direction(f.n, k.direction_amplitude, k.direction_seed, k.direction_r_inner,
                                   k.direction_r_outer);
  if (direction.r_inner() <= f.r_U)
    fail(ErrorKind::SupportViolation, "perturbation direction reaches into U: the perturbed metric leaves R_{U,g_flat}");
  const CutoffProfile eta(f.r1, f.r2);
  eta.check_within(f.r_U);
  const GreenOptions green = green_options(c);
  const EigenOptions eig = eigen_options(c);

  auto metric_at = [&](double s) {
    return sample_metric(*bundle, affine_metric(f.n, {{f.t, family.bump()}, {s, direction}}), f.r_U);
  };

  const auto base_op = assemble_bg_dirac(bundle, metric_at(0.0));
  const SpectrumReport base_spec = low_spectrum(*base_op, 1, eig);
  if (!base_spec.invertible)
    fail(ErrorKind::NotInvertible, "base metric is not invertible (gap " + format_double(base_spec.gap) + ")");
  const CMatrix alpha0 = mass_endomorphism(*base_op, eta, green).alpha;

  std::ostringstream csv;
  csv << "s,invertible,gap,diff,ratio,max_residual,wall_time,reason\n";
  std::vector<double> fit_s, fit_d;
  double prev_diff = std::nan("");
  double prev_s = std::nan("");
  json ratios = json::array();
  for (double s : k.s_schedule) {
    const Stopwatch clock(c.record_timing);
    std::string invertible = "NA", gap = "NA", diff_text = "NA", ratio_text = "NA", reason;
    double max_residual = std::nan("");
    double diff = std::nan("");
    try {
      const auto op = assemble_bg_dirac(bundle, metric_at(s));
      const SpectrumReport spec = low_spectrum(*op, 1, eig);
      invertible = flag(spec.invertible);
      gap = format_double(spec.gap);
      max_residual = max_of(spec.residuals);
      if (!spec.invertible) {
        reason = "operator not invertible: gap below threshold";
      } else {
        const MassEndomorphism m = mass_endomorphism(*op, eta, green);
        diff = mass_spectrum(m.alpha - alpha0).norm;
        max_residual = std::max(max_residual, max_of(m.residuals));
        diff_text = format_double(diff);
      }
    } catch (const Error& e) {
      // a direction large enough to break positivity only loses that row
      if (e.kind() != ErrorKind::NotPositiveDefinite && !row_failure(e)) throw;
      reason = sanitize(e.what());
    }
    if (s > 0.0 && std::isfinite(diff)) {
      fit_s.push_back(s);
      fit_d.push_back(diff);
      if (prev_s > 0.0 && std::isfinite(prev_diff)) {
        const double r = diff / prev_diff;
        ratio_text = format_double(r);
        ratios.push_back({{"s", s}, {"ratio", r}});
      }
    }
    prev_s = s;
    prev_diff = diff;
    csv << format_double(s) << ',' << invertible << ',' << gap << ',' << diff_text << ',' << ratio_text << ','
        << format_double(max_residual) << ',' << clock.seconds() << ',' << (reason.empty() ? "NA" : reason) << '\n';
  }

  json trend = nullptr;
  if (fit_s.size() >= 2) {
    // least squares diff = intercept + slope * s over the nonzero s rows
    double ms = 0.0, md = 0.0;
    for (std::size_t i = 0; i < fit_s.size(); ++i) {
      ms += fit_s[i];
      md += fit_d[i];
    }
    ms /= static_cast<double>(fit_s.size());
    md /= static_cast<double>(fit_s.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < fit_s.size(); ++i) {
      sxx += (fit_s[i] - ms) * (fit_s[i] - ms);
      sxy += (fit_s[i] - ms) * (fit_d[i] - md);
    }
    const double slope = sxy / sxx;
    trend = {{"slope", slope}, {"intercept", md - slope * ms}};
  }
  Artifact a;
  a.csv = csv.str();
  a.meta = base_meta("continuity", c);
  a.meta["result"] = {{"base_gap", base_spec.gap},
                      {"base_alpha_norm", mass_spectrum(alpha0).norm},
                      {"ratios", ratios},
                      {"linear_trend", trend}};
  return a;
}

void read_csv_columns(const std::string& path, const std::string& x_column, const std::string& y_column,
                      std::vector<double>& x, std::vector<double>& y) {
  std::ifstream in(path);
  if (!in) config_error("cannot open " + path);
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  std::string line;
  if (!std::getline(in, line)) config_error(path + " is empty");
  const auto header = split(line);
  const auto xi = std::find(header.begin(), header.end(), x_column);
  const auto yi = std::find(header.begin(), header.end(), y_column);
  if (xi == header.end() || yi == header.end())
    config_error(path + " lacks column " + (xi == header.end() ? x_column : y_column));
  const auto xc = static_cast<std::size_t>(xi - header.begin());
  const auto yc = static_cast<std::size_t>(yi - header.begin());
  x.clear();
  y.clear();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() <= std::max(xc, yc)) config_error(path + " has a short row");
    if (cells[xc] == "NA" || cells[yc] == "NA") continue;
    try {
      x.push_back(std::stod(cells[xc]));
      y.push_back(std::stod(cells[yc]));
    } catch (const std::exception&) {
      config_error(path + " holds a non-numeric entry");
    }
  }
}

Artifact cmd_pole_fit(const ExperimentConfig& c) {
  std::vector<double> t = c.polefit.t, y = c.polefit.y;
  if (!c.polefit.input_csv.empty()) read_csv_columns(c.polefit.input_csv, "t", c.polefit.column, t, y);
  PoleFitOptions options;
  options.max_numerator_degree = c.polefit.max_numerator_degree;
  options.max_denominator_degree = c.polefit.max_denominator_degree;
  PoleReport report;
  try {
    report = pole_fit(t, y, options);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) config_error(std::string("polefit samples: ") + e.what());
    throw;
  }
  std::ostringstream csv;
  csv << "detected,location,order,residual,numerator_degree,denominator_degree,cv_score,message\n";
  csv << flag(report.detected) << ',' << (report.detected ? format_double(report.location) : "NA") << ','
      << (report.detected ? std::to_string(report.order) : "NA") << ',' << format_double(report.residual) << ','
      << report.numerator_degree << ',' << report.denominator_degree << ',' << format_double(report.cv_score) << ','
      << sanitize(report.message) << '\n';
  Artifact a;
  a.csv = csv.str();
  a.meta = base_meta("polefit", c);
  a.meta["result"] = report;
  a.meta["result"]["samples"] = {{"t", t}, {"y", y}};
  return a;
}

Artifact cmd_ko(const ExperimentConfig& c) {
  std::ostringstream csv;
  csv << "n,group\n";
  json table = json::array();
  for (int n : c.ko_dimensions) {
    const std::string g = ko_group(n);
    csv << n << ',' << g << '\n';
    table.push_back({{"n", n}, {"group", g}});
  }
  Artifact a;
  a.csv = csv.str();
  a.meta = base_meta("ko", c);
  a.meta["result"] = table;
  return a;
}

Artifact run_command(const std::string& verb, const ExperimentConfig& config) {
  if (verb == "spectrum") return cmd_spectrum(config);
  if (verb == "mass") return cmd_mass(config);
  if (verb == "sweep") return cmd_sweep(config);
  if (verb == "continuity") return cmd_continuity(config);
  if (verb == "polefit") return cmd_pole_fit(config);
  if (verb == "ko") return cmd_ko(config);
  config_error("unknown command " + verb);
}

}  // namespace massdirac

#pragma once

// Experiment configuration and the commands behind the massdirac tool.
//
// A config is a JSON document. Missing keys take their defaults, unknown
// keys are rejected. Every command returns an Artifact (CSV text plus a
// JSON metadata document) that depends only on the config, so reruns are
// byte-identical unless record_timing is switched on.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "massdirac/mass.hpp"
#include "massdirac/polefit.hpp"

namespace massdirac {

inline constexpr const char* kToolVersion = "0.1.0";

// The unit of reproducibility for a metric family g_t = Id + t B.
struct FamilyDocument {
  int n = 3;
  std::vector<int> delta{0, 0, 0};
  int m = 12;            // grid points per axis
  double r_U = kFlatRadius;
  double r1 = 0.2;       // cutoff radii, r1 < r2 < r_U
  double r2 = 0.45;
  double amplitude = 1.2;
  std::uint64_t shape_seed = 1;
  double t = 0.3;
};

struct Tolerances {
  double solve = 1e-10;
  int max_iterations = 500;
  int restart = 60;
  double eig = 1e-8;
  double gap_threshold = 1e-6;
  double sigma = 0.1;
};

struct ContinuitySettings {
  std::uint64_t direction_seed = 7;
  double direction_amplitude = 1.0;
  double direction_r_inner = kFamilyInner;
  double direction_r_outer = kFamilyOuter;
  std::vector<double> s_schedule{0.08, 0.04, 0.02, 0.01, 0.0};
};

struct PoleFitSettings {
  std::vector<double> t;       // inline samples, or
  std::vector<double> y;
  std::string input_csv;       // a sweep CSV with a "t" column
  std::string column = "alpha_norm";
  int max_numerator_degree = 3;
  int max_denominator_degree = 3;
};

struct ExperimentConfig {
  FamilyDocument family;
  std::vector<double> t_schedule{0.4, 0.2, 0.1, 0.05};
  int k_eigs = 8;
  int top_n = 2;  // alpha eigenvalues reported per sweep row
  Tolerances tolerances;
  std::string output_path = "massdirac_out";
  std::string source = "projected";  // or "sampled"
  bool record_timing = false;
  bool dump_dense = false;
  ContinuitySettings continuity;
  PoleFitSettings polefit;
  std::vector<int> ko_dimensions{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
};

// Throws Error(Config) on unknown keys, wrong types or violated invariants.
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

// key is a dotted path ("family.m"); value is parsed as JSON when it is
// valid JSON and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& key, const std::string& value);

// FNV-1a over the canonical compact dump.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string config_hash_hex(const ExperimentConfig& config);

// Shortest decimal that round-trips; "NA" for NaN.
std::string format_double(double v);

struct Artifact {
  std::string csv;
  nlohmann::json meta;
  std::string dense;  // optional raw operator matrix (see write_dense_binary)
};

// Writes <prefix>.csv and <prefix>.json, and <prefix>.dense.bin when present.
void write_artifact(const Artifact& artifact, const std::string& prefix);

std::string ko_group(int n);

// Shared plumbing for the commands.
std::shared_ptr<const SpinorBundle> make_bundle(const FamilyDocument& family);
MetricFamily make_family(std::shared_ptr<const SpinorBundle> bundle, const FamilyDocument& family);
GreenOptions green_options(const ExperimentConfig& config);
EigenOptions eigen_options(const ExperimentConfig& config);

Artifact cmd_spectrum(const ExperimentConfig& config);
Artifact cmd_mass(const ExperimentConfig& config);
Artifact cmd_sweep(const ExperimentConfig& config);
Artifact cmd_continuity(const ExperimentConfig& config);
Artifact cmd_pole_fit(const ExperimentConfig& config);
Artifact cmd_ko(const ExperimentConfig& config);

Artifact run_command(const std::string& verb, const ExperimentConfig& config);

// Numeric column of a CSV table; rows holding "NA" are skipped together
// with their t value.
void read_csv_columns(const std::string& path, const std::string& x_column, const std::string& y_column,
                      std::vector<double>& x, std::vector<double>& y);

}  // namespace massdirac

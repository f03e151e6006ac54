#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "massdirac/error.hpp"
#include "massdirac/experiment.hpp"

using namespace massdirac;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

std::string temp_prefix(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "massdirac_unit";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("KO groups of a point") {
  const char* table[8] = {"Z", "Z/2Z", "Z/2Z", "0", "Z", "0", "0", "0"};
  for (int n = 0; n <= 16; ++n) CHECK(ko_group(n) == table[n % 8]);
  CHECK(ko_group(4) == "Z");
  CHECK(ko_group(9) == "Z/2Z");
  CHECK(ko_group(3) == "0");
  CHECK_THROWS_AS(ko_group(-1), Error);
}

TEST_CASE("config defaults and bit-exact round trip") {
  const ExperimentConfig d = parse_config(json::object());
  CHECK(d.family.n == 3);
  CHECK(d.tolerances.solve == 1e-10);
  CHECK(d.tolerances.max_iterations == 500);

  ExperimentConfig c;
  c.family.t = 0.1 + 0.2;  // not a short decimal
  c.family.shape_seed = 18446744073709551557ULL;
  c.t_schedule = {1.0 / 3.0, 0.2, 1e-3};
  c.tolerances.gap_threshold = 3.0e-7;
  const std::string text = config_to_json(c).dump();
  const ExperimentConfig back = parse_config(json::parse(text));
  CHECK(std::memcmp(&back.family.t, &c.family.t, sizeof(double)) == 0);
  CHECK(back.family.shape_seed == c.family.shape_seed);
  CHECK(back.t_schedule == c.t_schedule);
  CHECK(config_to_json(back).dump() == text);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash_hex(c).size() == 16);
  c.family.m = 16;
  CHECK(config_hash(back) != config_hash(c));
}

TEST_CASE("--set overrides") {
  json doc = json::object();
  apply_override(doc, "family.m", "16");
  apply_override(doc, "family.delta", "[1,1,1]");
  apply_override(doc, "source", "sampled");
  apply_override(doc, "t_schedule", "[0.3, 0.1]");
  apply_override(doc, "record_timing", "true");
  const ExperimentConfig c = parse_config(doc);
  CHECK(c.family.m == 16);
  CHECK(c.family.delta == std::vector<int>{1, 1, 1});
  CHECK(c.source == "sampled");
  CHECK(c.t_schedule == std::vector<double>{0.3, 0.1});
  CHECK(c.record_timing);
  json bad = json::object();
  apply_override(bad, "family", "3");
  CHECK(kind_of([&] { apply_override(bad, "family.m", "16"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { apply_override(bad, "", "1"); }) == ErrorKind::Config);
}

TEST_CASE("invalid configs are config errors") {
  auto rejects = [](const char* text) {
    CAPTURE(text);
    CHECK(kind_of([&] { (void)parse_config(json::parse(text)); }) == ErrorKind::Config);
  };
  rejects(R"({"colour": 1})");
  rejects(R"({"family": {"n": 3, "dimension": 3}})");
  rejects(R"({"family": {"m": 12.5}})");
  rejects(R"({"family": {"m": 10.0}})");
  rejects(R"({"family": {"m": 9}})");
  rejects(R"({"family": {"delta": [0, 0]}})");
  rejects(R"({"family": {"delta": [0, 2, 0]}})");
  rejects(R"({"family": {"r1": 0.3, "r2": 0.2}})");
  rejects(R"({"family": {"r2": 0.7}})");
  rejects(R"({"family": {"shape_seed": -1}})");
  rejects(R"({"t_schedule": [0.1, 0.4, 0.2]})");
  rejects(R"({"t_schedule": [0.2, 0.2]})");
  rejects(R"({"t_schedule": []})");
  rejects(R"({"t_schedule": [1.5]})");
  rejects(R"({"source": "dense"})");
  rejects(R"({"tolerances": {"solve": 0}})");
  rejects(R"({"ko_dimensions": [3, -2]})");
  rejects(R"({"polefit": {"t": [1, 2], "y": [1]}})");
  rejects(R"({"continuity": {"s_schedule": [0.01, 0.04, 0.02]}})");
  rejects(R"([1, 2])");
  // ascending schedules are fine too
  CHECK_NOTHROW(parse_config(json::parse(R"({"t_schedule": [0.05, 0.1, 0.2]})")));
}

TEST_CASE("CSV number format") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5e-7) == "-2.5e-07");
  CHECK(format_double(std::nan("")) == "NA");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("sweep rows: schedule order, NA at the flat endpoint, frozen golden row") {
  ExperimentConfig c;
  c.family.m = 8;
  c.t_schedule = {0.3, 0.0};
  const Artifact a = cmd_sweep(c);
  const auto rows = lines(a.csv);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] ==
        "t,invertible,gap,lambda_1,alpha_norm,alpha_eig_1,alpha_eig_2,hermitian_deviation,node_read_deviation,"
        "max_residual,iterations,wall_time,reason");
  CHECK(rows[1].rfind("0.3,true,", 0) == 0);
  CHECK(rows[2].rfind("0,false,", 0) == 0);
  CHECK(rows[2].find(",NA,NA,NA,NA,NA,") != std::string::npos);
  CHECK(rows[2].find("operator not invertible") != std::string::npos);
  // alpha_norm at t = 0.3, frozen from the reference build
  std::vector<std::string> cells;
  std::stringstream ss(rows[1]);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  CHECK(std::stod(cells[4]) == doctest::Approx(79.28459200190325).epsilon(1e-6));
  CHECK(cells[11] == "NA");
  CHECK(a.meta["result"]["failed_rows"] == 1);
  CHECK(a.meta["tool_version"] == kToolVersion);
  CHECK(a.meta["config_hash"] == config_hash_hex(c));
}

TEST_CASE("record_timing fills the wall_time column") {
  ExperimentConfig c;
  c.family.m = 8;
  c.family.delta = {1, 1, 1};
  c.t_schedule = {0.2};
  c.record_timing = true;
  const auto rows = lines(cmd_sweep(c).csv);
  std::vector<std::string> cells;
  std::stringstream ss(rows[1]);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  REQUIRE(cells.size() == 13);
  CHECK(cells[11] != "NA");
  CHECK(std::stod(cells[11]) > 0.0);
  CHECK(cells[12] == "NA");
}

TEST_CASE("continuity: zero at s = 0, direction inside U rejected") {
  ExperimentConfig c;
  c.family.m = 8;
  c.family.delta = {1, 1, 1};
  c.continuity.s_schedule = {0.02, 0.01, 0.0};
  const Artifact a = cmd_continuity(c);
  const auto rows = lines(a.csv);
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].rfind("0,true,", 0) == 0);
  CHECK(rows[3].find(",0,NA,") != std::string::npos);
  CHECK(a.meta["result"]["ratios"].size() == 1);

  c.continuity.direction_r_inner = 0.5;
  CHECK(kind_of([&] { (void)cmd_continuity(c); }) == ErrorKind::SupportViolation);
}

TEST_CASE("mass command: solver failure on a metric with kernel") {
  ExperimentConfig c;
  c.family.m = 8;
  c.family.t = 0.0;
  CHECK(kind_of([&] { (void)cmd_mass(c); }) == ErrorKind::NotInvertible);
  c.family.delta = {1, 1, 1};
  c.family.t = 0.3;
  const auto rows = lines(cmd_mass(c).csv);
  CHECK(rows.size() == 5);
}

TEST_CASE("polefit command: inline samples and CSV input") {
  ExperimentConfig c;
  for (double t : {0.4, 0.3, 0.2, 0.15, 0.1, 0.05}) {
    c.polefit.t.push_back(t);
    c.polefit.y.push_back(1.0 / t);
  }
  const Artifact a = cmd_pole_fit(c);
  CHECK(a.meta["result"]["detected"] == true);
  CHECK(a.meta["result"]["order"] == 1);
  CHECK(lines(a.csv)[1].rfind("true,", 0) == 0);

  const std::string path = temp_prefix("samples") + ".csv";
  {
    std::ofstream out(path);
    out << "t,value,reason\n0.4,NA,skip\n";
    for (double t : {0.35, 0.3, 0.25, 0.2, 0.15, 0.1}) out << t << ',' << 3.0 + t * t << ",NA\n";
  }
  ExperimentConfig d;
  d.polefit.input_csv = path;
  d.polefit.column = "value";
  const Artifact b = cmd_pole_fit(d);
  CHECK(b.meta["result"]["detected"] == false);
  CHECK(b.meta["result"]["location"].is_null());
  CHECK(lines(b.csv)[1].rfind("false,NA,NA,", 0) == 0);

  d.polefit.column = "missing";
  CHECK(kind_of([&] { (void)cmd_pole_fit(d); }) == ErrorKind::Config);
  ExperimentConfig e;
  e.polefit.t = {0.1, 0.2};
  e.polefit.y = {1.0, 2.0};
  CHECK(kind_of([&] { (void)cmd_pole_fit(e); }) == ErrorKind::Config);
}

TEST_CASE("artifacts are deterministic and written next to each other") {
  ExperimentConfig c;
  c.family.n = 2;
  c.family.delta = {1, 0};
  c.family.m = 8;
  c.family.amplitude = 0.9;
  c.k_eigs = 4;
  c.dump_dense = true;
  c.output_path = temp_prefix("spectrum");
  const Artifact a = cmd_spectrum(c), b = cmd_spectrum(c);
  CHECK(a.csv == b.csv);
  CHECK(a.meta.dump() == b.meta.dump());
  CHECK(a.dense == b.dense);
  CHECK(a.dense.size() == 128u * 128u * 16u);
  write_artifact(a, c.output_path);
  CHECK(std::filesystem::exists(c.output_path + ".csv"));
  CHECK(std::filesystem::exists(c.output_path + ".json"));
  CHECK(std::filesystem::file_size(c.output_path + ".dense.bin") == a.dense.size());
  CHECK(lines(a.csv)[0] == "index,eigenvalue,residual,cluster");
  CHECK(run_command("ko", c).csv.rfind("n,group\n0,Z\n", 0) == 0);
  CHECK(kind_of([&] { (void)run_command("plot", c); }) == ErrorKind::Config);
}

// massdirac: experiment driver.
//
//   massdirac <spectrum|mass|sweep|continuity|polefit|ko> --config run.json [--set key=value ...]
//
// Exit codes: 0 ok, 2 config error, 3 solver failure.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "massdirac/error.hpp"
#include "massdirac/experiment.hpp"

using namespace massdirac;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotInvertible:
    case ErrorKind::NonConvergence:
      return 3;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirac operators on perturbed flat tori: spectra and mass endomorphisms"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
  const char* verbs[][2] = {{"spectrum", "low-lying eigenvalues of the Dirac operator at family.t"},
                            {"mass", "mass endomorphism at family.t"},
                            {"sweep", "gap and mass endomorphism along t_schedule"},
                            {"continuity", "|alpha(g + s k) - alpha(g)| along continuity.s_schedule"},
                            {"polefit", "rational fit and pole detection on samples"},
                            {"ko", "KO_n of a point"}};
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v[0], v[1]);
    sub->add_option("--config", config_path, "JSON experiment config (defaults apply when omitted)");
    sub->add_option("--set", overrides, "override a config entry, e.g. --set family.m=16")->take_all();
    sub->add_flag("-q,--quiet", quiet, "no summary on stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) fail(ErrorKind::Config, "cannot open config file " + config_path);
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, "config " + config_path + " is not valid JSON: " + e.what());
      }
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) fail(ErrorKind::Config, "--set expects key=value, got " + o);
      apply_override(doc, o.substr(0, eq), o.substr(eq + 1));
    }
    const ExperimentConfig config = parse_config(doc);
    const Artifact artifact = run_command(verb, config);
    write_artifact(artifact, config.output_path);
    if (!quiet) {
      std::cout << artifact.csv;
      std::cout << "wrote " << config.output_path << ".csv and .json (config " << config_hash_hex(config) << ")\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "massdirac " << verb << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "massdirac " << verb << ": " << e.what() << "\n";
    return 1;
  }
}

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "epistemic/scenario.hpp"

namespace sc = epistemic::scenario;

int main(int argc, char** argv) {
  CLI::App app{"Run an epistemic scenario file"};
  std::string path;
  std::optional<std::string> command;
  std::optional<std::uint64_t> n, seed;
  std::optional<double> tolerance;
  std::optional<std::string> reachable;
  std::optional<std::string> out_dir;
  bool quiet = false;
  app.add_option("scenario", path, "scenario JSON file")->required();
  app.add_option("--command", command, "propagate | montecarlo | hilbert | uniqueness | validate")
      ->check(CLI::IsMember(sc::kCommands));
  app.add_option("--n", n, "number of Monte Carlo draws");
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--tolerance", tolerance, "normalization tolerance");
  app.add_option("--path-knowledge-reachable", reachable, "resolve contingent layers: true | false")
      ->check(CLI::IsMember({"true", "false"}));
  app.add_option("--out-dir", out_dir, "output directory")->envname("EPISTEMIC_OUT_DIR");
  app.add_flag("--quiet", quiet, "suppress the summary table");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  sc::Overrides o;
  o.command = command;
  o.n = n;
  o.seed = seed;
  o.tolerance = tolerance;
  if (reachable) o.path_knowledge_reachable = *reachable == "true";

  try {
    const auto scenario = sc::load_scenario(path);
    const auto res = sc::run(scenario, o);
    const auto files = sc::write_outputs(res, out_dir.value_or("."));
    if (!quiet) {
      std::cout << res.scenario << ": " << res.command << "\n" << res.summary;
      std::cout << "wrote " << files.csv.string() << "\nwrote " << files.json.string() << "\n";
    }
    if (res.exit_code != 0) std::cerr << "error: " << res.message << "\n";
    return res.exit_code;
  } catch (const epistemic::SchemaError& e) {
    std::cerr << "schema error:\n" << e.what() << "\n";
    return 2;
  } catch (const epistemic::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// Writes a self-contained synthetic workspace (generated samples with
// attention stacks, a toy labelled dataset, prompt spec and pipeline config)
// that `novelseg pipeline` can run end to end.

#include <CLI11.hpp>

#include <iostream>

#include "novelseg/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic demo workspace"};
  std::string out;
  std::uint64_t seed = 1;
  app.add_option("out_dir", out, "Workspace directory")->required();
  app.add_option("--seed", seed, "Fixture seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto ws = novelseg::synthetic::write_demo_workspace(out, seed);
    std::cout << nlohmann::json{{"config", ws.config.generic_string()},
                                {"manifest", ws.manifest.generic_string()},
                                {"samples", ws.samples_dir.generic_string()}}
                     .dump()
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// lab: run experiment manifests and render their reports.
//
//   lab run <manifest.json> [--seed S] [--out-dir DIR] [--threads N]
//   lab render <index.json>
//
// SDLAB_THREADS overrides the thread count unless --threads is given.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "sdlab/lab.hpp"
#include "sdlab/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"form-bounded drift laboratory"};
  app.require_subcommand(1);

  std::string manifest_path, index_path, out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;

  auto* run = app.add_subcommand("run", "run a manifest");
  run->add_option("manifest", manifest_path, "manifest JSON file")->required();
  run->add_option("--seed", seed, "override the manifest seed");
  run->add_option("--out-dir", out_dir, "override the output directory");
  run->add_option("--threads", threads, "worker threads");

  auto* render = app.add_subcommand("render", "render SVG plots from an index");
  render->add_option("index", index_path, "index JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : sdlab::lab::kExitValidation;
  }

  sdlab::apply_thread_env();
  if (threads > 0) sdlab::set_thread_count(threads);

  if (*run) {
    nlohmann::json manifest;
    try {
      std::ifstream in(manifest_path);
      if (!in) {
        std::cerr << "validation error: manifest: cannot open " << manifest_path << "\n";
        return sdlab::lab::kExitValidation;
      }
      manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "validation error: manifest: " << e.what() << "\n";
      return sdlab::lab::kExitValidation;
    }
    sdlab::lab::RunOptions opt;
    opt.seed = seed;
    if (!out_dir.empty()) opt.out_dir = out_dir;
    const auto res = sdlab::lab::run_experiment(manifest, opt);
    (res.exit_code == 0 ? std::cout : std::cerr) << res.message << "\n";
    return res.exit_code;
  }

  try {
    const auto res = sdlab::lab::render_report(index_path);
    for (const auto& p : res.plots) std::cout << "wrote " << p << "\n";
    for (const auto& s : res.skipped) std::cout << "skipped " << s << "\n";
  } catch (const std::exception& e) {
    std::cerr << "render error: " << e.what() << "\n";
    return sdlab::lab::kExitComputation;
  }
  return 0;
}

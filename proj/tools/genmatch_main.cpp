#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "gm/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Markov generative models at desk scale: KFE verification, "
               "exact marginal sampling, and neural-field training"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int threads = 0;

  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "override config seed (u64)");
  app.add_option("--out", out_dir, "override output directory");
  app.add_option("--threads", threads, "worker threads for sampling");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  gm::RunOverrides ov;
  if (seed_set) ov.seed = seed;
  if (!out_dir.empty()) ov.out_dir = out_dir;
  if (threads > 0) ov.threads = threads;
  return gm::run_experiment_file(config_path, ov);
}

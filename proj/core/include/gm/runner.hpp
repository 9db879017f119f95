#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace gm {

// Configuration-driven experiment runner behind the CLI. Commands:
//
//   verify-kfe  residual sweep over every implemented (path, model) cell,
//               JSON report, nonzero exit on any failed cell
//   simulate    sample a model, write samples.csv (+ trajectories.csv) and
//               metrics.json (TV / energy distance against a finite target)
//   train       fit the neural field, write checkpoint.json, loss_curve.csv
//               and field_error.json
//   bench-toy   path x model sweep with exact marginal samplers, one metrics
//               row per cell
//
// Every run writes resolved_config.json (all defaults materialized) next to
// its outputs; re-running from that file reproduces the outputs. Unknown
// config keys are rejected.
//
// Exit codes: 0 pass, 1 config error, 2 verification failure, 3 runtime
// error.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

int run_experiment_json(const std::string& config_text,
                        const RunOverrides& overrides = {});

int run_experiment_file(const std::string& config_path,
                        const RunOverrides& overrides = {});

}  // namespace gm

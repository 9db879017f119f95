#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gm/generators.hpp"
#include "gm/marginal.hpp"
#include "gm/rng.hpp"
#include "gm/state.hpp"

namespace gm {

// Per-step no-jump probability. LinearHazard uses 1 - clamp(h*lambda, 0, 1);
// CondOTSurvival integrates the (1-t)^{-3}-shaped hazard of the
// geometric-average jump over the step:
//   R = exp(0.5 * lambda * (1-t) * (1 - (1-t)^2 / (1-t-h)^2)).
enum class JumpSchedule { LinearHazard, CondOTSurvival };

struct SimConfig {
  int n_steps = 500;
  int n_samples = 1;
  std::uint64_t seed = 0;
  bool record_trajectories = false;
  std::optional<std::pair<double, double>> reflection_bounds;
  JumpSchedule jump_schedule = JumpSchedule::LinearHazard;
  int n_threads = 1;
};

struct TrajPoint {
  int sample = 0;
  int step = 0;
  double t = 0.0;
  State x;
};

struct SimResult {
  std::vector<State> samples;
  std::vector<TrajPoint> trajectories;  // empty unless recorded
  long clamp_count = 0;                 // LinearHazard h*lambda clamps
};

double jump_survival(double lambda, double t, double h);

// Fold into [a1, a2] by repeated boundary reflection.
double reflect(double x, double a1, double a2);

// Sample from e_tok + h * rate_row. Throws StepSizeError when the stay
// probability 1 + h*row[tok] would be negative.
int ctmc_step(int tok, std::span<const double> rate_row, double h, Rng& rng);

// One Euler update: per Euclidean dimension an independent jump mask (jump
// XOR drift-diffusion), per discrete dimension a ctmc step, then reflection.
State euler_step(const State& x, const GenOut& g, double t, double h,
                 JumpSchedule schedule, const std::optional<std::pair<double, double>>& bounds,
                 Rng& rng, long* clamp_count = nullptr);

using FieldFn = std::function<GenOut(double t, const State& x)>;
using PriorFn = std::function<State(Rng& rng)>;

// Walks n_steps-1 Euler updates on the uniform grid, stopping one step short
// of t = 1 (singularity guard); the state at t = 1-h is the sample. With
// n_steps == 1 the single update spans [0,1] with the field evaluated at 0.
// Each trajectory draws from its own (seed, index) stream, so results are
// identical for any n_threads.
SimResult simulate(const FieldFn& field, const PriorFn& prior, const SimConfig& cfg);

// Convenience wrapper: exact posterior-weighted marginal model.
SimResult simulate(const MarginalModel& model, const SimConfig& cfg);

// Schedule choice for a model: survival scheduling whenever the jump part is
// the geometric-average jump.
JumpSchedule pick_jump_schedule(const MarginalModel& model);

}  // namespace gm

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gm/dataset.hpp"
#include "gm/generators.hpp"
#include "gm/grid.hpp"
#include "gm/marginal.hpp"
#include "gm/paths.hpp"
#include "gm/rng.hpp"

namespace gm {

// Smooth scalar probe with analytic first and second derivatives.
struct ScalarTestFn {
  std::string name;
  std::function<double(double)> f, df, d2f;
};

// x, x^2, x^3, exp(-x^2/2), sin(x), sin(2x), tanh(x).
std::vector<ScalarTestFn> test_function_battery();

// Product of per-factor probes on a product state: scalar factors for
// Euclidean dimensions, value tables for discrete dimensions.
struct TestFunction {
  std::vector<ScalarTestFn> real_factors;
  std::vector<std::vector<double>> tok_factors;

  double eval(const State& x) const;
  double partial(const State& x, std::size_t i) const;  // d/dx_i
  double second(const State& x, std::size_t i) const;   // d^2/dx_i^2
  double eval_with_real(const State& x, std::size_t i, double v) const;
  double eval_with_tok(const State& x, std::size_t i, int y) const;

  static TestFunction scalar(const ScalarTestFn& fn);
};

// Universal-representation action:
//   L f(x) = grad f . u + 1/2 sum_i sigma_i^2 f_ii
//          + sum_i lambda_i sum_j probs_ij (f(x[i->c_j]) - f(x))
//          + sum_i sum_{y != tok_i} Q_i(y) (f(x[i->y]) - f(x)).
double apply_generator(const GenOut& g, const TestFunction& f, const State& x);

using CondFieldFn = std::function<GenOut(double t, const State& x)>;

struct ResidualOptions {
  int nodes = 4001;
  bool analytic_dt = true;   // else central finite difference in t
  double fd_step = 1e-4;
  bool reflected_diffusion = false;  // add the boundary flux of the reflected SDE
  std::vector<double> breaks;        // generator kinks in x (quadrature split points)
};

// max_f | d/dt <p_t(.|z), f> - <p_t(.|z), L_t f> | over the battery, for a
// one-dimensional conditional path. Atom point masses enter the time-
// derivative analytically and contribute only jump action (the sigma_min->0
// limits of the mixture flow/diffusion vanish on the atom).
double kfe_residual(const CondPath& path, const CondFieldFn& gen, const State& z,
                    double t, std::span<const ScalarTestFn> fns,
                    const ResidualOptions& opts = {});

struct PairReport {
  std::string path_name;
  std::string model_name;
  double max_residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
  double control_residual = 0.0;  // primary field scaled by 2
  double control_required = 0.0;  // 10x threshold
  bool control_ok = false;
  int nodes = 0;
  int bins = 0;
  std::size_t t_count = 0, z_count = 0, fn_count = 0;
};

// Residual sweep over every implemented (path, conditional generator) cell:
// geometric flow/jump, mixture flow/diffusion/jump, discrete mixture rates,
// and the grid-recovered minimal jump on the mixture path. Sweeps
// t in {0.05,...,0.9} and three conditioning points, with doubled-field
// negative controls.
std::vector<PairReport> kfe_table_suite(int jump_bins = 1024, int nodes = 4001);

// Classic 4-stage Runge-Kutta for the linear marginal ODE of a CTMC,
// dp/dt(y) = sum_x Q(y; x) p(x), with defensive renormalization.
struct CtmcOracleResult {
  std::vector<double> times;
  std::vector<std::vector<double>> probs;
  double max_drift = 0.0;  // largest |1 - sum p| seen before renormalizing
};
CtmcOracleResult ctmc_oracle(
    const std::function<std::vector<std::vector<double>>(double)>& rate_rows,
    std::vector<double> p0, int n_steps, double t_end = 1.0);

// Half the L1 distance between normalized histograms over the given bin
// edges; samples outside the range are clamped into the end bins.
double tv_hist(std::span<const double> a, std::span<const double> b,
               std::span<const double> edges);
// Reference given as analytic mass per bin [edges[i], edges[i+1]).
double tv_hist_ref(std::span<const double> a,
                   const std::function<double(double, double)>& bin_mass,
                   std::span<const double> edges);
double tv_categorical(std::span<const double> p, std::span<const double> q);

// 2 E||a-b|| - E||a-a'|| - E||b-b'|| via U-statistics; each sample set is
// deterministically subsampled to at most 5000 points.
double energy_distance(std::span<const State> a, std::span<const State> b);

// Gradient comparison for a linear-in-parameters velocity model
// F_theta(x,t) = theta . features(x,t): exact-marginal-target gradient vs
// the conditional-target gradient on common draws, squared-error loss.
struct GradEqResult {
  std::vector<double> grad_marginal;
  std::vector<double> grad_conditional;
  double cosine = 0.0;
  double max_gap = 0.0;
  double gap_se = 0.0;  // Monte Carlo standard error of the max-gap coordinate
};
GradEqResult gradient_equality_check(
    const CondPath& path, const Dataset& data, const GenPartsSpec& cond_gen,
    const std::function<std::vector<double>(double x, double t)>& features,
    std::span<const double> theta, std::size_t n_draws, Rng& rng,
    double eps_t = 1e-3);

}  // namespace gm

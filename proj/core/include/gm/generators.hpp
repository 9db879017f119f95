#pragma once

#include <memory>
#include <span>
#include <vector>

#include "gm/grid.hpp"
#include "gm/schedule.hpp"
#include "gm/state.hpp"

namespace gm {

// Shared destination grid for binned jump measures. Centers are inclusive
// linspace over [lo, hi].
struct JumpBins {
  double lo = -1.0, hi = 1.0;
  int count = 0;
  std::shared_ptr<const std::vector<double>> centers;

  static JumpBins make(double lo, double hi, int count);
  bool valid() const { return count > 0 && centers && !centers->empty(); }
};

// Per-dimension jump component: intensity plus a discrete destination
// distribution over a shared support (bin centers, or data atom values).
struct JumpChannel {
  double lambda = 0.0;
  std::shared_ptr<const std::vector<double>> support;
  std::vector<double> probs;
};

// Linear parameterization of a generator: velocity and diagonal diffusion per
// Euclidean dimension, a jump channel per Euclidean dimension, and a rate row
// over the vocabulary per discrete dimension (diagonal entry holds the
// negative off-diagonal sum).
struct GenOut {
  std::vector<double> velocity;
  std::vector<double> diffusion_diag;
  std::vector<JumpChannel> jumps;  // empty, or one per Euclidean dimension
  std::vector<std::vector<double>> discrete_rates;

  std::size_t real_dim() const { return velocity.size(); }
  std::size_t tok_dim() const { return discrete_rates.size(); }
};

// Throws on violated invariants (negative lambda, probs not a simplex, rate
// rows not summing to zero, negative diffusion).
void validate_genout(const GenOut& g);

GenOut zero_genout(std::size_t real_dim, std::size_t tok_dim = 0, int vocab = 0);

// ---- closed-form conditional solutions, per dimension ----

// (z - x) / (1 - t); geometric-average path with the linear schedule.
double condot_flow1(double z, double t, double x);
std::vector<double> condot_flow(std::span<const double> z, double t,
                                std::span<const double> x);

// Quadratic whose positive part drives the jump intensity of the
// geometric-average path: k_t(x) = x^2 - (t+1) x z - (1-t)^2 + t z^2.
double condot_jump_poly(double z, double t, double x);
// Roots of k_t; the intensity vanishes strictly between them.
void condot_jump_roots(double z, double t, double& r1, double& r2);

// lambda = [k_t(x)]_+ / (1-t)^3, destination ~ [-k_t(c)]_+ N(c; tz, (1-t)^2)
// over bin centers. If every unnormalized bin mass vanishes, lambda is forced
// to 0 and the placeholder distribution is uniform.
JumpChannel condot_jump1(double z, double t, double x, const JumpBins& bins);

// Mixture path over Unif[a1,a2]. Velocity with zero flux at both boundaries:
// u = (kdot/(1-k)) * ((a2-a1) 1[x<=z] + x - a2), i.e. kdot(x-a1)/(1-k) below z
// and kdot(x-a2)/(1-k) above.
double mixture_flow1(double z, double t, double x, double a1, double a2,
                     const Schedule& s);

// Driftless solution for the same path; nonnegative, zero at x = z, used with
// boundary reflection.
double mixture_diffusion1(double z, double t, double x, double a1, double a2,
                          const Schedule& s);

// Jump solution on an arbitrary state space: rate kdot/(1-kappa), destination
// exactly z.
struct MixtureJump {
  double lambda = 0.0;
  State target;
};
MixtureJump mixture_jump(const State& z, double t, const Schedule& s);
double mixture_jump_rate(double t, const Schedule& s);

// Rate row for the discrete mixture path: all zeros when x == z, otherwise
// +rate toward z and -rate on the diagonal.
std::vector<double> ctmc_mixture_rates(int z_tok, double t, int x_tok, int vocab,
                                       const Schedule& s);

// Minimal-intensity jump solution recovered from a density path sampled on a
// grid: lambda = [-dp/dt]_+ / p pointwise, destination ~ [dp/dt]_+ integrated
// with trapezoid weights (atoms as point masses).
struct GridDensity {
  std::vector<double> p;     // node values, > 0
  std::vector<double> dpdt;  // node values
  std::vector<double> atom_mass;   // per grid atom
  std::vector<double> atom_dmass;  // per grid atom
};
struct GridJump {
  std::vector<double> lambda_nodes;
  std::vector<double> lambda_atoms;
  std::vector<double> dest_pos;    // grid nodes then atoms
  std::vector<double> dest_probs;  // simplex over dest_pos
  bool stationary = false;         // dp/dt identically zero
};
GridJump jump_from_density_path(const GridDensity& d, const Grid1D& grid);

// Jump channel that puts all mass on one support value (must be present in
// the support, matched exactly).
JumpChannel delta_jump_channel(std::shared_ptr<const std::vector<double>> support,
                               double value, double lambda);

}  // namespace gm

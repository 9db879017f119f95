#pragma once

#include <cstddef>
#include <vector>

#include "gm/dataset.hpp"
#include "gm/rng.hpp"
#include "gm/schedule.hpp"
#include "gm/state.hpp"

namespace gm {

// Conditional probability paths p_t(dx|z), factorized across dimensions:
//
//   MixtureUniform   per dim: kappa_t * delta_z + (1-kappa_t) * Unif[a1,a2]
//   MixtureDiscrete  per dim: kappa_t * delta_z + (1-kappa_t) * Unif{0..N-1}
//   GeometricAverage per dim: x = sigma_t * x0 + alpha_t * z,  x0 ~ N(0,1),
//                    with alpha_t = kappa(t), sigma_t = 1 - kappa(t).
//
// With the linear schedule the geometric average is N(t z, (1-t)^2) per dim.
enum class PathKind { MixtureUniform, MixtureDiscrete, GeometricAverage };

struct CondPath {
  PathKind kind = PathKind::GeometricAverage;
  Schedule schedule = Schedule::linear();
  std::size_t dim = 1;
  double a1 = 0.0, a2 = 1.0;  // MixtureUniform support
  int vocab = 0;              // MixtureDiscrete

  static CondPath mixture_uniform(double a1, double a2, Schedule s, std::size_t dim = 1);
  static CondPath mixture_discrete(int vocab, Schedule s, std::size_t dim = 1);
  static CondPath geometric(Schedule s, std::size_t dim = 1);

  StateSignature signature() const;
  bool discrete() const { return kind == PathKind::MixtureDiscrete; }
};

// One factor of the conditional density, split into its continuous part
// (w.r.t. Lebesgue or counting measure) and the mass of the atom at z.
struct FactorDensity {
  double continuous = 0.0;
  double atom = 0.0;
};

State sample_cond(const CondPath& path, const State& z, double t, Rng& rng);
State sample_prior(const CondPath& path, Rng& rng);

// Euclidean factor; throws SingularityError when the geometric-average
// density degenerates (sigma_t ~ 0).
FactorDensity cond_density(const CondPath& path, double z, double t, double x);
// Discrete factor, against counting measure.
FactorDensity cond_density_tok(const CondPath& path, int z, double t, int x);

// Exact analytic time derivative of each part. Requires t < 1 - 1e-9.
FactorDensity cond_density_dt(const CondPath& path, double z, double t, double x);
FactorDensity cond_density_dt_tok(const CondPath& path, int z, double t, int x);

// Posterior p(z_i | x) over the dataset atoms, proportional to
// w_i * prod_dims p_t(x_dim | z_{i,dim}), computed in log space. For
// continuous mixtures, a coincidence of x with a data atom (|x-z| <= atol)
// dominates every continuous likelihood in that dimension; points are first
// ranked by their number of coincident dimensions and the posterior is
// supported on the top rank.
std::vector<double> posterior_weights(const CondPath& path, const Dataset& data,
                                      double t, const State& x,
                                      double atol = 1e-9);

}  // namespace gm

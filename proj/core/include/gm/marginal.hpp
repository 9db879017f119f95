#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gm/dataset.hpp"
#include "gm/generators.hpp"
#include "gm/paths.hpp"

namespace gm {

enum class GenPart { Flow, Diffusion, Jump, Ctmc };

const char* gen_part_name(GenPart p);

// Which conditional KFE solution(s) parameterize the model, plus the shared
// jump destination support. A list with several parts is a Markov
// superposition applied at the conditional level; weights must be >= 0 and
// sum to 1.
struct GenPartsSpec {
  std::vector<std::pair<GenPart, double>> parts;
  JumpBins bins;  // geometric-average jump destinations
  std::shared_ptr<const std::vector<std::vector<double>>> atom_support;  // mixture jump destinations per dim

  static GenPartsSpec single(GenPart p) { return {{{p, 1.0}}, {}, nullptr}; }
  void validate() const;
};

// Conditional generator output F_t^z(x) for one data point.
GenOut cond_genout(const CondPath& path, const GenPartsSpec& spec, const State& z,
                   double t, const State& x);

struct CombinatorSpec {
  // Weight of the divergence-free Langevin component, applied with the
  // path-matched scale: effective beta_t = langevin_beta * sigma_t^2 with
  // sigma_t = 1 - kappa_t. Any nonnegative weighting preserves marginals;
  // the sigma_t^2 factor keeps explicit Euler stable near t = 1.
  double langevin_beta = 0.0;
  // (a1, a2) with a1 - a2 = 1; the backward generator is the negated flow
  // plus the same Langevin component when langevin_beta > 0.
  std::optional<std::pair<double, double>> predictor_corrector;
};

struct MarginalModel {
  CondPath path;
  Dataset data;
  GenPartsSpec gen;
  CombinatorSpec comb;

  GenOut conditional(const State& z, double t, const State& x) const {
    return cond_genout(path, gen, z, t, x);
  }
  // Posterior-weighted marginal with combinators applied.
  GenOut field(double t, const State& x) const;
};

// Posterior-weighted convex combination of conditional outputs (no
// combinators). Jump measures are averaged as measures and renormalized.
GenOut marginal_genout(const MarginalModel& model, double t, const State& x);

// grad log p_t(x) for the geometric-average marginal over a finite dataset:
// sum_i w_i(x) (kappa z_i - x) / sigma^2 per dimension.
std::vector<double> marginal_score(const CondPath& path, const Dataset& data,
                                   double t, std::span<const double> x);

// log p_t(x) for the geometric-average marginal (finite dataset).
double marginal_log_density(const CondPath& path, const Dataset& data, double t,
                            std::span<const double> x);

// Markov superposition a1*g1 + a2*g2 with a1,a2 >= 0, a1+a2 = 1.
GenOut superpose(const GenOut& g1, const GenOut& g2, double a1, double a2);

// Langevin component: velocity += beta * score, diffusion_diag += 2*beta.
GenOut add_langevin(GenOut g, std::span<const double> score, double beta);

// a1*gF + a2*gB with a1,a2 >= 0, a1 - a2 = 1 (gB solves the KFE in backward
// time).
GenOut predictor_corrector(const GenOut& gF, const GenOut& gB, double a1, double a2);

// Negated velocity; requires a pure flow.
GenOut backward_flow(const GenOut& g);

// Concatenate per-factor generator outputs into one product-space output.
// Each part's fields may have been computed from the full product state.
GenOut product_compose(const std::vector<std::pair<StateSignature, GenOut>>& parts);

}  // namespace gm

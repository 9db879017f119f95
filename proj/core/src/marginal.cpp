#include "gm/marginal.hpp"

#include <algorithm>
#include <cmath>

namespace gm {
namespace {

constexpr double kWeightTol = 1e-12;

bool same_support(const std::shared_ptr<const std::vector<double>>& a,
                  const std::shared_ptr<const std::vector<double>>& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

// Affine combination of generator outputs; callers enforce the weight
// contract. Jump channels are combined as measures on a shared support.
GenOut combine(const GenOut& g1, const GenOut& g2, double a1, double a2) {
  if (g1.real_dim() != g2.real_dim() || g1.tok_dim() != g2.tok_dim())
    throw ShapeError("combine: generator outputs have different shapes");
  GenOut out;
  out.velocity.resize(g1.real_dim());
  for (std::size_t i = 0; i < out.velocity.size(); ++i)
    out.velocity[i] = a1 * g1.velocity[i] + a2 * g2.velocity[i];

  const std::size_t d = g1.real_dim();
  const bool any_diff = !g1.diffusion_diag.empty() || !g2.diffusion_diag.empty();
  if (any_diff) {
    out.diffusion_diag.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double s1 = g1.diffusion_diag.empty() ? 0.0 : g1.diffusion_diag[i];
      const double s2 = g2.diffusion_diag.empty() ? 0.0 : g2.diffusion_diag[i];
      out.diffusion_diag[i] = a1 * s1 + a2 * s2;
    }
  }

  const bool any_jump = !g1.jumps.empty() || !g2.jumps.empty();
  if (any_jump) {
    out.jumps.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      const JumpChannel* c1 = g1.jumps.empty() ? nullptr : &g1.jumps[i];
      const JumpChannel* c2 = g2.jumps.empty() ? nullptr : &g2.jumps[i];
      JumpChannel ch;
      const double l1 = c1 ? a1 * c1->lambda : 0.0;
      const double l2 = c2 ? a2 * c2->lambda : 0.0;
      ch.lambda = l1 + l2;
      ch.support = c1 && c1->support ? c1->support : (c2 ? c2->support : nullptr);
      if (c1 && c1->support && c2 && c2->support &&
          !same_support(c1->support, c2->support))
        throw ShapeError("combine: jump channels do not share a support");
      if (ch.support) {
        ch.probs.assign(ch.support->size(), 0.0);
        if (ch.lambda > 0.0) {
          for (std::size_t j = 0; j < ch.probs.size(); ++j) {
            double q = 0.0;
            if (c1 && l1 > 0.0) q += l1 * c1->probs[j];
            if (c2 && l2 > 0.0) q += l2 * c2->probs[j];
            ch.probs[j] = q / ch.lambda;
          }
        } else {
          std::fill(ch.probs.begin(), ch.probs.end(),
                    1.0 / static_cast<double>(ch.probs.size()));
        }
      }
      out.jumps[i] = std::move(ch);
    }
  }

  if (g1.tok_dim() > 0) {
    out.discrete_rates.resize(g1.tok_dim());
    for (std::size_t i = 0; i < g1.tok_dim(); ++i) {
      if (g1.discrete_rates[i].size() != g2.discrete_rates[i].size())
        throw ShapeError("combine: rate rows have different vocabularies");
      auto& row = out.discrete_rates[i];
      row.resize(g1.discrete_rates[i].size());
      for (std::size_t y = 0; y < row.size(); ++y)
        row[y] = a1 * g1.discrete_rates[i][y] + a2 * g2.discrete_rates[i][y];
    }
  }
  return out;
}

}  // namespace

const char* gen_part_name(GenPart p) {
  switch (p) {
    case GenPart::Flow: return "flow";
    case GenPart::Diffusion: return "diffusion";
    case GenPart::Jump: return "jump";
    case GenPart::Ctmc: return "ctmc";
  }
  return "?";
}

void GenPartsSpec::validate() const {
  if (parts.empty()) throw ContractError("generator spec has no parts");
  double sum = 0.0;
  for (const auto& [p, w] : parts) {
    (void)p;
    if (!(w >= 0.0)) throw ContractError("superposition weight < 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightTol)
    throw ContractError("superposition weights do not sum to 1");
}

GenOut cond_genout(const CondPath& path, const GenPartsSpec& spec, const State& z,
                   double t, const State& x) {
  spec.validate();
  require_match(path.signature(), z, "cond_genout(z)");
  require_match(path.signature(), x, "cond_genout(x)");

  auto one_part = [&](GenPart part) -> GenOut {
    GenOut g = zero_genout(path.signature().real_dim, path.signature().tok_dim(),
                           path.vocab);
    switch (part) {
      case GenPart::Flow:
        if (path.kind == PathKind::GeometricAverage) {
          for (std::size_t i = 0; i < path.dim; ++i)
            g.velocity[i] = condot_flow1(z.real[i], t, x.real[i]);
        } else if (path.kind == PathKind::MixtureUniform) {
          for (std::size_t i = 0; i < path.dim; ++i)
            g.velocity[i] =
                mixture_flow1(z.real[i], t, x.real[i], path.a1, path.a2, path.schedule);
        } else {
          throw UnsupportedError("flow part needs a Euclidean path");
        }
        break;
      case GenPart::Diffusion:
        if (path.kind != PathKind::MixtureUniform)
          throw UnsupportedError(
              "pure-diffusion solution exists only for the uniform mixture path");
        for (std::size_t i = 0; i < path.dim; ++i)
          g.diffusion_diag[i] = mixture_diffusion1(z.real[i], t, x.real[i], path.a1,
                                                   path.a2, path.schedule);
        break;
      case GenPart::Jump:
        if (path.kind == PathKind::GeometricAverage) {
          if (!spec.bins.valid())
            throw ShapeError("jump part needs destination bins");
          g.jumps.resize(path.dim);
          for (std::size_t i = 0; i < path.dim; ++i)
            g.jumps[i] = condot_jump1(z.real[i], t, x.real[i], spec.bins);
        } else if (path.kind == PathKind::MixtureUniform) {
          if (!spec.atom_support || spec.atom_support->size() != path.dim)
            throw ShapeError("mixture jump needs per-dimension atom support");
          const double rate = mixture_jump_rate(t, path.schedule);
          g.jumps.resize(path.dim);
          for (std::size_t i = 0; i < path.dim; ++i) {
            auto sup = std::shared_ptr<const std::vector<double>>(
                spec.atom_support, &(*spec.atom_support)[i]);
            g.jumps[i] = delta_jump_channel(sup, z.real[i], rate);
          }
        } else {
          throw UnsupportedError("jump part needs a Euclidean path");
        }
        break;
      case GenPart::Ctmc:
        if (path.kind != PathKind::MixtureDiscrete)
          throw UnsupportedError("ctmc part needs a discrete mixture path");
        for (std::size_t i = 0; i < path.dim; ++i)
          g.discrete_rates[i] =
              ctmc_mixture_rates(z.tok[i], t, x.tok[i], path.vocab, path.schedule);
        break;
    }
    return g;
  };

  // fold with running relative weights; the final combination equals the
  // absolute one because the weights sum to 1
  GenOut acc = one_part(spec.parts.front().first);
  double wacc = spec.parts.front().second;
  for (std::size_t k = 1; k < spec.parts.size(); ++k) {
    const auto& [part, w] = spec.parts[k];
    const double total = wacc + w;
    if (w <= 0.0) continue;
    acc = combine(acc, one_part(part), wacc / total, w / total);
    wacc = total;
  }
  return acc;
}

namespace {

// pure atom-jump model on the uniform mixture path: the posterior projects
// straight onto the per-dimension destination atoms, no per-point generator
// outputs needed
bool pure_mixture_jump(const MarginalModel& m) {
  if (m.path.kind != PathKind::MixtureUniform) return false;
  if (m.gen.parts.size() != 1 || m.gen.parts[0].first != GenPart::Jump) return false;
  return m.gen.atom_support != nullptr;
}

GenOut mixture_jump_marginal(const MarginalModel& model, double t, const State& x,
                             const std::vector<double>& w) {
  (void)x;  // already folded into the posterior weights
  const double rate = mixture_jump_rate(t, model.path.schedule);
  GenOut g = zero_genout(model.path.dim);
  g.jumps.resize(model.path.dim);
  for (std::size_t d = 0; d < model.path.dim; ++d) {
    const auto& support = (*model.gen.atom_support)[d];
    auto sup = std::shared_ptr<const std::vector<double>>(model.gen.atom_support,
                                                          &support);
    JumpChannel& ch = g.jumps[d];
    ch.lambda = rate;
    ch.support = std::move(sup);
    ch.probs.assign(support.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      const double v = model.data.points[i].real[d];
      const auto it = std::lower_bound(support.begin(), support.end(), v);
      if (it == support.end() || *it != v)
        throw ShapeError("mixture jump: data value missing from support");
      ch.probs[static_cast<std::size_t>(it - support.begin())] += w[i];
    }
  }
  return g;
}

}  // namespace

GenOut marginal_genout(const MarginalModel& model, double t, const State& x) {
  const auto w = posterior_weights(model.path, model.data, t, x);
  if (pure_mixture_jump(model)) return mixture_jump_marginal(model, t, x, w);

  GenOut acc;
  std::vector<std::vector<double>> jump_measure;  // lambda-weighted probs per dim
  bool first = true;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    const GenOut gi = model.conditional(model.data.points[i], t, x);
    if (first) {
      acc = gi;
      for (auto& u : acc.velocity) u *= w[i];
      for (auto& s2 : acc.diffusion_diag) s2 *= w[i];
      for (auto& row : acc.discrete_rates)
        for (auto& r : row) r *= w[i];
      jump_measure.resize(acc.jumps.size());
      for (std::size_t d = 0; d < acc.jumps.size(); ++d) {
        jump_measure[d].assign(acc.jumps[d].probs.size(), 0.0);
        for (std::size_t j = 0; j < jump_measure[d].size(); ++j)
          jump_measure[d][j] = w[i] * gi.jumps[d].lambda * gi.jumps[d].probs[j];
      }
      first = false;
      continue;
    }
    if (gi.real_dim() != acc.real_dim() || gi.tok_dim() != acc.tok_dim())
      throw ShapeError("marginal_genout: conditional outputs disagree in shape");
    for (std::size_t d = 0; d < acc.velocity.size(); ++d)
      acc.velocity[d] += w[i] * gi.velocity[d];
    for (std::size_t d = 0; d < acc.diffusion_diag.size(); ++d)
      acc.diffusion_diag[d] += w[i] * gi.diffusion_diag[d];
    for (std::size_t d = 0; d < acc.jumps.size(); ++d) {
      if (!same_support(acc.jumps[d].support, gi.jumps[d].support))
        throw ShapeError("marginal_genout: jump channels do not share a support");
      for (std::size_t j = 0; j < jump_measure[d].size(); ++j)
        jump_measure[d][j] += w[i] * gi.jumps[d].lambda * gi.jumps[d].probs[j];
    }
    for (std::size_t d = 0; d < acc.discrete_rates.size(); ++d)
      for (std::size_t y = 0; y < acc.discrete_rates[d].size(); ++y)
        acc.discrete_rates[d][y] += w[i] * gi.discrete_rates[d][y];
  }
  if (first) throw EmptyPosteriorError("marginal_genout: empty posterior");
  for (std::size_t d = 0; d < acc.jumps.size(); ++d) {
    double lambda = 0.0;
    for (double q : jump_measure[d]) lambda += q;
    acc.jumps[d].lambda = lambda;
    if (lambda > 0.0) {
      for (std::size_t j = 0; j < jump_measure[d].size(); ++j)
        acc.jumps[d].probs[j] = jump_measure[d][j] / lambda;
    } else {
      std::fill(acc.jumps[d].probs.begin(), acc.jumps[d].probs.end(),
                1.0 / static_cast<double>(std::max<std::size_t>(
                          acc.jumps[d].probs.size(), 1)));
    }
  }
  return acc;
}

std::vector<double> marginal_score(const CondPath& path, const Dataset& data,
                                   double t, std::span<const double> x) {
  if (path.kind != PathKind::GeometricAverage)
    throw UnsupportedError("marginal_score: geometric-average path only");
  if (x.size() != path.dim) throw ShapeError("marginal_score: x size mismatch");
  State xs;
  xs.real.assign(x.begin(), x.end());
  const auto w = posterior_weights(path, data, t, xs);
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  (void)kappa_dot;
  const double var = (1.0 - kappa) * (1.0 - kappa);
  std::vector<double> score(x.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t d = 0; d < x.size(); ++d)
      score[d] += w[i] * (kappa * data.points[i].real[d] - x[d]) / var;
  return score;
}

double marginal_log_density(const CondPath& path, const Dataset& data, double t,
                            std::span<const double> x) {
  if (path.kind != PathKind::GeometricAverage)
    throw UnsupportedError("marginal_log_density: geometric-average path only");
  double best = -HUGE_VAL;
  std::vector<double> logs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double lw = std::log(data.weights[i]);
    for (std::size_t d = 0; d < x.size(); ++d) {
      const auto fd = cond_density(path, data.points[i].real[d], t, x[d]);
      lw += std::log(fd.continuous);
    }
    logs[i] = lw;
    best = std::max(best, lw);
  }
  double s = 0.0;
  for (double lw : logs) s += std::exp(lw - best);
  return best + std::log(s);
}

GenOut superpose(const GenOut& g1, const GenOut& g2, double a1, double a2) {
  if (!(a1 >= 0.0) || !(a2 >= 0.0) || std::abs(a1 + a2 - 1.0) > kWeightTol)
    throw ContractError("superpose: need a1,a2 >= 0 with a1+a2 = 1");
  return combine(g1, g2, a1, a2);
}

GenOut add_langevin(GenOut g, std::span<const double> score, double beta) {
  if (!(beta >= 0.0)) throw ContractError("add_langevin: beta must be >= 0");
  if (score.size() != g.velocity.size())
    throw ShapeError("add_langevin: score size mismatch");
  if (g.diffusion_diag.empty()) g.diffusion_diag.assign(g.velocity.size(), 0.0);
  for (std::size_t i = 0; i < g.velocity.size(); ++i) {
    g.velocity[i] += beta * score[i];
    g.diffusion_diag[i] += 2.0 * beta;
  }
  return g;
}

GenOut predictor_corrector(const GenOut& gF, const GenOut& gB, double a1, double a2) {
  if (!(a1 >= 0.0) || !(a2 >= 0.0) || std::abs(a1 - a2 - 1.0) > kWeightTol)
    throw ContractError("predictor_corrector: need a1,a2 >= 0 with a1-a2 = 1");
  return combine(gF, gB, a1, a2);
}

GenOut backward_flow(const GenOut& g) {
  for (double s2 : g.diffusion_diag)
    if (s2 != 0.0)
      throw UnsupportedError("backward_flow: nonzero diffusion component");
  for (const auto& j : g.jumps)
    if (j.lambda != 0.0) throw UnsupportedError("backward_flow: nonzero jump component");
  for (const auto& row : g.discrete_rates)
    for (double r : row)
      if (r != 0.0) throw UnsupportedError("backward_flow: nonzero rate component");
  GenOut out = g;
  for (double& u : out.velocity) u = -u;
  return out;
}

GenOut product_compose(const std::vector<std::pair<StateSignature, GenOut>>& parts) {
  GenOut out;
  bool any_jump = false;
  bool any_diff = false;
  for (const auto& [sig, g] : parts) {
    if (g.velocity.size() != sig.real_dim)
      throw ShapeError("product_compose: velocity block does not match signature");
    if (!g.diffusion_diag.empty() && g.diffusion_diag.size() != sig.real_dim)
      throw ShapeError("product_compose: diffusion block does not match signature");
    if (!g.jumps.empty() && g.jumps.size() != sig.real_dim)
      throw ShapeError("product_compose: jump block does not match signature");
    if (g.discrete_rates.size() != sig.tok_dim())
      throw ShapeError("product_compose: rate block does not match signature");
    any_jump = any_jump || !g.jumps.empty();
    any_diff = any_diff || !g.diffusion_diag.empty();
  }
  for (const auto& [sig, g] : parts) {
    out.velocity.insert(out.velocity.end(), g.velocity.begin(), g.velocity.end());
    if (any_diff) {
      if (g.diffusion_diag.empty())
        out.diffusion_diag.insert(out.diffusion_diag.end(), sig.real_dim, 0.0);
      else
        out.diffusion_diag.insert(out.diffusion_diag.end(), g.diffusion_diag.begin(),
                                  g.diffusion_diag.end());
    }
    if (any_jump) {
      if (g.jumps.empty())
        out.jumps.insert(out.jumps.end(), sig.real_dim, JumpChannel{});
      else
        out.jumps.insert(out.jumps.end(), g.jumps.begin(), g.jumps.end());
    }
    out.discrete_rates.insert(out.discrete_rates.end(), g.discrete_rates.begin(),
                              g.discrete_rates.end());
  }
  return out;
}

GenOut MarginalModel::field(double t, const State& x) const {
  GenOut g = marginal_genout(*this, t, x);
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  (void)kappa_dot;
  const double sigma = 1.0 - kappa;
  const double beta_t = comb.langevin_beta * sigma * sigma;
  if (comb.predictor_corrector) {
    const auto [a1, a2] = *comb.predictor_corrector;
    GenOut gb = backward_flow(g);
    if (beta_t > 0.0)
      gb = add_langevin(std::move(gb), marginal_score(path, data, t, x.real), beta_t);
    return predictor_corrector(g, gb, a1, a2);
  }
  if (beta_t > 0.0)
    return add_langevin(std::move(g), marginal_score(path, data, t, x.real), beta_t);
  return g;
}

}  // namespace gm

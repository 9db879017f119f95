#include "gm/generators.hpp"

#include <algorithm>
#include <cmath>

namespace gm {
namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
constexpr double kSingularTime = 1.0 - 1e-9;
constexpr double kSingularKappa = 1.0 - 1e-9;

double normal_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * u * u);
}

double require_unsingular_kappa(const Schedule& s, double t, double& kappa_dot) {
  const auto ev = eval_schedule(s, t);
  if (ev.kappa >= kSingularKappa)
    throw SingularityError("mixture formulas need kappa < 1 - 1e-9");
  kappa_dot = ev.kappa_dot;
  return ev.kappa;
}

}  // namespace

JumpBins JumpBins::make(double lo, double hi, int count) {
  if (!(lo < hi) || count < 2) throw DomainError("JumpBins: need lo < hi, count >= 2");
  JumpBins b;
  b.lo = lo;
  b.hi = hi;
  b.count = count;
  auto c = std::make_shared<std::vector<double>>(count);
  const double h = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) (*c)[i] = lo + i * h;
  c->back() = hi;
  b.centers = std::move(c);
  return b;
}

void validate_genout(const GenOut& g) {
  if (!g.diffusion_diag.empty() && g.diffusion_diag.size() != g.velocity.size())
    throw ShapeError("genout: diffusion/velocity size mismatch");
  if (!g.jumps.empty() && g.jumps.size() != g.velocity.size())
    throw ShapeError("genout: jumps/velocity size mismatch");
  for (double s2 : g.diffusion_diag)
    if (!(s2 >= 0.0)) throw DomainError("genout: negative diffusion coefficient");
  for (const auto& j : g.jumps) {
    if (!(j.lambda >= 0.0)) throw DomainError("genout: negative jump intensity");
    if (j.lambda > 0.0) {
      if (!j.support || j.probs.size() != j.support->size())
        throw ShapeError("genout: jump probs/support size mismatch");
      double sum = 0.0;
      for (double p : j.probs) {
        if (!(p >= 0.0)) throw DomainError("genout: negative jump probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw DomainError("genout: jump probabilities do not sum to 1");
    }
  }
  for (const auto& row : g.discrete_rates) {
    double sum = 0.0;
    for (std::size_t y = 0; y < row.size(); ++y) sum += row[y];
    if (std::abs(sum) > 1e-9) throw DomainError("genout: rate row does not sum to 0");
  }
}

GenOut zero_genout(std::size_t real_dim, std::size_t tok_dim, int vocab) {
  GenOut g;
  g.velocity.assign(real_dim, 0.0);
  g.diffusion_diag.assign(real_dim, 0.0);
  if (tok_dim > 0) g.discrete_rates.assign(tok_dim, std::vector<double>(vocab, 0.0));
  return g;
}

double condot_flow1(double z, double t, double x) {
  if (t >= kSingularTime) throw SingularityError("condot_flow: t too close to 1");
  return (z - x) / (1.0 - t);
}

std::vector<double> condot_flow(std::span<const double> z, double t,
                                std::span<const double> x) {
  if (z.size() != x.size()) throw ShapeError("condot_flow: z/x size mismatch");
  std::vector<double> u(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) u[i] = condot_flow1(z[i], t, x[i]);
  return u;
}

double condot_jump_poly(double z, double t, double x) {
  return x * x - (t + 1.0) * x * z - (1.0 - t) * (1.0 - t) + t * z * z;
}

void condot_jump_roots(double z, double t, double& r1, double& r2) {
  const double mid = 0.5 * (t + 1.0) * z;
  const double half = std::abs(1.0 - t) * std::sqrt(0.25 * z * z + 1.0);
  r1 = mid - half;
  r2 = mid + half;
}

JumpChannel condot_jump1(double z, double t, double x, const JumpBins& bins) {
  if (t >= kSingularTime) throw SingularityError("condot_jump: t too close to 1");
  if (!bins.valid()) throw ShapeError("condot_jump: bins not initialized");
  const double omt = 1.0 - t;
  JumpChannel ch;
  ch.support = bins.centers;
  ch.lambda = std::max(condot_jump_poly(z, t, x), 0.0) / (omt * omt * omt);
  const auto& c = *bins.centers;
  ch.probs.resize(c.size());
  double mass = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double m =
        std::max(-condot_jump_poly(z, t, c[j]), 0.0) * normal_pdf(c[j], t * z, omt);
    ch.probs[j] = m;
    mass += m;
  }
  if (mass <= 0.0) {
    // coarse binning missed the destination region; zero the rate rather
    // than jump to an arbitrary bin
    ch.lambda = 0.0;
    std::fill(ch.probs.begin(), ch.probs.end(), 1.0 / static_cast<double>(c.size()));
    return ch;
  }
  for (double& p : ch.probs) p /= mass;
  return ch;
}

double mixture_flow1(double z, double t, double x, double a1, double a2,
                     const Schedule& s) {
  if (!(a1 <= x && x <= a2)) throw DomainError("mixture_flow: x outside [a1,a2]");
  if (!(a1 <= z && z <= a2)) throw DomainError("mixture_flow: z outside [a1,a2]");
  double kappa_dot = 0.0;
  const double kappa = require_unsingular_kappa(s, t, kappa_dot);
  const double ind = x <= z ? 1.0 : 0.0;
  return kappa_dot / (1.0 - kappa) * ((a2 - a1) * ind + x - a2);
}

double mixture_diffusion1(double z, double t, double x, double a1, double a2,
                          const Schedule& s) {
  if (!(a1 <= x && x <= a2)) throw DomainError("mixture_diffusion: x outside [a1,a2]");
  if (!(a1 <= z && z <= a2)) throw DomainError("mixture_diffusion: z outside [a1,a2]");
  double kappa_dot = 0.0;
  const double kappa = require_unsingular_kappa(s, t, kappa_dot);
  const double w = a2 - a1;
  const double g = 0.5 * (z - a1) * (z - a1) / w + std::max(x - z, 0.0) -
                   0.5 * (x - a1) * (x - a1) / w;
  const double s2 = 2.0 * kappa_dot * w / (1.0 - kappa) * g;
  return std::max(s2, 0.0);  // clamp roundoff at the minimum x = z
}

double mixture_jump_rate(double t, const Schedule& s) {
  double kappa_dot = 0.0;
  const double kappa = require_unsingular_kappa(s, t, kappa_dot);
  return kappa_dot / (1.0 - kappa);
}

MixtureJump mixture_jump(const State& z, double t, const Schedule& s) {
  return {mixture_jump_rate(t, s), z};
}

std::vector<double> ctmc_mixture_rates(int z_tok, double t, int x_tok, int vocab,
                                       const Schedule& s) {
  if (z_tok < 0 || z_tok >= vocab || x_tok < 0 || x_tok >= vocab)
    throw DomainError("ctmc_mixture_rates: token out of range");
  std::vector<double> row(vocab, 0.0);
  if (x_tok == z_tok) return row;
  const double rate = mixture_jump_rate(t, s);
  row[z_tok] = rate;
  row[x_tok] = -rate;
  return row;
}

GridJump jump_from_density_path(const GridDensity& d, const Grid1D& grid) {
  const std::size_t n = grid.nodes.size();
  if (d.p.size() != n || d.dpdt.size() != n)
    throw ShapeError("jump_from_density_path: grid/value size mismatch");
  if (d.atom_mass.size() != grid.atoms.size() ||
      d.atom_dmass.size() != grid.atoms.size())
    throw ShapeError("jump_from_density_path: atom channel size mismatch");
  for (double p : d.p)
    if (!(p > 0.0)) throw DomainError("jump_from_density_path: p must be > 0 on grid");
  for (double m : d.atom_mass)
    if (!(m > 0.0)) throw DomainError("jump_from_density_path: atom mass must be > 0");

  GridJump out;
  out.lambda_nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.lambda_nodes[i] = std::max(-d.dpdt[i], 0.0) / d.p[i];
  out.lambda_atoms.resize(grid.atoms.size());
  for (std::size_t a = 0; a < grid.atoms.size(); ++a)
    out.lambda_atoms[a] = std::max(-d.atom_dmass[a], 0.0) / d.atom_mass[a];

  out.dest_pos = grid.nodes;
  out.dest_pos.insert(out.dest_pos.end(), grid.atoms.begin(), grid.atoms.end());
  out.dest_probs.assign(out.dest_pos.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = std::max(d.dpdt[i], 0.0) * grid.weights[i];
    out.dest_probs[i] = m;
    total += m;
  }
  for (std::size_t a = 0; a < grid.atoms.size(); ++a) {
    const double m = std::max(d.atom_dmass[a], 0.0);
    out.dest_probs[n + a] = m;
    total += m;
  }
  if (total <= 0.0) {
    bool moving = false;
    for (double v : out.lambda_nodes) moving = moving || v > 0.0;
    for (double v : out.lambda_atoms) moving = moving || v > 0.0;
    if (moving)
      throw CoverageError(
          "jump_from_density_path: mass leaves the grid but no destination "
          "has positive d/dt; grid does not cover the support");
    out.stationary = true;
    std::fill(out.dest_probs.begin(), out.dest_probs.end(),
              1.0 / static_cast<double>(out.dest_probs.size()));
    return out;
  }
  for (double& p : out.dest_probs) p /= total;
  return out;
}

JumpChannel delta_jump_channel(std::shared_ptr<const std::vector<double>> support,
                               double value, double lambda) {
  if (!support || support->empty())
    throw ShapeError("delta_jump_channel: empty support");
  JumpChannel ch;
  ch.support = std::move(support);
  ch.probs.assign(ch.support->size(), 0.0);
  auto it = std::find(ch.support->begin(), ch.support->end(), value);
  if (it == ch.support->end())
    throw ShapeError("delta_jump_channel: value not in support");
  ch.probs[static_cast<std::size_t>(it - ch.support->begin())] = 1.0;
  ch.lambda = lambda;
  return ch;
}

}  // namespace gm

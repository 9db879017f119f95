#include "gm/paths.hpp"

#include <algorithm>
#include <cmath>

namespace gm {
namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
constexpr double kSingularTime = 1.0 - 1e-9;

double normal_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * u * u);
}

}  // namespace

CondPath CondPath::mixture_uniform(double a1, double a2, Schedule s, std::size_t dim) {
  if (!(a1 < a2)) throw DomainError("mixture_uniform needs a1 < a2");
  CondPath p;
  p.kind = PathKind::MixtureUniform;
  p.schedule = s;
  p.dim = dim;
  p.a1 = a1;
  p.a2 = a2;
  return p;
}

CondPath CondPath::mixture_discrete(int vocab, Schedule s, std::size_t dim) {
  if (vocab < 2) throw DomainError("mixture_discrete needs vocab >= 2");
  CondPath p;
  p.kind = PathKind::MixtureDiscrete;
  p.schedule = s;
  p.dim = dim;
  p.vocab = vocab;
  return p;
}

CondPath CondPath::geometric(Schedule s, std::size_t dim) {
  CondPath p;
  p.kind = PathKind::GeometricAverage;
  p.schedule = s;
  p.dim = dim;
  return p;
}

StateSignature CondPath::signature() const {
  if (kind == PathKind::MixtureDiscrete)
    return StateSignature{0, std::vector<int>(dim, vocab)};
  return StateSignature{dim, {}};
}

State sample_cond(const CondPath& path, const State& z, double t, Rng& rng) {
  require_match(path.signature(), z, "sample_cond");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("sample_cond: t outside [0,1]");
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  (void)kappa_dot;
  State x = z;
  switch (path.kind) {
    case PathKind::MixtureUniform:
      for (std::size_t i = 0; i < path.dim; ++i)
        if (!(rng.uniform() < kappa)) x.real[i] = rng.uniform(path.a1, path.a2);
      break;
    case PathKind::MixtureDiscrete:
      for (std::size_t i = 0; i < path.dim; ++i)
        if (!(rng.uniform() < kappa)) x.tok[i] = rng.uniform_int(path.vocab);
      break;
    case PathKind::GeometricAverage: {
      const double sigma = 1.0 - kappa;
      for (std::size_t i = 0; i < path.dim; ++i)
        x.real[i] = kappa * z.real[i] + sigma * rng.normal();
      break;
    }
  }
  return x;
}

State sample_prior(const CondPath& path, Rng& rng) {
  State x;
  switch (path.kind) {
    case PathKind::MixtureUniform:
      x.real.resize(path.dim);
      for (auto& v : x.real) v = rng.uniform(path.a1, path.a2);
      break;
    case PathKind::MixtureDiscrete:
      x.tok.resize(path.dim);
      for (auto& v : x.tok) v = rng.uniform_int(path.vocab);
      break;
    case PathKind::GeometricAverage:
      x.real.resize(path.dim);
      for (auto& v : x.real) v = rng.normal();
      break;
  }
  return x;
}

FactorDensity cond_density(const CondPath& path, double z, double t, double x) {
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  (void)kappa_dot;
  switch (path.kind) {
    case PathKind::MixtureUniform: {
      const double cont =
          (x >= path.a1 && x <= path.a2) ? (1.0 - kappa) / (path.a2 - path.a1) : 0.0;
      return {cont, kappa};
    }
    case PathKind::GeometricAverage: {
      const double sigma = 1.0 - kappa;
      if (sigma < 1e-9)
        throw SingularityError("cond_density: degenerate geometric-average density at t ~ 1");
      return {normal_pdf(x, kappa * z, sigma), 0.0};
    }
    case PathKind::MixtureDiscrete:
      throw ShapeError("cond_density: discrete factor needs cond_density_tok");
  }
  throw ShapeError("unreachable");
}

FactorDensity cond_density_tok(const CondPath& path, int z, double t, int x) {
  if (path.kind != PathKind::MixtureDiscrete)
    throw ShapeError("cond_density_tok: not a discrete path");
  if (x < 0 || x >= path.vocab || z < 0 || z >= path.vocab)
    throw DomainError("cond_density_tok: token out of range");
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  (void)kappa_dot;
  return {(1.0 - kappa) / path.vocab, x == z ? kappa : 0.0};
}

FactorDensity cond_density_dt(const CondPath& path, double z, double t, double x) {
  if (t >= kSingularTime) throw SingularityError("cond_density_dt: t too close to 1");
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  switch (path.kind) {
    case PathKind::MixtureUniform: {
      const double p0 =
          (x >= path.a1 && x <= path.a2) ? 1.0 / (path.a2 - path.a1) : 0.0;
      return {-kappa_dot * p0, kappa_dot};
    }
    case PathKind::GeometricAverage: {
      // d/dt log N(x; kappa z, (1-kappa)^2) with mean' = kappa_dot z and
      // sd' = -kappa_dot; for the linear schedule this reduces to
      // N * [(1-t)^{-1} - (x-tz)(x-z)/(1-t)^3].
      const double sigma = 1.0 - kappa;
      const double r = x - kappa * z;
      const double n = normal_pdf(x, kappa * z, sigma);
      const double dlog = kappa_dot / sigma + r * kappa_dot * z / (sigma * sigma) -
                          r * r * kappa_dot / (sigma * sigma * sigma);
      return {n * dlog, 0.0};
    }
    case PathKind::MixtureDiscrete:
      throw ShapeError("cond_density_dt: discrete factor needs cond_density_dt_tok");
  }
  throw ShapeError("unreachable");
}

FactorDensity cond_density_dt_tok(const CondPath& path, int z, double t, int x) {
  if (t >= kSingularTime) throw SingularityError("cond_density_dt_tok: t too close to 1");
  if (path.kind != PathKind::MixtureDiscrete)
    throw ShapeError("cond_density_dt_tok: not a discrete path");
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  (void)kappa;
  return {-kappa_dot / path.vocab, x == z ? kappa_dot : 0.0};
}

std::vector<double> posterior_weights(const CondPath& path, const Dataset& data,
                                      double t, const State& x, double atol) {
  require_match(path.signature(), x, "posterior_weights");
  if (!(t >= 0.0 && t < 1.0)) throw DomainError("posterior_weights: t outside [0,1)");
  data.validate();

  const std::size_t n = data.size();
  std::vector<int> atom_hits(n, 0);
  std::vector<double> logw(n, 0.0);
  const auto [kappa, kappa_dot] = eval_schedule(path.schedule, t);
  (void)kappa_dot;
  // mixture factors take only two values per dimension; fold their logs once
  const double log_atom = kappa > 0.0 ? std::log(kappa) : -HUGE_VAL;
  double log_cont_mix = -HUGE_VAL;
  if (path.kind == PathKind::MixtureUniform && kappa < 1.0)
    log_cont_mix = std::log((1.0 - kappa) / (path.a2 - path.a1));

  for (std::size_t i = 0; i < n; ++i) {
    const State& z = data.points[i];
    double lw = std::log(data.weights[i] > 0 ? data.weights[i] : 0.0);
    bool dead = data.weights[i] <= 0.0;
    switch (path.kind) {
      case PathKind::GeometricAverage:
        for (std::size_t d = 0; d < path.dim && !dead; ++d) {
          const auto fd = cond_density(path, z.real[d], t, x.real[d]);
          if (fd.continuous <= 0.0)
            dead = true;
          else
            lw += std::log(fd.continuous);
        }
        break;
      case PathKind::MixtureUniform:
        for (std::size_t d = 0; d < path.dim && !dead; ++d) {
          if (std::abs(x.real[d] - z.real[d]) <= atol) {
            // the atom mass dominates any continuous density in this factor
            ++atom_hits[i];
            if (kappa <= 0.0)
              dead = true;
            else
              lw += log_atom;
          } else if (x.real[d] >= path.a1 && x.real[d] <= path.a2 &&
                     log_cont_mix > -HUGE_VAL) {
            lw += log_cont_mix;
          } else {
            dead = true;
          }
        }
        break;
      case PathKind::MixtureDiscrete:
        for (std::size_t d = 0; d < path.dim && !dead; ++d) {
          const double lk =
              (1.0 - kappa) / path.vocab + (x.tok[d] == z.tok[d] ? kappa : 0.0);
          if (lk <= 0.0)
            dead = true;
          else
            lw += std::log(lk);
        }
        break;
    }
    logw[i] = dead ? -HUGE_VAL : lw;
  }

  int best_hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (logw[i] > -HUGE_VAL) best_hits = std::max(best_hits, atom_hits[i]);

  double maxlog = -HUGE_VAL;
  for (std::size_t i = 0; i < n; ++i)
    if (atom_hits[i] == best_hits) maxlog = std::max(maxlog, logw[i]);
  if (maxlog == -HUGE_VAL)
    throw EmptyPosteriorError("posterior_weights: all likelihoods are zero");

  std::vector<double> w(n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (atom_hits[i] != best_hits || logw[i] == -HUGE_VAL) continue;
    w[i] = std::exp(logw[i] - maxlog);
    sum += w[i];
  }
  for (double& wi : w) wi /= sum;
  return w;
}

}  // namespace gm

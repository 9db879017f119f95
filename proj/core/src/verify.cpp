#include "gm/verify.hpp"

#include <algorithm>
#include <cmath>

namespace gm {
namespace {

constexpr double kNudge = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Trapezoid integration split at interior breakpoints; evaluation points are
// nudged off the breakpoints so piecewise-defined integrands are sampled
// one-sided.
double integrate_piecewise(double lo, double hi, std::span<const double> breaks,
                           int total_nodes,
                           const std::function<double(double)>& fn) {
  std::vector<double> cuts{lo, hi};
  for (double b : breaks)
    if (b > lo && b < hi) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  const double eps = kNudge * (hi - lo);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    if (!(b > a)) continue;
    const int n = std::max(
        9, static_cast<int>(std::llround(total_nodes * (b - a) / (hi - lo))));
    const double h = (b - a) / (n - 1);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = a + i * h;
      const double xe = std::clamp(x, a + eps, b - eps);
      const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
      acc += w * fn(xe);
    }
    total += acc;
  }
  return total;
}

}  // namespace

std::vector<ScalarTestFn> test_function_battery() {
  std::vector<ScalarTestFn> fns;
  fns.push_back({"x", [](double x) { return x; }, [](double) { return 1.0; },
                 [](double) { return 0.0; }});
  fns.push_back({"x^2", [](double x) { return x * x; },
                 [](double x) { return 2.0 * x; }, [](double) { return 2.0; }});
  fns.push_back({"x^3", [](double x) { return x * x * x; },
                 [](double x) { return 3.0 * x * x; },
                 [](double x) { return 6.0 * x; }});
  fns.push_back({"gauss", [](double x) { return std::exp(-0.5 * x * x); },
                 [](double x) { return -x * std::exp(-0.5 * x * x); },
                 [](double x) { return (x * x - 1.0) * std::exp(-0.5 * x * x); }});
  fns.push_back({"sin_x", [](double x) { return std::sin(x); },
                 [](double x) { return std::cos(x); },
                 [](double x) { return -std::sin(x); }});
  fns.push_back({"sin_2x", [](double x) { return std::sin(2.0 * x); },
                 [](double x) { return 2.0 * std::cos(2.0 * x); },
                 [](double x) { return -4.0 * std::sin(2.0 * x); }});
  fns.push_back({"tanh_x", [](double x) { return std::tanh(x); },
                 [](double x) {
                   const double c = std::cosh(x);
                   return 1.0 / (c * c);
                 },
                 [](double x) {
                   const double th = std::tanh(x);
                   return -2.0 * th * (1.0 - th * th);
                 }});
  return fns;
}

TestFunction TestFunction::scalar(const ScalarTestFn& fn) {
  TestFunction t;
  t.real_factors.push_back(fn);
  return t;
}

double TestFunction::eval(const State& x) const {
  double v = 1.0;
  for (std::size_t i = 0; i < real_factors.size(); ++i)
    v *= real_factors[i].f(x.real[i]);
  for (std::size_t i = 0; i < tok_factors.size(); ++i)
    v *= tok_factors[i][static_cast<std::size_t>(x.tok[i])];
  return v;
}

double TestFunction::partial(const State& x, std::size_t i) const {
  double v = real_factors[i].df(x.real[i]);
  for (std::size_t k = 0; k < real_factors.size(); ++k)
    if (k != i) v *= real_factors[k].f(x.real[k]);
  for (std::size_t k = 0; k < tok_factors.size(); ++k)
    v *= tok_factors[k][static_cast<std::size_t>(x.tok[k])];
  return v;
}

double TestFunction::second(const State& x, std::size_t i) const {
  double v = real_factors[i].d2f(x.real[i]);
  for (std::size_t k = 0; k < real_factors.size(); ++k)
    if (k != i) v *= real_factors[k].f(x.real[k]);
  for (std::size_t k = 0; k < tok_factors.size(); ++k)
    v *= tok_factors[k][static_cast<std::size_t>(x.tok[k])];
  return v;
}

double TestFunction::eval_with_real(const State& x, std::size_t i, double v) const {
  double out = real_factors[i].f(v);
  for (std::size_t k = 0; k < real_factors.size(); ++k)
    if (k != i) out *= real_factors[k].f(x.real[k]);
  for (std::size_t k = 0; k < tok_factors.size(); ++k)
    out *= tok_factors[k][static_cast<std::size_t>(x.tok[k])];
  return out;
}

double TestFunction::eval_with_tok(const State& x, std::size_t i, int y) const {
  double out = tok_factors[i][static_cast<std::size_t>(y)];
  for (std::size_t k = 0; k < real_factors.size(); ++k)
    out *= real_factors[k].f(x.real[k]);
  for (std::size_t k = 0; k < tok_factors.size(); ++k)
    if (k != i) out *= tok_factors[k][static_cast<std::size_t>(x.tok[k])];
  return out;
}

double apply_generator(const GenOut& g, const TestFunction& f, const State& x) {
  if (f.real_factors.size() != x.real.size() || f.tok_factors.size() != x.tok.size())
    throw ShapeError("apply_generator: probe does not match state");
  if (g.real_dim() != x.real.size() || g.tok_dim() != x.tok.size())
    throw ShapeError("apply_generator: generator does not match state");
  double out = 0.0;
  for (std::size_t i = 0; i < x.real.size(); ++i) {
    out += g.velocity[i] * f.partial(x, i);
    if (!g.diffusion_diag.empty())
      out += 0.5 * g.diffusion_diag[i] * f.second(x, i);
    if (!g.jumps.empty() && g.jumps[i].lambda > 0.0) {
      const JumpChannel& ch = g.jumps[i];
      const double fx = f.eval(x);
      double e = 0.0;
      for (std::size_t j = 0; j < ch.probs.size(); ++j)
        if (ch.probs[j] > 0.0)
          e += ch.probs[j] * f.eval_with_real(x, i, (*ch.support)[j]);
      out += ch.lambda * (e - fx);
    }
  }
  for (std::size_t i = 0; i < x.tok.size(); ++i) {
    const auto& row = g.discrete_rates[i];
    const double fx = f.eval(x);
    for (std::size_t y = 0; y < row.size(); ++y) {
      if (static_cast<int>(y) == x.tok[i]) continue;
      if (row[y] != 0.0) out += row[y] * (f.eval_with_tok(x, i, static_cast<int>(y)) - fx);
    }
  }
  return out;
}

namespace {

// jump action only (atom point masses do not feel drift or diffusion)
double jump_action(const GenOut& g, const TestFunction& f, const State& x) {
  GenOut j;
  j.velocity.assign(g.real_dim(), 0.0);
  j.jumps = g.jumps;
  if (x.tok.size()) j.discrete_rates = g.discrete_rates;
  return apply_generator(j, f, x);
}

struct PathSlice {
  double lo = 0.0, hi = 0.0;
  bool has_atom = false;
  double atom_pos = 0.0;
};

PathSlice effective_support(const CondPath& path, const State& z, double t) {
  PathSlice s;
  if (path.kind == PathKind::GeometricAverage) {
    const auto ev = eval_schedule(path.schedule, t);
    const double m = ev.kappa * z.real[0];
    const double sd = 1.0 - ev.kappa;
    s.lo = m - 8.0 * sd;
    s.hi = m + 8.0 * sd;
  } else {
    s.lo = path.a1;
    s.hi = path.a2;
    s.has_atom = true;
    s.atom_pos = z.real[0];
  }
  return s;
}

double expect_dt(const CondPath& path, const State& z, double t,
                 const ScalarTestFn& fn, const ResidualOptions& opts,
                 const PathSlice& sl) {
  if (opts.analytic_dt) {
    if (path.kind == PathKind::MixtureUniform) {
      const auto ev = eval_schedule(path.schedule, t);
      const double e0 = integrate_piecewise(
          sl.lo, sl.hi, opts.breaks, opts.nodes,
          [&](double x) { return fn.f(x) / (path.a2 - path.a1); });
      return ev.kappa_dot * (fn.f(z.real[0]) - e0);
    }
    return integrate_piecewise(sl.lo, sl.hi, opts.breaks, opts.nodes, [&](double x) {
      return cond_density_dt(path, z.real[0], t, x).continuous * fn.f(x);
    });
  }
  // central difference of <p_t, f> in t on a frozen grid
  auto expect_at = [&](double tt) {
    double v = integrate_piecewise(sl.lo, sl.hi, opts.breaks, opts.nodes, [&](double x) {
      return cond_density(path, z.real[0], tt, x).continuous * fn.f(x);
    });
    if (sl.has_atom) {
      const auto ev = eval_schedule(path.schedule, tt);
      v += ev.kappa * fn.f(sl.atom_pos);
    }
    return v;
  };
  return (expect_at(t + opts.fd_step) - expect_at(t - opts.fd_step)) /
         (2.0 * opts.fd_step);
}

}  // namespace

double kfe_residual(const CondPath& path, const CondFieldFn& gen, const State& z,
                    double t, std::span<const ScalarTestFn> fns,
                    const ResidualOptions& opts) {
  if (!(t >= 0.05 - 1e-12 && t <= 0.9 + 1e-12))
    throw DomainError("kfe_residual: t outside the [0.05, 0.9] guard");
  require_match(path.signature(), z, "kfe_residual");

  // discrete 1d path: sums instead of quadrature
  if (path.kind == PathKind::MixtureDiscrete) {
    if (path.dim != 1) throw ShapeError("kfe_residual: dim != 1");
    double worst = 0.0;
    for (const auto& fn : fns) {
      double dt_side = 0.0, action = 0.0;
      for (int y = 0; y < path.vocab; ++y) {
        const double fy = fn.f(static_cast<double>(y));
        const auto dd = cond_density_dt_tok(path, z.tok[0], t, y);
        dt_side += (dd.continuous + dd.atom) * fy;
        const auto pd = cond_density_tok(path, z.tok[0], t, y);
        State xs{{}, {y}};
        const GenOut g = gen(t, xs);
        TestFunction tf;
        std::vector<double> table(path.vocab);
        for (int yy = 0; yy < path.vocab; ++yy)
          table[yy] = fn.f(static_cast<double>(yy));
        tf.tok_factors.push_back(std::move(table));
        action += (pd.continuous + pd.atom) * apply_generator(g, tf, xs);
      }
      worst = std::max(worst, std::abs(dt_side - action));
    }
    return worst;
  }

  if (path.dim != 1) throw ShapeError("kfe_residual: dim != 1");
  const PathSlice sl = effective_support(path, z, t);
  const auto ev = eval_schedule(path.schedule, t);

  // shared node/weight list (piecewise trapezoid, nudged off breakpoints) so
  // the generator is evaluated once per node across the whole battery
  std::vector<double> cuts{sl.lo, sl.hi};
  for (double b : opts.breaks)
    if (b > sl.lo && b < sl.hi) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  const double eps = kNudge * (sl.hi - sl.lo);
  std::vector<double> xs_nodes, ws_nodes;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    if (!(b > a)) continue;
    const int n = std::max(
        9, static_cast<int>(std::llround(opts.nodes * (b - a) / (sl.hi - sl.lo))));
    const double h = (b - a) / (n - 1);
    for (int i = 0; i < n; ++i) {
      xs_nodes.push_back(std::clamp(a + i * h, a + eps, b - eps));
      ws_nodes.push_back((i == 0 || i == n - 1) ? 0.5 * h : h);
    }
  }

  std::vector<GenOut> gens(xs_nodes.size());
  std::vector<double> dens(xs_nodes.size());
  for (std::size_t i = 0; i < xs_nodes.size(); ++i) {
    const State xs{{xs_nodes[i]}, {}};
    gens[i] = gen(t, xs);
    dens[i] = cond_density(path, z.real[0], t, xs_nodes[i]).continuous;
  }

  double worst = 0.0;
  for (const auto& fn : fns) {
    const double dt_side = expect_dt(path, z, t, fn, opts, sl);

    // probe values over each distinct jump support
    const std::vector<double>* support = nullptr;
    std::vector<double> fvals;
    auto expected_jump_value = [&](const JumpChannel& ch) {
      if (ch.support.get() != support) {
        support = ch.support.get();
        fvals.resize(support->size());
        for (std::size_t j = 0; j < fvals.size(); ++j) fvals[j] = fn.f((*support)[j]);
      }
      double e = 0.0;
      for (std::size_t j = 0; j < ch.probs.size(); ++j)
        e += ch.probs[j] * fvals[j];
      return e;
    };

    double action = 0.0;
    for (std::size_t i = 0; i < xs_nodes.size(); ++i) {
      if (dens[i] <= 0.0) continue;
      const GenOut& g = gens[i];
      const double x = xs_nodes[i];
      double lf = g.velocity[0] * fn.df(x);
      if (!g.diffusion_diag.empty()) lf += 0.5 * g.diffusion_diag[0] * fn.d2f(x);
      if (!g.jumps.empty() && g.jumps[0].lambda > 0.0)
        lf += g.jumps[0].lambda * (expected_jump_value(g.jumps[0]) - fn.f(x));
      action += ws_nodes[i] * dens[i] * lf;
    }
    if (sl.has_atom) {
      State za{{sl.atom_pos}, {}};
      action += ev.kappa * jump_action(gen(t, za), TestFunction::scalar(fn), za);
    }
    if (opts.reflected_diffusion) {
      // reflected SDE: <p, Lf> picks up -[f' * 1/2 sigma^2 p]_{a1}^{a2}
      auto flux = [&](double x) {
        State xs{{x}, {}};
        const GenOut g = gen(t, xs);
        const double s2 = g.diffusion_diag.empty() ? 0.0 : g.diffusion_diag[0];
        return fn.df(x) * 0.5 * s2 * cond_density(path, z.real[0], t, x).continuous;
      };
      action -= flux(sl.hi) - flux(sl.lo);
    }
    worst = std::max(worst, std::abs(dt_side - action));
  }
  return worst;
}

CtmcOracleResult ctmc_oracle(
    const std::function<std::vector<std::vector<double>>(double)>& rate_rows,
    std::vector<double> p0, int n_steps, double t_end) {
  if (n_steps < 1) throw DomainError("ctmc_oracle: n_steps >= 1");
  const std::size_t n = p0.size();
  auto deriv = [&](double t, const std::vector<double>& p) {
    const auto rows = rate_rows(t);
    if (rows.size() != n) throw ShapeError("ctmc_oracle: rate matrix size");
    std::vector<double> d(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      double rsum = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        d[y] += rows[x][y] * p[x];
        rsum += rows[x][y];
      }
      if (std::abs(rsum) > 1e-9)
        throw DomainError("ctmc_oracle: rate row does not sum to 0");
    }
    return d;
  };

  CtmcOracleResult res;
  res.times.resize(n_steps + 1);
  res.probs.resize(n_steps + 1);
  const double h = t_end / n_steps;
  std::vector<double> p = std::move(p0);
  res.times[0] = 0.0;
  res.probs[0] = p;
  for (int s = 0; s < n_steps; ++s) {
    const double t = s * h;
    const auto k1 = deriv(t, p);
    std::vector<double> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
    const auto k2 = deriv(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
    const auto k3 = deriv(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + h * k3[i];
    const auto k4 = deriv(t + h, tmp);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (p[i] < -1e-9)
        throw InstabilityError("ctmc_oracle: negative probability, refine n_steps");
      p[i] = std::max(p[i], 0.0);
      sum += p[i];
    }
    res.max_drift = std::max(res.max_drift, std::abs(1.0 - sum));
    for (double& v : p) v /= sum;
    res.times[s + 1] = (s + 1) * h;
    res.probs[s + 1] = p;
  }
  return res;
}

namespace {

std::vector<double> hist_counts(std::span<const double> a,
                                std::span<const double> edges) {
  const std::size_t nb = edges.size() - 1;
  std::vector<double> h(nb, 0.0);
  for (double x : a) {
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    std::size_t idx;
    if (it == edges.begin())
      idx = 0;
    else if (it == edges.end())
      idx = nb - 1;
    else
      idx = static_cast<std::size_t>(it - edges.begin()) - 1;
    h[std::min(idx, nb - 1)] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(a.size());
  return h;
}

void check_hist_args(std::span<const double> a, std::span<const double> edges) {
  if (edges.size() < 2) throw DomainError("tv_hist: empty bin edges");
  if (a.size() < 1000) throw DomainError("tv_hist: need >= 1000 samples");
}

}  // namespace

double tv_hist(std::span<const double> a, std::span<const double> b,
               std::span<const double> edges) {
  check_hist_args(a, edges);
  check_hist_args(b, edges);
  const auto ha = hist_counts(a, edges);
  const auto hb = hist_counts(b, edges);
  return tv_categorical(ha, hb);
}

double tv_hist_ref(std::span<const double> a,
                   const std::function<double(double, double)>& bin_mass,
                   std::span<const double> edges) {
  check_hist_args(a, edges);
  const auto ha = hist_counts(a, edges);
  std::vector<double> hb(edges.size() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    hb[i] = bin_mass(edges[i], edges[i + 1]);
    total += hb[i];
  }
  if (!(total > 0.0)) throw DomainError("tv_hist_ref: zero reference mass");
  for (double& v : hb) v /= total;
  return tv_categorical(ha, hb);
}

double tv_categorical(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("tv: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double energy_distance(std::span<const State> a, std::span<const State> b) {
  if (a.empty() || b.empty()) throw DomainError("energy_distance: empty input");
  constexpr std::size_t kCap = 5000;
  auto subsample = [](std::span<const State> s) {
    std::vector<const State*> out;
    const std::size_t stride = s.size() <= kCap ? 1 : (s.size() + kCap - 1) / kCap;
    for (std::size_t i = 0; i < s.size(); i += stride) out.push_back(&s[i]);
    return out;
  };
  const auto sa = subsample(a);
  const auto sb = subsample(b);
  auto dist = [](const State& x, const State& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.real.size(); ++i) {
      const double d = x.real[i] - y.real[i];
      s += d * d;
    }
    return std::sqrt(s);
  };
  auto cross = [&](const auto& u, const auto& v) {
    double s = 0.0;
    for (const State* x : u)
      for (const State* y : v) s += dist(*x, *y);
    return s / (static_cast<double>(u.size()) * static_cast<double>(v.size()));
  };
  auto within = [&](const auto& u) {
    if (u.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = i + 1; j < u.size(); ++j) s += dist(*u[i], *u[j]);
    return 2.0 * s / (static_cast<double>(u.size()) * static_cast<double>(u.size() - 1));
  };
  return 2.0 * cross(sa, sb) - within(sa) - within(sb);
}

GradEqResult gradient_equality_check(
    const CondPath& path, const Dataset& data, const GenPartsSpec& cond_gen,
    const std::function<std::vector<double>(double x, double t)>& features,
    std::span<const double> theta, std::size_t n_draws, Rng& rng, double eps_t) {
  if (path.dim != 1) throw ShapeError("gradient_equality_check: 1d only");
  const std::size_t k = theta.size();
  GradEqResult res;
  res.grad_marginal.assign(k, 0.0);
  res.grad_conditional.assign(k, 0.0);
  std::vector<double> diff_sum(k, 0.0), diff_sq(k, 0.0);

  MarginalModel model{path, data, cond_gen, {}};
  for (std::size_t s = 0; s < n_draws; ++s) {
    const double t = rng.uniform(eps_t, 1.0 - eps_t);
    const auto zi = static_cast<std::size_t>(rng.categorical(data.weights));
    const State x = sample_cond(path, data.points[zi], t, rng);
    const auto phi = features(x.real[0], t);
    if (phi.size() != k) throw ShapeError("gradient_equality_check: feature size");
    const double pred = dot(phi, theta);
    const double u_cond = cond_genout(path, cond_gen, data.points[zi], t, x).velocity[0];
    const double u_marg = marginal_genout(model, t, x).velocity[0];
    for (std::size_t i = 0; i < k; ++i) {
      const double gc = 2.0 * (pred - u_cond) * phi[i];
      const double gmg = 2.0 * (pred - u_marg) * phi[i];
      res.grad_conditional[i] += gc;
      res.grad_marginal[i] += gmg;
      const double d = gc - gmg;
      diff_sum[i] += d;
      diff_sq[i] += d * d;
    }
  }
  const double inv = 1.0 / static_cast<double>(n_draws);
  for (std::size_t i = 0; i < k; ++i) {
    res.grad_conditional[i] *= inv;
    res.grad_marginal[i] *= inv;
  }
  double na = 0.0, nb = 0.0, ab = 0.0;
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < k; ++i) {
    na += res.grad_marginal[i] * res.grad_marginal[i];
    nb += res.grad_conditional[i] * res.grad_conditional[i];
    ab += res.grad_marginal[i] * res.grad_conditional[i];
    const double gap = std::abs(res.grad_conditional[i] - res.grad_marginal[i]);
    if (gap > res.max_gap) {
      res.max_gap = gap;
      argmax = i;
    }
  }
  res.cosine = ab / (std::sqrt(na) * std::sqrt(nb) + 1e-300);
  const double mean_d = diff_sum[argmax] * inv;
  const double var_d = std::max(diff_sq[argmax] * inv - mean_d * mean_d, 0.0);
  res.gap_se = std::sqrt(var_d * inv);
  return res;
}

namespace {

// negative-control transform: double the pair's primary field
CondFieldFn scale_primary(const CondFieldFn& gen, double factor) {
  return [gen, factor](double t, const State& x) {
    GenOut g = gen(t, x);
    bool scaled = false;
    for (auto& j : g.jumps)
      if (j.lambda > 0.0) {
        j.lambda *= factor;
        scaled = true;
      }
    for (auto& row : g.discrete_rates)
      for (double& r : row)
        if (r != 0.0) {
          r *= factor;
          scaled = true;
        }
    if (!g.diffusion_diag.empty())
      for (double& s2 : g.diffusion_diag)
        if (s2 != 0.0) {
          s2 *= factor;
          scaled = true;
        }
    if (!scaled)
      for (double& u : g.velocity) u *= factor;
    return g;
  };
}

}  // namespace

std::vector<PairReport> kfe_table_suite(int jump_bins, int nodes) {
  const auto battery = test_function_battery();
  std::vector<double> ts;
  for (int i = 1; i <= 18; ++i) ts.push_back(0.05 * i);

  const Schedule lin = Schedule::linear();
  const CondPath geo = CondPath::geometric(lin, 1);
  const double ma1 = -1.5, ma2 = 2.0;
  const CondPath mix = CondPath::mixture_uniform(ma1, ma2, lin, 1);
  const CondPath disc = CondPath::mixture_discrete(5, lin, 1);
  const std::vector<State> zs_euclid = {State{{-1.0}, {}}, State{{0.0}, {}},
                                        State{{1.5}, {}}};
  const std::vector<State> zs_tok = {State{{}, {0}}, State{{}, {2}}, State{{}, {4}}};
  const JumpBins bins = JumpBins::make(-2.5, 2.5, jump_bins);
  auto atom_support = std::make_shared<std::vector<std::vector<double>>>(
      std::vector<std::vector<double>>{{-1.0, 0.0, 1.5}});

  std::vector<PairReport> reports;

  auto run_pair = [&](const std::string& path_name, const std::string& model_name,
                      const CondPath& path, const std::vector<State>& zs,
                      const std::function<CondFieldFn(const State&)>& make_gen,
                      double threshold,
                      const std::function<ResidualOptions(const State&, double)>& make_opts,
                      int used_bins) {
    PairReport rep;
    rep.path_name = path_name;
    rep.model_name = model_name;
    rep.threshold = threshold;
    rep.control_required = 10.0 * threshold;
    rep.nodes = nodes;
    rep.bins = used_bins;
    rep.t_count = ts.size();
    rep.z_count = zs.size();
    rep.fn_count = battery.size();
    for (const State& z : zs) {
      const CondFieldFn gen = make_gen(z);
      const CondFieldFn bad = scale_primary(gen, 2.0);
      for (double t : ts) {
        const ResidualOptions opts = make_opts(z, t);
        rep.max_residual =
            std::max(rep.max_residual, kfe_residual(path, gen, z, t, battery, opts));
        rep.control_residual =
            std::max(rep.control_residual, kfe_residual(path, bad, z, t, battery, opts));
      }
    }
    rep.pass = rep.max_residual <= rep.threshold;
    rep.control_ok = rep.control_residual >= rep.control_required;
    reports.push_back(rep);
  };

  auto plain_opts = [&](const State&, double) {
    ResidualOptions o;
    o.nodes = nodes;
    return o;
  };

  run_pair("geometric", "flow", geo, zs_euclid,
           [&](const State& z) -> CondFieldFn {
             const double zv = z.real[0];
             return [zv](double t, const State& x) {
               GenOut g = zero_genout(1);
               g.velocity[0] = condot_flow1(zv, t, x.real[0]);
               return g;
             };
           },
           1e-4, plain_opts, 0);

  run_pair("geometric", "jump", geo, zs_euclid,
           [&](const State& z) -> CondFieldFn {
             const double zv = z.real[0];
             return [zv, bins](double t, const State& x) {
               GenOut g = zero_genout(1);
               g.jumps.resize(1);
               g.jumps[0] = condot_jump1(zv, t, x.real[0], bins);
               return g;
             };
           },
           1e-3,
           [&](const State& z, double t) {
             ResidualOptions o;
             o.nodes = nodes;
             double r1 = 0.0, r2 = 0.0;
             condot_jump_roots(z.real[0], t, r1, r2);
             o.breaks = {r1, r2};
             return o;
           },
           jump_bins);

  run_pair("mixture", "flow", mix, zs_euclid,
           [&](const State& z) -> CondFieldFn {
             const double zv = z.real[0];
             return [zv, ma1, ma2, lin](double t, const State& x) {
               GenOut g = zero_genout(1);
               g.velocity[0] = mixture_flow1(zv, t, x.real[0], ma1, ma2, lin);
               return g;
             };
           },
           1e-4,
           [&](const State& z, double) {
             ResidualOptions o;
             o.nodes = nodes;
             o.breaks = {z.real[0]};
             return o;
           },
           0);

  run_pair("mixture", "diffusion", mix, zs_euclid,
           [&](const State& z) -> CondFieldFn {
             const double zv = z.real[0];
             return [zv, ma1, ma2, lin](double t, const State& x) {
               GenOut g = zero_genout(1);
               g.diffusion_diag[0] = mixture_diffusion1(zv, t, x.real[0], ma1, ma2, lin);
               return g;
             };
           },
           1e-4,
           [&](const State& z, double) {
             ResidualOptions o;
             o.nodes = nodes;
             o.breaks = {z.real[0]};
             o.reflected_diffusion = true;
             return o;
           },
           0);

  run_pair("mixture", "jump", mix, zs_euclid,
           [&](const State& z) -> CondFieldFn {
             const double zv = z.real[0];
             return [zv, atom_support, lin](double t, const State&) {
               GenOut g = zero_genout(1);
               g.jumps.resize(1);
               auto sup = std::shared_ptr<const std::vector<double>>(
                   atom_support, &(*atom_support)[0]);
               g.jumps[0] = delta_jump_channel(sup, zv, mixture_jump_rate(t, lin));
               return g;
             };
           },
           1e-4, plain_opts, 0);

  run_pair("mixture-discrete", "ctmc", disc, zs_tok,
           [&](const State& z) -> CondFieldFn {
             const int zt = z.tok[0];
             const int vocab = disc.vocab;
             return [zt, vocab, lin](double t, const State& x) {
               GenOut g = zero_genout(0, 1, vocab);
               g.discrete_rates[0] = ctmc_mixture_rates(zt, t, x.tok[0], vocab, lin);
               return g;
             };
           },
           1e-4, plain_opts, 0);

  // minimal jump recovered from the density path on the quadrature grid
  run_pair("mixture", "grid-jump", mix, zs_euclid,
           [&](const State& z) -> CondFieldFn {
             const double zv = z.real[0];
             const CondPath path = mix;
             return [zv, path](double t, const State& x) {
               // lambda = [-dp/dt]_+ / p at the query point; destination is
               // the growing atom
               const auto pd = cond_density(path, zv, t, x.real[0]);
               const auto dd = cond_density_dt(path, zv, t, x.real[0]);
               GenOut g = zero_genout(1);
               g.jumps.resize(1);
               auto sup = std::make_shared<std::vector<double>>(std::vector<double>{zv});
               g.jumps[0].support = sup;
               g.jumps[0].probs = {1.0};
               g.jumps[0].lambda =
                   pd.continuous > 0.0 ? std::max(-dd.continuous, 0.0) / pd.continuous
                                       : 0.0;
               return g;
             };
           },
           1e-4, plain_opts, 0);

  return reports;
}

}  // namespace gm

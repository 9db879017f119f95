#include "gm/sim.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "gm/paths.hpp"

namespace gm {

double jump_survival(double lambda, double t, double h) {
  if (!(h > 0.0) || !(t + h < 1.0))
    throw DomainError("jump_survival: need h > 0 and t + h < 1");
  if (!(lambda >= 0.0)) throw DomainError("jump_survival: lambda < 0");
  if (lambda == 0.0) return 1.0;
  const double omt = 1.0 - t;
  const double ratio = omt * omt / ((omt - h) * (omt - h));
  return std::exp(0.5 * lambda * omt * (1.0 - ratio));
}

double reflect(double x, double a1, double a2) {
  if (!(a1 < a2)) throw DomainError("reflect: need a1 < a2");
  if (x >= a1 && x <= a2) return x;
  const double width = a2 - a1;
  double y = std::fmod(x - a1, 2.0 * width);
  if (y < 0.0) y += 2.0 * width;
  y = y <= width ? y : 2.0 * width - y;
  return a1 + y;
}

int ctmc_step(int tok, std::span<const double> rate_row, double h, Rng& rng) {
  const int n = static_cast<int>(rate_row.size());
  if (tok < 0 || tok >= n) throw DomainError("ctmc_step: token out of range");
  const double stay = 1.0 + h * rate_row[tok];
  if (stay < -1e-12)
    throw StepSizeError("ctmc_step: negative stay probability, reduce h below " +
                        std::to_string(-1.0 / rate_row[tok]));
  double u = rng.uniform();
  for (int y = 0; y < n; ++y) {
    const double p = y == tok ? std::max(stay, 0.0) : h * rate_row[y];
    u -= p;
    if (u < 0.0) return y;
  }
  return tok;
}

State euler_step(const State& x, const GenOut& g, double t, double h,
                 JumpSchedule schedule,
                 const std::optional<std::pair<double, double>>& bounds, Rng& rng,
                 long* clamp_count) {
  if (!(h > 0.0) || t + h > 1.0 + 1e-12)
    throw DomainError("euler_step: need h > 0 and t + h <= 1");
  if (x.real.size() != g.real_dim() || x.tok.size() != g.tok_dim())
    throw ShapeError("euler_step: state/generator shape mismatch");
  State out = x;
  for (std::size_t i = 0; i < x.real.size(); ++i) {
    bool jumped = false;
    if (!g.jumps.empty() && g.jumps[i].support) {
      const JumpChannel& ch = g.jumps[i];
      double pjump = 0.0;
      if (ch.lambda > 0.0) {
        if (schedule == JumpSchedule::CondOTSurvival) {
          pjump = 1.0 - jump_survival(ch.lambda, t, h);
        } else {
          pjump = h * ch.lambda;
          if (pjump > 1.0) {
            pjump = 1.0;
            if (clamp_count) ++*clamp_count;
          }
        }
      }
      if (rng.uniform() < pjump) {
        out.real[i] = (*ch.support)[rng.categorical(ch.probs)];
        jumped = true;
      }
    }
    if (!jumped) {
      double v = x.real[i] + h * g.velocity[i];
      const double s2 = g.diffusion_diag.empty() ? 0.0 : g.diffusion_diag[i];
      if (s2 > 0.0) v += std::sqrt(h * s2) * rng.normal();
      out.real[i] = v;
    }
    if (bounds) out.real[i] = reflect(out.real[i], bounds->first, bounds->second);
  }
  for (std::size_t i = 0; i < x.tok.size(); ++i)
    out.tok[i] = ctmc_step(x.tok[i], g.discrete_rates[i], h, rng);
  return out;
}

SimResult simulate(const FieldFn& field, const PriorFn& prior, const SimConfig& cfg) {
  if (cfg.n_steps < 1 || cfg.n_samples < 1)
    throw DomainError("simulate: need n_steps >= 1 and n_samples >= 1");
  const double h = 1.0 / cfg.n_steps;
  const int n_updates = cfg.n_steps == 1 ? 1 : cfg.n_steps - 1;

  SimResult res;
  res.samples.resize(cfg.n_samples);
  if (cfg.record_trajectories)
    res.trajectories.resize(static_cast<std::size_t>(cfg.n_samples) * (n_updates + 1));
  std::atomic<long> clamps{0};

  auto run_range = [&](int lo, int hi) {
    long local_clamps = 0;
    for (int s = lo; s < hi; ++s) {
      Rng rng = Rng::for_stream(cfg.seed, static_cast<std::uint64_t>(s));
      State x = prior(rng);
      if (cfg.record_trajectories)
        res.trajectories[static_cast<std::size_t>(s) * (n_updates + 1)] =
            TrajPoint{s, 0, 0.0, x};
      for (int step = 0; step < n_updates; ++step) {
        const double t = step * h;
        const GenOut g = field(t, x);
        x = euler_step(x, g, t, h, cfg.jump_schedule, cfg.reflection_bounds, rng,
                       &local_clamps);
        if (cfg.record_trajectories)
          res.trajectories[static_cast<std::size_t>(s) * (n_updates + 1) + step + 1] =
              TrajPoint{s, step + 1, (step + 1) * h, x};
      }
      res.samples[s] = std::move(x);
    }
    clamps += local_clamps;
  };

  const int k = std::max(1, cfg.n_threads);
  if (k == 1 || cfg.n_samples == 1) {
    run_range(0, cfg.n_samples);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.n_samples + k - 1) / k;
    for (int w = 0; w < k; ++w) {
      const int lo = w * chunk;
      const int hi = std::min(cfg.n_samples, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  res.clamp_count = clamps.load();
  return res;
}

SimResult simulate(const MarginalModel& model, const SimConfig& cfg) {
  SimConfig c = cfg;
  c.jump_schedule = pick_jump_schedule(model);
  if (!c.reflection_bounds && model.path.kind == PathKind::MixtureUniform) {
    for (const auto& [part, w] : model.gen.parts)
      if (part == GenPart::Diffusion && w > 0.0)
        c.reflection_bounds = std::make_pair(model.path.a1, model.path.a2);
  }
  const CondPath path = model.path;
  return simulate([&model](double t, const State& x) { return model.field(t, x); },
                  [path](Rng& rng) { return sample_prior(path, rng); }, c);
}

JumpSchedule pick_jump_schedule(const MarginalModel& model) {
  if (model.path.kind == PathKind::GeometricAverage)
    for (const auto& [part, w] : model.gen.parts)
      if (part == GenPart::Jump && w > 0.0) return JumpSchedule::CondOTSurvival;
  return JumpSchedule::LinearHazard;
}

}  // namespace gm

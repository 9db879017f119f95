#include "gm/loss.hpp"

#include <atomic>
#include <cmath>

#include "gm/net.hpp"

namespace gm {
namespace {

std::atomic<long> g_saturations{0};
constexpr double kArgClamp = 30.0;

double clamp_arg(double v) {
  if (v > kArgClamp || v < -kArgClamp) {
    ++g_saturations;
    return v > 0 ? kArgClamp : -kArgClamp;
  }
  return v;
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Coordinatewise Bregman of phi0 in {cosh(ax), exp(ax)}.
double scalar_bregman(BregmanKind kind, double alpha, double a, double b) {
  const double aa = clamp_arg(alpha * a);
  const double ab = clamp_arg(alpha * b);
  if (kind == BregmanKind::MseCosh)
    return std::cosh(aa) - std::cosh(ab) - (a - b) * alpha * std::sinh(ab);
  return std::exp(aa) - std::exp(ab) - (a - b) * alpha * std::exp(ab);
}

// phi0''(b) (b - a)
double scalar_bregman_grad(BregmanKind kind, double alpha, double a, double b) {
  const double ab = clamp_arg(alpha * b);
  const double curv =
      kind == BregmanKind::MseCosh ? alpha * alpha * std::cosh(ab)
                                   : alpha * alpha * std::exp(ab);
  return curv * (b - a);
}

}  // namespace

long bregman_saturation_count() { return g_saturations.load(); }
void reset_bregman_saturation_count() { g_saturations = 0; }

Bregman Bregman::parse(const std::string& name) {
  if (name == "mse") return mse();
  if (name == "rate_kl") return rate_kl();
  for (const char* prefix : {"mse_cosh:", "mse_exp:"}) {
    if (name.rfind(prefix, 0) == 0) {
      const std::string arg = name.substr(std::string(prefix).size());
      std::size_t pos = 0;
      double alpha = 0.0;
      try {
        alpha = std::stod(arg, &pos);
      } catch (const std::exception&) {
        throw ConfigError("bad loss spec: " + name);
      }
      if (pos != arg.size()) throw ConfigError("bad loss spec: " + name);
      return std::string(prefix) == "mse_cosh:" ? mse_cosh(alpha) : mse_exp(alpha);
    }
  }
  throw ConfigError("unknown loss: " + name);
}

std::string Bregman::name() const {
  switch (kind) {
    case BregmanKind::Mse: return "mse";
    case BregmanKind::RateKl: return "rate_kl";
    case BregmanKind::MseCosh: return "mse_cosh:" + std::to_string(alpha);
    case BregmanKind::MseExp: return "mse_exp:" + std::to_string(alpha);
    case BregmanKind::ProductSum: return "product_sum";
  }
  return "?";
}

double bregman_value(const Bregman& d, std::span<const double> a,
                     std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("bregman_value: length mismatch");
  switch (d.kind) {
    case BregmanKind::Mse: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return s;
    }
    case BregmanKind::RateKl: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(b[i] > 0.0)) throw DomainError("rate_kl: prediction must be > 0");
        if (!(a[i] >= 0.0)) throw DomainError("rate_kl: target must be >= 0");
        s += xlogx(a[i]) - a[i] * std::log(b[i]) - a[i] + b[i];
      }
      return s;
    }
    case BregmanKind::MseCosh:
    case BregmanKind::MseExp: {
      double s0 = 0.0, s1 = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        s0 += scalar_bregman(d.kind, d.alpha, a[i], b[i]);
        s1 += (a[i] - b[i]) * (a[i] - b[i]);
      }
      return d.mix * s0 + (1.0 - d.mix) * s1;
    }
    case BregmanKind::ProductSum: {
      double s = 0.0;
      std::size_t off = 0;
      for (const auto& [part, len] : d.parts) {
        if (off + len > a.size()) throw ShapeError("product_sum: slices exceed input");
        s += bregman_value(part, a.subspan(off, len), b.subspan(off, len));
        off += len;
      }
      if (off != a.size()) throw ShapeError("product_sum: slices do not cover input");
      return s;
    }
  }
  throw ShapeError("unreachable");
}

std::vector<double> bregman_grad_pred(const Bregman& d, std::span<const double> a,
                                      std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("bregman_grad_pred: length mismatch");
  std::vector<double> g(a.size(), 0.0);
  switch (d.kind) {
    case BregmanKind::Mse:
      for (std::size_t i = 0; i < a.size(); ++i) g[i] = 2.0 * (b[i] - a[i]);
      break;
    case BregmanKind::RateKl:
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(b[i] > 0.0)) throw DomainError("rate_kl: prediction must be > 0");
        g[i] = 1.0 - a[i] / b[i];
      }
      break;
    case BregmanKind::MseCosh:
    case BregmanKind::MseExp:
      for (std::size_t i = 0; i < a.size(); ++i)
        g[i] = d.mix * scalar_bregman_grad(d.kind, d.alpha, a[i], b[i]) +
               (1.0 - d.mix) * 2.0 * (b[i] - a[i]);
      break;
    case BregmanKind::ProductSum: {
      std::size_t off = 0;
      for (const auto& [part, len] : d.parts) {
        auto sub = bregman_grad_pred(part, a.subspan(off, len), b.subspan(off, len));
        std::copy(sub.begin(), sub.end(), g.begin() + off);
        off += len;
      }
      break;
    }
  }
  return g;
}

namespace {

struct DrawnSample {
  double t = 0.0;
  std::size_t z_index = 0;
  State x;
};

DrawnSample draw_sample(const CondPath& path, const Dataset& data, Rng& rng,
                        double eps_t) {
  DrawnSample s;
  s.t = rng.uniform(eps_t, 1.0 - eps_t);
  s.z_index = static_cast<std::size_t>(rng.categorical(data.weights));
  s.x = sample_cond(path, data.points[s.z_index], s.t, rng);
  return s;
}

// target/prediction pair for one head, flattened
struct HeadPair {
  std::vector<double> target;
  std::vector<double> pred;
};

HeadPair head_pair(const HeadOut& out, const GenOut& cond, HeadKind head,
                   const State& x) {
  HeadPair hp;
  switch (head) {
    case HeadKind::Flow:
      hp.target = cond.velocity;
      hp.pred = out.velocity;
      break;
    case HeadKind::Jump: {
      // rate measure lambda * probs per dimension
      if (cond.jumps.size() != out.bin_probs.size())
        throw ShapeError("cgm jump head: dimension mismatch with targets");
      for (std::size_t i = 0; i < cond.jumps.size(); ++i) {
        const auto& ch = cond.jumps[i];
        if (ch.probs.size() != out.bin_probs[i].size())
          throw ShapeError("cgm jump head: net bins do not match target bins");
        for (std::size_t j = 0; j < out.bin_probs[i].size(); ++j) {
          hp.target.push_back(ch.lambda * ch.probs[j]);
          hp.pred.push_back(out.lambda[i] * out.bin_probs[i][j]);
        }
      }
      break;
    }
    case HeadKind::Ctmc: {
      for (std::size_t i = 0; i < cond.discrete_rates.size(); ++i) {
        const auto& row = cond.discrete_rates[i];
        for (std::size_t y = 0; y < row.size(); ++y) {
          if (static_cast<int>(y) == x.tok[i]) continue;  // off-diagonal loss
          hp.target.push_back(row[y]);
          hp.pred.push_back(out.rate_measure[i][y]);
        }
      }
      break;
    }
  }
  return hp;
}

HeadUpstream to_upstream(const HeadOut& out, std::span<const double> dpred,
                         HeadKind head, const State& x) {
  HeadUpstream up;
  switch (head) {
    case HeadKind::Flow:
      up.d_velocity.assign(dpred.begin(), dpred.end());
      break;
    case HeadKind::Jump: {
      const std::size_t d = out.lambda.size();
      up.d_lambda.assign(d, 0.0);
      up.d_bin_probs.assign(d, {});
      std::size_t off = 0;
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t nb = out.bin_probs[i].size();
        up.d_bin_probs[i].assign(nb, 0.0);
        for (std::size_t j = 0; j < nb; ++j) {
          const double dq = dpred[off + j];
          up.d_lambda[i] += dq * out.bin_probs[i][j];
          up.d_bin_probs[i][j] = dq * out.lambda[i];
        }
        off += nb;
      }
      break;
    }
    case HeadKind::Ctmc: {
      up.d_rate_measure.assign(out.rate_measure.size(), {});
      std::size_t off = 0;
      for (std::size_t i = 0; i < out.rate_measure.size(); ++i) {
        up.d_rate_measure[i].assign(out.rate_measure[i].size(), 0.0);
        for (std::size_t y = 0; y < out.rate_measure[i].size(); ++y) {
          if (static_cast<int>(y) == x.tok[i]) continue;
          up.d_rate_measure[i][y] = dpred[off++];
        }
      }
      break;
    }
  }
  return up;
}

double cgm_batch_impl(FieldNet& net, const CondPath& path, const Dataset& data,
                      const GenPartsSpec& cond_gen, const Bregman& d, Rng& rng,
                      const CgmOptions& opt, std::span<double> grad,
                      std::vector<CgmSampleGrad>* sample_grads) {
  if (opt.batch_size < 1) throw DomainError("cgm batch size must be >= 1");
  FieldNet::Workspace ws;
  double loss = 0.0;
  const double inv_batch = 1.0 / opt.batch_size;
  for (int b = 0; b < opt.batch_size; ++b) {
    const DrawnSample s = draw_sample(path, data, rng, opt.eps_t);
    const HeadOut out = net.forward(s.x, s.t, ws);
    const GenOut cond = cond_genout(path, cond_gen, data.points[s.z_index], s.t, s.x);
    const HeadPair hp = head_pair(out, cond, opt.head, s.x);
    loss += bregman_value(d, hp.target, hp.pred);
    if (grad.empty() && !sample_grads) continue;
    std::vector<double> dpred = bregman_grad_pred(d, hp.target, hp.pred);
    if (sample_grads) {
      CgmSampleGrad sg;
      sg.t = s.t;
      sg.x = s.x;
      if (opt.head == HeadKind::Flow) sg.d_velocity = dpred;
      if (opt.head == HeadKind::Jump) sg.d_rate_measure = dpred;
      if (opt.head == HeadKind::Ctmc) {
        sg.d_rate_rows.assign(out.rate_measure.size(), {});
        std::size_t off = 0;
        for (std::size_t i = 0; i < out.rate_measure.size(); ++i) {
          sg.d_rate_rows[i].assign(out.rate_measure[i].size(), 0.0);
          for (std::size_t y = 0; y < out.rate_measure[i].size(); ++y)
            if (static_cast<int>(y) != s.x.tok[i]) sg.d_rate_rows[i][y] = dpred[off++];
        }
      }
      sample_grads->push_back(std::move(sg));
    }
    if (!grad.empty()) {
      for (double& v : dpred) v *= inv_batch;
      const HeadUpstream up = to_upstream(out, dpred, opt.head, s.x);
      net.backward(ws, up, grad);
    }
  }
  return loss * inv_batch;
}

}  // namespace

CgmBatchResult cgm_loss(FieldNet& net, const CondPath& path, const Dataset& data,
                        const GenPartsSpec& cond_gen, const Bregman& d, Rng& rng,
                        const CgmOptions& opt) {
  CgmBatchResult res;
  res.grads.reserve(opt.batch_size);
  res.loss = cgm_batch_impl(net, path, data, cond_gen, d, rng, opt, {}, &res.grads);
  return res;
}

double cgm_train_batch(FieldNet& net, const CondPath& path, const Dataset& data,
                       const GenPartsSpec& cond_gen, const Bregman& d, Rng& rng,
                       const CgmOptions& opt, std::span<double> grad) {
  return cgm_batch_impl(net, path, data, cond_gen, d, rng, opt, grad, nullptr);
}

}  // namespace gm

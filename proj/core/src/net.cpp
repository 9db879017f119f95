#include "gm/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gm/rng.hpp"

namespace gm {
namespace {

constexpr double kRawClamp = 30.0;  // exp overflow guard on raw head outputs
constexpr double kPi = 3.14159265358979323846;

double silu(double x) { return x / (1.0 + std::exp(-x)); }
double dsilu(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void softmax_inplace(std::span<double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

// dlogits = P (dP - <dP, P>)
void softmax_backward(std::span<const double> probs, std::span<const double> dprobs,
                      std::span<double> dlogits) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * dprobs[i];
  for (std::size_t i = 0; i < probs.size(); ++i)
    dlogits[i] = probs[i] * (dprobs[i] - dot);
}

}  // namespace

std::size_t FieldNet::input_dim() const {
  std::size_t d = cfg_.real_dim + static_cast<std::size_t>(cfg_.time_features);
  for (int v : cfg_.vocabs) d += static_cast<std::size_t>(v);
  return d;
}

FieldNet::FieldNet(const NetConfig& cfg) : cfg_(cfg) {
  if (cfg_.time_features % 2 != 0 || cfg_.time_features <= 0)
    throw ConfigError("time_features must be positive and even");
  if (cfg_.depth < 1 || cfg_.width < 1) throw ConfigError("bad net size");
  if (cfg_.head_jump && cfg_.bins < 2) throw ConfigError("jump head needs bins >= 2");
  if (cfg_.head_rates && cfg_.vocabs.empty())
    throw ConfigError("rate head needs discrete dimensions");

  std::size_t offset = 0;
  auto alloc = [&](std::size_t rows, std::size_t cols) {
    Block b;
    b.rows = rows;
    b.cols = cols;
    b.w = offset;
    offset += rows * cols;
    b.b = offset;
    offset += rows;
    return b;
  };

  std::size_t prev = input_dim();
  for (int l = 0; l < cfg_.depth; ++l) {
    layers_.push_back(alloc(static_cast<std::size_t>(cfg_.width), prev));
    prev = static_cast<std::size_t>(cfg_.width);
  }
  if (cfg_.head_velocity) velocity_ = alloc(cfg_.real_dim, prev);
  if (cfg_.head_jump) {
    lambda_ = alloc(cfg_.real_dim, prev);
    bin_logits_ = alloc(cfg_.real_dim * static_cast<std::size_t>(cfg_.bins), prev);
  }
  if (cfg_.head_rates) {
    std::size_t total = 0;
    for (int v : cfg_.vocabs) total += static_cast<std::size_t>(v);
    rate_logits_ = alloc(total, prev);
    rate_scale_ = alloc(cfg_.vocabs.size(), prev);
  }

  params_.assign(offset, 0.0);
  Rng rng(cfg_.init_seed);
  auto init_block = [&](const Block& blk) {
    const double s = std::sqrt(6.0 / static_cast<double>(blk.rows + blk.cols));
    for (std::size_t i = 0; i < blk.rows * blk.cols; ++i)
      params_[blk.w + i] = rng.uniform(-s, s);
    // biases start at zero
  };
  for (const auto& l : layers_) init_block(l);
  if (cfg_.head_velocity) init_block(velocity_);
  if (cfg_.head_jump) {
    init_block(lambda_);
    init_block(bin_logits_);
  }
  if (cfg_.head_rates) {
    init_block(rate_logits_);
    init_block(rate_scale_);
  }
}

void FieldNet::lin_forward(const Block& blk, std::span<const double> in,
                           std::span<double> out) const {
  for (std::size_t r = 0; r < blk.rows; ++r) {
    double acc = params_[blk.b + r];
    const double* w = params_.data() + blk.w + r * blk.cols;
    for (std::size_t c = 0; c < blk.cols; ++c) acc += w[c] * in[c];
    out[r] = acc;
  }
}

void FieldNet::lin_backward(const Block& blk, std::span<const double> in,
                            std::span<const double> dout, std::span<double> din,
                            std::span<double> grad) const {
  for (std::size_t r = 0; r < blk.rows; ++r) {
    const double g = dout[r];
    grad[blk.b + r] += g;
    double* gw = grad.data() + blk.w + r * blk.cols;
    const double* w = params_.data() + blk.w + r * blk.cols;
    for (std::size_t c = 0; c < blk.cols; ++c) {
      gw[c] += g * in[c];
      if (!din.empty()) din[c] += g * w[c];
    }
  }
}

HeadOut FieldNet::forward(const State& x, double t, Workspace& ws) const {
  if (x.real.size() != cfg_.real_dim || x.tok.size() != cfg_.vocabs.size())
    throw ShapeError("net forward: state shape mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("net forward: t outside [0,1]");

  ws.input.assign(input_dim(), 0.0);
  std::size_t pos = 0;
  for (double v : x.real) ws.input[pos++] = v;
  for (std::size_t i = 0; i < x.tok.size(); ++i) {
    ws.input[pos + static_cast<std::size_t>(x.tok[i])] = 1.0;
    pos += static_cast<std::size_t>(cfg_.vocabs[i]);
  }
  for (int k = 0; k < cfg_.time_features / 2; ++k) {
    const double a = std::ldexp(kPi, k) * t;  // 2^k * pi * t
    ws.input[pos++] = std::sin(a);
    ws.input[pos++] = std::cos(a);
  }

  ws.pre.resize(layers_.size());
  ws.hidden.resize(layers_.size());
  const std::vector<double>* prev = &ws.input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    ws.pre[l].resize(layers_[l].rows);
    lin_forward(layers_[l], *prev, ws.pre[l]);
    ws.hidden[l].resize(layers_[l].rows);
    for (std::size_t i = 0; i < ws.pre[l].size(); ++i)
      ws.hidden[l][i] = silu(ws.pre[l][i]);
    prev = &ws.hidden[l];
  }
  const std::vector<double>& top = *prev;

  HeadOut& out = ws.heads;
  out = HeadOut{};
  if (cfg_.head_velocity) {
    out.velocity.resize(cfg_.real_dim);
    lin_forward(velocity_, top, out.velocity);
  }
  if (cfg_.head_jump) {
    ws.lambda_raw.resize(cfg_.real_dim);
    lin_forward(lambda_, top, ws.lambda_raw);
    out.lambda.resize(cfg_.real_dim);
    for (std::size_t i = 0; i < cfg_.real_dim; ++i)
      out.lambda[i] = std::exp(std::clamp(ws.lambda_raw[i], -kRawClamp, kRawClamp));
    std::vector<double> logits(cfg_.real_dim * static_cast<std::size_t>(cfg_.bins));
    lin_forward(bin_logits_, top, logits);
    out.bin_probs.assign(cfg_.real_dim, std::vector<double>(cfg_.bins));
    for (std::size_t i = 0; i < cfg_.real_dim; ++i) {
      auto row = std::span<double>(logits).subspan(i * cfg_.bins, cfg_.bins);
      std::copy(row.begin(), row.end(), out.bin_probs[i].begin());
      softmax_inplace(out.bin_probs[i]);
    }
  }
  if (cfg_.head_rates) {
    std::size_t total = 0;
    for (int v : cfg_.vocabs) total += static_cast<std::size_t>(v);
    std::vector<double> logits(total);
    lin_forward(rate_logits_, top, logits);
    std::vector<double> scale_raw(cfg_.vocabs.size());
    lin_forward(rate_scale_, top, scale_raw);
    ws.scale.resize(cfg_.vocabs.size());
    out.rate_measure.resize(cfg_.vocabs.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < cfg_.vocabs.size(); ++i) {
      const std::size_t n = static_cast<std::size_t>(cfg_.vocabs[i]);
      out.rate_measure[i].assign(logits.begin() + off, logits.begin() + off + n);
      softmax_inplace(out.rate_measure[i]);
      ws.scale[i] = std::exp(std::clamp(scale_raw[i], -kRawClamp, kRawClamp));
      for (double& q : out.rate_measure[i]) q *= ws.scale[i];
      off += n;
    }
  }
  ws.valid = true;
  return out;
}

void FieldNet::backward(const Workspace& ws, const HeadUpstream& up,
                        std::span<double> grad) const {
  if (!ws.valid) throw ShapeError("net backward before forward");
  if (grad.size() != params_.size()) throw ShapeError("net backward: grad size");

  const std::vector<double>& top = ws.hidden.back();
  std::vector<double> dtop(top.size(), 0.0);

  if (cfg_.head_velocity && !up.d_velocity.empty())
    lin_backward(velocity_, top, up.d_velocity, dtop, grad);

  if (cfg_.head_jump && (!up.d_lambda.empty() || !up.d_bin_probs.empty())) {
    if (!up.d_lambda.empty()) {
      std::vector<double> draw(cfg_.real_dim, 0.0);
      for (std::size_t i = 0; i < cfg_.real_dim; ++i) {
        const bool inside = std::abs(ws.lambda_raw[i]) < kRawClamp;
        draw[i] = inside ? up.d_lambda[i] * ws.heads.lambda[i] : 0.0;
      }
      lin_backward(lambda_, top, draw, dtop, grad);
    }
    if (!up.d_bin_probs.empty()) {
      std::vector<double> dlogits(cfg_.real_dim * static_cast<std::size_t>(cfg_.bins));
      for (std::size_t i = 0; i < cfg_.real_dim; ++i)
        softmax_backward(ws.heads.bin_probs[i], up.d_bin_probs[i],
                         std::span<double>(dlogits).subspan(i * cfg_.bins, cfg_.bins));
      lin_backward(bin_logits_, top, dlogits, dtop, grad);
    }
  }

  if (cfg_.head_rates && !up.d_rate_measure.empty()) {
    std::size_t total = 0;
    for (int v : cfg_.vocabs) total += static_cast<std::size_t>(v);
    std::vector<double> dlogits(total, 0.0);
    std::vector<double> dscale_raw(cfg_.vocabs.size(), 0.0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < cfg_.vocabs.size(); ++i) {
      const std::size_t n = static_cast<std::size_t>(cfg_.vocabs[i]);
      const double s = ws.scale[i];
      // Q = s * softmax(q): dQ -> (ds, dsoftmax)
      std::vector<double> probs(n), dprobs(n);
      double ds = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        probs[y] = ws.heads.rate_measure[i][y] / s;
        ds += up.d_rate_measure[i][y] * probs[y];
        dprobs[y] = up.d_rate_measure[i][y] * s;
      }
      softmax_backward(probs, dprobs,
                       std::span<double>(dlogits).subspan(off, n));
      dscale_raw[i] = ds * s;  // through exp
      off += n;
    }
    lin_backward(rate_logits_, top, dlogits, dtop, grad);
    lin_backward(rate_scale_, top, dscale_raw, dtop, grad);
  }

  // hidden stack
  std::vector<double> dh = std::move(dtop);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= dsilu(ws.pre[l][i]);
    const std::vector<double>& in = l == 0 ? ws.input : ws.hidden[l - 1];
    std::vector<double> din(l == 0 ? 0 : in.size(), 0.0);
    lin_backward(layers_[l], in, dh, din, grad);
    dh = std::move(din);
  }
}

HeadOut FieldNet::forward(const State& x, double t) { return forward(x, t, scratch_); }

void FieldNet::backward(const HeadUpstream& up, std::span<double> grad) {
  backward(scratch_, up, grad);
}

GenOut FieldNet::field(const State& x, double t, Workspace& ws,
                       const JumpBins* bins) const {
  const HeadOut out = forward(x, t, ws);
  GenOut g = zero_genout(cfg_.real_dim, cfg_.vocabs.size(),
                         cfg_.vocabs.empty() ? 0 : cfg_.vocabs.front());
  if (cfg_.head_velocity) g.velocity = out.velocity;
  if (cfg_.head_jump) {
    if (!bins || !bins->valid() || bins->count != cfg_.bins)
      throw ShapeError("net field: jump head needs matching bins");
    g.jumps.resize(cfg_.real_dim);
    for (std::size_t i = 0; i < cfg_.real_dim; ++i) {
      g.jumps[i].lambda = out.lambda[i];
      g.jumps[i].support = bins->centers;
      g.jumps[i].probs = out.bin_probs[i];
    }
  }
  if (cfg_.head_rates) {
    for (std::size_t i = 0; i < cfg_.vocabs.size(); ++i) {
      auto& row = g.discrete_rates[i];
      row = out.rate_measure[i];
      // predicted measure over destinations; the current token's entry is
      // replaced by the negative off-diagonal sum
      double off_sum = 0.0;
      for (std::size_t y = 0; y < row.size(); ++y)
        if (static_cast<int>(y) != x.tok[i]) off_sum += row[y];
      row[static_cast<std::size_t>(x.tok[i])] = -off_sum;
    }
  }
  return g;
}

void OptimState::init(std::size_t n, OptimConfig c) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  step_count = 0;
  cfg = c;
}

void OptimState::apply(std::span<double> params, std::span<const double> grad,
                       double lr_scale) {
  if (params.size() != m.size() || grad.size() != m.size())
    throw ShapeError("optimizer: size mismatch");
  ++step_count;
  const double lr = cfg.lr * lr_scale;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
  }
}

TrainResult train_model(const TrainConfig& cfg, const CondPath& path,
                        const Dataset& data, const GenPartsSpec& cond_gen) {
  NetConfig ncfg = cfg.net;
  FieldNet net(ncfg);
  OptimState opt;
  opt.init(net.param_count(), cfg.opt);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  CgmOptions copt;
  copt.head = cfg.head;
  copt.batch_size = cfg.batch_size;
  copt.eps_t = cfg.eps_t;

  std::vector<double> grad(net.param_count());
  std::vector<std::pair<long, double>> curve;
  FieldNet last_good = net;
  long last_good_step = 0;
  double window_sum = 0.0;
  int window_n = 0;

  for (long step = 1; step <= cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss =
        cgm_train_batch(net, path, data, cond_gen, cfg.loss, rng, copt, grad);
    if (!std::isfinite(loss))
      throw DivergenceError("training loss is not finite at step " +
                                std::to_string(step),
                            last_good, last_good_step);
    double lr_scale = 1.0;
    if (cfg.lr_schedule == LrSchedule::Cosine)
      lr_scale = 0.01 + 0.99 * 0.5 *
                            (1.0 + std::cos(3.14159265358979323846 *
                                            static_cast<double>(step) / cfg.steps));
    opt.apply(net.params(), grad, lr_scale);
    window_sum += loss;
    ++window_n;
    if (step % 100 == 0) {
      curve.emplace_back(step, window_sum / window_n);
      window_sum = 0.0;
      window_n = 0;
      last_good = net;
      last_good_step = step;
    }
  }
  if (window_n > 0) curve.emplace_back(cfg.steps, window_sum / window_n);
  return TrainResult{std::move(net), std::move(curve)};
}

void save_checkpoint(const FieldNet& net, const std::string& path,
                     const std::string& meta_json) {
  nlohmann::json j;
  j["format"] = "genmatch-net-v1";
  const NetConfig& c = net.config();
  j["net"] = {{"real_dim", c.real_dim}, {"vocabs", c.vocabs},
              {"time_features", c.time_features}, {"depth", c.depth},
              {"width", c.width}, {"head_velocity", c.head_velocity},
              {"head_jump", c.head_jump}, {"bins", c.bins},
              {"head_rates", c.head_rates}, {"init_seed", c.init_seed}};
  j["meta"] = nlohmann::json::parse(meta_json);
  j["params"] = net.params();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

FieldNet load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "genmatch-net-v1")
    throw ConfigError("unknown checkpoint format");
  NetConfig c;
  const auto& n = j.at("net");
  c.real_dim = n.at("real_dim").get<std::size_t>();
  c.vocabs = n.at("vocabs").get<std::vector<int>>();
  c.time_features = n.at("time_features").get<int>();
  c.depth = n.at("depth").get<int>();
  c.width = n.at("width").get<int>();
  c.head_velocity = n.at("head_velocity").get<bool>();
  c.head_jump = n.at("head_jump").get<bool>();
  c.bins = n.at("bins").get<int>();
  c.head_rates = n.at("head_rates").get<bool>();
  c.init_seed = n.at("init_seed").get<std::uint64_t>();
  FieldNet net(c);
  auto p = j.at("params").get<std::vector<double>>();
  if (p.size() != net.param_count()) throw ConfigError("checkpoint parameter count mismatch");
  net.params() = std::move(p);
  return net;
}

FieldErrorReport velocity_field_error(const FieldNet& net, const MarginalModel& model,
                                      FieldErrorReport grid) {
  if (net.config().real_dim != 1 || model.path.dim != 1)
    throw ShapeError("velocity_field_error: 1d models only");
  FieldNet::Workspace ws;
  double num = 0.0, den = 0.0, num_w = 0.0, den_w = 0.0;
  for (int ti = 0; ti < grid.t_points; ++ti) {
    const double t =
        grid.t_lo + (grid.t_hi - grid.t_lo) * ti / std::max(grid.t_points - 1, 1);
    for (int xi = 0; xi < grid.x_points; ++xi) {
      const double x =
          grid.x_lo + (grid.x_hi - grid.x_lo) * xi / std::max(grid.x_points - 1, 1);
      State xs{{x}, {}};
      const double u_exact = marginal_genout(model, t, xs).velocity[0];
      const double u_net = net.forward(xs, t, ws).velocity[0];
      const double e2 = (u_net - u_exact) * (u_net - u_exact);
      num += e2;
      den += u_exact * u_exact;
      const double w = std::exp(
          marginal_log_density(model.path, model.data, t, std::vector<double>{x}));
      num_w += w * e2;
      den_w += w * u_exact * u_exact;
    }
  }
  grid.rel_l2 = std::sqrt(num / std::max(den, 1e-300));
  grid.rel_l2_weighted = std::sqrt(num_w / std::max(den_w, 1e-300));
  return grid;
}

void save_loss_curve(const std::vector<std::pair<long, double>>& curve,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write loss curve: " + path);
  out << "step,loss\n";
  char buf[64];
  for (const auto& [step, loss] : curve) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g\n", step, loss);
    out << buf;
  }
}

}  // namespace gm

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gm/dataset.hpp"
#include "gm/generators.hpp"
#include "gm/loss.hpp"
#include "gm/paths.hpp"
#include "gm/state.hpp"

namespace gm {

// Small MLP approximating the linear parameterization F_t(x). Input is the
// Euclidean coordinates, one-hot tokens, and a sinusoidal time embedding
// {sin(2^k pi t), cos(2^k pi t)}. Hidden nonlinearity is silu (smooth, and
// asymptotically linear, which keeps learned velocity fields sane outside the
// bulk of the sampling distribution). Heads: velocity, log-intensity
// (exponentiated), bin logits (softmax per dimension), and rate logits
// (softmax times a learned positive scale) for discrete dimensions.
struct NetConfig {
  std::size_t real_dim = 1;
  std::vector<int> vocabs;
  int time_features = 16;  // even
  int depth = 2;
  int width = 64;
  bool head_velocity = true;
  bool head_jump = false;
  int bins = 0;  // jump head destinations per dimension
  bool head_rates = false;
  std::uint64_t init_seed = 1;
};

struct HeadOut {
  std::vector<double> velocity;
  std::vector<double> lambda;
  std::vector<std::vector<double>> bin_probs;
  std::vector<std::vector<double>> rate_measure;  // scale * softmax, per token dim
};

struct HeadUpstream {
  std::vector<double> d_velocity;
  std::vector<double> d_lambda;
  std::vector<std::vector<double>> d_bin_probs;
  std::vector<std::vector<double>> d_rate_measure;
};

class FieldNet {
 public:
  explicit FieldNet(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  struct Workspace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;     // preactivations per layer
    std::vector<std::vector<double>> hidden;  // post-activation values
    HeadOut heads;
    std::vector<double> lambda_raw;
    std::vector<double> scale;  // rate head positive scales
    bool valid = false;
  };

  // Deterministic given parameters and input; retains activations in ws.
  HeadOut forward(const State& x, double t, Workspace& ws) const;

  // Accumulates loss gradients into grad (size param_count()). Throws if the
  // workspace has no forward pass.
  void backward(const Workspace& ws, const HeadUpstream& up,
                std::span<double> grad) const;

  // Single-threaded conveniences sharing an internal workspace.
  HeadOut forward(const State& x, double t);
  void backward(const HeadUpstream& up, std::span<double> grad);

  GenOut field(const State& x, double t, Workspace& ws,
               const JumpBins* bins = nullptr) const;

 private:
  struct Block {
    std::size_t w = 0, b = 0;  // offsets
    std::size_t rows = 0, cols = 0;
  };
  std::size_t input_dim() const;
  void lin_forward(const Block& blk, std::span<const double> in,
                   std::span<double> out) const;
  void lin_backward(const Block& blk, std::span<const double> in,
                    std::span<const double> dout, std::span<double> din,
                    std::span<double> grad) const;

  NetConfig cfg_;
  std::vector<double> params_;
  std::vector<Block> layers_;
  Block velocity_{}, lambda_{}, bin_logits_{}, rate_logits_{}, rate_scale_{};
  Workspace scratch_;
};

// Adaptive-moment optimizer state (first/second moment accumulators with
// bias correction).
struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimState {
  std::vector<double> m, v;
  long step_count = 0;
  OptimConfig cfg;

  void init(std::size_t n, OptimConfig c);
  // lr_scale rescales cfg.lr for this step (learning-rate schedules)
  void apply(std::span<double> params, std::span<const double> grad,
             double lr_scale = 1.0);
};

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  NetConfig net;
  OptimConfig opt;
  LrSchedule lr_schedule = LrSchedule::Cosine;  // cosine decay to lr/100
  Bregman loss = Bregman::mse();
  HeadKind head = HeadKind::Flow;
  int steps = 5000;
  int batch_size = 256;
  double eps_t = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainResult {
  FieldNet net;
  std::vector<std::pair<long, double>> curve;  // (step, smoothed loss)
};

struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, FieldNet net, long step)
      : std::runtime_error(msg), last_good(std::move(net)), last_good_step(step) {}
  FieldNet last_good;
  long last_good_step;
};

// Optimizer steps on conditional-matching batches; deterministic given the
// seed. Smoothed loss (mean of the last 100 batches) is recorded every 100
// steps. Throws DivergenceError carrying the last recorded checkpoint when
// the loss turns non-finite.
TrainResult train_model(const TrainConfig& cfg, const CondPath& path,
                        const Dataset& data, const GenPartsSpec& cond_gen);

// Checkpoint: one JSON document with an architecture/meta header and the
// flat parameter array.
void save_checkpoint(const FieldNet& net, const std::string& path,
                     const std::string& meta_json = "{}");
FieldNet load_checkpoint(const std::string& path);

void save_loss_curve(const std::vector<std::pair<long, double>>& curve,
                     const std::string& path);

// Relative L2 error of the velocity head against the exact posterior-weighted
// marginal field on a (t, x) product grid (1d models). Reported both with
// uniform grid weights and weighted by the marginal path density p_t(x) --
// the norm in which conditional-matching training converges to the marginal
// field (the objective carries no information off the path's support).
struct FieldErrorReport {
  double rel_l2 = 0.0;           // uniform grid weights
  double rel_l2_weighted = 0.0;  // p_t(x)-weighted
  double t_lo = 0.1, t_hi = 0.9;
  double x_lo = -3.0, x_hi = 3.0;
  int t_points = 17, x_points = 121;
};
FieldErrorReport velocity_field_error(const FieldNet& net, const MarginalModel& model,
                                      FieldErrorReport grid = {});

}  // namespace gm

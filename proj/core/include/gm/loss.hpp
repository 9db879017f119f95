#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gm/dataset.hpp"
#include "gm/marginal.hpp"
#include "gm/paths.hpp"
#include "gm/rng.hpp"

namespace gm {

// Divergences D(a,b) = phi(a) - phi(b) - <a-b, grad phi(b)> for a convex phi.
//
//   Mse       phi = ||x||^2            -> D = ||a-b||^2
//   RateKl    phi = sum x log x - x    -> D = sum a log(a/b) - a + b
//   MseCosh   mix * coordinatewise Bregman of cosh(alpha x) + (1-mix) * Mse
//   MseExp    mix * coordinatewise Bregman of exp(alpha x)  + (1-mix) * Mse
//   ProductSum  sum of member divergences over consecutive slices
//
// RateKl domain: b > 0 coordinatewise, a >= 0 (a log a := 0 at a = 0).
enum class BregmanKind { Mse, RateKl, MseCosh, MseExp, ProductSum };

struct Bregman {
  BregmanKind kind = BregmanKind::Mse;
  double alpha = 1.0;
  double mix = 0.5;
  std::vector<std::pair<Bregman, std::size_t>> parts;  // ProductSum slices

  static Bregman mse() { return {BregmanKind::Mse, 1.0, 0.0, {}}; }
  static Bregman rate_kl() { return {BregmanKind::RateKl, 1.0, 0.0, {}}; }
  static Bregman mse_cosh(double alpha, double mix = 0.5) {
    return {BregmanKind::MseCosh, alpha, mix, {}};
  }
  static Bregman mse_exp(double alpha, double mix = 0.5) {
    return {BregmanKind::MseExp, alpha, mix, {}};
  }
  static Bregman product(std::vector<std::pair<Bregman, std::size_t>> parts) {
    return {BregmanKind::ProductSum, 1.0, 0.0, std::move(parts)};
  }

  // "mse" | "rate_kl" | "mse_cosh:<alpha>" | "mse_exp:<alpha>"
  static Bregman parse(const std::string& name);
  std::string name() const;
};

double bregman_value(const Bregman& d, std::span<const double> a,
                     std::span<const double> b);

// Gradient in the prediction b: grad_b D = phi''(b) (b - a) coordinatewise
// for the scalar variants.
std::vector<double> bregman_grad_pred(const Bregman& d, std::span<const double> a,
                                      std::span<const double> b);

// Exp/cosh arguments are clamped to |alpha x| <= 30 before exponentiation;
// the counter reports how often the clamp engaged.
long bregman_saturation_count();
void reset_bregman_saturation_count();

// ---- conditional generator matching ----

class FieldNet;  // net.hpp

enum class HeadKind { Flow, Jump, Ctmc };

struct CgmOptions {
  HeadKind head = HeadKind::Flow;
  int batch_size = 256;
  double eps_t = 1e-3;  // t ~ Unif[eps_t, 1 - eps_t]
};

// Upstream gradients produced for one drawn sample, to be fed to the net's
// backward pass by the caller (train loop).
struct CgmSampleGrad {
  double t = 0.0;
  State x;
  std::vector<double> d_velocity;
  std::vector<double> d_rate_measure;  // per-dim lambda*probs blocks, flattened
  std::vector<std::vector<double>> d_rate_rows;
};

struct CgmBatchResult {
  double loss = 0.0;
  std::vector<CgmSampleGrad> grads;
};

// Monte Carlo estimate of E D(F_t^z(x), F_t^theta(x)) over one batch, with
// the per-sample prediction gradients needed for backprop. The Bregman
// variant must match the head (MSE family for velocity, RateKl for rate
// measures and rate rows).
CgmBatchResult cgm_loss(FieldNet& net, const CondPath& path, const Dataset& data,
                        const GenPartsSpec& cond_gen, const Bregman& d, Rng& rng,
                        const CgmOptions& opt);

// Same batch estimate, but also accumulates the parameter gradient of the
// batch-mean loss into grad (used by the training loop).
double cgm_train_batch(FieldNet& net, const CondPath& path, const Dataset& data,
                       const GenPartsSpec& cond_gen, const Bregman& d, Rng& rng,
                       const CgmOptions& opt, std::span<double> grad);

}  // namespace gm

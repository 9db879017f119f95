// Acceptance suite: one gated criterion per section, one PASS/FAIL line each.
// Exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gm/dataset.hpp"
#include "gm/loss.hpp"
#include "gm/marginal.hpp"
#include "gm/net.hpp"
#include "gm/paths.hpp"
#include "gm/rng.hpp"
#include "gm/runner.hpp"
#include "gm/sim.hpp"
#include "gm/verify.hpp"

using namespace gm;
namespace fs = std::filesystem;

namespace {

const Schedule kLin = Schedule::linear();

int sim_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_index = 0;
int g_failures = 0;

void report(const std::string& name, const Outcome& o) {
  ++g_index;
  std::printf("[%2d/12] %-28s %s  (%s)\n", g_index, name.c_str(),
              o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<double> reals(const std::vector<State>& samples) {
  std::vector<double> x(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) x[i] = samples[i].real[0];
  return x;
}

std::vector<double> edges64(double lo, double hi) {
  std::vector<double> e(65);
  for (int i = 0; i <= 64; ++i) e[i] = lo + (hi - lo) * i / 64.0;
  return e;
}

// ---- criteria ----

Outcome c1_kfe_suite() {
  const auto reports = kfe_table_suite(1024, 4001);
  bool pass = reports.size() == 7;
  double worst_margin = 0.0;
  std::string worst;
  for (const auto& r : reports) {
    if (!r.pass || !r.control_ok) pass = false;
    const double margin = r.max_residual / r.threshold;
    if (margin > worst_margin) {
      worst_margin = margin;
      worst = r.path_name + "/" + r.model_name + " " + fmt(r.max_residual) +
              " vs " + fmt(r.threshold);
    }
  }
  return {pass, "7 cells + doubled-field controls; worst " + worst};
}

MarginalModel two_point_model(GenPartsSpec spec) {
  return MarginalModel{CondPath::geometric(kLin, 1), Dataset::two_point(),
                       std::move(spec), {}};
}

SimResult run_two_point(const MarginalModel& model, std::uint64_t seed,
                        int n_samples = 20000) {
  SimConfig cfg;
  cfg.n_steps = 500;
  cfg.n_samples = n_samples;
  cfg.seed = seed;
  cfg.n_threads = sim_threads();
  return simulate(model, cfg);
}

Outcome c2_exact_marginal_flow() {
  const auto res = run_two_point(two_point_model(GenPartsSpec::single(GenPart::Flow)),
                                 211);
  double plus = 0.0, dist = 0.0;
  for (const auto& s : res.samples) {
    plus += s.real[0] > 0.0 ? 1.0 : 0.0;
    dist += std::min(std::abs(s.real[0] - 1.0), std::abs(s.real[0] + 1.0));
  }
  plus /= res.samples.size();
  dist /= res.samples.size();
  const bool pass = std::abs(plus - 0.5) <= 0.02 && dist <= 0.05;
  return {pass, "mode mass " + fmt(plus) + ", mean atom distance " + fmt(dist)};
}

GenPartsSpec jump_spec() {
  // destination grid aligned with the data atoms (0.05 spacing puts -1, 0, 1
  // exactly on centers), mirroring quantized-data practice
  GenPartsSpec s = GenPartsSpec::single(GenPart::Jump);
  s.bins = JumpBins::make(-2.5, 2.5, 101);
  return s;
}

Outcome c3_superposition_invariance() {
  GenPartsSpec mixed;
  mixed.parts = {{GenPart::Flow, 0.5}, {GenPart::Jump, 0.5}};
  mixed.bins = JumpBins::make(-2.5, 2.5, 101);
  const auto flow = reals(run_two_point(two_point_model(GenPartsSpec::single(GenPart::Flow)), 33).samples);
  const auto jump = reals(run_two_point(two_point_model(jump_spec()), 34).samples);
  const auto both = reals(run_two_point(two_point_model(mixed), 35).samples);
  const auto e = edges64(-3.0, 3.0);
  const double t1 = tv_hist(flow, jump, e);
  const double t2 = tv_hist(flow, both, e);
  const double t3 = tv_hist(jump, both, e);
  const double worst = std::max({t1, t2, t3});
  return {worst <= 0.05, "pairwise TV " + fmt(t1) + ", " + fmt(t2) + ", " + fmt(t3)};
}

Outcome c4_divergence_free() {
  MarginalModel base = two_point_model(GenPartsSpec::single(GenPart::Flow));
  MarginalModel with = base;
  with.comb.langevin_beta = 1.0;
  const auto a = reals(run_two_point(base, 44).samples);
  const auto b = reals(run_two_point(with, 44).samples);
  const double tv = tv_hist(a, b, edges64(-3.0, 3.0));
  return {tv <= 0.05, "TV(beta=1 vs beta=0) = " + fmt(tv)};
}

Outcome c5_checkerboard_jump() {
  const Dataset board = Dataset::checkerboard2d(16);
  GenPartsSpec spec = GenPartsSpec::single(GenPart::Jump);
  spec.atom_support =
      std::make_shared<const std::vector<std::vector<double>>>(board.unique_real_values());
  MarginalModel model{CondPath::mixture_uniform(-1.0, 1.0, kLin, 2), board, spec, {}};
  SimConfig cfg;
  cfg.n_steps = 500;
  cfg.n_samples = 50000;
  cfg.seed = 55;
  cfg.n_threads = sim_threads();
  const auto res = simulate(model, cfg);

  const auto uniq = board.unique_real_values();
  auto cell = [&](const State& s) {
    int key = 0;
    for (int d = 0; d < 2; ++d) {
      const auto& u = uniq[d];
      auto it = std::lower_bound(u.begin(), u.end(), s.real[d]);
      std::size_t idx =
          it == u.end() ? u.size() - 1 : static_cast<std::size_t>(it - u.begin());
      if (idx > 0 &&
          (it == u.end() || std::abs(u[idx - 1] - s.real[d]) <= std::abs(u[idx] - s.real[d])))
        --idx;
      key = key * static_cast<int>(u.size()) + static_cast<int>(idx);
    }
    return key;
  };
  std::map<int, double> target, emp;
  for (std::size_t i = 0; i < board.size(); ++i)
    target[cell(board.points[i])] += board.weights[i];
  for (const auto& s : res.samples) emp[cell(s)] += 1.0 / res.samples.size();
  double tv = 0.0;
  for (const auto& [k, v] : target) tv += std::abs(v - (emp.count(k) ? emp.at(k) : 0.0));
  for (const auto& [k, v] : emp)
    if (!target.count(k)) tv += v;
  tv *= 0.5;
  return {tv <= 0.1, "cell TV = " + fmt(tv) + " at 50k samples"};
}

Outcome c6_ctmc_oracle() {
  const int vocab = 5;
  const CondPath path = CondPath::mixture_discrete(vocab, kLin, 1);
  const Dataset data = Dataset::from_points({State{{}, {1}}, State{{}, {3}}},
                                            {0.3, 0.7}, StateSignature{0, {vocab}});
  MarginalModel model{path, data, GenPartsSpec::single(GenPart::Ctmc), {}};

  const int n_steps = 500;
  const int n_paths = 50000;
  const double h = 1.0 / n_steps;
  const std::vector<double> query_ts{0.25, 0.5, 0.75, 0.999};
  std::vector<int> query_steps;
  for (double t : query_ts)
    query_steps.push_back(std::min(n_steps - 1, static_cast<int>(t * n_steps)));

  std::vector<std::vector<double>> mc(query_ts.size(),
                                      std::vector<double>(vocab, 0.0));
  for (int s = 0; s < n_paths; ++s) {
    Rng rng = Rng::for_stream(66, static_cast<std::uint64_t>(s));
    State x = sample_prior(path, rng);
    std::size_t q = 0;
    for (int step = 0; step < n_steps - 1; ++step) {
      while (q < query_steps.size() && query_steps[q] == step) {
        mc[q][static_cast<std::size_t>(x.tok[0])] += 1.0 / n_paths;
        ++q;
      }
      const GenOut g = model.field(step * h, x);
      x.tok[0] = ctmc_step(x.tok[0], g.discrete_rates[0], h, rng);
    }
    while (q < query_steps.size()) {
      mc[q][static_cast<std::size_t>(x.tok[0])] += 1.0 / n_paths;
      ++q;
    }
  }

  auto rate_rows = [&](double t) {
    std::vector<std::vector<double>> rows(vocab);
    for (int x = 0; x < vocab; ++x)
      rows[x] = model.field(t, State{{}, {x}}).discrete_rates[0];
    return rows;
  };
  double worst = 0.0;
  for (std::size_t q = 0; q < query_ts.size(); ++q) {
    const auto oracle =
        ctmc_oracle(rate_rows, std::vector<double>(vocab, 1.0 / vocab),
                    4000, query_ts[q]);
    worst = std::max(worst, tv_categorical(mc[q], oracle.probs.back()));
  }
  return {worst <= 0.02, "max TV over t grid = " + fmt(worst)};
}

Outcome c7_survival_consistency() {
  double worst = 0.0;
  const double h = 1e-4;
  for (double lam : {0.1, 1.0, 10.0})
    for (double t : {0.1, 0.5}) {
      const double r = jump_survival(lam, t, h);
      worst = std::max(worst, std::abs((1.0 - r) / h - lam) / lam);
    }
  return {worst <= 0.01, "max relative hazard error " + fmt(worst)};
}

Outcome c8_gradcheck() {
  NetConfig c;
  c.real_dim = 2;
  c.vocabs = {3};
  c.width = 16;
  c.depth = 2;
  c.time_features = 8;
  c.head_velocity = true;
  c.head_jump = true;
  c.bins = 6;
  c.head_rates = true;
  c.init_seed = 88;
  FieldNet net(c);
  Rng rng(89);

  std::vector<double> r_vel{0.7, -0.3}, r_lam{0.4, 0.9};
  std::vector<std::vector<double>> r_bins(2, std::vector<double>(6));
  for (auto& row : r_bins)
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
  std::vector<std::vector<double>> r_rates{std::vector<double>(3)};
  for (double& v : r_rates[0]) v = rng.uniform(-1.0, 1.0);
  auto probe = [&](const HeadOut& o) {
    double j = 0.0;
    for (int i = 0; i < 2; ++i) j += r_vel[i] * o.velocity[i] + r_lam[i] * o.lambda[i];
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 6; ++k) j += r_bins[i][k] * o.bin_probs[i][k];
    for (int k = 0; k < 3; ++k) j += r_rates[0][k] * o.rate_measure[0][k];
    return j;
  };

  const State x{{0.3, -0.8}, {2}};
  const double t = 0.41;
  net.forward(x, t);
  HeadUpstream up;
  up.d_velocity = r_vel;
  up.d_lambda = r_lam;
  up.d_bin_probs = r_bins;
  up.d_rate_measure = r_rates;
  std::vector<double> grad(net.param_count(), 0.0);
  net.backward(up, grad);

  const double step = 1e-5;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + step;
    const double jp = probe(net.forward(x, t));
    net.params()[i] = keep - step;
    const double jm = probe(net.forward(x, t));
    net.params()[i] = keep;
    const double fd = (jp - jm) / (2 * step);
    max_rel = std::max(max_rel, std::abs(grad[i] - fd) /
                                    std::max({1e-6, std::abs(fd), std::abs(grad[i])}));
  }
  return {max_rel <= 1e-4, "max relative gradient error " + fmt(max_rel)};
}

Outcome c9_gradient_equality() {
  const CondPath path = CondPath::geometric(kLin, 1);
  const Dataset data = Dataset::two_point();
  auto features = [](double x, double t) {
    return std::vector<double>{1.0, x, t, x * t};
  };
  const std::vector<double> theta{0.25, -0.6, 0.4, 0.1};
  const GenPartsSpec cond = GenPartsSpec::single(GenPart::Flow);

  Rng rng(777);
  const auto base = gradient_equality_check(path, data, cond, features, theta,
                                            1000000, rng);
  double gap_small = 0.0;
  const int reps_small = 32, reps_big = 8;
  for (int r = 0; r < reps_small; ++r) {
    Rng rr(1000 + r);
    gap_small += gradient_equality_check(path, data, cond, features, theta,
                                         1000000, rr)
                     .max_gap;
  }
  gap_small /= reps_small;
  double gap_big = 0.0;
  for (int r = 0; r < reps_big; ++r) {
    Rng rr(2000 + r);
    gap_big += gradient_equality_check(path, data, cond, features, theta,
                                       16000000, rr)
                   .max_gap;
  }
  gap_big /= reps_big;
  const double ratio = gap_small / gap_big;
  const bool pass = base.cosine >= 0.99 && ratio >= 3.0;
  return {pass, "cosine " + fmt(base.cosine) + ", gap ratio (16x draws) " + fmt(ratio)};
}

Outcome c10_training() {
  TrainConfig tc;
  tc.net.real_dim = 1;
  tc.net.width = 64;
  tc.net.depth = 3;
  tc.net.time_features = 16;
  tc.steps = 5000;
  tc.batch_size = 256;
  tc.seed = 101;
  tc.net.init_seed = 102;
  const CondPath path = CondPath::geometric(kLin, 1);
  const Dataset data = Dataset::two_point();
  const auto result = train_model(tc, path, data, GenPartsSpec::single(GenPart::Flow));

  MarginalModel exact{path, data, GenPartsSpec::single(GenPart::Flow), {}};
  const FieldErrorReport rep = velocity_field_error(result.net, exact);

  const FieldNet& net = result.net;
  SimConfig cfg;
  cfg.n_steps = 500;
  cfg.n_samples = 20000;
  cfg.seed = 103;
  cfg.n_threads = sim_threads();
  const auto res = simulate(
      [&net](double t, const State& x) {
        thread_local FieldNet::Workspace ws;
        GenOut g = zero_genout(1);
        g.velocity = net.forward(x, t, ws).velocity;
        return g;
      },
      [](Rng& rng) { return State{{rng.normal()}, {}}; }, cfg);
  double plus = 0.0;
  for (const auto& s : res.samples) plus += s.real[0] > 0.0 ? 1.0 : 0.0;
  plus /= res.samples.size();
  // gate the density-weighted error: the conditional-matching objective only
  // constrains the field where the path puts mass (uniform value reported)
  const bool pass = rep.rel_l2_weighted <= 0.1 && std::abs(plus - 0.5) <= 0.04;
  return {pass, "field rel L2 " + fmt(rep.rel_l2_weighted) + " weighted (" +
                    fmt(rep.rel_l2) + " uniform), trained mode mass " + fmt(plus)};
}

Outcome c11_bregman_algebra() {
  Rng rng(111);
  double worst_id = 0.0, worst_affine = 0.0;
  bool nonneg = true;
  for (const Bregman& d : {Bregman::mse(), Bregman::rate_kl(), Bregman::mse_cosh(1.0),
                           Bregman::mse_exp(1.0)}) {
    for (int i = 0; i < 1000; ++i) {
      auto draw = [&](std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v)
          x = d.kind == BregmanKind::RateKl ? rng.uniform(0.05, 3.0)
                                            : rng.uniform(-2.0, 2.0);
        return v;
      };
      const auto a1 = draw(3), a2 = draw(3), b = draw(3);
      worst_id = std::max(worst_id, std::abs(bregman_value(d, a1, a1)));
      if (bregman_value(d, a1, b) < -1e-12) nonneg = false;
      const double lam = rng.uniform();
      std::vector<double> mix(3);
      for (int k = 0; k < 3; ++k) mix[k] = lam * a1[k] + (1 - lam) * a2[k];
      const auto g = bregman_grad_pred(d, mix, b);
      const auto g1 = bregman_grad_pred(d, a1, b);
      const auto g2 = bregman_grad_pred(d, a2, b);
      for (int k = 0; k < 3; ++k)
        worst_affine = std::max(
            worst_affine, std::abs(g[k] - (lam * g1[k] + (1 - lam) * g2[k])));
    }
  }
  const bool pass = worst_id <= 1e-10 && nonneg && worst_affine <= 1e-10;
  return {pass, "identity " + fmt(worst_id) + ", affine-target " + fmt(worst_affine)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Outcome c12_cli_determinism() {
  const char* cli = std::getenv("GENMATCH_CLI");
  if (!cli) return {false, "GENMATCH_CLI not set"};
  const fs::path root = fs::temp_directory_path() / "gm_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);

  const std::vector<std::pair<std::string, std::string>> configs = {
      {"simulate",
       R"({"command":"simulate","seed":9,"generator":{"model":"superposition:flow+jump"},"sim":{"n_steps":80,"n_samples":2000,"record_trajectories":true}})"},
      {"train",
       R"({"command":"train","seed":9,"train":{"steps":150,"batch":32,"width":16,"depth":1,"time_features":8}})"},
      {"bench-toy",
       R"({"command":"bench-toy","seed":9,"dataset":{"name":"checkerboard-2d","grid":4},"bench":{"n_steps":50,"n_samples":1200}})"},
      {"verify-kfe", R"({"command":"verify-kfe","seed":9,"verify":{"bins":64,"nodes":401}})"},
  };
  int checked_files = 0;
  for (const auto& [name, cfg_text] : configs) {
    const fs::path cfg = root / (name + ".json");
    write(cfg, cfg_text);
    for (const char* run : {"a", "b"}) {
      const std::string cmd = std::string(cli) + " --config " + cfg.string() +
                              " --out " + (root / (name + "_" + run)).string() +
                              " --threads 3 > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0 && name != "verify-kfe")
        return {false, name + " run failed"};
    }
    for (const auto& entry : fs::directory_iterator(root / (name + "_a"))) {
      const fs::path other = root / (name + "_b") / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other))
        return {false, name + ": " + entry.path().filename().string() + " differs"};
      ++checked_files;
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(checked_files) + " artifacts byte-identical on rerun"};
}

}  // namespace

int main() {
  std::printf("acceptance suite (threads: %d)\n", sim_threads());
  report("kfe-residual-suite", c1_kfe_suite());
  report("exact-marginal-flow", c2_exact_marginal_flow());
  report("superposition-invariance", c3_superposition_invariance());
  report("divergence-free-langevin", c4_divergence_free());
  report("checkerboard-mixture-jump", c5_checkerboard_jump());
  report("ctmc-oracle-equivalence", c6_ctmc_oracle());
  report("jump-survival-consistency", c7_survival_consistency());
  report("backprop-gradcheck", c8_gradcheck());
  report("gradient-equality", c9_gradient_equality());
  report("training-convergence", c10_training());
  report("bregman-algebra", c11_bregman_algebra());
  report("cli-determinism", c12_cli_determinism());
  if (g_failures == 0) {
    std::printf("all 12 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failures);
  return 1;
}

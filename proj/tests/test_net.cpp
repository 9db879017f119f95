#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gm/net.hpp"

using namespace gm;

namespace {
const Schedule kLin = Schedule::linear();

NetConfig tiny_all_heads() {
  NetConfig c;
  c.real_dim = 2;
  c.vocabs = {3};
  c.width = 16;
  c.depth = 2;
  c.time_features = 8;
  c.head_velocity = true;
  c.head_jump = true;
  c.bins = 5;
  c.head_rates = true;
  c.init_seed = 42;
  return c;
}

// scalar objective J = sum_h <r_h, head_h>, fixed random direction r
struct Probe {
  std::vector<double> r_vel, r_lam;
  std::vector<std::vector<double>> r_bins, r_rates;
};

Probe make_probe(const NetConfig& c, Rng& rng) {
  Probe p;
  p.r_vel.resize(c.real_dim);
  for (double& v : p.r_vel) v = rng.uniform(-1.0, 1.0);
  p.r_lam.resize(c.real_dim);
  for (double& v : p.r_lam) v = rng.uniform(-1.0, 1.0);
  p.r_bins.assign(c.real_dim, std::vector<double>(c.bins));
  for (auto& row : p.r_bins)
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
  for (int n : c.vocabs) {
    p.r_rates.emplace_back(n);
    for (double& v : p.r_rates.back()) v = rng.uniform(-1.0, 1.0);
  }
  return p;
}

double probe_value(const HeadOut& out, const Probe& p) {
  double j = 0.0;
  for (std::size_t i = 0; i < p.r_vel.size(); ++i) j += p.r_vel[i] * out.velocity[i];
  for (std::size_t i = 0; i < p.r_lam.size(); ++i) j += p.r_lam[i] * out.lambda[i];
  for (std::size_t i = 0; i < p.r_bins.size(); ++i)
    for (std::size_t k = 0; k < p.r_bins[i].size(); ++k)
      j += p.r_bins[i][k] * out.bin_probs[i][k];
  for (std::size_t i = 0; i < p.r_rates.size(); ++i)
    for (std::size_t k = 0; k < p.r_rates[i].size(); ++k)
      j += p.r_rates[i][k] * out.rate_measure[i][k];
  return j;
}
}  // namespace

TEST_CASE("zero parameters: velocity 0, uniform bins") {
  NetConfig c;
  c.real_dim = 1;
  c.head_jump = true;
  c.bins = 8;
  c.width = 8;
  c.depth = 1;
  FieldNet net(c);
  std::fill(net.params().begin(), net.params().end(), 0.0);
  const HeadOut out = net.forward(State{{0.3}, {}}, 0.5);
  CHECK(out.velocity[0] == 0.0);
  for (double p : out.bin_probs[0]) CHECK(p == doctest::Approx(1.0 / 8));
  CHECK(out.lambda[0] == doctest::Approx(1.0));  // exp(0)
}

TEST_CASE("forward is deterministic and finite over a large input range") {
  FieldNet net(tiny_all_heads());
  const State x{{512.0, -999.0}, {1}};
  const HeadOut a = net.forward(x, 0.25);
  const HeadOut b = net.forward(x, 0.25);
  CHECK(a.velocity == b.velocity);
  for (double v : a.velocity) CHECK(std::isfinite(v));
  for (double v : a.lambda) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
  for (const auto& row : a.bin_probs) {
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("backward before forward throws") {
  FieldNet net(tiny_all_heads());
  FieldNet::Workspace ws;
  std::vector<double> grad(net.param_count(), 0.0);
  CHECK_THROWS_AS(net.backward(ws, HeadUpstream{}, grad), ShapeError);
}

TEST_CASE("zero upstream produces zero parameter gradients") {
  FieldNet net(tiny_all_heads());
  const State x{{0.1, -0.2}, {2}};
  net.forward(x, 0.4);
  std::vector<double> grad(net.param_count(), 0.0);
  HeadUpstream up;
  up.d_velocity.assign(2, 0.0);
  net.backward(up, grad);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("gradients add over batch items") {
  FieldNet net(tiny_all_heads());
  const State x1{{0.1, -0.2}, {2}};
  const State x2{{-0.9, 0.7}, {0}};
  HeadUpstream up;
  up.d_velocity = {1.0, -0.5};
  std::vector<double> g1(net.param_count(), 0.0), g2(net.param_count(), 0.0),
      gsum(net.param_count(), 0.0);
  net.forward(x1, 0.3);
  net.backward(up, g1);
  net.forward(x2, 0.8);
  net.backward(up, g2);
  net.forward(x1, 0.3);
  net.backward(up, gsum);
  net.forward(x2, 0.8);
  net.backward(up, gsum);
  for (std::size_t i = 0; i < gsum.size(); ++i)
    CHECK(gsum[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
}

TEST_CASE("backprop matches central finite differences across all heads") {
  FieldNet net(tiny_all_heads());
  Rng rng(7);
  const Probe probe = make_probe(net.config(), rng);
  const State x{{0.4, -0.6}, {1}};
  const double t = 0.37;

  net.forward(x, t);
  HeadUpstream up;
  up.d_velocity = probe.r_vel;
  up.d_lambda = probe.r_lam;
  up.d_bin_probs = probe.r_bins;
  up.d_rate_measure = probe.r_rates;
  std::vector<double> grad(net.param_count(), 0.0);
  net.backward(up, grad);

  const double step = 1e-5;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + step;
    const double jp = probe_value(net.forward(x, t), probe);
    net.params()[i] = keep - step;
    const double jm = probe_value(net.forward(x, t), probe);
    net.params()[i] = keep;
    const double fd = (jp - jm) / (2 * step);
    const double rel = std::abs(grad[i] - fd) / std::max({1e-6, std::abs(fd), std::abs(grad[i])});
    max_rel = std::max(max_rel, rel);
  }
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("optimizer converges on a quadratic") {
  OptimState opt;
  opt.init(1, {0.1, 0.9, 0.999, 1e-8});
  std::vector<double> theta{0.0};
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> grad{2.0 * (theta[0] - 3.0)};
    opt.apply(theta, grad);
  }
  CHECK(theta[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("training smoke: loss decreases and seeds reproduce") {
  TrainConfig tc;
  tc.net.real_dim = 1;
  tc.net.width = 16;
  tc.net.depth = 1;
  tc.net.time_features = 8;
  tc.steps = 300;
  tc.batch_size = 64;
  tc.seed = 5;
  tc.net.init_seed = 6;
  const CondPath path = CondPath::geometric(kLin, 1);
  const Dataset data = Dataset::two_point();
  const auto r1 = train_model(tc, path, data, GenPartsSpec::single(GenPart::Flow));
  const auto r2 = train_model(tc, path, data, GenPartsSpec::single(GenPart::Flow));
  CHECK(r1.curve.back().second < r1.curve.front().second);
  CHECK(r1.net.params() == r2.net.params());
}

TEST_CASE("training the jump head reduces the rate-measure divergence") {
  TrainConfig tc;
  tc.net.real_dim = 1;
  tc.net.width = 16;
  tc.net.depth = 1;
  tc.net.time_features = 8;
  tc.net.head_velocity = false;
  tc.net.head_jump = true;
  tc.net.bins = 16;
  tc.head = HeadKind::Jump;
  tc.loss = Bregman::rate_kl();
  tc.steps = 300;
  tc.batch_size = 64;
  tc.seed = 11;
  GenPartsSpec cond = GenPartsSpec::single(GenPart::Jump);
  cond.bins = JumpBins::make(-2.5, 2.5, 16);
  const auto r =
      train_model(tc, CondPath::geometric(kLin, 1), Dataset::two_point(), cond);
  CHECK(r.curve.back().second < r.curve.front().second);
}

TEST_CASE("training the rate head on the discrete mixture") {
  TrainConfig tc;
  tc.net.real_dim = 0;
  tc.net.vocabs = {4};
  tc.net.width = 16;
  tc.net.depth = 1;
  tc.net.time_features = 8;
  tc.net.head_velocity = false;
  tc.net.head_rates = true;
  tc.head = HeadKind::Ctmc;
  tc.loss = Bregman::rate_kl();
  tc.steps = 300;
  tc.batch_size = 64;
  tc.seed = 13;
  const CondPath path = CondPath::mixture_discrete(4, kLin, 1);
  const Dataset data = Dataset::from_points({State{{}, {1}}, State{{}, {3}}},
                                            {0.5, 0.5}, StateSignature{0, {4}});
  const auto r = train_model(tc, path, data, GenPartsSpec::single(GenPart::Ctmc));
  CHECK(r.curve.back().second < r.curve.front().second);
}

TEST_CASE("divergence carries the last good checkpoint") {
  TrainConfig tc;
  tc.net.real_dim = 1;
  tc.net.width = 8;
  tc.net.depth = 1;
  tc.net.time_features = 8;
  tc.steps = 500;
  tc.batch_size = 16;
  tc.seed = 17;
  tc.opt.lr = 1e200;  // drive the parameters to overflow
  const CondPath path = CondPath::geometric(kLin, 1);
  bool threw = false;
  try {
    train_model(tc, path, Dataset::two_point(), GenPartsSpec::single(GenPart::Flow));
  } catch (const DivergenceError& e) {
    threw = true;
    for (double p : e.last_good.params()) CHECK(std::isfinite(p));
  }
  CHECK(threw);
}

TEST_CASE("net field assembles generator output from the heads") {
  NetConfig c = tiny_all_heads();
  FieldNet net(c);
  FieldNet::Workspace ws;
  const JumpBins bins = JumpBins::make(-1.0, 1.0, c.bins);
  const State x{{0.2, -0.1}, {1}};
  const GenOut g = net.field(x, 0.5, ws, &bins);
  validate_genout(g);
  CHECK(g.velocity.size() == 2);
  CHECK(g.jumps.size() == 2);
  CHECK(g.jumps[0].lambda > 0.0);
  double rowsum = 0.0;
  for (double r : g.discrete_rates[0]) rowsum += r;
  CHECK(std::abs(rowsum) < 1e-12);
  CHECK(g.discrete_rates[0][1] < 0.0);  // stay rate carries the negative sum
  const JumpBins wrong = JumpBins::make(-1.0, 1.0, c.bins + 3);
  CHECK_THROWS_AS(net.field(x, 0.5, ws, &wrong), ShapeError);
}

TEST_CASE("checkpoint round trip") {
  FieldNet net(tiny_all_heads());
  const std::string path = "test_net_ckpt.json";
  save_checkpoint(net, path, "{\"note\":\"unit\"}");
  const FieldNet back = load_checkpoint(path);
  CHECK(back.params() == net.params());
  CHECK(back.config().bins == net.config().bins);
  std::remove(path.c_str());
}

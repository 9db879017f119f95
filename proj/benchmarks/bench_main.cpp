#include <benchmark/benchmark.h>

#include "gm/marginal.hpp"
#include "gm/net.hpp"
#include "gm/paths.hpp"
#include "gm/sim.hpp"

using namespace gm;

namespace {
const Schedule kLin = Schedule::linear();
}

static void BM_PosteriorTwoPoint(benchmark::State& state) {
  const CondPath path = CondPath::geometric(kLin, 1);
  const Dataset data = Dataset::two_point();
  const State x{{0.37}, {}};
  for (auto _ : state)
    benchmark::DoNotOptimize(posterior_weights(path, data, 0.5, x));
}
BENCHMARK(BM_PosteriorTwoPoint);

static void BM_PosteriorCheckerboard(benchmark::State& state) {
  const CondPath path = CondPath::mixture_uniform(-1.0, 1.0, kLin, 2);
  const Dataset data = Dataset::checkerboard2d(16);
  const State x{{0.21, -0.43}, {}};
  for (auto _ : state)
    benchmark::DoNotOptimize(posterior_weights(path, data, 0.5, x));
}
BENCHMARK(BM_PosteriorCheckerboard);

static void BM_MarginalJumpField(benchmark::State& state) {
  const Dataset board = Dataset::checkerboard2d(16);
  GenPartsSpec spec = GenPartsSpec::single(GenPart::Jump);
  spec.atom_support = std::make_shared<const std::vector<std::vector<double>>>(
      board.unique_real_values());
  const MarginalModel model{CondPath::mixture_uniform(-1.0, 1.0, kLin, 2), board,
                            spec, {}};
  const State x{{0.21, -0.43}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(model.field(0.6, x));
}
BENCHMARK(BM_MarginalJumpField);

static void BM_EulerStepFlow(benchmark::State& state) {
  GenOut g = zero_genout(2);
  g.velocity = {0.4, -0.2};
  Rng rng(1);
  State x{{0.1, 0.2}, {}};
  for (auto _ : state) {
    x = euler_step(x, g, 0.5, 1e-3, JumpSchedule::LinearHazard, {}, rng);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_EulerStepFlow);

static void BM_NetForward(benchmark::State& state) {
  NetConfig c;
  c.real_dim = 1;
  c.width = 64;
  c.depth = 2;
  FieldNet net(c);
  FieldNet::Workspace ws;
  const State x{{0.3}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, 0.5, ws));
}
BENCHMARK(BM_NetForward);

static void BM_NetBackward(benchmark::State& state) {
  NetConfig c;
  c.real_dim = 1;
  c.width = 64;
  c.depth = 2;
  FieldNet net(c);
  FieldNet::Workspace ws;
  const State x{{0.3}, {}};
  net.forward(x, 0.5, ws);
  HeadUpstream up;
  up.d_velocity = {1.0};
  std::vector<double> grad(net.param_count(), 0.0);
  for (auto _ : state) {
    net.backward(ws, up, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_NetBackward);

BENCHMARK_MAIN();

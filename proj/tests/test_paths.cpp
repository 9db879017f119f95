#include <doctest.h>

#include <cmath>
#include <vector>

#include "gm/paths.hpp"

using namespace gm;

namespace {
const Schedule kLin = Schedule::linear();
}

TEST_CASE("geometric average at t=1 returns exactly z") {
  const CondPath p = CondPath::geometric(kLin, 3);
  Rng rng(1);
  const State z{{0.3, -2.0, 5.5}, {}};
  const State x = sample_cond(p, z, 1.0, rng);
  CHECK(x.real == z.real);
}

TEST_CASE("uniform mixture at t=0 never draws the atom") {
  const CondPath p = CondPath::mixture_uniform(0.0, 1.0, kLin, 1);
  Rng rng(2);
  const State z{{0.25}, {}};
  for (int i = 0; i < 2000; ++i) {
    const State x = sample_cond(p, z, 0.0, rng);
    CHECK(x.real[0] >= 0.0);
    CHECK(x.real[0] <= 1.0);
  }
}

TEST_CASE("mixture atom frequency matches kappa at t=0.5") {
  // Monte Carlo oracle: binomial 3-sigma band around 0.5 at 1e5 draws
  const CondPath p = CondPath::mixture_uniform(0.0, 1.0, kLin, 1);
  Rng rng(3);
  const State z{{0.37}, {}};
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    if (sample_cond(p, z, 0.5, rng).real[0] == 0.37) ++hits;
  const double freq = static_cast<double>(hits) / n;
  CHECK(std::abs(freq - 0.5) < 0.01);
}

TEST_CASE("conditional densities") {
  SUBCASE("standard normal at the origin") {
    const CondPath p = CondPath::geometric(kLin, 1);
    const auto fd = cond_density(p, 0.0, 0.0, 0.0);
    CHECK(fd.continuous == doctest::Approx(0.3989422804014327).epsilon(1e-12));
    CHECK(fd.atom == 0.0);
  }
  SUBCASE("uniform mixture splits continuous and atom mass") {
    const CondPath p = CondPath::mixture_uniform(0.0, 2.0, kLin, 1);
    const auto fd = cond_density(p, 1.0, 0.5, 0.7);
    CHECK(fd.continuous == doctest::Approx(0.25));
    CHECK(fd.atom == doctest::Approx(0.5));
  }
  SUBCASE("outside the support only the atom remains") {
    const CondPath p = CondPath::mixture_uniform(0.0, 2.0, kLin, 1);
    const auto fd = cond_density(p, 1.0, 0.5, 3.0);
    CHECK(fd.continuous == 0.0);
    CHECK(fd.atom == doctest::Approx(0.5));
  }
  SUBCASE("degenerate geometric density at t=1") {
    const CondPath p = CondPath::geometric(kLin, 1);
    CHECK_THROWS_AS(cond_density(p, 0.0, 1.0, 0.0), SingularityError);
  }
}

TEST_CASE("density time derivatives") {
  SUBCASE("gaussian path at the origin") {
    const CondPath p = CondPath::geometric(kLin, 1);
    const auto d = cond_density_dt(p, 0.0, 0.0, 0.0);
    CHECK(d.continuous == doctest::Approx(0.3989422804014327).epsilon(1e-10));
  }
  SUBCASE("uniform mixture rates") {
    const CondPath p = CondPath::mixture_uniform(0.0, 1.0, kLin, 1);
    const auto d = cond_density_dt(p, 0.5, 0.3, 0.6);
    CHECK(d.continuous == doctest::Approx(-1.0));
    CHECK(d.atom == doctest::Approx(1.0));
  }
  SUBCASE("singularity guard near t=1") {
    const CondPath p = CondPath::geometric(kLin, 1);
    CHECK_THROWS_AS(cond_density_dt(p, 0.0, 1.0 - 1e-10, 0.0), SingularityError);
  }
  SUBCASE("finite-difference oracle across paths and schedules") {
    const double step = 1e-5;
    for (const CondPath& p :
         {CondPath::geometric(kLin, 1), CondPath::geometric(Schedule::cosine(), 1),
          CondPath::mixture_uniform(-1.0, 2.0, Schedule::polynomial(2.0), 1)}) {
      for (double t : {0.2, 0.5, 0.8}) {
        for (double x : {-0.5, 0.1, 1.3}) {
          const double z = 0.7;
          const auto an = cond_density_dt(p, z, t, x);
          const auto lo = cond_density(p, z, t - step, x);
          const auto hi = cond_density(p, z, t + step, x);
          CHECK(std::abs(an.continuous - (hi.continuous - lo.continuous) / (2 * step)) <
                1e-6);
          CHECK(std::abs(an.atom - (hi.atom - lo.atom) / (2 * step)) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("discrete factor densities against counting measure") {
  const CondPath p = CondPath::mixture_discrete(4, kLin, 1);
  const auto on = cond_density_tok(p, 2, 0.5, 2);
  CHECK(on.continuous == doctest::Approx(0.125));
  CHECK(on.atom == doctest::Approx(0.5));
  const auto off = cond_density_tok(p, 2, 0.5, 1);
  CHECK(off.atom == 0.0);
  CHECK_THROWS_AS(cond_density_tok(p, 2, 0.5, 9), DomainError);
}

TEST_CASE("posterior weights") {
  SUBCASE("symmetry at the midpoint") {
    const CondPath p = CondPath::geometric(kLin, 1);
    const auto w = posterior_weights(p, Dataset::two_point(), 0.4, State{{0.0}, {}});
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
  }
  SUBCASE("single point dataset is degenerate") {
    const CondPath p = CondPath::geometric(kLin, 1);
    const Dataset one = Dataset::from_points({State{{0.3}, {}}}, {1.0}, {1, {}});
    const auto w = posterior_weights(p, one, 0.7, State{{2.0}, {}});
    CHECK(w.size() == 1);
    CHECK(w[0] == doctest::Approx(1.0));
  }
  SUBCASE("hand-computed gaussian log ratio") {
    // atoms {0, 2}, t = 0.5, x = 1: weights proportional to
    // N(1; 0, 0.25), N(1; 1, 0.25) -> (e^{-2}, 1)/(1 + e^{-2})
    const CondPath p = CondPath::geometric(kLin, 1);
    const Dataset d = Dataset::from_points({State{{0.0}, {}}, State{{2.0}, {}}},
                                           {0.5, 0.5}, {1, {}});
    const auto w = posterior_weights(p, d, 0.5, State{{1.0}, {}});
    const double e2 = std::exp(-2.0);
    CHECK(w[0] == doctest::Approx(e2 / (1.0 + e2)).epsilon(1e-10));
    CHECK(w[1] == doctest::Approx(1.0 / (1.0 + e2)).epsilon(1e-10));
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("atom coincidence dominates the continuous part") {
    const CondPath p = CondPath::mixture_uniform(-1.0, 1.0, kLin, 1);
    const Dataset d = Dataset::from_points({State{{-0.5}, {}}, State{{0.5}, {}}},
                                           {0.5, 0.5}, {1, {}});
    const auto w = posterior_weights(p, d, 0.5, State{{0.5}, {}});
    CHECK(w[1] == doctest::Approx(1.0));
  }
  SUBCASE("invariant under rescaling of dataset weights") {
    const CondPath p = CondPath::geometric(kLin, 1);
    const Dataset a = Dataset::from_points({State{{-1.0}, {}}, State{{0.5}, {}}},
                                           {0.2, 0.8}, {1, {}});
    const Dataset b = Dataset::from_points({State{{-1.0}, {}}, State{{0.5}, {}}},
                                           {2.0, 8.0}, {1, {}});
    const auto wa = posterior_weights(p, a, 0.3, State{{0.2}, {}});
    const auto wb = posterior_weights(p, b, 0.3, State{{0.2}, {}});
    CHECK(wa[0] == doctest::Approx(wb[0]).epsilon(1e-13));
  }
  SUBCASE("empty posterior throws") {
    const CondPath p = CondPath::mixture_uniform(0.0, 1.0, kLin, 1);
    const Dataset d = Dataset::from_points({State{{0.5}, {}}}, {1.0}, {1, {}});
    CHECK_THROWS_AS(posterior_weights(p, d, 0.5, State{{7.0}, {}}),
                    EmptyPosteriorError);
  }
  SUBCASE("signature mismatch throws") {
    const CondPath p = CondPath::geometric(kLin, 1);
    CHECK_THROWS_AS(posterior_weights(p, Dataset::two_point(), 0.5, State{{0.0, 1.0}, {}}),
                    ShapeError);
  }
}

TEST_CASE("normalization: quadrature of continuous part plus atom mass is 1") {
  auto total_mass = [](const CondPath& p, double z, double t, double lo, double hi) {
    const int n = 2001;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = lo + (hi - lo) * i / (n - 1);
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      acc += w * cond_density(p, z, t, x).continuous;
    }
    acc *= (hi - lo) / (n - 1);
    return acc + cond_density(p, z, t, lo).atom;
  };
  SUBCASE("uniform mixture") {
    const CondPath p = CondPath::mixture_uniform(-1.0, 2.0, kLin, 1);
    for (double t : {0.1, 0.5, 0.9})
      CHECK(total_mass(p, 0.7, t, -1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("gaussian, +-8 std") {
    const CondPath p = CondPath::geometric(kLin, 1);
    for (double t : {0.1, 0.5, 0.9}) {
      const double m = t * 0.7, s = 1.0 - t;
      CHECK(total_mass(p, 0.7, t, m - 8 * s, m + 8 * s) ==
            doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("sampled histogram matches the density within TV 0.02") {
  const CondPath p = CondPath::geometric(kLin, 1);
  const double z = 0.8, t = 0.5;
  Rng rng(11);
  const int n = 100000;
  const int bins = 64;
  const double lo = t * z - 5.0, hi = t * z + 5.0;
  std::vector<double> hist(bins, 0.0);
  for (int i = 0; i < n; ++i) {
    const double x = sample_cond(p, State{{z}, {}}, t, rng).real[0];
    int b = static_cast<int>((x - lo) / (hi - lo) * bins);
    b = std::max(0, std::min(bins - 1, b));
    hist[b] += 1.0 / n;
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double xa = lo + (hi - lo) * b / bins;
    const double xb = lo + (hi - lo) * (b + 1) / bins;
    // midpoint mass of the analytic density
    const double m = cond_density(p, z, t, 0.5 * (xa + xb)).continuous * (xb - xa);
    tv += std::abs(hist[b] - m);
  }
  CHECK(0.5 * tv < 0.02);
}

TEST_CASE("toy datasets") {
  const Dataset two = Dataset::two_point();
  CHECK(two.size() == 2);
  CHECK(two.points[0].real[0] == -1.0);
  const Dataset board = Dataset::checkerboard2d(16);
  CHECK(board.size() == 128);
  for (const auto& p : board.points) {
    CHECK(p.real[0] >= -1.0);
    CHECK(p.real[0] <= 1.0);
  }
  board.validate();
}

TEST_CASE("dataset csv round trip") {
  const Dataset d = Dataset::from_points(
      {State{{0.25, -1.5}, {}}, State{{2.0, 0.125}, {}}}, {0.25, 0.75}, {2, {}});
  const std::string path = "test_paths_dataset.csv";
  d.save_csv(path, true);
  const Dataset back = Dataset::load_csv(path, true);
  CHECK(back.size() == 2);
  CHECK(back.points[1].real[1] == doctest::Approx(0.125));
  CHECK(back.weights[1] == doctest::Approx(0.75));
  std::remove(path.c_str());
}

#pragma once

#include <vector>

#include "gm/errors.hpp"

namespace gm {

// 1d evaluation grid with trapezoid weights; point masses (atoms) ride along
// as explicit positions and are added to quadrature sums separately.
struct Grid1D {
  std::vector<double> nodes;    // sorted, strictly increasing
  std::vector<double> weights;  // trapezoid weights
  std::vector<double> atoms;    // atom positions

  static Grid1D uniform(double lo, double hi, int n, std::vector<double> atom_pos = {}) {
    if (n < 2 || !(lo < hi)) throw DomainError("Grid1D::uniform: bad range");
    Grid1D g;
    g.nodes.resize(n);
    g.weights.assign(n, 0.0);
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) g.nodes[i] = lo + i * h;
    g.nodes.back() = hi;
    for (int i = 0; i + 1 < n; ++i) {
      const double half = 0.5 * (g.nodes[i + 1] - g.nodes[i]);
      g.weights[i] += half;
      g.weights[i + 1] += half;
    }
    g.atoms = std::move(atom_pos);
    return g;
  }
};

}  // namespace gm

#pragma once

#include <string>
#include <vector>

#include "gm/state.hpp"

namespace gm {

// An empirical target distribution: weighted atoms on one state space.
struct Dataset {
  std::vector<State> points;
  std::vector<double> weights;  // nonnegative, sum to 1
  StateSignature signature;

  std::size_t size() const { return points.size(); }

  // Throws ShapeError / DomainError if invariants are violated.
  void validate() const;

  static Dataset from_points(std::vector<State> pts, std::vector<double> w,
                             StateSignature sig);

  // {-1,+1} in 1d, equal weights.
  static Dataset two_point();

  // Alternating cells of a grid x grid board over [-1,1]^2; atoms at the
  // centers of the active cells, equal weights.
  static Dataset checkerboard2d(int grid = 16);

  // One row per point; if weighted, the final column is a nonnegative weight
  // (normalized on load). All columns are parsed as Euclidean coordinates.
  static Dataset load_csv(const std::string& path, bool weighted);

  void save_csv(const std::string& path, bool weighted) const;

  // Sorted unique coordinate values per Euclidean dimension (jump targets
  // for atom-valued jump measures).
  std::vector<std::vector<double>> unique_real_values() const;
};

}  // namespace gm

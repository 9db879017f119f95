#include "gm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gm {

void Dataset::validate() const {
  if (points.empty()) throw DomainError("dataset is empty");
  if (weights.size() != points.size())
    throw ShapeError("dataset: weights/points size mismatch");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("dataset: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw DomainError("dataset: weights do not sum to 1");
  for (const auto& p : points)
    if (!matches(signature, p))
      throw ShapeError("dataset: point does not match signature");
}

Dataset Dataset::from_points(std::vector<State> pts, std::vector<double> w,
                             StateSignature sig) {
  Dataset d;
  d.points = std::move(pts);
  d.weights = std::move(w);
  d.signature = std::move(sig);
  double sum = 0.0;
  for (double wi : d.weights) sum += wi;
  if (sum > 0.0)
    for (double& wi : d.weights) wi /= sum;
  d.validate();
  return d;
}

Dataset Dataset::two_point() {
  return from_points({State{{-1.0}, {}}, State{{1.0}, {}}}, {0.5, 0.5},
                     StateSignature{1, {}});
}

Dataset Dataset::checkerboard2d(int grid) {
  if (grid < 2) throw DomainError("checkerboard grid must be >= 2");
  std::vector<State> pts;
  const double cell = 2.0 / grid;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      if ((i + j) % 2 == 0)
        pts.push_back(State{{-1.0 + (i + 0.5) * cell, -1.0 + (j + 0.5) * cell}, {}});
  std::vector<double> w(pts.size(), 1.0 / static_cast<double>(pts.size()));
  return from_points(std::move(pts), std::move(w), StateSignature{2, {}});
}

Dataset Dataset::load_csv(const std::string& path, bool weighted) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset csv: " + path);
  std::vector<State> pts;
  std::vector<double> w;
  std::string line;
  std::size_t ncols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.empty()) continue;
    if (ncols == 0) ncols = row.size();
    if (row.size() != ncols)
      throw ConfigError("ragged dataset csv: " + path);
    double wi = 1.0;
    if (weighted) {
      if (row.size() < 2) throw ConfigError("weighted csv needs >= 2 columns");
      wi = row.back();
      row.pop_back();
    }
    pts.push_back(State{std::move(row), {}});
    w.push_back(wi);
  }
  if (pts.empty()) throw ConfigError("empty dataset csv: " + path);
  return from_points(std::move(pts), std::move(w),
                     StateSignature{pts.front().real.size(), {}});
}

void Dataset::save_csv(const std::string& path, bool weighted) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset csv: " + path);
  char buf[64];
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points[i].real.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", points[i].real[j]);
      out << (j ? "," : "") << buf;
    }
    if (weighted) {
      std::snprintf(buf, sizeof buf, "%.17g", weights[i]);
      out << "," << buf;
    }
    out << "\n";
  }
}

std::vector<std::vector<double>> Dataset::unique_real_values() const {
  std::vector<std::vector<double>> vals(signature.real_dim);
  for (std::size_t d = 0; d < signature.real_dim; ++d) {
    for (const auto& p : points) vals[d].push_back(p.real[d]);
    std::sort(vals[d].begin(), vals[d].end());
    vals[d].erase(std::unique(vals[d].begin(), vals[d].end()), vals[d].end());
  }
  return vals;
}

}  // namespace gm

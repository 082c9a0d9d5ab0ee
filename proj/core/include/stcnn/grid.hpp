#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "stcnn/ops.hpp"
#include "stcnn/tensor.hpp"

namespace stcnn {

struct GridPoint {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Fixed-size pixel domain the trajectories live on.
struct GridSpec {
  int height = 0;
  int width = 0;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

  int cells() const { return height * width; }
  bool contains(GridPoint p) const {
    return p.row >= 0 && p.row < height && p.col >= 0 && p.col < width;
  }
  std::int64_t flat(GridPoint p) const { return static_cast<std::int64_t>(p.row) * width + p.col; }
  GridPoint unflat(std::int64_t i) const {
    return {static_cast<int>(i / width), static_cast<int>(i % width)};
  }
  std::string str() const { return std::to_string(height) + "x" + std::to_string(width); }

  /// Throws unless both extents are at least 2.
  void validate() const;
};

GridSpec parse_grid(const std::string& spec);  // "HxW"

/// Round-half-up mapping from a continuous coordinate to a cell index.
int round_coord(double x);

/// Nearest in-grid cell to continuous coordinates (round, then clamp).
GridPoint nearest_cell(const GridSpec& grid, double row, double col);

/// Normalized probability mass over the cells of a grid. Carries both the
/// mass and its logarithm as graph tensors so that likelihood training can
/// differentiate through the stable log form.
struct GridDistribution {
  GridSpec grid;
  Tensor mass;      // [H,W], sums to 1
  Tensor log_mass;  // [H,W]

  static GridDistribution from_logits(const GridSpec& grid, const Tensor& logits);
  /// From an already-normalized positive mass map (log taken elementwise).
  static GridDistribution from_mass(const GridSpec& grid, const Tensor& mass);
  static GridDistribution uniform(const GridSpec& grid);
  /// All mass on one cell. log_mass is -inf off the target cell.
  static GridDistribution point_mass(const GridSpec& grid, GridPoint at);

  /// (1 - lambda) * mass + lambda / cells, differentiable.
  GridDistribution mixed_with_uniform(double lambda) const;

  double mass_at(GridPoint p) const { return mass[grid.flat(p)]; }
  double log_mass_at(GridPoint p) const { return log_mass[grid.flat(p)]; }
  double total_mass() const;
  GridPoint argmax() const;
  /// Expected (row, col) under the mass.
  std::pair<double, double> expected_point() const;

  /// Throws if |total - 1| > tol or any entry is negative.
  void validate_normalized(double tol = 1e-6) const;
};

/// Negative log mass at the target cell, as a scalar graph tensor. The
/// gradient with respect to the producing logits is softmax minus one-hot.
/// Throws if the target lies outside the grid.
Tensor nll(const GridDistribution& dist, GridPoint target);

}  // namespace stcnn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcnn/trajectory.hpp"

namespace stcnn {

enum class SynthKind { linear, fork, circle, jumpy };

SynthKind parse_synth_kind(const std::string& name);
std::string to_string(SynthKind kind);

struct SynthResult {
  std::vector<Trajectory> trajectories;
  std::vector<ReferenceImage> ref_images;  // shared scene images, possibly empty
};

/// Deterministic synthetic datasets, a pure function of (kind, count, grid,
/// seed, min_points). Trajectories that would leave the grid are truncated at
/// the boundary; anything truncated below min_points is resampled.
///
///   linear: constant velocity, random start/direction/speed.
///   fork:   straight approach along a row, then a left/right branch with
///           probability 1/2 each. Emits one shared reference image marking
///           the fork column.
///   circle: constant angular velocity around a random center.
///   jumpy:  piecewise linear strokes joined by long-distance jumps.
SynthResult synthesize(SynthKind kind, int count, const GridSpec& grid, std::uint64_t seed,
                       int min_points = 6);

/// Rounded constant-velocity walk from (start_row, start_col), truncated at
/// the grid boundary. Exposed as the building block of `linear` and of
/// constant-velocity test fixtures.
std::vector<GridPoint> linear_path(double start_row, double start_col, double vel_row,
                                   double vel_col, int steps, const GridSpec& grid);

/// Column of the branch point used by `fork` data on this grid.
int fork_column(const GridSpec& grid);

}  // namespace stcnn

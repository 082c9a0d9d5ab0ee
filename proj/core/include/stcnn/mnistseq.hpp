#pragma once

#include <iosfwd>
#include <vector>

#include "stcnn/trajectory.hpp"

namespace stcnn {

struct MnistConvertStats {
  int digits_in = 0;
  int converted = 0;
  int skipped_short = 0;   // digits with fewer than 2 points
  int clamped_points = 0;  // cumulative positions clamped back onto the grid
  int pen_lifts = 0;
};

/// Converts raw stroke sequences to canonical trajectories.
///
/// Raw format, one digit per line:
///   `<id> <start_row>,<start_col> <tok>...`
/// where each tok is a signed relative offset `<drow>,<dcol>` or the pen-lift
/// marker `L`. Offsets accumulate into absolute positions; lift markers are
/// dropped, so the reposition offset that follows one shows up as a
/// long-distance jump in the output. Positions off the grid are clamped to
/// the nearest cell and counted.
std::pair<std::vector<Trajectory>, MnistConvertStats> convert_mnistseq(std::istream& raw,
                                                                       const GridSpec& grid);

/// File-to-file wrapper emitting the canonical trajectory format.
MnistConvertStats convert_mnistseq_file(const std::string& raw_path, const GridSpec& grid,
                                        const std::string& out_path);

}  // namespace stcnn

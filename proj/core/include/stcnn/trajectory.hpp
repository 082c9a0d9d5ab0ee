#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stcnn/grid.hpp"

namespace stcnn {

struct Trajectory {
  std::string id;
  std::vector<GridPoint> points;
  std::string ref_image_id;  // empty when no reference image is linked

  int length() const { return static_cast<int>(points.size()); }
};

/// Scene image on the same grid as the trajectories, HWC layout, values in [0,1].
struct ReferenceImage {
  std::string id;
  int height = 0;
  int width = 0;
  int channels = 1;  // 1 or 3
  std::vector<float> pixels;

  float at(int r, int c, int ch) const {
    return pixels[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
};

/// Reference images keyed by id, as loaded from a sibling image directory.
struct RefImageSet {
  std::map<std::string, ReferenceImage> images;

  const ReferenceImage* find(const std::string& id) const {
    auto it = images.find(id);
    return it == images.end() ? nullptr : &it->second;
  }
  const ReferenceImage* for_trajectory(const Trajectory& t) const {
    return t.ref_image_id.empty() ? nullptr : find(t.ref_image_id);
  }
};

/// s consecutive frames plus the point that follows them, with provenance.
struct SegmentWindow {
  std::string trajectory_id;
  int offset = 0;  // index of the first frame in the source trajectory
  std::vector<GridPoint> frames;
  GridPoint target;
};

// ---- canonical trajectory text format -----------------------------------------
// One trajectory per line: `<id> [ref=<image_id>] <row>,<col> <row>,<col> ...`

std::vector<Trajectory> parse_trajectories(std::istream& in, const GridSpec& grid);
std::vector<Trajectory> load_trajectories(const std::string& path, const GridSpec& grid);
void serialize_trajectories(std::span<const Trajectory> trajs, std::ostream& out);
void save_trajectories(std::span<const Trajectory> trajs, const std::string& path);

// ---- windowing -----------------------------------------------------------------

/// All fully in-range windows: offsets 0 .. length - s - 1, one target each.
/// A trajectory shorter than s + 1 yields no windows.
std::vector<SegmentWindow> windows(const Trajectory& traj, int s);

struct WindowSet {
  std::vector<SegmentWindow> windows;
  int skipped_trajectories = 0;  // too short to contribute a single window
};

WindowSet collect_windows(std::span<const Trajectory> trajs, int s);

// ---- rasterization ---------------------------------------------------------------

/// One-hot frame stack [s,H,W]: frame t has a single 1 at points[t].
Tensor rasterize_segment(std::span<const GridPoint> points, const GridSpec& grid);

}  // namespace stcnn

#include "stcnn/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "stcnn/rng.hpp"

namespace stcnn {
namespace {

constexpr double kPi = 3.141592653589793238462643;

GridPoint round_point(double r, double c) { return {round_coord(r), round_coord(c)}; }

std::vector<GridPoint> walk_linear(double r, double c, double vr, double vc, int steps,
                                   const GridSpec& grid) {
  std::vector<GridPoint> pts;
  for (int t = 0; t <= steps; ++t) {
    const GridPoint p = round_point(r + t * vr, c + t * vc);
    if (!grid.contains(p)) break;
    pts.push_back(p);
  }
  return pts;
}

std::vector<GridPoint> make_linear(Rng& rng, const GridSpec& grid) {
  const double r = rng.uniform(1.0, grid.height - 2.0);
  const double c = rng.uniform(1.0, grid.width - 2.0);
  const double angle = rng.uniform(0.0, 2.0 * kPi);
  const double speed = rng.uniform(0.5, 2.0);
  const int steps = 11 + static_cast<int>(rng.bounded(17));  // 12..28 points attempted
  return walk_linear(r, c, speed * std::cos(angle), speed * std::sin(angle), steps, grid);
}

std::vector<GridPoint> make_fork(Rng& rng, const GridSpec& grid) {
  const int fc = fork_column(grid);
  const int c0 = static_cast<int>(rng.bounded(3));
  const int margin = 4;
  const int r0 = margin + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(grid.height - 2 * margin)));
  const bool up = rng.coin_flip();
  std::vector<GridPoint> pts;
  for (int c = c0; c <= fc; ++c) pts.push_back({r0, c});
  int r = r0;
  for (int c = fc + 1; c < grid.width; ++c) {
    r += up ? -1 : 1;
    const GridPoint p{r, c};
    if (!grid.contains(p)) break;
    pts.push_back(p);
  }
  return pts;
}

std::vector<GridPoint> make_circle(Rng& rng, const GridSpec& grid) {
  const double max_radius = std::min(grid.height, grid.width) / 2.0 - 2.0;
  const double radius = rng.uniform(std::max(2.0, max_radius / 3.0), max_radius);
  const double cr = rng.uniform(radius + 1.0, grid.height - 2.0 - radius);
  const double cc = rng.uniform(radius + 1.0, grid.width - 2.0 - radius);
  const double omega = (rng.coin_flip() ? 1.0 : -1.0) * rng.uniform(0.15, 0.45);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const int steps = 15 + static_cast<int>(rng.bounded(17));  // 16..32 points attempted
  std::vector<GridPoint> pts;
  for (int t = 0; t <= steps; ++t) {
    const double a = phase + t * omega;
    const GridPoint p = round_point(cr + radius * std::sin(a), cc + radius * std::cos(a));
    if (!grid.contains(p)) break;
    pts.push_back(p);
  }
  return pts;
}

std::vector<GridPoint> make_jumpy(Rng& rng, const GridSpec& grid) {
  const int strokes = 2 + static_cast<int>(rng.bounded(3));
  std::vector<GridPoint> pts;
  for (int s = 0; s < strokes; ++s) {
    const double r = rng.uniform(1.0, grid.height - 2.0);
    const double c = rng.uniform(1.0, grid.width - 2.0);
    const double angle = rng.uniform(0.0, 2.0 * kPi);
    const double speed = rng.uniform(0.7, 1.8);
    const int steps = 3 + static_cast<int>(rng.bounded(6));  // 4..9 points per stroke
    auto stroke = walk_linear(r, c, speed * std::cos(angle), speed * std::sin(angle), steps, grid);
    pts.insert(pts.end(), stroke.begin(), stroke.end());
  }
  return pts;
}

ReferenceImage fork_scene(const GridSpec& grid) {
  ReferenceImage img;
  img.id = "scene-fork";
  img.height = grid.height;
  img.width = grid.width;
  img.channels = 1;
  img.pixels.assign(static_cast<std::size_t>(grid.cells()), 0.0f);
  const int fc = fork_column(grid);
  for (int r = 0; r < grid.height; ++r) {
    img.pixels[static_cast<std::size_t>(r) * grid.width + fc] = 0.5f;
  }
  return img;
}

}  // namespace

int fork_column(const GridSpec& grid) { return grid.width / 2; }

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "linear") return SynthKind::linear;
  if (name == "fork") return SynthKind::fork;
  if (name == "circle") return SynthKind::circle;
  if (name == "jumpy") return SynthKind::jumpy;
  throw std::invalid_argument("unknown synthetic kind '" + name + "' (expected linear|fork|circle|jumpy)");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::linear: return "linear";
    case SynthKind::fork: return "fork";
    case SynthKind::circle: return "circle";
    case SynthKind::jumpy: return "jumpy";
  }
  return "?";
}

std::vector<GridPoint> linear_path(double start_row, double start_col, double vel_row,
                                   double vel_col, int steps, const GridSpec& grid) {
  grid.validate();
  if (steps < 0) throw std::invalid_argument("linear_path: steps must be >= 0");
  return walk_linear(start_row, start_col, vel_row, vel_col, steps, grid);
}

SynthResult synthesize(SynthKind kind, int count, const GridSpec& grid, std::uint64_t seed,
                       int min_points) {
  grid.validate();
  if (count < 0) throw std::invalid_argument("synthesize: count must be >= 0");
  if (min_points < 2) throw std::invalid_argument("synthesize: min_points must be >= 2");
  if (kind == SynthKind::fork && (grid.width < 8 || grid.height < 2 * 4 + 1)) {
    throw std::invalid_argument("synthesize: grid " + grid.str() + " too small for fork data");
  }

  SynthResult result;
  result.trajectories.reserve(static_cast<std::size_t>(count));
  const std::string prefix = to_string(kind);
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::from_stream(seed, static_cast<std::uint64_t>(i));
    std::vector<GridPoint> pts;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      switch (kind) {
        case SynthKind::linear: pts = make_linear(rng, grid); break;
        case SynthKind::fork: pts = make_fork(rng, grid); break;
        case SynthKind::circle: pts = make_circle(rng, grid); break;
        case SynthKind::jumpy: pts = make_jumpy(rng, grid); break;
      }
      if (static_cast<int>(pts.size()) >= min_points) break;
      pts.clear();
    }
    if (pts.empty()) {
      throw std::runtime_error("synthesize: could not draw a trajectory of at least " +
                               std::to_string(min_points) + " points on grid " + grid.str());
    }
    Trajectory t;
    t.id = prefix + std::to_string(i);
    t.points = std::move(pts);
    if (kind == SynthKind::fork) t.ref_image_id = "scene-fork";
    result.trajectories.push_back(std::move(t));
  }
  if (kind == SynthKind::fork && count > 0) result.ref_images.push_back(fork_scene(grid));
  return result;
}

}  // namespace stcnn

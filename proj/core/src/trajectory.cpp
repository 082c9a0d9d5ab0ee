#include "stcnn/trajectory.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stcnn {
namespace {

bool parse_point_token(const std::string& tok, GridPoint& out) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 >= tok.size()) return false;
  try {
    std::size_t used = 0;
    out.row = std::stoi(tok.substr(0, comma), &used);
    if (used != comma) return false;
    const std::string rest = tok.substr(comma + 1);
    out.col = std::stoi(rest, &used);
    if (used != rest.size()) return false;
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

}  // namespace

std::vector<Trajectory> parse_trajectories(std::istream& in, const GridSpec& grid) {
  grid.validate();
  std::vector<Trajectory> result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line
    if (tok[0] == '#') continue;
    Trajectory traj;
    traj.id = tok;
    int point_index = 0;
    while (ls >> tok) {
      if (tok.rfind("ref=", 0) == 0) {
        traj.ref_image_id = tok.substr(4);
        continue;
      }
      GridPoint p;
      if (!parse_point_token(tok, p)) {
        throw std::runtime_error("trajectory file line " + std::to_string(line_no) +
                                 ": malformed point token '" + tok + "'");
      }
      if (!grid.contains(p)) {
        throw std::runtime_error("trajectory '" + traj.id + "' point " + std::to_string(point_index) +
                                 " (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                                 ") lies outside grid " + grid.str() + " (valid rows 0.." +
                                 std::to_string(grid.height - 1) + ", cols 0.." +
                                 std::to_string(grid.width - 1) + ")");
      }
      traj.points.push_back(p);
      ++point_index;
    }
    if (traj.points.empty()) {
      throw std::runtime_error("trajectory file line " + std::to_string(line_no) + ": trajectory '" +
                               traj.id + "' has no points");
    }
    result.push_back(std::move(traj));
  }
  return result;
}

std::vector<Trajectory> load_trajectories(const std::string& path, const GridSpec& grid) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trajectory file '" + path + "'");
  return parse_trajectories(f, grid);
}

void serialize_trajectories(std::span<const Trajectory> trajs, std::ostream& out) {
  for (const Trajectory& t : trajs) {
    out << t.id;
    if (!t.ref_image_id.empty()) out << " ref=" << t.ref_image_id;
    for (const GridPoint& p : t.points) out << ' ' << p.row << ',' << p.col;
    out << '\n';
  }
}

void save_trajectories(std::span<const Trajectory> trajs, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  serialize_trajectories(trajs, f);
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<SegmentWindow> windows(const Trajectory& traj, int s) {
  if (s < 1) throw std::invalid_argument("windows: segment length must be >= 1, got " + std::to_string(s));
  std::vector<SegmentWindow> out;
  const int n = traj.length();
  if (n < s + 1) return out;
  out.reserve(static_cast<std::size_t>(n - s));
  for (int t = 0; t + s < n; ++t) {
    SegmentWindow w;
    w.trajectory_id = traj.id;
    w.offset = t;
    w.frames.assign(traj.points.begin() + t, traj.points.begin() + t + s);
    w.target = traj.points[static_cast<std::size_t>(t + s)];
    out.push_back(std::move(w));
  }
  return out;
}

WindowSet collect_windows(std::span<const Trajectory> trajs, int s) {
  WindowSet set;
  for (const Trajectory& t : trajs) {
    auto w = windows(t, s);
    if (w.empty()) {
      ++set.skipped_trajectories;
      continue;
    }
    set.windows.insert(set.windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
  }
  return set;
}

Tensor rasterize_segment(std::span<const GridPoint> points, const GridSpec& grid) {
  if (points.empty()) throw std::invalid_argument("rasterize_segment: empty point list");
  const int s = static_cast<int>(points.size());
  std::vector<double> values(static_cast<std::size_t>(s) * grid.cells(), 0.0);
  for (int t = 0; t < s; ++t) {
    const GridPoint p = points[static_cast<std::size_t>(t)];
    if (!grid.contains(p)) {
      throw std::out_of_range("rasterize_segment: point " + std::to_string(t) + " outside grid " + grid.str());
    }
    values[static_cast<std::size_t>(t) * grid.cells() + grid.flat(p)] = 1.0;
  }
  return Tensor::leaf({s, grid.height, grid.width}, std::move(values));
}

}  // namespace stcnn

#include "stcnn/mnistseq.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stcnn {
namespace {

bool parse_offset(const std::string& tok, int& dr, int& dc) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos) return false;
  try {
    std::size_t used = 0;
    dr = std::stoi(tok.substr(0, comma), &used);
    if (used != comma) return false;
    const std::string rest = tok.substr(comma + 1);
    dc = std::stoi(rest, &used);
    if (used != rest.size()) return false;
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

}  // namespace

std::pair<std::vector<Trajectory>, MnistConvertStats> convert_mnistseq(std::istream& raw,
                                                                       const GridSpec& grid) {
  grid.validate();
  std::vector<Trajectory> out;
  MnistConvertStats stats;
  std::string line;
  int line_no = 0;
  while (std::getline(raw, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok[0] == '#') continue;
    Trajectory traj;
    traj.id = tok;
    ++stats.digits_in;

    if (!(ls >> tok)) {
      throw std::runtime_error("stroke file line " + std::to_string(line_no) + ": missing start point");
    }
    int r, c;
    if (!parse_offset(tok, r, c)) {
      throw std::runtime_error("stroke file line " + std::to_string(line_no) +
                               ": malformed start point '" + tok + "'");
    }
    auto clamp_push = [&](int pr, int pc) {
      const int cr = std::clamp(pr, 0, grid.height - 1);
      const int cc = std::clamp(pc, 0, grid.width - 1);
      if (cr != pr || cc != pc) ++stats.clamped_points;
      traj.points.push_back({cr, cc});
    };
    clamp_push(r, c);

    while (ls >> tok) {
      if (tok == "L") {
        ++stats.pen_lifts;  // marker dropped; the next offset carries the jump
        continue;
      }
      int dr, dc;
      if (!parse_offset(tok, dr, dc)) {
        throw std::runtime_error("stroke file line " + std::to_string(line_no) +
                                 ": malformed offset token '" + tok + "'");
      }
      r += dr;
      c += dc;
      clamp_push(r, c);
    }

    if (traj.length() < 2) {
      ++stats.skipped_short;
      continue;
    }
    out.push_back(std::move(traj));
    ++stats.converted;
  }
  return {std::move(out), stats};
}

MnistConvertStats convert_mnistseq_file(const std::string& raw_path, const GridSpec& grid,
                                        const std::string& out_path) {
  std::ifstream in(raw_path);
  if (!in) throw std::runtime_error("cannot open stroke file '" + raw_path + "'");
  auto [trajs, stats] = convert_mnistseq(in, grid);
  save_trajectories(trajs, out_path);
  return stats;
}

}  // namespace stcnn

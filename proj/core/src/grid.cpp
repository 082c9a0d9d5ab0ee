#include "stcnn/grid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stcnn {

void GridSpec::validate() const {
  if (height < 2 || width < 2) {
    throw std::invalid_argument("grid: extents must be at least 2x2, got " + str());
  }
}

GridSpec parse_grid(const std::string& spec) {
  const auto x = spec.find('x');
  if (x == std::string::npos) throw std::invalid_argument("grid: expected HxW, got '" + spec + "'");
  GridSpec g;
  try {
    g.height = std::stoi(spec.substr(0, x));
    g.width = std::stoi(spec.substr(x + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("grid: expected HxW, got '" + spec + "'");
  }
  g.validate();
  return g;
}

int round_coord(double x) { return static_cast<int>(std::floor(x + 0.5)); }

GridPoint nearest_cell(const GridSpec& grid, double row, double col) {
  GridPoint p{round_coord(row), round_coord(col)};
  p.row = std::min(std::max(p.row, 0), grid.height - 1);
  p.col = std::min(std::max(p.col, 0), grid.width - 1);
  return p;
}

GridDistribution GridDistribution::from_logits(const GridSpec& grid, const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(0) != grid.height || logits.dim(1) != grid.width) {
    throw std::invalid_argument("grid distribution: logits " + shape_str(logits.shape()) +
                                " do not match grid " + grid.str());
  }
  GridDistribution d;
  d.grid = grid;
  d.log_mass = log_softmax2d(logits);
  d.mass = exp_op(d.log_mass);
  return d;
}

GridDistribution GridDistribution::from_mass(const GridSpec& grid, const Tensor& mass) {
  if (mass.rank() != 2 || mass.dim(0) != grid.height || mass.dim(1) != grid.width) {
    throw std::invalid_argument("grid distribution: mass " + shape_str(mass.shape()) +
                                " does not match grid " + grid.str());
  }
  GridDistribution d;
  d.grid = grid;
  d.mass = mass;
  d.log_mass = log_op(mass);
  return d;
}

GridDistribution GridDistribution::uniform(const GridSpec& grid) {
  GridDistribution d;
  d.grid = grid;
  const double p = 1.0 / static_cast<double>(grid.cells());
  d.mass = Tensor::full({grid.height, grid.width}, p);
  d.log_mass = Tensor::full({grid.height, grid.width}, std::log(p));
  return d;
}

GridDistribution GridDistribution::point_mass(const GridSpec& grid, GridPoint at) {
  if (!grid.contains(at)) throw std::out_of_range("point_mass: target outside grid " + grid.str());
  GridDistribution d;
  d.grid = grid;
  std::vector<double> m(static_cast<std::size_t>(grid.cells()), 0.0);
  std::vector<double> lm(static_cast<std::size_t>(grid.cells()), -std::numeric_limits<double>::infinity());
  m[static_cast<std::size_t>(grid.flat(at))] = 1.0;
  lm[static_cast<std::size_t>(grid.flat(at))] = 0.0;
  d.mass = Tensor::leaf({grid.height, grid.width}, std::move(m));
  d.log_mass = Tensor::leaf({grid.height, grid.width}, std::move(lm));
  return d;
}

GridDistribution GridDistribution::mixed_with_uniform(double lambda) const {
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("mixed_with_uniform: lambda must lie in [0,1], got " + std::to_string(lambda));
  }
  GridDistribution d;
  d.grid = grid;
  d.mass = add_const(scale(mass, 1.0 - lambda), lambda / static_cast<double>(grid.cells()));
  d.log_mass = log_op(d.mass);
  return d;
}

double GridDistribution::total_mass() const {
  double acc = 0.0;
  for (std::int64_t i = 0; i < mass.size(); ++i) acc += mass[i];
  return acc;
}

GridPoint GridDistribution::argmax() const {
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < mass.size(); ++i) {
    if (mass[i] > mass[best]) best = i;
  }
  return grid.unflat(best);
}

std::pair<double, double> GridDistribution::expected_point() const {
  double er = 0.0, ec = 0.0;
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const double p = mass[static_cast<std::int64_t>(r) * grid.width + c];
      er += p * r;
      ec += p * c;
    }
  }
  return {er, ec};
}

void GridDistribution::validate_normalized(double tol) const {
  double acc = 0.0;
  for (std::int64_t i = 0; i < mass.size(); ++i) {
    const double p = mass[i];
    if (!(p >= 0.0)) {
      throw std::runtime_error("grid distribution: negative or NaN mass at flat index " + std::to_string(i));
    }
    acc += p;
  }
  if (std::abs(acc - 1.0) > tol) {
    throw std::runtime_error("grid distribution: mass sums to " + std::to_string(acc) +
                             ", off by more than " + std::to_string(tol));
  }
}

Tensor nll(const GridDistribution& dist, GridPoint target) {
  if (!dist.grid.contains(target)) {
    throw std::out_of_range("nll: target (" + std::to_string(target.row) + "," + std::to_string(target.col) +
                            ") outside grid " + dist.grid.str());
  }
  return neg(pick(dist.log_mass, dist.grid.flat(target)));
}

}  // namespace stcnn

#pragma once

#include <memory>
#include <span>
#include <string>

#include "stcnn/grid.hpp"
#include "stcnn/trajectory.hpp"

namespace stcnn {

/// One-step forecast model: given the last s observed points (and optionally
/// a reference image of the scene), produce the distribution of the next
/// location. Every model and baseline that claims a probabilistic output
/// implements this, so the evaluation protocol treats them uniformly.
class StepDistributionProvider {
 public:
  virtual ~StepDistributionProvider() = default;

  virtual std::string name() const = 0;
  virtual GridSpec grid() const = 0;
  /// Number of conditioning points each call expects.
  virtual int window_length() const = 0;

  virtual GridDistribution next_step(std::span<const GridPoint> window,
                                     const ReferenceImage* ref) = 0;
};

/// Calibration floor: the uniform distribution, independent of the input.
class UniformProvider final : public StepDistributionProvider {
 public:
  UniformProvider(GridSpec grid, int window_length) : grid_(grid), s_(window_length) {}

  std::string name() const override { return "uniform"; }
  GridSpec grid() const override { return grid_; }
  int window_length() const override { return s_; }
  GridDistribution next_step(std::span<const GridPoint>, const ReferenceImage*) override {
    return GridDistribution::uniform(grid_);
  }

 private:
  GridSpec grid_;
  int s_;
};

/// Emits one fixed distribution regardless of input; test and toy helper.
class FixedDistProvider final : public StepDistributionProvider {
 public:
  FixedDistProvider(GridDistribution dist, int window_length, std::string name = "fixed")
      : dist_(std::move(dist)), s_(window_length), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  GridSpec grid() const override { return dist_.grid; }
  int window_length() const override { return s_; }
  GridDistribution next_step(std::span<const GridPoint>, const ReferenceImage*) override {
    return dist_;
  }

 private:
  GridDistribution dist_;
  int s_;
  std::string name_;
};

/// Diagnostic wrapper that collapses a base model to "always predict the
/// mean location": a near-point mass at the expected cell of the base
/// distribution, mixed with a small uniform floor so log losses stay finite.
class MeanPointProvider final : public StepDistributionProvider {
 public:
  MeanPointProvider(std::shared_ptr<StepDistributionProvider> base, double floor_lambda = 1e-3)
      : base_(std::move(base)), floor_(floor_lambda) {}

  std::string name() const override { return "meanpoint(" + base_->name() + ")"; }
  GridSpec grid() const override { return base_->grid(); }
  int window_length() const override { return base_->window_length(); }

  GridDistribution next_step(std::span<const GridPoint> window, const ReferenceImage* ref) override {
    const GridDistribution base = base_->next_step(window, ref);
    const auto [er, ec] = base.expected_point();
    return GridDistribution::point_mass(base.grid, nearest_cell(base.grid, er, ec))
        .mixed_with_uniform(floor_);
  }

 private:
  std::shared_ptr<StepDistributionProvider> base_;
  double floor_;
};

}  // namespace stcnn

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stcnn/folds.hpp"
#include "stcnn/model.hpp"
#include "stcnn/params.hpp"
#include "stcnn/provider.hpp"
#include "stcnn/trajectory.hpp"

namespace stcnn {

struct TrainConfig {
  int epochs = 5;
  int batch_size = 16;  // windows per optimizer step
  double step_size = 1e-3;
  std::uint64_t seed = 1;
  double validation_fraction = 0.1;  // of training trajectories, for best-checkpoint selection
  int num_workers = 1;               // data-parallel gradient workers, merged deterministically
  std::int64_t max_steps = 0;        // 0 = bounded by epochs only
  std::int64_t checkpoint_every = 0; // optimizer steps between checkpoint_hook calls; 0 disables
  std::function<void(const ParameterStore&, std::int64_t step)> checkpoint_hook;
  std::function<void(const ParameterStore&, double val_nll, int epoch)> on_best;
};

struct LossCurvePoint {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double mean_nll_per_step = 0.0;
  double sum_nll_per_traj = 0.0;
};

/// Optimizer moments plus the position inside the epoch stream; together with
/// the parameter values this is everything needed to resume bit-exactly.
struct TrainState {
  AdamOptimizer optimizer;
  std::int64_t steps = 0;
  int epoch = 0;              // epoch currently in progress (0-based)
  std::int64_t window_pos = 0;  // next window index within the epoch's shuffled order
  double best_val_nll = std::numeric_limits<double>::infinity();

  void save(std::ostream& out, const ParameterStore& params) const;
  static TrainState load(std::istream& in, const ParameterStore& params);
};

struct TrainResult {
  ParameterStore params;       // best-on-validation seen during this run (final when no validation)
  std::vector<LossCurvePoint> curve;
  TrainState state;            // state after the last completed step
  bool aborted_non_finite = false;
  double best_val_nll = std::numeric_limits<double>::infinity();
};

/// Per-step negative log-likelihood statistics of a provider on a dataset.
struct NllReport {
  double mean_per_step = 0.0;
  double mean_per_traj_sum = 0.0;
  double per_step_se = 0.0;  // Monte-Carlo standard error over windows
  std::int64_t window_count = 0;
  int trajectory_count = 0;
  int skipped_trajectories = 0;
  std::vector<double> per_window;
};

/// Teacher-forced evaluation: mean over all test windows of -log Q(target).
/// Validates that every emitted distribution is normalized (1e-6) and leaves
/// the provider's parameters untouched.
NllReport evaluate_nll(StepDistributionProvider& provider, std::span<const Trajectory> trajs,
                       const RefImageSet* refs = nullptr);

/// Loss for one training window, as a scalar graph tensor over the parameters.
using WindowLossFn = std::function<Tensor(const SegmentWindow&, const ReferenceImage*)>;
using ProviderFactory = std::function<std::unique_ptr<StepDistributionProvider>()>;

/// Deterministic shuffled-window maximum-likelihood loop shared by the STCNN
/// and the LSTM baseline: carves a validation split off the training
/// trajectories, shuffles windows each epoch with a per-epoch stream, steps
/// Adam on mean batch NLL, tracks the best validation checkpoint, and aborts
/// on a non-finite loss keeping the last good parameters. Pass `resume` to
/// continue a previous run bit-exactly (params must already hold the values
/// saved with it).
TrainResult train_windows(ParameterStore& params, std::span<const Trajectory> train_trajs,
                          int s, const TrainConfig& config, const RefImageSet* refs,
                          const WindowLossFn& loss_fn, const ProviderFactory& provider_factory,
                          const TrainState* resume = nullptr);

/// STCNN maximum-likelihood training from a fresh Glorot init.
TrainResult train_stcnn(const ArchConfig& arch, std::span<const Trajectory> train_trajs,
                        const TrainConfig& config, const RefImageSet* refs = nullptr,
                        const TrainState* resume = nullptr, ParameterStore* initial = nullptr);

/// Deterministic validation carve-out by trajectory (fraction of the list).
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_validation(
    std::span<const Trajectory> trajs, double fraction, std::uint64_t seed);

// Loss curve CSV: epoch,split,mean_nll_per_step,sum_nll_per_traj
void write_loss_csv(const std::vector<LossCurvePoint>& curve, std::ostream& out);
void save_loss_csv(const std::vector<LossCurvePoint>& curve, const std::string& path);

}  // namespace stcnn

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stcnn/trajectory.hpp"

namespace stcnn {

/// k-fold partition of a dataset by trajectory id.
struct FoldAssignment {
  int k = 0;
  std::unordered_map<std::string, int> fold_of;

  int fold(const std::string& id) const;
  std::vector<int> fold_sizes() const;
};

/// Shuffles ids with the seeded generator and deals them round-robin, so the
/// fold sizes differ by at most one. Throws if k < 2, k > dataset size, or
/// ids collide.
FoldAssignment split_folds(std::span<const Trajectory> trajs, int k, std::uint64_t seed);

/// (train, test) views for one fold: test = trajectories in that fold.
/// Trajectories missing from the assignment are an error.
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_train_test(
    std::span<const Trajectory> trajs, const FoldAssignment& folds, int fold_index);

// Fold file: one line per trajectory, `<id> <fold>`.
void save_folds(const FoldAssignment& folds, const std::string& path);
FoldAssignment load_folds(const std::string& path);

}  // namespace stcnn

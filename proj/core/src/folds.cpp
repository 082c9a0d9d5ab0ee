#include "stcnn/folds.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stcnn/rng.hpp"

namespace stcnn {

int FoldAssignment::fold(const std::string& id) const {
  auto it = fold_of.find(id);
  if (it == fold_of.end()) throw std::runtime_error("fold assignment: unknown trajectory id '" + id + "'");
  return it->second;
}

std::vector<int> FoldAssignment::fold_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [id, f] : fold_of) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldAssignment split_folds(std::span<const Trajectory> trajs, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("split_folds: k must be >= 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > trajs.size()) {
    throw std::invalid_argument("split_folds: k=" + std::to_string(k) + " exceeds dataset size " +
                                std::to_string(trajs.size()));
  }
  std::vector<std::size_t> order(trajs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  FoldAssignment folds;
  folds.k = k;
  folds.fold_of.reserve(trajs.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::string& id = trajs[order[rank]].id;
    if (!folds.fold_of.emplace(id, static_cast<int>(rank % static_cast<std::size_t>(k))).second) {
      throw std::invalid_argument("split_folds: duplicate trajectory id '" + id + "'");
    }
  }
  return folds;
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_train_test(
    std::span<const Trajectory> trajs, const FoldAssignment& folds, int fold_index) {
  if (fold_index < 0 || fold_index >= folds.k) {
    throw std::invalid_argument("split_train_test: fold index " + std::to_string(fold_index) +
                                " out of range for k=" + std::to_string(folds.k));
  }
  std::vector<Trajectory> train, test;
  for (const Trajectory& t : trajs) {
    (folds.fold(t.id) == fold_index ? test : train).push_back(t);
  }
  return {std::move(train), std::move(test)};
}

void save_folds(const FoldAssignment& folds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open fold file '" + path + "' for writing");
  // Sort by id so the file is stable regardless of map iteration order.
  std::vector<std::pair<std::string, int>> rows(folds.fold_of.begin(), folds.fold_of.end());
  std::sort(rows.begin(), rows.end());
  f << "# k=" << folds.k << "\n";
  for (const auto& [id, fold] : rows) f << id << ' ' << fold << '\n';
  if (!f) throw std::runtime_error("write failed for fold file '" + path + "'");
}

FoldAssignment load_folds(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open fold file '" + path + "'");
  FoldAssignment folds;
  std::string line;
  int line_no = 0;
  int max_fold = -1;
  while (std::getline(f, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id)) continue;
    if (id == "#" || id[0] == '#') {
      const auto pos = line.find("k=");
      if (pos != std::string::npos) folds.k = std::stoi(line.substr(pos + 2));
      continue;
    }
    int fold;
    if (!(ls >> fold) || fold < 0) {
      throw std::runtime_error("fold file line " + std::to_string(line_no) + ": malformed entry");
    }
    if (!folds.fold_of.emplace(id, fold).second) {
      throw std::runtime_error("fold file line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
    max_fold = std::max(max_fold, fold);
  }
  if (folds.k == 0) folds.k = max_fold + 1;
  if (folds.k < 2) throw std::runtime_error("fold file '" + path + "': fewer than 2 folds");
  return folds;
}

}  // namespace stcnn

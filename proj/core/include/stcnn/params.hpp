#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stcnn/rng.hpp"
#include "stcnn/tensor.hpp"

namespace stcnn {

/// Rounds through IEEE binary32. Parameter values are kept f32-representable
/// at all times so the f32 checkpoint container round-trips bit-exactly.
inline double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

/// Named, shaped weight tensors of a model. Shapes are fixed at creation;
/// entries iterate in name order, which every consumer relies on for
/// deterministic behaviour.
class ParameterStore {
 public:
  ParameterStore() = default;
  explicit ParameterStore(std::uint64_t rng_seed) : rng_seed_(rng_seed) {}

  Tensor add(const std::string& name, Shape shape, std::vector<double> values);
  Tensor add_zeros(const std::string& name, Shape shape);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)).
  Tensor add_glorot(const std::string& name, Shape shape, int fan_in, int fan_out, Rng& rng);

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t count() const { return entries_.size(); }
  std::int64_t total_values() const;

  const std::map<std::string, Tensor>& entries() const { return entries_; }

  std::uint64_t rng_seed() const { return rng_seed_; }
  void set_rng_seed(std::uint64_t s) { rng_seed_ = s; }

  void zero_grad();

  /// Deep copy (fresh nodes, same values).
  ParameterStore clone() const;

  bool values_equal(const ParameterStore& other) const;

  // Versioned binary container: magic, format version, seed, entry count,
  // then per entry name length + bytes, rank, extents, raw little-endian
  // f32 values. Round-trips bit-exactly.
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static ParameterStore load(std::istream& in);
  static ParameterStore load_file(const std::string& path);

 private:
  std::uint64_t rng_seed_ = 0;
  std::map<std::string, Tensor> entries_;
};

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment gradient descent over a ParameterStore. Reads gradients
/// from the parameter nodes (merge sinks first when training data-parallel)
/// and updates values in place, snapping to f32 after each step.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParameterStore& params);

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  /// Moment buffers + step counter, for bit-exact training resume.
  void save_state(std::ostream& out, const ParameterStore& params) const;
  void load_state(std::istream& in, const ParameterStore& params);

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace stcnn

#include "stcnn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stcnn {
namespace {

constexpr char kMagic[8] = {'S', 'T', 'P', 'S', 'T', 'O', 'R', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("parameter store: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

Tensor ParameterStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (entries_.count(name)) throw std::invalid_argument("parameter store: duplicate name '" + name + "'");
  for (double& v : values) v = snap_f32(v);
  Tensor t = Tensor::leaf(std::move(shape), std::move(values), /*requires_grad=*/true);
  entries_.emplace(name, t);
  return t;
}

Tensor ParameterStore::add_zeros(const std::string& name, Shape shape) {
  const auto n = numel(shape);
  return add(name, std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor ParameterStore::add_glorot(const std::string& name, Shape shape, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  const auto n = numel(shape);
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return add(name, std::move(shape), std::move(values));
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("parameter store: no entry named '" + name + "'");
  return it->second;
}

std::int64_t ParameterStore::total_values() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : entries_) t.node()->grad.clear();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out(rng_seed_);
  for (const auto& [name, t] : entries_) {
    out.add(name, t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
  }
  return out;
}

bool ParameterStore::values_equal(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto it = other.entries_.begin();
  for (const auto& [name, t] : entries_) {
    if (name != it->first || t.shape() != it->second.shape()) return false;
    const auto a = t.values();
    const auto b = it->second.values();
    if (!std::equal(a.begin(), a.end(), b.begin())) return false;
    ++it;
  }
  return true;
}

void ParameterStore::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u64(out, rng_seed_);
  put_u32(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.values()) put_f32(out, static_cast<float>(v));
  }
  if (!out) throw std::runtime_error("parameter store: write failed");
}

void ParameterStore::save_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("parameter store: cannot open '" + path + "' for writing");
  save(f);
}

ParameterStore ParameterStore::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("parameter store: bad magic (not a parameter file)");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("parameter store: unsupported format version " + std::to_string(version));
  }
  ParameterStore store(get_u64(in));
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("parameter store: truncated entry name");
    const std::uint32_t rank = get_u32(in);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<int>(get_u32(in));
    const std::int64_t n = numel(shape);
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = static_cast<double>(get_f32(in));
    store.add(name, std::move(shape), std::move(values));
  }
  return store;
}

ParameterStore ParameterStore::load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("parameter store: cannot open '" + path + "'");
  return load(f);
}

void AdamOptimizer::step(ParameterStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, tensor] : params.entries()) {
    Node* node = tensor.node();
    if (node->grad.empty()) continue;
    auto& mo = moments_[name];
    if (mo.m.empty()) {
      mo.m.assign(node->values.size(), 0.0);
      mo.v.assign(node->values.size(), 0.0);
    }
    for (std::size_t i = 0; i < node->values.size(); ++i) {
      const double g = node->grad[i];
      mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g;
      mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      node->values[i] = snap_f32(node->values[i] - cfg_.step_size * mhat / (std::sqrt(vhat) + cfg_.epsilon));
    }
  }
}

void AdamOptimizer::save_state(std::ostream& out, const ParameterStore& params) const {
  put_u64(out, static_cast<std::uint64_t>(t_));
  put_u32(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& [name, tensor] : params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    auto it = moments_.find(name);
    const std::size_t n = static_cast<std::size_t>(tensor.size());
    put_u64(out, it == moments_.end() ? 0 : n);
    if (it != moments_.end()) {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &it->second.m[i], 8);
        put_u64(out, bits);
      }
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &it->second.v[i], 8);
        put_u64(out, bits);
      }
    }
  }
}

void AdamOptimizer::load_state(std::istream& in, const ParameterStore& params) {
  t_ = static_cast<std::int64_t>(get_u64(in));
  moments_.clear();
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("optimizer state: truncated");
    const std::uint64_t n = get_u64(in);
    if (n == 0) continue;
    if (!params.contains(name) || static_cast<std::int64_t>(n) != params.at(name).size()) {
      throw std::runtime_error("optimizer state: entry '" + name + "' does not match parameters");
    }
    Moments mo;
    mo.m.resize(n);
    mo.v.resize(n);
    for (auto& v : mo.m) {
      const std::uint64_t bits = get_u64(in);
      std::memcpy(&v, &bits, 8);
    }
    for (auto& v : mo.v) {
      const std::uint64_t bits = get_u64(in);
      std::memcpy(&v, &bits, 8);
    }
    moments_.emplace(std::move(name), std::move(mo));
  }
}

}  // namespace stcnn

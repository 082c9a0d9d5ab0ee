#include "stcnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stcnn {
namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

void accumulate(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::int64_t i = 0; i < b.size(); ++i) out[static_cast<std::size_t>(i)] += b[i];
  return detail::make_op(a.shape(), std::move(out), {a, b}, [](Node& self, BackwardCtx& ctx) {
    for (int p = 0; p < 2; ++p) {
      if (self.parents[p]->requires_grad) accumulate(ctx.grad_of(self.parents[p]), self.grad);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::int64_t i = 0; i < b.size(); ++i) out[static_cast<std::size_t>(i)] -= b[i];
  return detail::make_op(a.shape(), std::move(out), {a, b}, [](Node& self, BackwardCtx& ctx) {
    if (self.parents[0]->requires_grad) accumulate(ctx.grad_of(self.parents[0]), self.grad);
    if (self.parents[1]->requires_grad) {
      auto g = ctx.grad_of(self.parents[1]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(static_cast<std::size_t>(a.size()));
  for (std::int64_t i = 0; i < a.size(); ++i) out[static_cast<std::size_t>(i)] = a[i] * b[i];
  return detail::make_op(a.shape(), std::move(out), {a, b}, [](Node& self, BackwardCtx& ctx) {
    const auto& av = self.parents[0]->values;
    const auto& bv = self.parents[1]->values;
    if (self.parents[0]->requires_grad) {
      auto g = ctx.grad_of(self.parents[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (self.parents[1]->requires_grad) {
      auto g = ctx.grad_of(self.parents[1]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(static_cast<std::size_t>(a.size()));
  for (std::int64_t i = 0; i < a.size(); ++i) out[static_cast<std::size_t>(i)] = c * a[i];
  return detail::make_op(a.shape(), std::move(out), {a}, [c](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

Tensor add_const(const Tensor& a, double c) {
  std::vector<double> out(static_cast<std::size_t>(a.size()));
  for (std::int64_t i = 0; i < a.size(); ++i) out[static_cast<std::size_t>(i)] = a[i] + c;
  return detail::make_op(a.shape(), std::move(out), {a}, [](Node& self, BackwardCtx& ctx) {
    accumulate(ctx.grad_of(self.parents[0]), self.grad);
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_n(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: empty input list");
  for (const Tensor& x : xs) check_same_shape(xs[0], x, "add_n");
  std::vector<double> out(static_cast<std::size_t>(xs[0].size()), 0.0);
  for (const Tensor& x : xs) {
    for (std::int64_t i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] += x[i];
  }
  return detail::make_op(xs[0].shape(), std::move(out), xs, [](Node& self, BackwardCtx& ctx) {
    for (auto& p : self.parents) {
      if (p->requires_grad) accumulate(ctx.grad_of(p), self.grad);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = x[i] > 0.0 ? x[i] : 0.0;
  return detail::make_op(x.shape(), std::move(out), {x}, [](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    const auto& xv = self.parents[0]->values;
    // subgradient at exactly 0 is 0
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += xv[i] > 0.0 ? self.grad[i] : 0.0;
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i) {
    out[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-x[i]));
  }
  return detail::make_op(x.shape(), std::move(out), {x}, [](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.values[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor tanh_op(const Tensor& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = std::tanh(x[i]);
  return detail::make_op(x.shape(), std::move(out), {x}, [](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double t = self.values[i];
      g[i] += self.grad[i] * (1.0 - t * t);
    }
  });
}

Tensor exp_op(const Tensor& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = std::exp(x[i]);
  return detail::make_op(x.shape(), std::move(out), {x}, [](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.values[i];
  });
}

Tensor log_op(const Tensor& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = std::log(x[i]);
  return detail::make_op(x.shape(), std::move(out), {x}, [](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    const auto& xv = self.parents[0]->values;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / xv[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
  return detail::make_op({1}, {acc}, {x}, [](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    const double gy = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy;
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor slice(const Tensor& x, int offset, int len) {
  if (x.rank() != 1) throw std::invalid_argument("slice: expected rank-1 tensor, got " + shape_str(x.shape()));
  if (offset < 0 || len <= 0 || offset + len > x.dim(0)) {
    throw std::invalid_argument("slice: range [" + std::to_string(offset) + ", " +
                                std::to_string(offset + len) + ") out of bounds for " +
                                shape_str(x.shape()));
  }
  std::vector<double> out(x.values().begin() + offset, x.values().begin() + offset + len);
  return detail::make_op({len}, std::move(out), {x}, [offset](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[static_cast<std::size_t>(offset) + i] += self.grad[i];
  });
}

Tensor pick(const Tensor& x, std::int64_t flat_index) {
  if (flat_index < 0 || flat_index >= x.size()) {
    throw std::out_of_range("pick: index " + std::to_string(flat_index) + " out of range for " +
                            shape_str(x.shape()));
  }
  return detail::make_op({1}, {x[flat_index]}, {x}, [flat_index](Node& self, BackwardCtx& ctx) {
    ctx.grad_of(self.parents[0])[static_cast<std::size_t>(flat_index)] += self.grad[0];
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3) {
    throw std::invalid_argument("concat_channels: expected [C,H,W] tensors, got " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw std::invalid_argument("concat_channels: spatial extents differ, " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(a.size() + b.size()));
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t split = static_cast<std::size_t>(a.size());
  return detail::make_op({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), {a, b},
                         [split](Node& self, BackwardCtx& ctx) {
                           if (self.parents[0]->requires_grad) {
                             auto g = ctx.grad_of(self.parents[0]);
                             for (std::size_t i = 0; i < split; ++i) g[i] += self.grad[i];
                           }
                           if (self.parents[1]->requires_grad) {
                             auto g = ctx.grad_of(self.parents[1]);
                             for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[split + i];
                           }
                         });
}

Tensor stack_depth(const std::vector<Tensor>& frames) {
  if (frames.empty()) throw std::invalid_argument("stack_depth: empty frame list");
  const Tensor& f0 = frames[0];
  if (f0.rank() != 3) throw std::invalid_argument("stack_depth: expected [C,H,W] frames, got " + shape_str(f0.shape()));
  for (const Tensor& f : frames) check_same_shape(f0, f, "stack_depth");
  const int c = f0.dim(0), h = f0.dim(1), w = f0.dim(2);
  const int d = static_cast<int>(frames.size());
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> out(static_cast<std::size_t>(c) * d * plane);
  for (int ch = 0; ch < c; ++ch) {
    for (int t = 0; t < d; ++t) {
      const double* src = frames[static_cast<std::size_t>(t)].values().data() + static_cast<std::size_t>(ch) * plane;
      std::copy_n(src, plane, out.data() + (static_cast<std::size_t>(ch) * d + t) * plane);
    }
  }
  return detail::make_op({c, d, h, w}, std::move(out), frames, [c, d, plane](Node& self, BackwardCtx& ctx) {
    for (int t = 0; t < d; ++t) {
      auto& parent = self.parents[static_cast<std::size_t>(t)];
      if (!parent->requires_grad) continue;
      auto g = ctx.grad_of(parent);
      for (int ch = 0; ch < c; ++ch) {
        const double* src = self.grad.data() + (static_cast<std::size_t>(ch) * d + t) * plane;
        double* dst = g.data() + static_cast<std::size_t>(ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor slice_depth(const Tensor& x, int t) {
  if (x.rank() != 4) throw std::invalid_argument("slice_depth: expected [C,D,H,W], got " + shape_str(x.shape()));
  const int c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (t < 0 || t >= d) {
    throw std::out_of_range("slice_depth: index " + std::to_string(t) + " out of range for depth " + std::to_string(d));
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> out(static_cast<std::size_t>(c) * plane);
  for (int ch = 0; ch < c; ++ch) {
    std::copy_n(x.values().data() + (static_cast<std::size_t>(ch) * d + t) * plane, plane,
                out.data() + static_cast<std::size_t>(ch) * plane);
  }
  return detail::make_op({c, h, w}, std::move(out), {x}, [c, d, t, plane](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    for (int ch = 0; ch < c; ++ch) {
      const double* src = self.grad.data() + static_cast<std::size_t>(ch) * plane;
      double* dst = g.data() + (static_cast<std::size_t>(ch) * d + t) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return detail::make_op(std::move(shape), std::move(out), {x}, [](Node& self, BackwardCtx& ctx) {
    accumulate(ctx.grad_of(self.parents[0]), self.grad);
  });
}

Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() != 1) {
    throw std::invalid_argument("linear: expected W:[m,n], x:[n], got " + shape_str(weight.shape()) +
                                " and " + shape_str(x.shape()));
  }
  const int m = weight.dim(0);
  const int n = weight.dim(1);
  if (x.dim(0) != n) {
    throw std::invalid_argument("linear: input extent " + std::to_string(x.dim(0)) +
                                " does not match weight columns " + std::to_string(n));
  }
  const bool with_bias = bias.defined();
  if (with_bias && (bias.rank() != 1 || bias.dim(0) != m)) {
    throw std::invalid_argument("linear: bias shape " + shape_str(bias.shape()) +
                                " does not match output extent " + std::to_string(m));
  }
  std::vector<double> out(static_cast<std::size_t>(m), 0.0);
  const auto wv = weight.values();
  const auto xv = x.values();
  for (int i = 0; i < m; ++i) {
    double acc = with_bias ? bias[i] : 0.0;
    const double* row = wv.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += row[j] * xv[j];
    out[static_cast<std::size_t>(i)] = acc;
  }
  std::vector<Tensor> parents{weight, x};
  if (with_bias) parents.push_back(bias);
  return detail::make_op({m}, std::move(out), std::move(parents),
                         [m, n, with_bias](Node& self, BackwardCtx& ctx) {
                           const auto& wv = self.parents[0]->values;
                           const auto& xv = self.parents[1]->values;
                           if (self.parents[0]->requires_grad) {
                             auto gw = ctx.grad_of(self.parents[0]);
                             for (int i = 0; i < m; ++i) {
                               const double gy = self.grad[static_cast<std::size_t>(i)];
                               for (int j = 0; j < n; ++j) gw[static_cast<std::size_t>(i) * n + j] += gy * xv[static_cast<std::size_t>(j)];
                             }
                           }
                           if (self.parents[1]->requires_grad) {
                             auto gx = ctx.grad_of(self.parents[1]);
                             for (int i = 0; i < m; ++i) {
                               const double gy = self.grad[static_cast<std::size_t>(i)];
                               for (int j = 0; j < n; ++j) gx[static_cast<std::size_t>(j)] += gy * wv[static_cast<std::size_t>(i) * n + j];
                             }
                           }
                           if (with_bias && self.parents[2]->requires_grad) {
                             accumulate(ctx.grad_of(self.parents[2]), self.grad);
                           }
                         });
}

Tensor log_softmax2d(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("log_softmax2d: expected [H,W] logits, got " + shape_str(logits.shape()));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) {
      throw std::invalid_argument("log_softmax2d: non-finite logit at flat index " + std::to_string(i));
    }
    mx = std::max(mx, logits[i]);
  }
  double z = 0.0;
  for (std::int64_t i = 0; i < logits.size(); ++i) z += std::exp(logits[i] - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(static_cast<std::size_t>(logits.size()));
  for (std::int64_t i = 0; i < logits.size(); ++i) out[static_cast<std::size_t>(i)] = logits[i] - lse;
  return detail::make_op(logits.shape(), std::move(out), {logits}, [](Node& self, BackwardCtx& ctx) {
    auto g = ctx.grad_of(self.parents[0]);
    double gsum = 0.0;
    for (double gi : self.grad) gsum += gi;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] - std::exp(self.values[i]) * gsum;
    }
  });
}

Tensor gaussian_grid_logits(const Tensor& mu, int height, int width, double inv_two_sigma_sq) {
  if (mu.rank() != 1 || mu.dim(0) != 2) {
    throw std::invalid_argument("gaussian_grid_logits: mu must be a 2-vector, got " + shape_str(mu.shape()));
  }
  if (height < 1 || width < 1) throw std::invalid_argument("gaussian_grid_logits: bad grid extents");
  const double mr = mu[0];
  const double mc = mu[1];
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    const double dr = static_cast<double>(r) - mr;
    for (int c = 0; c < width; ++c) {
      const double dc = static_cast<double>(c) - mc;
      out[static_cast<std::size_t>(r) * width + c] = -(dr * dr + dc * dc) * inv_two_sigma_sq;
    }
  }
  return detail::make_op({height, width}, std::move(out), {mu},
                         [height, width, inv_two_sigma_sq](Node& self, BackwardCtx& ctx) {
                           auto g = ctx.grad_of(self.parents[0]);
                           const double mr = self.parents[0]->values[0];
                           const double mc = self.parents[0]->values[1];
                           double gr = 0.0, gc = 0.0;
                           for (int r = 0; r < height; ++r) {
                             for (int c = 0; c < width; ++c) {
                               const double gy = self.grad[static_cast<std::size_t>(r) * width + c];
                               gr += gy * 2.0 * inv_two_sigma_sq * (static_cast<double>(r) - mr);
                               gc += gy * 2.0 * inv_two_sigma_sq * (static_cast<double>(c) - mc);
                             }
                           }
                           g[0] += gr;
                           g[1] += gc;
                         });
}

}  // namespace stcnn

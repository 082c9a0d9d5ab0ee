#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stcnn/ops.hpp"

namespace stcnn {
namespace {

// Output index range [lo, hi) such that o*stride + k_off stays inside
// [0, limit_in). Lets the inner loops run without bounds checks.
void valid_range(int k_off, int stride, int limit_in, int limit_out, int& lo, int& hi) {
  lo = k_off < 0 ? (-k_off + stride - 1) / stride : 0;
  const int top = limit_in - 1 - k_off;
  hi = top < 0 ? 0 : top / stride + 1;
  hi = std::min(hi, limit_out);
  lo = std::min(lo, hi);
}

int conv_out_extent(int in, int k, int stride, int padding) {
  return (in + 2 * padding - k) / stride + 1;
}

void check_conv_common(const char* op, int stride, int padding) {
  if (stride < 1) throw std::invalid_argument(std::string(op) + ": stride must be >= 1, got " + std::to_string(stride));
  if (padding < 0) throw std::invalid_argument(std::string(op) + ": padding must be >= 0, got " + std::to_string(padding));
}

void check_kernel_fits(const char* op, const char* axis, int in, int k, int padding) {
  if (k > in + 2 * padding) {
    throw std::invalid_argument(std::string(op) + ": kernel " + axis + " " + std::to_string(k) +
                                " exceeds padded input " + axis + " " + std::to_string(in + 2 * padding));
  }
  if (k < 1) throw std::invalid_argument(std::string(op) + ": kernel " + axis + " must be >= 1");
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
  check_conv_common("conv2d", stride, padding);
  if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be [Cin,H,W], got " + shape_str(input.shape()));
  if (kernel.rank() != 4) throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,kH,kW], got " + shape_str(kernel.shape()));
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw std::invalid_argument("conv2d: kernel input channels " + std::to_string(kernel.dim(1)) +
                                " do not match input channels " + std::to_string(cin));
  }
  check_kernel_fits("conv2d", "height", h, kh, padding);
  check_kernel_fits("conv2d", "width", w, kw, padding);
  const bool with_bias = bias.defined();
  if (with_bias && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                " does not match output channels " + std::to_string(cout));
  }
  const int oh = conv_out_extent(h, kh, stride, padding);
  const int ow = conv_out_extent(w, kw, stride, padding);

  std::vector<double> out(static_cast<std::size_t>(cout) * oh * ow, 0.0);
  const double* in = input.values().data();
  const double* k = kernel.values().data();
  if (with_bias) {
    for (int co = 0; co < cout; ++co) {
      std::fill_n(out.data() + static_cast<std::size_t>(co) * oh * ow, static_cast<std::size_t>(oh) * ow, bias[co]);
    }
  }
  for (int co = 0; co < cout; ++co) {
    double* oplane = out.data() + static_cast<std::size_t>(co) * oh * ow;
    for (int ci = 0; ci < cin; ++ci) {
      const double* iplane = in + static_cast<std::size_t>(ci) * h * w;
      const double* kplane = k + (static_cast<std::size_t>(co) * cin + ci) * kh * kw;
      for (int y = 0; y < kh; ++y) {
        int rlo, rhi;
        valid_range(y - padding, stride, h, oh, rlo, rhi);
        for (int x = 0; x < kw; ++x) {
          const double kv = kplane[static_cast<std::size_t>(y) * kw + x];
          int clo, chi;
          valid_range(x - padding, stride, w, ow, clo, chi);
          for (int r = rlo; r < rhi; ++r) {
            const double* irow = iplane + static_cast<std::size_t>(r * stride + y - padding) * w + (x - padding);
            double* orow = oplane + static_cast<std::size_t>(r) * ow;
            for (int c = clo; c < chi; ++c) orow[c] += kv * irow[static_cast<std::size_t>(c) * stride];
          }
        }
      }
    }
  }

  std::vector<Tensor> parents{input, kernel};
  if (with_bias) parents.push_back(bias);
  auto bwd = [cin, h, w, cout, kh, kw, oh, ow, stride, padding, with_bias](Node& self, BackwardCtx& ctx) {
    const auto& in = self.parents[0]->values;
    const auto& k = self.parents[1]->values;
    const auto& gy = self.grad;
    if (self.parents[0]->requires_grad) {
      auto gin = ctx.grad_of(self.parents[0]);
      for (int co = 0; co < cout; ++co) {
        const double* gplane = gy.data() + static_cast<std::size_t>(co) * oh * ow;
        for (int ci = 0; ci < cin; ++ci) {
          double* giplane = gin.data() + static_cast<std::size_t>(ci) * h * w;
          const double* kplane = k.data() + (static_cast<std::size_t>(co) * cin + ci) * kh * kw;
          for (int y = 0; y < kh; ++y) {
            int rlo, rhi;
            valid_range(y - padding, stride, h, oh, rlo, rhi);
            for (int x = 0; x < kw; ++x) {
              const double kv = kplane[static_cast<std::size_t>(y) * kw + x];
              int clo, chi;
              valid_range(x - padding, stride, w, ow, clo, chi);
              for (int r = rlo; r < rhi; ++r) {
                double* girow = giplane + static_cast<std::size_t>(r * stride + y - padding) * w + (x - padding);
                const double* grow = gplane + static_cast<std::size_t>(r) * ow;
                for (int c = clo; c < chi; ++c) girow[static_cast<std::size_t>(c) * stride] += kv * grow[c];
              }
            }
          }
        }
      }
    }
    if (self.parents[1]->requires_grad) {
      auto gk = ctx.grad_of(self.parents[1]);
      for (int co = 0; co < cout; ++co) {
        const double* gplane = gy.data() + static_cast<std::size_t>(co) * oh * ow;
        for (int ci = 0; ci < cin; ++ci) {
          const double* iplane = in.data() + static_cast<std::size_t>(ci) * h * w;
          double* gkplane = gk.data() + (static_cast<std::size_t>(co) * cin + ci) * kh * kw;
          for (int y = 0; y < kh; ++y) {
            int rlo, rhi;
            valid_range(y - padding, stride, h, oh, rlo, rhi);
            for (int x = 0; x < kw; ++x) {
              int clo, chi;
              valid_range(x - padding, stride, w, ow, clo, chi);
              double acc = 0.0;
              for (int r = rlo; r < rhi; ++r) {
                const double* irow = iplane + static_cast<std::size_t>(r * stride + y - padding) * w + (x - padding);
                const double* grow = gplane + static_cast<std::size_t>(r) * ow;
                for (int c = clo; c < chi; ++c) acc += grow[c] * irow[static_cast<std::size_t>(c) * stride];
              }
              gkplane[static_cast<std::size_t>(y) * kw + x] += acc;
            }
          }
        }
      }
    }
    if (with_bias && self.parents[2]->requires_grad) {
      auto gb = ctx.grad_of(self.parents[2]);
      for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        const double* gplane = gy.data() + static_cast<std::size_t>(co) * oh * ow;
        for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += gplane[i];
        gb[static_cast<std::size_t>(co)] += acc;
      }
    }
  };
  return detail::make_op({cout, oh, ow}, std::move(out), std::move(parents), std::move(bwd));
}

Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
  check_conv_common("conv3d", stride, padding);
  if (input.rank() != 4) throw std::invalid_argument("conv3d: input must be [C,D,H,W], got " + shape_str(input.shape()));
  if (kernel.rank() != 5) throw std::invalid_argument("conv3d: kernel must be [Cout,C,kD,kH,kW], got " + shape_str(kernel.shape()));
  const int cin = input.dim(0), d = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = kernel.dim(0), kd = kernel.dim(2), kh = kernel.dim(3), kw = kernel.dim(4);
  if (kernel.dim(1) != cin) {
    throw std::invalid_argument("conv3d: kernel input channels " + std::to_string(kernel.dim(1)) +
                                " do not match input channels " + std::to_string(cin));
  }
  if (kd > d) {
    throw std::invalid_argument("conv3d: kernel depth " + std::to_string(kd) + " exceeds input depth " +
                                std::to_string(d) + " (no depth padding)");
  }
  check_kernel_fits("conv3d", "height", h, kh, padding);
  check_kernel_fits("conv3d", "width", w, kw, padding);
  const bool with_bias = bias.defined();
  if (with_bias && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw std::invalid_argument("conv3d: bias shape " + shape_str(bias.shape()) +
                                " does not match output channels " + std::to_string(cout));
  }
  const int od = d - kd + 1;  // depth: stride 1, no padding
  const int oh = conv_out_extent(h, kh, stride, padding);
  const int ow = conv_out_extent(w, kw, stride, padding);

  std::vector<double> out(static_cast<std::size_t>(cout) * od * oh * ow, 0.0);
  const double* in = input.values().data();
  const double* k = kernel.values().data();
  if (with_bias) {
    for (int co = 0; co < cout; ++co) {
      std::fill_n(out.data() + static_cast<std::size_t>(co) * od * oh * ow,
                  static_cast<std::size_t>(od) * oh * ow, bias[co]);
    }
  }
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci) {
      for (int z = 0; z < kd; ++z) {
        const double* kslab = k + ((static_cast<std::size_t>(co) * cin + ci) * kd + z) * kh * kw;
        for (int t = 0; t < od; ++t) {
          const double* iplane = in + (static_cast<std::size_t>(ci) * d + (t + z)) * h * w;
          double* oplane = out.data() + (static_cast<std::size_t>(co) * od + t) * oh * ow;
          for (int y = 0; y < kh; ++y) {
            int rlo, rhi;
            valid_range(y - padding, stride, h, oh, rlo, rhi);
            for (int x = 0; x < kw; ++x) {
              const double kv = kslab[static_cast<std::size_t>(y) * kw + x];
              int clo, chi;
              valid_range(x - padding, stride, w, ow, clo, chi);
              for (int r = rlo; r < rhi; ++r) {
                const double* irow = iplane + static_cast<std::size_t>(r * stride + y - padding) * w + (x - padding);
                double* orow = oplane + static_cast<std::size_t>(r) * ow;
                for (int c = clo; c < chi; ++c) orow[c] += kv * irow[static_cast<std::size_t>(c) * stride];
              }
            }
          }
        }
      }
    }
  }

  std::vector<Tensor> parents{input, kernel};
  if (with_bias) parents.push_back(bias);
  auto bwd = [cin, d, h, w, cout, kd, kh, kw, od, oh, ow, stride, padding, with_bias](Node& self, BackwardCtx& ctx) {
    const auto& in = self.parents[0]->values;
    const auto& k = self.parents[1]->values;
    const auto& gy = self.grad;
    if (self.parents[0]->requires_grad) {
      auto gin = ctx.grad_of(self.parents[0]);
      for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
          for (int z = 0; z < kd; ++z) {
            const double* kslab = k.data() + ((static_cast<std::size_t>(co) * cin + ci) * kd + z) * kh * kw;
            for (int t = 0; t < od; ++t) {
              double* giplane = gin.data() + (static_cast<std::size_t>(ci) * d + (t + z)) * h * w;
              const double* gplane = gy.data() + (static_cast<std::size_t>(co) * od + t) * oh * ow;
              for (int y = 0; y < kh; ++y) {
                int rlo, rhi;
                valid_range(y - padding, stride, h, oh, rlo, rhi);
                for (int x = 0; x < kw; ++x) {
                  const double kv = kslab[static_cast<std::size_t>(y) * kw + x];
                  int clo, chi;
                  valid_range(x - padding, stride, w, ow, clo, chi);
                  for (int r = rlo; r < rhi; ++r) {
                    double* girow = giplane + static_cast<std::size_t>(r * stride + y - padding) * w + (x - padding);
                    const double* grow = gplane + static_cast<std::size_t>(r) * ow;
                    for (int c = clo; c < chi; ++c) girow[static_cast<std::size_t>(c) * stride] += kv * grow[c];
                  }
                }
              }
            }
          }
        }
      }
    }
    if (self.parents[1]->requires_grad) {
      auto gk = ctx.grad_of(self.parents[1]);
      for (int co = 0; co < cout; ++co) {
        for (int ci = 0; ci < cin; ++ci) {
          for (int z = 0; z < kd; ++z) {
            double* gkslab = gk.data() + ((static_cast<std::size_t>(co) * cin + ci) * kd + z) * kh * kw;
            for (int t = 0; t < od; ++t) {
              const double* iplane = in.data() + (static_cast<std::size_t>(ci) * d + (t + z)) * h * w;
              const double* gplane = gy.data() + (static_cast<std::size_t>(co) * od + t) * oh * ow;
              for (int y = 0; y < kh; ++y) {
                int rlo, rhi;
                valid_range(y - padding, stride, h, oh, rlo, rhi);
                for (int x = 0; x < kw; ++x) {
                  int clo, chi;
                  valid_range(x - padding, stride, w, ow, clo, chi);
                  double acc = 0.0;
                  for (int r = rlo; r < rhi; ++r) {
                    const double* irow = iplane + static_cast<std::size_t>(r * stride + y - padding) * w + (x - padding);
                    const double* grow = gplane + static_cast<std::size_t>(r) * ow;
                    for (int c = clo; c < chi; ++c) acc += grow[c] * irow[static_cast<std::size_t>(c) * stride];
                  }
                  gkslab[static_cast<std::size_t>(y) * kw + x] += acc;
                }
              }
            }
          }
        }
      }
    }
    if (with_bias && self.parents[2]->requires_grad) {
      auto gb = ctx.grad_of(self.parents[2]);
      for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        const double* gplane = gy.data() + static_cast<std::size_t>(co) * od * oh * ow;
        for (std::size_t i = 0; i < static_cast<std::size_t>(od) * oh * ow; ++i) acc += gplane[i];
        gb[static_cast<std::size_t>(co)] += acc;
      }
    }
  };
  return detail::make_op({cout, od, oh, ow}, std::move(out), std::move(parents), std::move(bwd));
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
  check_conv_common("conv_transpose2d", stride, padding);
  if (input.rank() != 3) {
    throw std::invalid_argument("conv_transpose2d: input must be [Cin,H,W], got " + shape_str(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv_transpose2d: kernel must be [Cin,Cout,kH,kW], got " + shape_str(kernel.shape()));
  }
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(0) != cin) {
    throw std::invalid_argument("conv_transpose2d: kernel input channels " + std::to_string(kernel.dim(0)) +
                                " do not match input channels " + std::to_string(cin));
  }
  const int oh = (h - 1) * stride - 2 * padding + kh;
  const int ow = (w - 1) * stride - 2 * padding + kw;
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("conv_transpose2d: output extent " + std::to_string(oh) + "x" +
                                std::to_string(ow) + " is not positive");
  }
  const bool with_bias = bias.defined();
  if (with_bias && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw std::invalid_argument("conv_transpose2d: bias shape " + shape_str(bias.shape()) +
                                " does not match output channels " + std::to_string(cout));
  }

  std::vector<double> out(static_cast<std::size_t>(cout) * oh * ow, 0.0);
  const double* in = input.values().data();
  const double* k = kernel.values().data();
  if (with_bias) {
    for (int co = 0; co < cout; ++co) {
      std::fill_n(out.data() + static_cast<std::size_t>(co) * oh * ow, static_cast<std::size_t>(oh) * ow, bias[co]);
    }
  }
  // Scatter: out[co, r*stride + y - p, c*stride + x - p] += in[ci,r,c] * k[ci,co,y,x].
  for (int ci = 0; ci < cin; ++ci) {
    const double* iplane = in + static_cast<std::size_t>(ci) * h * w;
    for (int co = 0; co < cout; ++co) {
      double* oplane = out.data() + static_cast<std::size_t>(co) * oh * ow;
      const double* kplane = k + (static_cast<std::size_t>(ci) * cout + co) * kh * kw;
      for (int y = 0; y < kh; ++y) {
        int rlo, rhi;
        valid_range(y - padding, stride, oh, h, rlo, rhi);
        for (int x = 0; x < kw; ++x) {
          const double kv = kplane[static_cast<std::size_t>(y) * kw + x];
          int clo, chi;
          valid_range(x - padding, stride, ow, w, clo, chi);
          for (int r = rlo; r < rhi; ++r) {
            const double* irow = iplane + static_cast<std::size_t>(r) * w;
            double* orow = oplane + static_cast<std::size_t>(r * stride + y - padding) * ow + (x - padding);
            for (int c = clo; c < chi; ++c) orow[static_cast<std::size_t>(c) * stride] += kv * irow[c];
          }
        }
      }
    }
  }

  std::vector<Tensor> parents{input, kernel};
  if (with_bias) parents.push_back(bias);
  auto bwd = [cin, h, w, cout, kh, kw, oh, ow, stride, padding, with_bias](Node& self, BackwardCtx& ctx) {
    const auto& in = self.parents[0]->values;
    const auto& k = self.parents[1]->values;
    const auto& gy = self.grad;
    if (self.parents[0]->requires_grad) {
      // Gradient of a scatter is a gather: gin[ci,r,c] = sum k[ci,co,y,x] * gy[co, r*s+y-p, c*s+x-p].
      auto gin = ctx.grad_of(self.parents[0]);
      for (int ci = 0; ci < cin; ++ci) {
        double* giplane = gin.data() + static_cast<std::size_t>(ci) * h * w;
        for (int co = 0; co < cout; ++co) {
          const double* gplane = gy.data() + static_cast<std::size_t>(co) * oh * ow;
          const double* kplane = k.data() + (static_cast<std::size_t>(ci) * cout + co) * kh * kw;
          for (int y = 0; y < kh; ++y) {
            int rlo, rhi;
            valid_range(y - padding, stride, oh, h, rlo, rhi);
            for (int x = 0; x < kw; ++x) {
              const double kv = kplane[static_cast<std::size_t>(y) * kw + x];
              int clo, chi;
              valid_range(x - padding, stride, ow, w, clo, chi);
              for (int r = rlo; r < rhi; ++r) {
                double* girow = giplane + static_cast<std::size_t>(r) * w;
                const double* grow = gplane + static_cast<std::size_t>(r * stride + y - padding) * ow + (x - padding);
                for (int c = clo; c < chi; ++c) girow[c] += kv * grow[static_cast<std::size_t>(c) * stride];
              }
            }
          }
        }
      }
    }
    if (self.parents[1]->requires_grad) {
      auto gk = ctx.grad_of(self.parents[1]);
      for (int ci = 0; ci < cin; ++ci) {
        const double* iplane = in.data() + static_cast<std::size_t>(ci) * h * w;
        for (int co = 0; co < cout; ++co) {
          const double* gplane = gy.data() + static_cast<std::size_t>(co) * oh * ow;
          double* gkplane = gk.data() + (static_cast<std::size_t>(ci) * cout + co) * kh * kw;
          for (int y = 0; y < kh; ++y) {
            int rlo, rhi;
            valid_range(y - padding, stride, oh, h, rlo, rhi);
            for (int x = 0; x < kw; ++x) {
              int clo, chi;
              valid_range(x - padding, stride, ow, w, clo, chi);
              double acc = 0.0;
              for (int r = rlo; r < rhi; ++r) {
                const double* irow = iplane + static_cast<std::size_t>(r) * w;
                const double* grow = gplane + static_cast<std::size_t>(r * stride + y - padding) * ow + (x - padding);
                for (int c = clo; c < chi; ++c) acc += irow[c] * grow[static_cast<std::size_t>(c) * stride];
              }
              gkplane[static_cast<std::size_t>(y) * kw + x] += acc;
            }
          }
        }
      }
    }
    if (with_bias && self.parents[2]->requires_grad) {
      auto gb = ctx.grad_of(self.parents[2]);
      for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        const double* gplane = gy.data() + static_cast<std::size_t>(co) * oh * ow;
        for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += gplane[i];
        gb[static_cast<std::size_t>(co)] += acc;
      }
    }
  };
  return detail::make_op({cout, oh, ow}, std::move(out), std::move(parents), std::move(bwd));
}

}  // namespace stcnn

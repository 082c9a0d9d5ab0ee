#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stcnn/params.hpp"
#include "stcnn/provider.hpp"
#include "stcnn/trajectory.hpp"

namespace stcnn {

/// Network geometry. The default realizes the encoder--bottleneck--decoder
/// stack on a 28x28 grid: two stride-2 3x3 conv+relu encoder stages down to a
/// 7x7 latent map, a 3D convolution with depth = window collapsing time, two
/// further 3x3 convs, and two stride-2 4x4 transpose-conv+relu decoder stages
/// followed by a zero-initialized 1x1 logit head, so the untrained model is
/// exactly uniform.
struct ArchConfig {
  int window = 4;  // frames per conditioning segment (s)
  GridSpec grid{28, 28};
  std::vector<int> enc_channels{16, 32};
  int latent_channels = 32;
  std::vector<int> dec_channels{16, 8};
  bool use_reference = false;
  std::vector<int> ref_channels{16, 32};
  int ref_image_channels = 1;

  int latent_height() const { return grid.height >> enc_channels.size(); }
  int latent_width() const { return grid.width >> enc_channels.size(); }

  /// Throws when the decoder cannot upsample back to exactly (H, W) or any
  /// extent is inconsistent. Runs at construction time, not first forward.
  void validate() const;

  std::map<std::string, std::string> to_header() const;
  static ArchConfig from_header(const std::map<std::string, std::string>& header);
};

/// Deterministic Glorot-uniform initialization of all weights; the logit head
/// starts at zero.
ParameterStore init_model(const ArchConfig& arch, std::uint64_t seed);

/// Per-frame encoder applied to a one-hot [1,H,W] frame; shared across time.
Tensor encode_frame(const ParameterStore& params, const ArchConfig& arch, const Tensor& frame);

/// Reference-image feature map shaped to match the latent spatial extent.
Tensor encode_reference(const ParameterStore& params, const ArchConfig& arch,
                        const ReferenceImage& image);

/// One-step forecast distribution for a rasterized [s,H,W] window.
/// ref_feat must be present exactly when arch.use_reference is set.
GridDistribution forward_step(const ParameterStore& params, const ArchConfig& arch,
                              const Tensor& frames, const Tensor* ref_feat = nullptr);

/// All windows of a [T,H,W] frame stack in one pass: encoder runs once per
/// frame and the temporal convolution slides over the stack, so entry i
/// equals forward_step on window i.
std::vector<GridDistribution> forward_sequence(const ParameterStore& params, const ArchConfig& arch,
                                               const Tensor& frames, const Tensor* ref_feat = nullptr);

/// log p(continuation | segment): the sum over steps of the log mass the
/// sliding one-step model assigns to the next observed point.
double trajectory_log_prob(const ParameterStore& params, const ArchConfig& arch,
                           std::span<const GridPoint> segment,
                           std::span<const GridPoint> continuation,
                           const ReferenceImage* ref = nullptr);

/// Provider view over a trained model for sampling and evaluation. Holds a
/// snapshot reference; per-point frame encodings and per-image reference
/// features are memoized, which is what makes long autoregressive rollouts
/// cheap. Not thread-safe; use one instance per thread.
class StcnnProvider final : public StepDistributionProvider {
 public:
  StcnnProvider(const ParameterStore& params, ArchConfig arch);

  std::string name() const override { return "stcnn"; }
  GridSpec grid() const override { return arch_.grid; }
  int window_length() const override { return arch_.window; }
  GridDistribution next_step(std::span<const GridPoint> window, const ReferenceImage* ref) override;

  const ArchConfig& arch() const { return arch_; }

 private:
  const Tensor& encoded_frame(GridPoint p);
  const Tensor& encoded_reference(const ReferenceImage& image);

  const ParameterStore* params_;
  ArchConfig arch_;
  std::unordered_map<std::int64_t, Tensor> frame_cache_;
  std::map<std::string, Tensor> ref_cache_;
};

// ---- checkpoint container ------------------------------------------------------
// Plain-text `key=value` header (first line a format tag, last line a marker)
// followed by the binary parameter store, so a checkpoint file is
// self-describing.

struct Checkpoint {
  std::map<std::string, std::string> header;
  ParameterStore params;

  const std::string& kind() const;  // header["model"]
};

void save_checkpoint(const std::string& path, const std::map<std::string, std::string>& header,
                     const ParameterStore& params);
Checkpoint load_checkpoint(const std::string& path);

void save_stcnn_checkpoint(const std::string& path, const ArchConfig& arch,
                           const ParameterStore& params);
/// Throws unless the checkpoint at `path` holds an stcnn model.
std::pair<ArchConfig, ParameterStore> load_stcnn_checkpoint(const std::string& path);

}  // namespace stcnn

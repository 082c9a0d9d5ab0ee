#include "stcnn/model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stcnn/ops.hpp"

namespace stcnn {
namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

const std::string& header_at(const std::map<std::string, std::string>& header, const std::string& key) {
  auto it = header.find(key);
  if (it == header.end()) throw std::runtime_error("checkpoint header: missing key '" + key + "'");
  return it->second;
}

Tensor frame_from_point(GridPoint p, const GridSpec& grid) {
  std::vector<double> v(static_cast<std::size_t>(grid.cells()), 0.0);
  v[static_cast<std::size_t>(grid.flat(p))] = 1.0;
  return Tensor::leaf({1, grid.height, grid.width}, std::move(v));
}

Tensor frame_slice(const Tensor& frames, int t, const GridSpec& grid) {
  std::vector<double> v(frames.values().begin() + static_cast<std::ptrdiff_t>(t) * grid.cells(),
                        frames.values().begin() + static_cast<std::ptrdiff_t>(t + 1) * grid.cells());
  return Tensor::leaf({1, grid.height, grid.width}, std::move(v));
}

/// Bottleneck convs, optional reference fusion, decoder, logit head.
GridDistribution decode_latent(const ParameterStore& params, const ArchConfig& arch, Tensor z,
                               const Tensor* ref_feat) {
  z = relu(conv2d(z, params.at("mid0.weight"), params.at("mid0.bias"), 1, 1));
  z = relu(conv2d(z, params.at("mid1.weight"), params.at("mid1.bias"), 1, 1));
  if (arch.use_reference) {
    z = concat_channels(z, *ref_feat);
  }
  for (std::size_t i = 0; i < arch.dec_channels.size(); ++i) {
    const std::string p = "dec" + std::to_string(i);
    z = relu(conv_transpose2d(z, params.at(p + ".weight"), params.at(p + ".bias"), 2, 1));
  }
  Tensor logits = conv2d(z, params.at("head.weight"), params.at("head.bias"), 1, 0);
  return GridDistribution::from_logits(arch.grid, reshape(logits, {arch.grid.height, arch.grid.width}));
}

void check_ref_feat(const ArchConfig& arch, const Tensor* ref_feat) {
  if (arch.use_reference && (ref_feat == nullptr || !ref_feat->defined())) {
    throw std::invalid_argument("forward: model expects reference features but none were given");
  }
  if (!arch.use_reference && ref_feat != nullptr && ref_feat->defined()) {
    throw std::invalid_argument("forward: model does not take reference features");
  }
}

Tensor temporal_stack(const ParameterStore& params, const ArchConfig& arch,
                      const std::vector<Tensor>& encoded_frames) {
  return relu(conv3d(stack_depth(encoded_frames), params.at("temporal.weight"),
                     params.at("temporal.bias"), 1, 1));
}

}  // namespace

void ArchConfig::validate() const {
  grid.validate();
  if (window < 1) throw std::invalid_argument("arch: window length must be >= 1, got " + std::to_string(window));
  if (enc_channels.empty()) throw std::invalid_argument("arch: encoder needs at least one stage");
  if (dec_channels.empty()) throw std::invalid_argument("arch: decoder needs at least one stage");
  for (int c : enc_channels) {
    if (c < 1) throw std::invalid_argument("arch: encoder channel width must be positive");
  }
  for (int c : dec_channels) {
    if (c < 1) throw std::invalid_argument("arch: decoder channel width must be positive");
  }
  if (latent_channels < 1) throw std::invalid_argument("arch: latent channels must be positive");

  int h = grid.height, w = grid.width;
  for (std::size_t i = 0; i < enc_channels.size(); ++i) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw std::invalid_argument("arch: encoder stage " + std::to_string(i) +
                                  " cannot halve odd extent " + std::to_string(h) + "x" + std::to_string(w));
    }
    h /= 2;
    w /= 2;
  }
  if (h < 1 || w < 1) throw std::invalid_argument("arch: latent spatial extent vanished");
  int uh = h, uw = w;
  for (std::size_t i = 0; i < dec_channels.size(); ++i) {
    uh *= 2;
    uw *= 2;
  }
  if (uh != grid.height || uw != grid.width) {
    throw std::invalid_argument("arch: decoder upsampling factors reach " + std::to_string(uh) + "x" +
                                std::to_string(uw) + ", expected " + grid.str());
  }
  if (use_reference) {
    if (ref_channels.size() != enc_channels.size()) {
      throw std::invalid_argument("arch: reference encoder must have " +
                                  std::to_string(enc_channels.size()) +
                                  " stages to match the latent extent");
    }
    for (int c : ref_channels) {
      if (c < 1) throw std::invalid_argument("arch: reference channel width must be positive");
    }
    if (ref_image_channels != 1 && ref_image_channels != 3) {
      throw std::invalid_argument("arch: reference image channels must be 1 or 3");
    }
  }
}

std::map<std::string, std::string> ArchConfig::to_header() const {
  std::map<std::string, std::string> h;
  h["s"] = std::to_string(window);
  h["grid"] = grid.str();
  h["enc_channels"] = join_ints(enc_channels);
  h["latent_channels"] = std::to_string(latent_channels);
  h["dec_channels"] = join_ints(dec_channels);
  h["use_reference"] = use_reference ? "1" : "0";
  h["ref_channels"] = join_ints(ref_channels);
  h["ref_image_channels"] = std::to_string(ref_image_channels);
  return h;
}

ArchConfig ArchConfig::from_header(const std::map<std::string, std::string>& header) {
  ArchConfig a;
  a.window = std::stoi(header_at(header, "s"));
  a.grid = parse_grid(header_at(header, "grid"));
  a.enc_channels = split_ints(header_at(header, "enc_channels"));
  a.latent_channels = std::stoi(header_at(header, "latent_channels"));
  a.dec_channels = split_ints(header_at(header, "dec_channels"));
  a.use_reference = header_at(header, "use_reference") == "1";
  a.ref_channels = split_ints(header_at(header, "ref_channels"));
  a.ref_image_channels = std::stoi(header_at(header, "ref_image_channels"));
  a.validate();
  return a;
}

ParameterStore init_model(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  ParameterStore params(seed);
  Rng rng(seed);

  int cin = 1;
  for (std::size_t i = 0; i < arch.enc_channels.size(); ++i) {
    const int cout = arch.enc_channels[i];
    const std::string p = "enc" + std::to_string(i);
    params.add_glorot(p + ".weight", {cout, cin, 3, 3}, cin * 9, cout * 9, rng);
    params.add_zeros(p + ".bias", {cout});
    cin = cout;
  }

  const int ce = arch.enc_channels.back();
  params.add_glorot("temporal.weight", {arch.latent_channels, ce, arch.window, 3, 3},
                    ce * arch.window * 9, arch.latent_channels * arch.window * 9, rng);
  params.add_zeros("temporal.bias", {arch.latent_channels});

  for (int i = 0; i < 2; ++i) {
    const std::string p = "mid" + std::to_string(i);
    params.add_glorot(p + ".weight", {arch.latent_channels, arch.latent_channels, 3, 3},
                      arch.latent_channels * 9, arch.latent_channels * 9, rng);
    params.add_zeros(p + ".bias", {arch.latent_channels});
  }

  if (arch.use_reference) {
    int rc = arch.ref_image_channels;
    for (std::size_t i = 0; i < arch.ref_channels.size(); ++i) {
      const int cout = arch.ref_channels[i];
      const std::string p = "ref" + std::to_string(i);
      params.add_glorot(p + ".weight", {cout, rc, 3, 3}, rc * 9, cout * 9, rng);
      params.add_zeros(p + ".bias", {cout});
      rc = cout;
    }
  }

  int dc = arch.latent_channels + (arch.use_reference ? arch.ref_channels.back() : 0);
  for (std::size_t i = 0; i < arch.dec_channels.size(); ++i) {
    const int cout = arch.dec_channels[i];
    const std::string p = "dec" + std::to_string(i);
    params.add_glorot(p + ".weight", {dc, cout, 4, 4}, dc * 16, cout * 16, rng);
    params.add_zeros(p + ".bias", {cout});
    dc = cout;
  }

  // Zero head: zero logits everywhere, hence an exactly uniform untrained model.
  params.add_zeros("head.weight", {1, dc, 1, 1});
  params.add_zeros("head.bias", {1});
  return params;
}

Tensor encode_frame(const ParameterStore& params, const ArchConfig& arch, const Tensor& frame) {
  if (frame.rank() != 3 || frame.dim(0) != 1 || frame.dim(1) != arch.grid.height ||
      frame.dim(2) != arch.grid.width) {
    throw std::invalid_argument("encode_frame: expected [1," + arch.grid.str() + "] frame, got " +
                                shape_str(frame.shape()));
  }
  Tensor x = frame;
  for (std::size_t i = 0; i < arch.enc_channels.size(); ++i) {
    const std::string p = "enc" + std::to_string(i);
    x = relu(conv2d(x, params.at(p + ".weight"), params.at(p + ".bias"), 2, 1));
  }
  return x;
}

Tensor encode_reference(const ParameterStore& params, const ArchConfig& arch,
                        const ReferenceImage& image) {
  if (!arch.use_reference) {
    throw std::invalid_argument("encode_reference: model was built without reference input");
  }
  if (image.height != arch.grid.height || image.width != arch.grid.width ||
      image.channels != arch.ref_image_channels) {
    throw std::invalid_argument("encode_reference: image '" + image.id + "' is " +
                                std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                                std::to_string(image.channels) + ", model expects " + arch.grid.str() +
                                "x" + std::to_string(arch.ref_image_channels));
  }
  // HWC [0,1] floats to CHW doubles.
  std::vector<double> chw(static_cast<std::size_t>(image.channels) * arch.grid.cells());
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int r = 0; r < image.height; ++r) {
      for (int c = 0; c < image.width; ++c) {
        chw[(static_cast<std::size_t>(ch) * image.height + r) * image.width + c] =
            static_cast<double>(image.at(r, c, ch));
      }
    }
  }
  Tensor x = Tensor::leaf({image.channels, image.height, image.width}, std::move(chw));
  for (std::size_t i = 0; i < arch.ref_channels.size(); ++i) {
    const std::string p = "ref" + std::to_string(i);
    x = relu(conv2d(x, params.at(p + ".weight"), params.at(p + ".bias"), 2, 1));
  }
  return x;
}

GridDistribution forward_step(const ParameterStore& params, const ArchConfig& arch,
                              const Tensor& frames, const Tensor* ref_feat) {
  check_ref_feat(arch, ref_feat);
  if (frames.rank() != 3 || frames.dim(0) != arch.window || frames.dim(1) != arch.grid.height ||
      frames.dim(2) != arch.grid.width) {
    throw std::invalid_argument("forward_step: expected [" + std::to_string(arch.window) + "," +
                                arch.grid.str() + "] frames, got " + shape_str(frames.shape()));
  }
  std::vector<Tensor> encoded;
  encoded.reserve(static_cast<std::size_t>(arch.window));
  for (int t = 0; t < arch.window; ++t) {
    encoded.push_back(encode_frame(params, arch, frame_slice(frames, t, arch.grid)));
  }
  Tensor z = slice_depth(temporal_stack(params, arch, encoded), 0);
  return decode_latent(params, arch, std::move(z), ref_feat);
}

std::vector<GridDistribution> forward_sequence(const ParameterStore& params, const ArchConfig& arch,
                                               const Tensor& frames, const Tensor* ref_feat) {
  check_ref_feat(arch, ref_feat);
  if (frames.rank() != 3 || frames.dim(1) != arch.grid.height || frames.dim(2) != arch.grid.width) {
    throw std::invalid_argument("forward_sequence: expected [T," + arch.grid.str() + "] frames, got " +
                                shape_str(frames.shape()));
  }
  const int total = frames.dim(0);
  if (total < arch.window + 1) {
    throw std::invalid_argument("forward_sequence: need at least s+1 = " +
                                std::to_string(arch.window + 1) + " frames, got " + std::to_string(total));
  }
  std::vector<Tensor> encoded;
  encoded.reserve(static_cast<std::size_t>(total));
  for (int t = 0; t < total; ++t) {
    encoded.push_back(encode_frame(params, arch, frame_slice(frames, t, arch.grid)));
  }
  Tensor stack = temporal_stack(params, arch, encoded);
  // One distribution per window that has an observed target: offsets 0 .. T-s-1.
  std::vector<GridDistribution> out;
  out.reserve(static_cast<std::size_t>(total - arch.window));
  for (int t = 0; t < total - arch.window; ++t) {
    out.push_back(decode_latent(params, arch, slice_depth(stack, t), ref_feat));
  }
  return out;
}

double trajectory_log_prob(const ParameterStore& params, const ArchConfig& arch,
                           std::span<const GridPoint> segment,
                           std::span<const GridPoint> continuation, const ReferenceImage* ref) {
  if (continuation.empty()) throw std::invalid_argument("trajectory_log_prob: empty continuation");
  if (static_cast<int>(segment.size()) < arch.window) {
    throw std::invalid_argument("trajectory_log_prob: segment shorter than window length " +
                                std::to_string(arch.window));
  }
  StcnnProvider provider(params, arch);
  std::vector<GridPoint> pts(segment.begin() + (segment.size() - static_cast<std::size_t>(arch.window)),
                             segment.end());
  pts.insert(pts.end(), continuation.begin(), continuation.end());
  double log_prob = 0.0;
  for (std::size_t t = 0; t + static_cast<std::size_t>(arch.window) < pts.size(); ++t) {
    const std::span<const GridPoint> window(pts.data() + t, static_cast<std::size_t>(arch.window));
    const GridDistribution dist = provider.next_step(window, ref);
    log_prob += dist.log_mass_at(pts[t + static_cast<std::size_t>(arch.window)]);
  }
  return log_prob;
}

StcnnProvider::StcnnProvider(const ParameterStore& params, ArchConfig arch)
    : params_(&params), arch_(std::move(arch)) {
  arch_.validate();
}

const Tensor& StcnnProvider::encoded_frame(GridPoint p) {
  const std::int64_t key = arch_.grid.flat(p);
  auto it = frame_cache_.find(key);
  if (it == frame_cache_.end()) {
    it = frame_cache_.emplace(key, encode_frame(*params_, arch_, frame_from_point(p, arch_.grid))).first;
  }
  return it->second;
}

const Tensor& StcnnProvider::encoded_reference(const ReferenceImage& image) {
  auto it = ref_cache_.find(image.id);
  if (it == ref_cache_.end()) {
    it = ref_cache_.emplace(image.id, encode_reference(*params_, arch_, image)).first;
  }
  return it->second;
}

GridDistribution StcnnProvider::next_step(std::span<const GridPoint> window,
                                          const ReferenceImage* ref) {
  if (static_cast<int>(window.size()) != arch_.window) {
    throw std::invalid_argument("stcnn provider: window has " + std::to_string(window.size()) +
                                " points, model conditions on " + std::to_string(arch_.window));
  }
  NoGradGuard no_grad;
  std::vector<Tensor> encoded;
  encoded.reserve(window.size());
  for (GridPoint p : window) {
    if (!arch_.grid.contains(p)) {
      throw std::out_of_range("stcnn provider: window point outside grid " + arch_.grid.str());
    }
    encoded.push_back(encoded_frame(p));
  }
  Tensor z = slice_depth(temporal_stack(*params_, arch_, encoded), 0);
  const Tensor* ref_feat = nullptr;
  Tensor ref_tensor;
  if (arch_.use_reference) {
    if (ref == nullptr) {
      throw std::invalid_argument("stcnn provider: model expects a reference image");
    }
    ref_tensor = encoded_reference(*ref);
    ref_feat = &ref_tensor;
  }
  return decode_latent(*params_, arch_, std::move(z), ref_feat);
}

// ---- checkpoint container ------------------------------------------------------

namespace {
constexpr const char* kCheckpointTag = "stcnn-checkpoint v1";
constexpr const char* kParamsMarker = "params-begin";
}  // namespace

const std::string& Checkpoint::kind() const { return header_at(header, "model"); }

void save_checkpoint(const std::string& path, const std::map<std::string, std::string>& header,
                     const ParameterStore& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "' for writing");
  f << kCheckpointTag << '\n';
  for (const auto& [k, v] : header) f << k << '=' << v << '\n';
  f << kParamsMarker << '\n';
  params.save(f);
  if (!f) throw std::runtime_error("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != kCheckpointTag) {
    throw std::runtime_error("'" + path + "' is not a checkpoint file");
  }
  Checkpoint ckpt;
  while (std::getline(f, line)) {
    if (line == kParamsMarker) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("checkpoint '" + path + "': malformed header line '" + line + "'");
    }
    ckpt.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ckpt.params = ParameterStore::load(f);
  return ckpt;
}

void save_stcnn_checkpoint(const std::string& path, const ArchConfig& arch,
                           const ParameterStore& params) {
  auto header = arch.to_header();
  header["model"] = "stcnn";
  save_checkpoint(path, header, params);
}

std::pair<ArchConfig, ParameterStore> load_stcnn_checkpoint(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind() != "stcnn") {
    throw std::runtime_error("checkpoint '" + path + "' holds a '" + ckpt.kind() + "' model, expected stcnn");
  }
  return {ArchConfig::from_header(ckpt.header), std::move(ckpt.params)};
}

}  // namespace stcnn

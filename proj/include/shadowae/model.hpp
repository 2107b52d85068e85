#pragma once

// Shadow/content autoencoder: one convolutional encoder and two mirrored
// transposed-convolution decoders with sigmoid heads.
//
//   z = E(x~), shadow = sigmoid(Ds(z)), content = sigmoid(Dc(z)),
//   recon = shadow o content

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowae/graph.hpp"
#include "shadowae/ops.hpp"
#include "shadowae/rng.hpp"

namespace shadowae {

struct ArchConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::vector<std::size_t> enc_channels{16, 32, 64, 128};
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;
  double slope = 0.1;

  void validate() const;
  /// Spatial extent of the latent z.
  std::size_t latent_height() const;
  std::size_t latent_width() const;
  bool operator==(const ArchConfig&) const = default;
};

template <typename T>
struct LayerParams {
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
struct BasicModelParams {
  ArchConfig arch;
  std::vector<LayerParams<T>> encoder;
  std::vector<LayerParams<T>> shadow_decoder;
  std::vector<LayerParams<T>> content_decoder;

  /// Visits every learnable tensor in a fixed order with a stable name
  /// ("encoder.0.weight", "shadow_decoder.3.bias", ...).
  void for_each(const std::function<void(const std::string&, Tensor<T>&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor<T>&)>& fn) const;
  std::size_t parameter_count() const;

  template <typename U>
  BasicModelParams<U> cast() const {
    BasicModelParams<U> out{arch, {}, {}, {}};
    auto conv = [](const std::vector<LayerParams<T>>& src, std::vector<LayerParams<U>>& dst) {
      for (const auto& l : src) dst.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
    };
    conv(encoder, out.encoder);
    conv(shadow_decoder, out.shadow_decoder);
    conv(content_decoder, out.content_decoder);
    return out;
  }
};

using ModelParams = BasicModelParams<float>;

/// Weights ~ uniform(-b, b), b = gain * sqrt(1 / fan_in); biases zero.
ModelParams init_params(const ArchConfig& arch, Rng& rng, double gain = 1.0);

/// sqrt(6 / (1 + slope^2)): the He-uniform gain for a leaky activation.
double he_gain(double slope);

/// Handles of one recorded forward pass.
struct ForwardVars {
  Var z, shadow, content, recon;
  /// Parameter leaves in for_each order.
  std::vector<Var> params;
};

/// Records a forward pass on x_tilde [N, 1, H, W]. Parameters become
/// gradient-requiring leaves.
template <typename T>
ForwardVars forward(Graph<T>& g, const BasicModelParams<T>& params, Var x_tilde);

struct ForwardOut {
  Tensor<float> z, shadow, content, recon;
};

/// Forward pass without gradient tracking.
ForwardOut forward(const ModelParams& params, const Tensor<float>& x_tilde);

/// Predicted shadow map for raw (uninjected) input.
Tensor<float> infer_shadow(const ModelParams& params, const Tensor<float>& x);

// Checkpoints ----------------------------------------------------------------

/// Binary layout: "SHDW", u32 format version, u64 header length, JSON
/// header, then little-endian float32 arrays at the header's byte offsets
/// (relative to the end of the header).
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::uint64_t step = 0;
  /// Optimizer velocity per parameter name; empty for a fresh model.
  std::map<std::string, Tensor<float>> velocity;
  /// Free-form metadata echoed in the header (e.g. the training config).
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);

}  // namespace shadowae

#pragma once

// Self-supervised training: every sample gets a freshly sampled synthetic
// shadow each step, the network is asked to recover it, and parameters are
// updated with momentum SGD.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowae/losses.hpp"
#include "shadowae/model.hpp"
#include "shadowae/phantom.hpp"

namespace shadowae {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  /// Write an intermediate checkpoint every N steps (0 = final only).
  std::size_t checkpoint_every = 0;
  double injection_probability = 1.0;
  LossWeights loss;
  SamplingConfig shadow;
  std::vector<std::size_t> enc_channels{16, 32, 64, 128};
  /// Weight init bound multiplier on sqrt(1 / fan_in); unset uses
  /// he_gain(slope). 1.0 gives the plain sqrt(1 / fan_in) bound.
  std::optional<double> init_gain;
  std::filesystem::path corpus;
  std::filesystem::path out_dir = "run";
  /// Optional checkpoint to resume from (params, velocity and step).
  std::optional<std::filesystem::path> resume;

  void validate() const;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Momentum SGD state: one velocity buffer per parameter name.
struct OptimizerState {
  std::map<std::string, Tensor<float>> velocity;
  std::uint64_t step = 0;
};

/// One optimisation step on a batch [N, 1, H, W] with one mask per sample.
/// Updates params and opt in place. Throws NonFiniteLoss (leaving params
/// untouched) if any loss component is not finite.
LossBreakdown train_step(ModelParams& params, const Tensor<float>& batch,
                         const std::vector<ShadowMask>& masks, const LossWeights& w,
                         OptimizerState& opt, double learning_rate, double momentum);

/// Masks for the samples of a given global step, drawn from the
/// ("injection", step) sub-stream.
std::vector<ShadowMask> sample_step_masks(const FanGeometry& fan, const SamplingConfig& cfg,
                                          std::size_t width, std::size_t height,
                                          std::size_t count, std::uint64_t seed,
                                          std::uint64_t step, double injection_probability);

/// Epoch order of sample indices from the ("shuffle", epoch) sub-stream.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

struct FitResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::uint64_t steps = 0;
  std::vector<LossBreakdown> history;  // steps run by this call
};

/// Full training run. Writes under cfg.out_dir: train_log.csv (one row per
/// step), ckpt_<step>.shdw every checkpoint_every steps, final.shdw and
/// config.json. Deterministic per (cfg, seed).
FitResult fit(const TrainConfig& cfg);

/// Loads the corpus training images as [1, 1, H, W] tensors.
std::vector<Tensor<float>> load_training_images(const CorpusManifest& corpus);

std::size_t steps_per_epoch(std::size_t n_images, std::size_t batch_size);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace shadowae

#pragma once

#include "radardepth/geometry.hpp"
#include "radardepth/losses.hpp"
#include "radardepth/sid.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace radardepth {

/// C×H×W activation array, channel-major.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  double& at(int c, int y, int x) { return data[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data[index(c, y, x)]; }
  double* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
  const double* plane(int c) const { return data.data() + static_cast<std::size_t>(c) * height * width; }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + static_cast<std::size_t>(y)) * width +
           static_cast<std::size_t>(x);
  }

  /// Single-channel map from a grid, each value multiplied by `scale`.
  static FeatureMap from_grid(const Grid& grid, double scale = 1.0);
};

/// Bilinear resize with half-pixel centres (edge samples clamp).
FeatureMap upsample_bilinear(const FeatureMap& in, int out_h, int out_w);
/// Adds the adjoint of upsample_bilinear applied to g_out into g_in, whose
/// shape selects the source size.
void upsample_bilinear_adjoint(const FeatureMap& g_out, FeatureMap& g_in);

/// A named parameter (or gradient, or momentum buffer).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  static Tensor zeros(std::vector<int> shape);
  std::size_t numel() const { return values.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Ordered by name, so iteration order (and everything derived from it) is fixed.
using TensorMap = std::map<std::string, Tensor>;

TensorMap zeros_like(const TensorMap& params);

enum class HeadKind { kRegression, kOrdinal };

struct ModelConfig {
  int input_channels = 1;
  /// Appends a fixed plane holding the normalised row coordinate in [-1, 1]
  /// to the input, so the network can learn a per-row depth prior.
  bool row_channel = true;
  int base_width = 4;
  int max_width = 16;
  /// Number of stride-2 encoder stages.
  int stages = 4;
  HeadKind head = HeadKind::kRegression;
  int bins = 80;  // ordinal head only

  int width_at(int stage) const;  // stage >= 1
  int output_channels() const { return head == HeadKind::kRegression ? 1 : bins; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double poly_power = 0.9;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 8;
  int epochs = 30;
  std::uint64_t seed = 0;
  /// Start the head bias at the loss-optimal constant for the training
  /// targets (median depth for L1, per-bin exceedance rate for ordinal).
  bool init_head_from_targets = true;

  /// lr0 · (1 − iter/max_iter)^power, clamped at 0 beyond max_iter.
  double lr_at(long iter, long max_iter) const;
};

/// Regression heads floor their output at this depth (meters).
inline constexpr double kMinPredictedDepth = 1e-3;

class ForwardCache;

class TinyDepthNet {
 public:
  /// He (fan-in) initialisation from `seed`; biases start at zero.
  TinyDepthNet(ModelConfig cfg, std::uint64_t seed);
  /// All parameters zero.
  static TinyDepthNet zeros(ModelConfig cfg);
  TinyDepthNet(ModelConfig cfg, TensorMap params);

  const ModelConfig& config() const { return cfg_; }
  TensorMap& parameters() { return params_; }
  const TensorMap& parameters() const { return params_; }

  struct Output {
    std::optional<DenseDepthImage> depth;     // regression head
    std::optional<ProbabilityVolume> probs;   // ordinal head
    std::shared_ptr<const ForwardCache> cache;
  };

  /// Throws std::invalid_argument if the input channel count differs from the config.
  Output forward(const FeatureMap& input) const;

  /// Reverse-mode gradients of Σ upstream · head_output, plus weight_decay · w
  /// for every parameter. `upstream` is laid out like the head output (H×W
  /// depths or K×H×W probabilities). Throws std::logic_error on a missing cache.
  TensorMap backward(const ForwardCache* cache, std::span<const double> upstream,
                     double weight_decay) const;

 private:
  ModelConfig cfg_;
  TensorMap params_;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Momentum SGD: v ← μ v + g; w ← w − lr(iter) v. Throws NonFiniteGradient
/// (naming the tensor) before touching any parameter if a gradient is not finite.
void sgd_step(TensorMap& params, const TensorMap& grads, TensorMap& velocity,
              const TrainConfig& cfg, long iter, long max_iter);

enum class LossKind { kL1, kOrdinal };

struct TrainSample {
  FeatureMap input;
  SparseDepthImage target;
};

struct FitResult {
  TinyDepthNet model;
  std::vector<double> epoch_loss;      // mean batch loss per epoch
  std::vector<double> iteration_loss;  // batch loss per iteration
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, long iter, double loss);
  int epoch;
  long iter;
};

/// Deterministic for a fixed seed: the seed drives initialisation and the
/// per-epoch shuffle. Throws std::invalid_argument on an empty dataset and
/// TrainingDiverged on a non-finite loss.
FitResult fit(const std::vector<TrainSample>& data, const ModelConfig& model_cfg,
              const TrainConfig& train_cfg, LossKind loss, const SidConfig& sid = SidConfig{});

/// Depth map from either head; ordinal outputs decode through probs_to_labels.
DenseDepthImage predict_depth(const TinyDepthNet& model, const FeatureMap& input,
                              const SidConfig& sid = SidConfig{});

/// Single-file checkpoint: magic, header length, JSON index of
/// (name, shape, byte offset) plus the model config, then little-endian f64 data.
void save_checkpoint(const std::filesystem::path& path, const TinyDepthNet& model);
TinyDepthNet load_checkpoint(const std::filesystem::path& path);

}  // namespace radardepth

#pragma once

#include "radardepth/dataset.hpp"
#include "radardepth/densify.hpp"
#include "radardepth/metrics.hpp"
#include "radardepth/radar_prep.hpp"
#include "radardepth/sid.hpp"
#include "radardepth/tinydepth.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace radardepth {

/// Library version recorded in manifests.
const char* version();

enum class ExperimentKind { kInference, kSupervision };

/// Radar input or supervision variant. kLidar is the densified-lidar
/// control arm and exists only for supervision experiments.
enum class RadarVariant { kRaw, kHeight, kMer, kLidar };

std::string to_string(ExperimentKind kind);
std::string to_string(RadarVariant variant);
/// Throw std::invalid_argument on unknown names.
ExperimentKind parse_kind(const std::string& name);
RadarVariant parse_variant(const std::string& name);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kInference;
  RadarVariant variant = RadarVariant::kRaw;
  double cap = 80.0;
  std::filesystem::path dataset;
  /// Drives initialisation and shuffling; overrides train.seed.
  std::uint64_t seed = 7;
  ModelConfig model;
  TrainConfig train;
  SidConfig sid;
  LossKind loss = LossKind::kL1;
  /// Radar sweeps accumulated per frame (current plus previous).
  int sweeps = 5;
  HeightBand band;
  double pda_min = 0.5;
  /// Radar depth input is multiplied by this before entering the network.
  double input_scale = 1.0 / 80.0;
  /// Fraction of sequences (rounded up) held out for evaluation.
  double test_fraction = 0.2;
  DensifyOptions densify;
  AbsRelConvention absrel = AbsRelConvention::kPrediction;

  /// Desk-scale defaults for a protocol arm (training schedule tuned for
  /// the stock suite).
  static ExperimentSpec desk(ExperimentKind kind, RadarVariant variant,
                             const std::filesystem::path& dataset, std::uint64_t seed);

  /// Throws std::invalid_argument on an inconsistent spec.
  void validate() const;
};

std::string spec_to_json(const ExperimentSpec& spec);
/// Throws std::runtime_error on malformed input.
ExperimentSpec spec_from_json(const std::string& text);

/// Train and test frames. Whole sequences go to the test side, taken from
/// the end of the sequence order; a single-sequence dataset splits by frame.
struct Split {
  std::vector<const FrameRef*> train;
  std::vector<const FrameRef*> test;
};
Split split_dataset(const Dataset& ds, double test_fraction);

/// Accumulated radar (current frame plus `sweeps − 1` previous ones) in the
/// frame's camera.
PointCloud accumulated_radar(const Dataset& ds, const RadarOnlyFrameView& view, int sweeps);

/// The chosen radar variant as a sparse depth map for one frame, reading
/// only radar, pose, intrinsics and MER files.
SparseDepthImage radar_depth(const Dataset& ds, const RadarOnlyFrameView& view,
                             const ExperimentSpec& spec);

/// Densified lidar at the frame's resolution.
DenseDepthImage densified_lidar(const FrameReader& reader, const FrameRef& frame,
                                const DensifyOptions& options);

/// Sparse lidar ground truth used for evaluation.
SparseDepthImage lidar_depth(const FrameReader& reader, const FrameRef& frame);

/// Pooled metrics plus the mean of per-frame metrics.
struct EvalResult {
  MetricsReport pooled;
  MetricsReport per_frame_mean;
  std::size_t frames = 0;
  /// RMSE of the best single constant depth over the same pooled pixels.
  double baseline_constant_rmse = 0.0;
};

/// Relative path of a frame's prediction file inside a prediction directory.
std::filesystem::path prediction_path(const FrameRef& frame);

/// Evaluates PFM predictions in pred_dir against sparse lidar. With a
/// non-empty `frame_ids` only those frames are evaluated; otherwise every
/// dataset frame must have a prediction. Throws std::runtime_error on
/// missing or misshapen predictions.
EvalResult eval_cmd(const std::filesystem::path& pred_dir, const std::filesystem::path& dataset,
                    double cap, const std::vector<std::string>& frame_ids = {},
                    AbsRelConvention convention = AbsRelConvention::kPrediction);

/// Flat JSON record: pooled metrics at top level, per-frame means prefixed
/// `per_frame_mean_`.
std::string eval_to_json(const EvalResult& r);

struct RunOptions {
  std::function<void(const std::string&)> progress;
  /// When set, receives every dataset file access made by the run.
  AccessLog* access_log = nullptr;
};

struct ExperimentResult {
  EvalResult eval;
  std::vector<double> epoch_loss;
  std::size_t train_frames = 0;
  std::size_t test_frames = 0;
  std::filesystem::path report_path;
  std::filesystem::path checkpoint_path;
  std::filesystem::path manifest_path;
};

/// Radar-only input, trained against densified lidar, evaluated on sparse
/// lidar. Writes report.json, model.ckpt, loss_log.csv, manifest.json,
/// predictions/ and figures/ under out_dir.
ExperimentResult run_inference_experiment(const ExperimentSpec& spec,
                                          const std::filesystem::path& out_dir,
                                          const RunOptions& options = {});

/// Grayscale input supervised only by the radar variant (or densified lidar
/// for the control arm); lidar is read only in the evaluation phase.
ExperimentResult run_supervision_experiment(const ExperimentSpec& spec,
                                            const std::filesystem::path& out_dir,
                                            const RunOptions& options = {});

/// Dispatches on spec.kind.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                const RunOptions& options = {});

/// Re-runs the spec stored in a manifest after checking that every input
/// file still has its recorded hash. Throws std::runtime_error on a mismatch.
ExperimentResult rerun_from_manifest(const std::filesystem::path& manifest,
                                     const std::filesystem::path& out_dir,
                                     const RunOptions& options = {});

}  // namespace radardepth

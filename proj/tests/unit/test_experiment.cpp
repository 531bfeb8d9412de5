#include "radardepth/experiment.hpp"
#include "radardepth/synthscene.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace radardepth;
namespace fs = std::filesystem;

namespace {

fs::path scratch() { return fs::temp_directory_path() / "radardepth_experiment_test"; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Three short sequences with MER, generated once for the whole binary.
const fs::path& suite() {
  static const fs::path dir = [] {
    fs::path d = scratch() / "suite";
    fs::remove_all(d);
    SuiteConfig cfg;
    cfg.sequences = 3;
    cfg.frames_per_sequence = 3;
    cfg.seed = 5;
    gen_stock_suite(cfg, d);
    return d;
  }();
  return dir;
}

ExperimentSpec tiny_spec(ExperimentKind kind, RadarVariant variant, const fs::path& dataset) {
  auto s = ExperimentSpec::desk(kind, variant, dataset, 3);
  s.model.base_width = 2;
  s.model.max_width = 4;
  s.model.stages = 2;
  s.train.epochs = 2;
  s.train.batch_size = 3;
  s.test_fraction = 0.3;
  return s;
}

// Predictions equal to the lidar target where it exists, 1 m elsewhere.
void write_gt_predictions(const Dataset& ds, const fs::path& pred_dir) {
  FrameReader reader;
  for (const auto& f : ds.frames()) {
    auto target = lidar_depth(reader, f);
    Grid g(target.width(), target.height(), 1.0);
    for (int v = 0; v < g.height(); ++v)
      for (int u = 0; u < g.width(); ++u)
        if (target.valid(u, v)) g.at(u, v) = target.at(u, v);
    fs::create_directories((pred_dir / prediction_path(f)).parent_path());
    write_pfm(pred_dir / prediction_path(f), g);
  }
}

}  // namespace

TEST(Names, ParseRoundTrip) {
  for (auto k : {ExperimentKind::kInference, ExperimentKind::kSupervision})
    EXPECT_EQ(parse_kind(to_string(k)), k);
  for (auto v : {RadarVariant::kRaw, RadarVariant::kHeight, RadarVariant::kMer, RadarVariant::kLidar})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_kind("fusion"), std::invalid_argument);
  EXPECT_THROW(parse_variant("sonar"), std::invalid_argument);
}

TEST(Spec, JsonRoundTrip) {
  auto s = ExperimentSpec::desk(ExperimentKind::kSupervision, RadarVariant::kMer, "/data/x", 11);
  s.pda_min = 0.75;
  s.absrel = AbsRelConvention::kTarget;
  s.model.head = HeadKind::kOrdinal;
  s.loss = LossKind::kOrdinal;
  s.model.bins = s.sid.bins();
  auto text = spec_to_json(s);
  auto back = spec_from_json(text);
  EXPECT_EQ(spec_to_json(back), text);
  EXPECT_EQ(back.model, s.model);
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(back.pda_min, 0.75);
}

TEST(Spec, Validation) {
  auto s = ExperimentSpec::desk(ExperimentKind::kInference, RadarVariant::kLidar, "d", 1);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.variant = RadarVariant::kRaw;
  EXPECT_NO_THROW(s.validate());
  s.loss = LossKind::kOrdinal;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.model.head = HeadKind::kOrdinal;
  s.model.bins = s.sid.bins() - 1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = ExperimentSpec::desk(ExperimentKind::kInference, RadarVariant::kRaw, "", 1);
  EXPECT_THROW(s.validate(), std::invalid_argument);

  EXPECT_THROW(spec_from_json("{}"), std::runtime_error);
  EXPECT_THROW(spec_from_json("not json"), std::runtime_error);
  auto j = nlohmann::json::parse(spec_to_json(ExperimentSpec::desk(
      ExperimentKind::kSupervision, RadarVariant::kRaw, "d", 1)));
  j["sweeps"] = 0;
  EXPECT_THROW(spec_from_json(j.dump()), std::runtime_error);
}

TEST(Split, WholeSequencesFromTheEnd) {
  auto ds = Dataset::open(suite());
  auto split = split_dataset(ds, 0.2);
  EXPECT_EQ(split.train.size(), 6u);
  ASSERT_EQ(split.test.size(), 3u);
  for (const auto* f : split.test) EXPECT_EQ(f->sequence, 2);
  for (const auto* f : split.train) EXPECT_LT(f->sequence, 2);
  EXPECT_EQ(split_dataset(ds, 0.5).test.size(), 6u);
  EXPECT_EQ(split_dataset(ds, 0.99).train.size(), 3u);
}

TEST(Split, SingleSequenceByFrame) {
  fs::path dir = scratch() / "flat";
  fs::remove_all(dir);
  gen_sequence(stock_scene(2), SensorModelConfig{}, desk_intrinsics(), 10, 2, dir);
  auto ds = Dataset::open(dir);
  auto split = split_dataset(ds, 0.2);
  ASSERT_EQ(split.test.size(), 2u);
  EXPECT_EQ(split.test[0]->index, 8);
  EXPECT_EQ(split.train.size(), 8u);

  fs::path one = scratch() / "one";
  fs::remove_all(one);
  gen_sequence(stock_scene(2), SensorModelConfig{}, desk_intrinsics(), 1, 2, one);
  EXPECT_THROW(split_dataset(Dataset::open(one), 0.2), std::runtime_error);

  auto spec = ExperimentSpec::desk(ExperimentKind::kInference, RadarVariant::kMer, dir, 1);
  FrameReader reader;
  EXPECT_THROW(radar_depth(ds, RadarOnlyFrameView(reader, ds.frames()[0]), spec),
               std::runtime_error);
}

TEST(RadarDepth, VariantsDiffer) {
  auto ds = Dataset::open(suite());
  FrameReader reader;
  const auto& f = ds.frames()[2];
  RadarOnlyFrameView view(reader, f);
  auto spec = ExperimentSpec::desk(ExperimentKind::kInference, RadarVariant::kRaw, suite(), 1);
  auto raw = radar_depth(ds, view, spec);
  spec.variant = RadarVariant::kHeight;
  auto height = radar_depth(ds, view, spec);
  spec.variant = RadarVariant::kMer;
  auto mer = radar_depth(ds, view, spec);
  EXPECT_GT(raw.valid_count(), 0u);
  EXPECT_GT(height.valid_count(), 2 * raw.valid_count());
  EXPECT_GT(mer.valid_count(), 0u);

  spec.sweeps = 1;
  spec.variant = RadarVariant::kRaw;
  auto single = radar_depth(ds, view, spec);
  EXPECT_LE(single.valid_count(), raw.valid_count());
  EXPECT_EQ(single, project_to_depth(reader.radar(f), reader.intrinsics(f)));
}

TEST(EvalCmd, GroundTruthPredictions) {
  auto ds = Dataset::open(suite());
  fs::path pred = scratch() / "gt_pred";
  fs::remove_all(pred);
  write_gt_predictions(ds, pred);
  auto r80 = eval_cmd(pred, suite(), 80.0);
  EXPECT_EQ(r80.frames, ds.frames().size());
  EXPECT_EQ(r80.pooled.delta1, 1.0);
  EXPECT_EQ(r80.pooled.delta2, 1.0);
  EXPECT_EQ(r80.pooled.delta3, 1.0);
  // PFM stores float32, so the round trip costs up to half an ulp per value.
  EXPECT_LE(r80.pooled.rmse, 80.0 * 6e-8);
  EXPECT_LE(r80.pooled.absrel, 6e-8);
  EXPECT_GT(r80.baseline_constant_rmse, 1.0);
  auto r50 = eval_cmd(pred, suite(), 50.0);
  EXPECT_LE(r50.pooled.valid_pixel_count, r80.pooled.valid_pixel_count);

  auto json = nlohmann::json::parse(eval_to_json(r80));
  for (const char* key : {"delta1", "rmse", "absrel", "per_frame_mean_delta1", "cap", "frames",
                          "baseline_constant_rmse", "valid_pixel_count"})
    EXPECT_TRUE(json.contains(key)) << key;
}

TEST(EvalCmd, SingleFrameMatchesEvaluate) {
  auto ds = Dataset::open(suite());
  fs::path pred = scratch() / "one_pred";
  fs::remove_all(pred);
  const auto& f = ds.frames()[4];
  FrameReader reader;
  auto target = lidar_depth(reader, f);
  Grid g(target.width(), target.height());
  for (int v = 0; v < g.height(); ++v)
    for (int u = 0; u < g.width(); ++u) g.at(u, v) = 3.0 + 0.2 * v + 0.01 * u;
  fs::create_directories((pred / prediction_path(f)).parent_path());
  write_pfm(pred / prediction_path(f), g);
  // Round through float32 so both sides see the stored values.
  DenseDepthImage stored(read_pfm(pred / prediction_path(f)));
  auto r = eval_cmd(pred, suite(), 80.0, {f.id});
  auto m = evaluate(stored, target, 80.0);
  EXPECT_EQ(r.frames, 1u);
  EXPECT_DOUBLE_EQ(r.pooled.rmse, m.rmse);
  EXPECT_DOUBLE_EQ(r.pooled.delta1, m.delta1);
  EXPECT_DOUBLE_EQ(r.pooled.absrel, m.absrel);
  EXPECT_DOUBLE_EQ(r.per_frame_mean.rmse, m.rmse);
}

TEST(EvalCmd, MissingOrMisshapenPrediction) {
  auto ds = Dataset::open(suite());
  fs::path pred = scratch() / "bad_pred";
  fs::remove_all(pred);
  write_gt_predictions(ds, pred);
  const auto& f = ds.frames()[1];
  fs::remove(pred / prediction_path(f));
  EXPECT_THROW(eval_cmd(pred, suite(), 80.0), std::runtime_error);
  EXPECT_NO_THROW(eval_cmd(pred, suite(), 80.0, {ds.frames()[0].id}));
  write_pfm(pred / prediction_path(f), Grid(10, 10, 5.0));
  try {
    eval_cmd(pred, suite(), 80.0);
    FAIL() << "expected a shape error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("expected 200x88"), std::string::npos) << e.what();
  }
  EXPECT_THROW(eval_cmd(pred, suite(), 80.0, {"seq_09/frame_000000"}), std::runtime_error);
  EXPECT_THROW(eval_cmd(pred, suite(), 0.0), std::invalid_argument);
}

TEST(Run, ReportDeterminismAndRerun) {
  auto spec = tiny_spec(ExperimentKind::kInference, RadarVariant::kHeight, suite());
  fs::path a = scratch() / "run_a", b = scratch() / "run_b", c = scratch() / "run_c";
  for (const auto& d : {a, b, c}) fs::remove_all(d);
  auto ra = run_experiment(spec, a);
  auto rb = run_experiment(spec, b);
  EXPECT_EQ(ra.train_frames, 6u);
  EXPECT_EQ(ra.test_frames, 3u);
  EXPECT_EQ(ra.epoch_loss.size(), 2u);
  for (const char* f : {"report.json", "model.ckpt", "loss_log.csv", "manifest.json",
                        "predictions/frames.txt", "predictions/seq_02/frame_000001.pfm",
                        "figures/seq_02/frame_000001.pgm"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "model.ckpt"), slurp(b / "model.ckpt"));

  auto report = nlohmann::json::parse(slurp(a / "report.json"));
  for (const char* key : {"delta1", "delta2", "delta3", "rmse", "absrel", "kind", "variant", "seed",
                          "software_version", "baseline_constant_rmse", "initial_loss", "final_loss"})
    EXPECT_TRUE(report.contains(key)) << key;
  EXPECT_EQ(report["variant"], "height");

  auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["inputs"].size(), Dataset::open(suite()).all_files().size());
  EXPECT_EQ(manifest["outputs"]["model.ckpt"], sha256_file(a / "model.ckpt"));

  rerun_from_manifest(a / "manifest.json", c);
  EXPECT_EQ(slurp(a / "report.json"), slurp(c / "report.json"));
  EXPECT_EQ(slurp(a / "model.ckpt"), slurp(c / "model.ckpt"));

  spec.seed = 4;
  fs::remove_all(c);
  run_experiment(spec, c);
  EXPECT_NE(slurp(a / "model.ckpt"), slurp(c / "model.ckpt"));
}

TEST(Run, RerunRejectsChangedInputs) {
  fs::path data = scratch() / "mutable";
  fs::remove_all(data);
  fs::copy(suite(), data, fs::copy_options::recursive);
  auto spec = tiny_spec(ExperimentKind::kSupervision, RadarVariant::kRaw, data);
  spec.train.epochs = 1;
  fs::path out = scratch() / "run_mut";
  fs::remove_all(out);
  run_experiment(spec, out);
  {
    std::ofstream f(data / "seq_00" / "frame_000000" / files::kRadar, std::ios::app);
    f << "1,2,3\n";
  }
  try {
    rerun_from_manifest(out / "manifest.json", scratch() / "run_mut2");
    FAIL() << "expected a hash mismatch";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("seq_00/frame_000000/radar.csv"), std::string::npos)
        << e.what();
  }
  fs::remove(data / "seq_00" / "frame_000000" / files::kRadar);
  EXPECT_THROW(rerun_from_manifest(out / "manifest.json", scratch() / "run_mut2"),
               std::runtime_error);
}

TEST(Run, RadarSupervisionNeverReadsLidarBeforeEval) {
  for (auto variant : {RadarVariant::kRaw, RadarVariant::kHeight, RadarVariant::kMer}) {
    auto spec = tiny_spec(ExperimentKind::kSupervision, variant, suite());
    spec.train.epochs = 1;
    fs::path out = scratch() / ("run_log_" + to_string(variant));
    fs::remove_all(out);
    AccessLog log;
    RunOptions opts;
    opts.access_log = &log;
    run_experiment(spec, out, opts);
    int eval_lidar = 0, train_radar = 0;
    for (const auto& e : log.entries()) {
      if (e.file == files::kLidar) {
        EXPECT_EQ(e.phase, "eval") << e.frame;
        ++eval_lidar;
      }
      train_radar += e.phase == "train" && e.file != files::kImage;
    }
    EXPECT_EQ(eval_lidar, 3);
    EXPECT_GT(train_radar, 0);
  }

  // The control arm does read lidar while training.
  auto spec = tiny_spec(ExperimentKind::kSupervision, RadarVariant::kLidar, suite());
  spec.train.epochs = 1;
  AccessLog log;
  RunOptions opts;
  opts.access_log = &log;
  fs::remove_all(scratch() / "run_log_lidar");
  run_experiment(spec, scratch() / "run_log_lidar", opts);
  bool train_lidar = false;
  for (const auto& e : log.entries()) train_lidar |= e.phase == "train" && e.file == files::kLidar;
  EXPECT_TRUE(train_lidar);
}

TEST(Run, WrongEntryPointRejected) {
  auto spec = tiny_spec(ExperimentKind::kSupervision, RadarVariant::kRaw, suite());
  EXPECT_THROW(run_inference_experiment(spec, scratch() / "x"), std::invalid_argument);
  spec.kind = ExperimentKind::kInference;
  EXPECT_THROW(run_supervision_experiment(spec, scratch() / "x"), std::invalid_argument);
}

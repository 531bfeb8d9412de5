#include "radardepth/experiment.hpp"

#include "config_json.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#ifndef RADARDEPTH_VERSION
#define RADARDEPTH_VERSION "unknown"
#endif

namespace radardepth {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version() { return RADARDEPTH_VERSION; }

std::string to_string(ExperimentKind kind) {
  return kind == ExperimentKind::kInference ? "inference" : "supervision";
}

std::string to_string(RadarVariant variant) {
  switch (variant) {
    case RadarVariant::kRaw:
      return "raw";
    case RadarVariant::kHeight:
      return "height";
    case RadarVariant::kMer:
      return "mer";
    case RadarVariant::kLidar:
      return "lidar";
  }
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  if (name == "inference") {
    return ExperimentKind::kInference;
  }
  if (name == "supervision") {
    return ExperimentKind::kSupervision;
  }
  throw std::invalid_argument("unknown experiment kind '" + name + "' (inference|supervision)");
}

RadarVariant parse_variant(const std::string& name) {
  for (auto v : {RadarVariant::kRaw, RadarVariant::kHeight, RadarVariant::kMer, RadarVariant::kLidar}) {
    if (to_string(v) == name) {
      return v;
    }
  }
  throw std::invalid_argument("unknown variant '" + name + "' (raw|height|mer|lidar)");
}

ExperimentSpec ExperimentSpec::desk(ExperimentKind kind, RadarVariant variant,
                                    const fs::path& dataset, std::uint64_t seed) {
  ExperimentSpec s;
  s.kind = kind;
  s.variant = variant;
  s.dataset = dataset;
  s.seed = seed;
  s.model.base_width = 8;
  s.model.max_width = 32;
  s.model.stages = 4;
  s.train.learning_rate = 0.005;
  s.train.batch_size = 8;
  s.train.epochs = 30;
  s.train.seed = seed;
  // Relative residual 1e-6 pins every lidar anchor to ~1e-5 relative error;
  // the remaining iterations to 1e-8 only refine unobserved sky regions.
  s.densify.tol = 1e-6;
  return s;
}

void ExperimentSpec::validate() const {
  if (kind == ExperimentKind::kInference && variant == RadarVariant::kLidar) {
    throw std::invalid_argument("ExperimentSpec: the lidar arm exists only for supervision runs");
  }
  if (!(cap > 0.0)) {
    throw std::invalid_argument("ExperimentSpec: cap must be positive");
  }
  if (dataset.empty()) {
    throw std::invalid_argument("ExperimentSpec: dataset path is empty");
  }
  if (sweeps < 1) {
    throw std::invalid_argument("ExperimentSpec: need at least one radar sweep");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("ExperimentSpec: test_fraction must lie in (0, 1)");
  }
  if (!(pda_min >= 0.0 && pda_min <= 1.0)) {
    throw std::invalid_argument("ExperimentSpec: pda_min must lie in [0, 1]");
  }
  if (!(input_scale > 0.0)) {
    throw std::invalid_argument("ExperimentSpec: input_scale must be positive");
  }
  if (model.input_channels != 1) {
    throw std::invalid_argument("ExperimentSpec: both protocols use single-channel inputs");
  }
  if ((loss == LossKind::kOrdinal) != (model.head == HeadKind::kOrdinal)) {
    throw std::invalid_argument("ExperimentSpec: loss kind does not match the model head");
  }
  if (model.head == HeadKind::kOrdinal && model.bins != sid.bins()) {
    throw std::invalid_argument("ExperimentSpec: ordinal head bins differ from the discretisation");
  }
  model.validate();
  band.validate();
}

std::string spec_to_json(const ExperimentSpec& s) {
  const json j = {
      {"kind", to_string(s.kind)},
      {"variant", to_string(s.variant)},
      {"cap", s.cap},
      {"dataset", s.dataset.generic_string()},
      {"seed", s.seed},
      {"model", detail::to_json(s.model)},
      {"train", detail::to_json(s.train)},
      {"sid", detail::to_json(s.sid)},
      {"loss", s.loss == LossKind::kL1 ? "l1" : "ordinal"},
      {"sweeps", s.sweeps},
      {"band", {{"h_min", s.band.h_min}, {"h_max", s.band.h_max}, {"step", s.band.step}}},
      {"pda_min", s.pda_min},
      {"input_scale", s.input_scale},
      {"test_fraction", s.test_fraction},
      {"densify",
       {{"lambda_anchor", s.densify.lambda_anchor},
        {"tol", s.densify.tol},
        {"max_iter", s.densify.max_iter},
        {"min_depth", s.densify.min_depth}}},
      {"absrel", s.absrel == AbsRelConvention::kPrediction ? "prediction" : "target"},
  };
  return j.dump(2);
}

ExperimentSpec spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ExperimentSpec s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.cap = j.at("cap").get<double>();
    s.dataset = j.at("dataset").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.model = detail::model_config_from_json(j.at("model"));
    s.train = detail::train_config_from_json(j.at("train"));
    s.sid = detail::sid_config_from_json(j.at("sid"));
    const auto loss = j.at("loss").get<std::string>();
    if (loss != "l1" && loss != "ordinal") {
      throw std::invalid_argument("unknown loss '" + loss + "'");
    }
    s.loss = loss == "l1" ? LossKind::kL1 : LossKind::kOrdinal;
    s.sweeps = j.at("sweeps").get<int>();
    s.band.h_min = j.at("band").at("h_min").get<double>();
    s.band.h_max = j.at("band").at("h_max").get<double>();
    s.band.step = j.at("band").at("step").get<double>();
    s.pda_min = j.at("pda_min").get<double>();
    s.input_scale = j.at("input_scale").get<double>();
    s.test_fraction = j.at("test_fraction").get<double>();
    const auto& d = j.at("densify");
    s.densify.lambda_anchor = d.at("lambda_anchor").get<double>();
    s.densify.tol = d.at("tol").get<double>();
    s.densify.max_iter = d.at("max_iter").get<int>();
    s.densify.min_depth = d.at("min_depth").get<double>();
    const auto absrel = j.at("absrel").get<std::string>();
    if (absrel != "prediction" && absrel != "target") {
      throw std::invalid_argument("unknown absrel convention '" + absrel + "'");
    }
    s.absrel = absrel == "prediction" ? AbsRelConvention::kPrediction : AbsRelConvention::kTarget;
    s.validate();
    return s;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("bad experiment spec: ") + e.what());
  }
}

Split split_dataset(const Dataset& ds, double test_fraction) {
  Split split;
  const auto& frames = ds.frames();
  if (ds.sequence_count() >= 2) {
    const int n_test = std::clamp(static_cast<int>(std::ceil(test_fraction * ds.sequence_count() - 1e-9)), 1,
                                  ds.sequence_count() - 1);
    const int first_test = ds.sequence_count() - n_test;
    for (const auto& f : frames) {
      (f.sequence >= first_test ? split.test : split.train).push_back(&f);
    }
  } else {
    const auto n = static_cast<int>(frames.size());
    if (n < 2) {
      throw std::runtime_error("dataset needs at least two frames to split: " + ds.root().string());
    }
    const int n_test = std::clamp(static_cast<int>(std::ceil(test_fraction * n - 1e-9)), 1, n - 1);
    for (int i = 0; i < n; ++i) {
      (i >= n - n_test ? split.test : split.train).push_back(&frames[static_cast<std::size_t>(i)]);
    }
  }
  return split;
}

PointCloud accumulated_radar(const Dataset& ds, const RadarOnlyFrameView& view, int sweeps) {
  std::vector<RadarSweep> list;
  for (const FrameRef* h : ds.history(view.ref(), sweeps)) {
    const RadarOnlyFrameView hv = view.at(*h);
    RadarSweep s;
    s.cloud = hv.radar();
    s.sensor_to_global = hv.pose();
    s.timestamp = h->index;
    list.push_back(std::move(s));
  }
  return accumulate_sweeps(list, view.pose().inverse());
}

SparseDepthImage radar_depth(const Dataset& ds, const RadarOnlyFrameView& view,
                             const ExperimentSpec& spec) {
  const CameraIntrinsics k = view.intrinsics();
  switch (spec.variant) {
    case RadarVariant::kRaw:
      return project_to_depth(accumulated_radar(ds, view, spec.sweeps), k);
    case RadarVariant::kHeight: {
      const Se3Pose pose = view.pose();
      const PointCloud world = transform_points(pose, accumulated_radar(ds, view, spec.sweeps));
      return project_to_depth(transform_points(pose.inverse(), height_extend(world, spec.band)), k);
    }
    case RadarVariant::kMer:
      if (!view.has_mer()) {
        throw std::runtime_error("no " + std::string(files::kMer) + " in " + view.ref().dir.string());
      }
      return mer_threshold(view.mer(), spec.pda_min);
    case RadarVariant::kLidar:
      break;
  }
  throw std::invalid_argument("radar_depth: the lidar arm has no radar depth");
}

SparseDepthImage lidar_depth(const FrameReader& reader, const FrameRef& frame) {
  return project_to_depth(reader.lidar(frame), reader.intrinsics(frame));
}

DenseDepthImage densified_lidar(const FrameReader& reader, const FrameRef& frame,
                                const DensifyOptions& options) {
  return densify_depth(reader.image(frame), lidar_depth(reader, frame), options);
}

fs::path prediction_path(const FrameRef& frame) { return fs::path(frame.id + ".pfm"); }

namespace {

void say(const RunOptions& o, const std::string& msg) {
  if (o.progress) {
    o.progress(msg);
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  f << text;
  if (!f) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

EvalResult evaluate_predictions(const Dataset& ds, const FrameReader& reader, const fs::path& pred_dir,
                                const std::vector<const FrameRef*>& frames, double cap,
                                AbsRelConvention convention) {
  MetricsAccumulator pooled(cap, convention);
  EvalResult r;
  MetricsReport& mean = r.per_frame_mean;
  double sum_t = 0.0;
  double sum_t2 = 0.0;
  for (const FrameRef* f : frames) {
    const fs::path path = pred_dir / prediction_path(*f);
    if (!fs::exists(path)) {
      throw std::runtime_error("missing prediction for frame " + f->id + ": " + path.string());
    }
    DenseDepthImage pred;
    try {
      pred = DenseDepthImage(read_pfm(path));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string(e.what()) + " in " + path.string());
    }
    const SparseDepthImage target = lidar_depth(reader, *f);
    if (pred.width() != target.width() || pred.height() != target.height()) {
      throw std::runtime_error("prediction " + path.string() + " is " + std::to_string(pred.width()) + "x" +
                               std::to_string(pred.height()) + ", expected " + std::to_string(target.width()) +
                               "x" + std::to_string(target.height()));
    }
    pooled.add(pred, target);
    for (double t : target.grid().values()) {
      if (t > 0.0 && t <= cap) {
        sum_t += t;
        sum_t2 += t * t;
      }
    }
    MetricsAccumulator one(cap, convention);
    one.add(pred, target);
    if (one.count() == 0) {
      continue;
    }
    const MetricsReport m = one.report();
    mean.delta1 += m.delta1;
    mean.delta2 += m.delta2;
    mean.delta3 += m.delta3;
    mean.rmse += m.rmse;
    mean.absrel += m.absrel;
    mean.absrel_pred += m.absrel_pred;
    mean.absrel_target += m.absrel_target;
    mean.mae += m.mae;
    mean.valid_pixel_count += m.valid_pixel_count;
    ++r.frames;
  }
  if (pooled.count() == 0) {
    throw std::runtime_error("no lidar pixels within the " + fmt(cap) + " m cap in " + ds.root().string());
  }
  r.pooled = pooled.report();
  const double n = static_cast<double>(r.frames);
  for (double* m : {&mean.delta1, &mean.delta2, &mean.delta3, &mean.rmse, &mean.absrel, &mean.absrel_pred,
                    &mean.absrel_target, &mean.mae}) {
    *m /= n;
  }
  mean.cap = cap;
  const double cnt = static_cast<double>(pooled.count());
  const double mu = sum_t / cnt;
  r.baseline_constant_rmse = std::sqrt(std::max(0.0, sum_t2 / cnt - mu * mu));
  return r;
}

json metrics_json(const MetricsReport& m, const std::string& prefix) {
  return {{prefix + "delta1", m.delta1},
          {prefix + "delta2", m.delta2},
          {prefix + "delta3", m.delta3},
          {prefix + "rmse", m.rmse},
          {prefix + "absrel", m.absrel},
          {prefix + "absrel_pred", m.absrel_pred},
          {prefix + "absrel_target", m.absrel_target},
          {prefix + "mae", m.mae},
          {prefix + "valid_pixel_count", m.valid_pixel_count}};
}

json eval_json(const EvalResult& r) {
  json j = metrics_json(r.pooled, "");
  j.update(metrics_json(r.per_frame_mean, "per_frame_mean_"));
  j["cap"] = r.pooled.cap;
  j["frames"] = r.frames;
  j["baseline_constant_rmse"] = r.baseline_constant_rmse;
  return j;
}

std::vector<const FrameRef*> select_frames(const Dataset& ds, const std::vector<std::string>& ids) {
  std::vector<const FrameRef*> out;
  if (ids.empty()) {
    for (const auto& f : ds.frames()) {
      out.push_back(&f);
    }
    return out;
  }
  std::map<std::string, const FrameRef*> by_id;
  for (const auto& f : ds.frames()) {
    by_id[f.id] = &f;
  }
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::runtime_error("frame '" + id + "' not found in " + ds.root().string());
    }
    out.push_back(it->second);
  }
  return out;
}

/// Per-arm sample construction; everything else in a run is shared.
struct Protocol {
  std::function<TrainSample(const FrameRef&)> train_sample;
  std::function<FeatureMap(const FrameRef&)> test_input;
};

ExperimentResult run_protocol(const ExperimentSpec& spec_in, const fs::path& out_dir, const RunOptions& options,
                              const Dataset& ds, AccessLog& log, const Protocol& protocol) {
  ExperimentSpec spec = spec_in;
  spec.train.seed = spec.seed;
  const Split split = split_dataset(ds, spec.test_fraction);
  ExperimentResult result;
  result.train_frames = split.train.size();
  result.test_frames = split.test.size();

  log.set_phase("train");
  say(options, "preparing " + std::to_string(split.train.size()) + " training frames");
  std::vector<TrainSample> samples;
  for (const FrameRef* f : split.train) {
    TrainSample s = protocol.train_sample(*f);
    if (s.target.valid_count() > 0) {
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty()) {
    throw std::runtime_error("no training frame has a valid target pixel");
  }
  say(options, "training on " + std::to_string(samples.size()) + " frames");
  const FitResult fitted = fit(samples, spec.model, spec.train, spec.loss, spec.sid);
  result.epoch_loss = fitted.epoch_loss;

  log.set_phase("predict");
  fs::create_directories(out_dir);
  const fs::path pred_dir = out_dir / "predictions";
  const fs::path fig_dir = out_dir / "figures";
  std::string frame_list;
  for (const FrameRef* f : split.test) {
    const DenseDepthImage pred = predict_depth(fitted.model, protocol.test_input(*f), spec.sid);
    const fs::path rel = prediction_path(*f);
    fs::create_directories((pred_dir / rel).parent_path());
    write_pfm(pred_dir / rel, pred.grid());
    fs::path fig = fig_dir / rel;
    fig.replace_extension(".pgm");
    fs::create_directories(fig.parent_path());
    emit_depth_image(pred.grid(), fig, spec.cap);
    frame_list += f->id + "\n";
  }
  write_text(pred_dir / "frames.txt", frame_list);

  log.set_phase("eval");
  say(options, "evaluating " + std::to_string(split.test.size()) + " frames");
  const FrameReader reader(&log);
  result.eval = evaluate_predictions(ds, reader, pred_dir, split.test, spec.cap, spec.absrel);

  result.checkpoint_path = out_dir / "model.ckpt";
  save_checkpoint(result.checkpoint_path, fitted.model);

  std::string loss_log = "epoch,loss\n";
  for (std::size_t e = 0; e < fitted.epoch_loss.size(); ++e) {
    loss_log += std::to_string(e) + "," + fmt(fitted.epoch_loss[e]) + "\n";
  }
  write_text(out_dir / "loss_log.csv", loss_log);

  json report = eval_json(result.eval);
  report["kind"] = to_string(spec.kind);
  report["variant"] = to_string(spec.variant);
  report["seed"] = spec.seed;
  report["loss"] = spec.loss == LossKind::kL1 ? "l1" : "ordinal";
  report["software_version"] = version();
  report["train_frames"] = result.train_frames;
  report["train_samples"] = samples.size();
  report["test_frames"] = result.test_frames;
  report["epochs"] = fitted.epoch_loss.size();
  report["initial_loss"] = fitted.epoch_loss.front();
  report["final_loss"] = fitted.epoch_loss.back();
  result.report_path = out_dir / "report.json";
  write_text(result.report_path, report.dump(2) + "\n");

  json inputs = json::object();
  for (const auto& rel : ds.all_files()) {
    inputs[rel.generic_string()] = sha256_file(ds.root() / rel);
  }
  const json manifest = {
      {"spec", json::parse(spec_to_json(spec_in))},
      {"seed", spec.seed},
      {"software_version", version()},
      {"inputs", inputs},
      {"outputs",
       {{"report.json", sha256_file(result.report_path)}, {"model.ckpt", sha256_file(result.checkpoint_path)}}},
  };
  result.manifest_path = out_dir / "manifest.json";
  write_text(result.manifest_path, manifest.dump(2) + "\n");
  say(options, "wrote " + result.report_path.string());
  return result;
}

void check_kind(const ExperimentSpec& spec, ExperimentKind expected) {
  spec.validate();
  if (spec.kind != expected) {
    throw std::invalid_argument("spec is for a " + to_string(spec.kind) + " experiment");
  }
}

}  // namespace

EvalResult eval_cmd(const fs::path& pred_dir, const fs::path& dataset, double cap,
                    const std::vector<std::string>& frame_ids, AbsRelConvention convention) {
  if (!(cap > 0.0)) {
    throw std::invalid_argument("eval: cap must be positive");
  }
  const Dataset ds = Dataset::open(dataset);
  const FrameReader reader;
  return evaluate_predictions(ds, reader, pred_dir, select_frames(ds, frame_ids), cap, convention);
}

std::string eval_to_json(const EvalResult& r) { return eval_json(r).dump(2); }

ExperimentResult run_inference_experiment(const ExperimentSpec& spec, const fs::path& out_dir,
                                          const RunOptions& options) {
  check_kind(spec, ExperimentKind::kInference);
  const Dataset ds = Dataset::open(spec.dataset);
  AccessLog local_log;
  AccessLog& log = options.access_log != nullptr ? *options.access_log : local_log;
  const FrameReader reader(&log);
  Protocol p;
  p.test_input = [&](const FrameRef& f) {
    return FeatureMap::from_grid(radar_depth(ds, RadarOnlyFrameView(reader, f), spec).grid(), spec.input_scale);
  };
  p.train_sample = [&](const FrameRef& f) {
    return TrainSample{p.test_input(f), densified_lidar(reader, f, spec.densify).to_sparse()};
  };
  return run_protocol(spec, out_dir, options, ds, log, p);
}

ExperimentResult run_supervision_experiment(const ExperimentSpec& spec, const fs::path& out_dir,
                                            const RunOptions& options) {
  check_kind(spec, ExperimentKind::kSupervision);
  const Dataset ds = Dataset::open(spec.dataset);
  AccessLog local_log;
  AccessLog& log = options.access_log != nullptr ? *options.access_log : local_log;
  const FrameReader reader(&log);
  Protocol p;
  p.test_input = [&](const FrameRef& f) {
    return FeatureMap::from_grid(RadarOnlyFrameView(reader, f).image());
  };
  if (spec.variant == RadarVariant::kLidar) {
    p.train_sample = [&](const FrameRef& f) {
      return TrainSample{p.test_input(f), densified_lidar(reader, f, spec.densify).to_sparse()};
    };
  } else {
    // Radar arms see frames only through the lidar-free view.
    p.train_sample = [&](const FrameRef& f) {
      const RadarOnlyFrameView view(reader, f);
      return TrainSample{FeatureMap::from_grid(view.image()), radar_depth(ds, view, spec)};
    };
  }
  return run_protocol(spec, out_dir, options, ds, log, p);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const fs::path& out_dir,
                                const RunOptions& options) {
  return spec.kind == ExperimentKind::kInference ? run_inference_experiment(spec, out_dir, options)
                                                 : run_supervision_experiment(spec, out_dir, options);
}

ExperimentResult rerun_from_manifest(const fs::path& manifest, const fs::path& out_dir,
                                     const RunOptions& options) {
  json m;
  try {
    m = json::parse(read_text(manifest));
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (!m.contains("spec") || !m.contains("inputs")) {
    throw std::runtime_error("manifest " + manifest.string() + " lacks spec or inputs");
  }
  const ExperimentSpec spec = spec_from_json(m.at("spec").dump());
  const Dataset ds = Dataset::open(spec.dataset);
  std::set<std::string> seen;
  for (const auto& rel : ds.all_files()) {
    const std::string key = rel.generic_string();
    seen.insert(key);
    if (!m.at("inputs").contains(key)) {
      throw std::runtime_error("dataset file " + key + " is not in manifest " + manifest.string());
    }
    if (sha256_file(ds.root() / rel) != m.at("inputs").at(key).get<std::string>()) {
      throw std::runtime_error("dataset file " + key + " changed since manifest " + manifest.string());
    }
  }
  for (const auto& [key, _] : m.at("inputs").items()) {
    if (seen.count(key) == 0) {
      throw std::runtime_error("dataset file " + key + " from manifest " + manifest.string() + " is missing");
    }
  }
  if (m.value("software_version", std::string()) != version()) {
    say(options, "note: manifest was written by version " + m.value("software_version", std::string("?")));
  }
  return run_experiment(spec, out_dir, options);
}

}  // namespace radardepth

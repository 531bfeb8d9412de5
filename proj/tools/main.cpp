// radardepth: generate synthetic data, prepare radar inputs, densify lidar,
// train and evaluate the desk-scale depth models.

#include "radardepth/dataset.hpp"
#include "radardepth/densify.hpp"
#include "radardepth/experiment.hpp"
#include "radardepth/synthscene.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace radardepth;

namespace {

const FrameRef& find_frame(const Dataset& ds, const std::string& id) {
  for (const auto& f : ds.frames()) {
    if (f.id == id) {
      return f;
    }
  }
  throw std::runtime_error("frame '" + id + "' not found in " + ds.root().string());
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open " + p.string());
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) {
      out.push_back(line);
    }
  }
  return out;
}

void progress(const std::string& msg) { std::cerr << msg << "\n"; }

struct SynthArgs {
  fs::path out;
  int sequences = 10;
  int frames = 20;
  std::uint64_t seed = 7;
  bool no_mer = false;
};

struct PrepArgs {
  fs::path dataset;
  std::string frame;
  std::string variant = "raw";
  int sweeps = 5;
  double pda_min = 0.5;
  double h_min = 0.25;
  double h_max = 2.0;
  double h_step = 0.05;
  fs::path out;
  fs::path figure;
  double max_depth = 80.0;
};

struct DensifyArgs {
  fs::path dataset;
  std::string frame;
  double lambda = 100.0;
  double tol = 1e-8;
  fs::path out;
  fs::path figure;
  double max_depth = 80.0;
};

struct TrainArgs {
  std::string kind = "inference";
  std::string variant = "raw";
  fs::path dataset;
  fs::path out;
  std::uint64_t seed = 0;
  double cap = 80.0;
  int epochs = -1;
  int batch_size = -1;
  double lr = -1.0;
  int base_width = -1;
  int stages = -1;
  std::string loss = "l1";
  int sweeps = 5;
  double pda_min = 0.5;
  double test_fraction = 0.2;
  std::string absrel = "prediction";
};

struct EvalArgs {
  fs::path pred_dir;
  fs::path dataset;
  double cap = 80.0;
  fs::path frames_file;
  std::string absrel = "prediction";
  fs::path out;
};

struct ReportArgs {
  std::vector<fs::path> runs;
  fs::path rerun;
  fs::path out;
};

AbsRelConvention parse_absrel(const std::string& s) {
  if (s == "prediction") {
    return AbsRelConvention::kPrediction;
  }
  if (s == "target") {
    return AbsRelConvention::kTarget;
  }
  throw std::invalid_argument("unknown absrel convention '" + s + "' (prediction|target)");
}

int do_synth(const SynthArgs& a) {
  SuiteConfig cfg;
  cfg.sequences = a.sequences;
  cfg.frames_per_sequence = a.frames;
  cfg.seed = a.seed;
  cfg.emit_mer = !a.no_mer;
  gen_stock_suite(cfg, a.out);
  std::cout << "wrote " << a.sequences * a.frames << " frames to " << a.out.string() << "\n";
  return 0;
}

int do_prep(const PrepArgs& a) {
  ExperimentSpec spec;
  spec.dataset = a.dataset;
  spec.variant = parse_variant(a.variant);
  spec.sweeps = a.sweeps;
  spec.pda_min = a.pda_min;
  spec.band = HeightBand{a.h_min, a.h_max, a.h_step};
  const Dataset ds = Dataset::open(a.dataset);
  const FrameReader reader;
  const FrameRef& f = find_frame(ds, a.frame);
  const SparseDepthImage depth = radar_depth(ds, RadarOnlyFrameView(reader, f), spec);
  write_pfm(a.out, depth.grid());
  if (!a.figure.empty()) {
    emit_depth_image(depth.grid(), a.figure, a.max_depth);
  }
  std::cout << depth.valid_count() << " valid pixels\n";
  return 0;
}

int do_densify(const DensifyArgs& a) {
  const Dataset ds = Dataset::open(a.dataset);
  const FrameReader reader;
  DensifyOptions opt;
  opt.lambda_anchor = a.lambda;
  opt.tol = a.tol;
  const DenseDepthImage dense = densified_lidar(reader, find_frame(ds, a.frame), opt);
  write_pfm(a.out, dense.grid());
  if (!a.figure.empty()) {
    emit_depth_image(dense.grid(), a.figure, a.max_depth);
  }
  return 0;
}

int do_train(const TrainArgs& a) {
  ExperimentSpec spec = ExperimentSpec::desk(parse_kind(a.kind), parse_variant(a.variant), a.dataset, a.seed);
  spec.cap = a.cap;
  if (a.epochs > 0) {
    spec.train.epochs = a.epochs;
  }
  if (a.batch_size > 0) {
    spec.train.batch_size = a.batch_size;
  }
  if (a.lr > 0.0) {
    spec.train.learning_rate = a.lr;
  }
  if (a.base_width > 0) {
    spec.model.base_width = a.base_width;
  }
  if (a.stages > 0) {
    spec.model.stages = a.stages;
  }
  if (a.loss == "ordinal") {
    spec.loss = LossKind::kOrdinal;
    spec.model.head = HeadKind::kOrdinal;
    spec.model.bins = spec.sid.bins();
  } else if (a.loss != "l1") {
    throw std::invalid_argument("unknown loss '" + a.loss + "' (l1|ordinal)");
  }
  spec.sweeps = a.sweeps;
  spec.pda_min = a.pda_min;
  spec.test_fraction = a.test_fraction;
  spec.absrel = parse_absrel(a.absrel);
  RunOptions opt;
  opt.progress = progress;
  const ExperimentResult r = run_experiment(spec, a.out, opt);
  std::cout << read_file(r.report_path);
  return 0;
}

int do_eval(const EvalArgs& a) {
  std::vector<std::string> ids;
  fs::path frames_file = a.frames_file;
  if (frames_file.empty() && fs::exists(a.pred_dir / "frames.txt")) {
    frames_file = a.pred_dir / "frames.txt";
  }
  if (!frames_file.empty()) {
    ids = read_lines(frames_file);
  }
  const EvalResult r = eval_cmd(a.pred_dir, a.dataset, a.cap, ids, parse_absrel(a.absrel));
  const std::string text = eval_to_json(r) + "\n";
  if (!a.out.empty()) {
    std::ofstream(a.out, std::ios::binary) << text;
  }
  std::cout << text;
  return 0;
}

int do_report(const ReportArgs& a) {
  if (!a.rerun.empty()) {
    if (a.out.empty()) {
      throw std::invalid_argument("--rerun needs --out");
    }
    RunOptions opt;
    opt.progress = progress;
    const auto manifest = nlohmann::json::parse(read_file(a.rerun));
    const ExperimentResult r = rerun_from_manifest(a.rerun, a.out, opt);
    const auto& expected = manifest.at("outputs");
    bool same = true;
    for (const auto& [name, path] : {std::pair{"report.json", r.report_path}, {"model.ckpt", r.checkpoint_path}}) {
      const bool match = sha256_file(path) == expected.at(name).get<std::string>();
      std::cout << name << ": " << (match ? "identical" : "DIFFERS") << "\n";
      same = same && match;
    }
    return same ? 0 : 2;
  }
  if (a.runs.empty()) {
    throw std::invalid_argument("report needs --run DIR (repeatable) or --rerun MANIFEST");
  }
  std::printf("%-12s %-8s %5s %7s %7s %7s %8s %8s %8s\n", "kind", "variant", "cap", "d1", "d2", "d3", "rmse",
              "absrel", "base_rmse");
  for (const auto& run : a.runs) {
    const auto j = nlohmann::json::parse(read_file(run / "report.json"));
    std::printf("%-12s %-8s %5.0f %7.3f %7.3f %7.3f %8.3f %8.3f %8.3f\n", j.at("kind").get<std::string>().c_str(),
                j.at("variant").get<std::string>().c_str(), j.at("cap").get<double>(), j.at("delta1").get<double>(),
                j.at("delta2").get<double>(), j.at("delta3").get<double>(), j.at("rmse").get<double>(),
                j.at("absrel").get<double>(), j.at("baseline_constant_rmse").get<double>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar depth toolkit: synthetic data, radar preprocessing, training and evaluation"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate the stock synthetic suite");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--sequences", synth.sequences, "Number of sequences")->capture_default_str();
  c_synth->add_option("--frames", synth.frames, "Frames per sequence")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  c_synth->add_flag("--no-mer", synth.no_mer, "Skip the synthetic MER files");

  PrepArgs prep;
  auto* c_prep = app.add_subcommand("prep", "Build one frame's radar depth variant");
  c_prep->add_option("--dataset", prep.dataset)->required();
  c_prep->add_option("--frame", prep.frame, "Frame id, e.g. seq_00/frame_000004")->required();
  c_prep->add_option("--variant", prep.variant, "raw|height|mer")->capture_default_str();
  c_prep->add_option("--sweeps", prep.sweeps)->capture_default_str();
  c_prep->add_option("--pda-min", prep.pda_min)->capture_default_str();
  c_prep->add_option("--h-min", prep.h_min)->capture_default_str();
  c_prep->add_option("--h-max", prep.h_max)->capture_default_str();
  c_prep->add_option("--h-step", prep.h_step)->capture_default_str();
  c_prep->add_option("--out", prep.out, "Sparse depth PFM")->required();
  c_prep->add_option("--figure", prep.figure, "Optional 16-bit PGM visualisation");
  c_prep->add_option("--max-depth", prep.max_depth)->capture_default_str();

  DensifyArgs dens;
  auto* c_dens = app.add_subcommand("densify", "Densify one frame's lidar with the image");
  c_dens->add_option("--dataset", dens.dataset)->required();
  c_dens->add_option("--frame", dens.frame)->required();
  c_dens->add_option("--lambda", dens.lambda)->capture_default_str();
  c_dens->add_option("--tol", dens.tol)->capture_default_str();
  c_dens->add_option("--out", dens.out, "Dense depth PFM")->required();
  c_dens->add_option("--figure", dens.figure);
  c_dens->add_option("--max-depth", dens.max_depth)->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Run an inference or supervision experiment");
  c_train->add_option("--kind", train.kind, "inference|supervision")->capture_default_str();
  c_train->add_option("--variant", train.variant, "raw|height|mer|lidar")->capture_default_str();
  c_train->add_option("--dataset", train.dataset)->required();
  c_train->add_option("--out", train.out, "Run directory")->required();
  c_train->add_option("--seed", train.seed)->required();
  c_train->add_option("--cap", train.cap)->capture_default_str();
  c_train->add_option("--epochs", train.epochs);
  c_train->add_option("--batch-size", train.batch_size);
  c_train->add_option("--lr", train.lr);
  c_train->add_option("--base-width", train.base_width);
  c_train->add_option("--stages", train.stages);
  c_train->add_option("--loss", train.loss, "l1|ordinal")->capture_default_str();
  c_train->add_option("--sweeps", train.sweeps)->capture_default_str();
  c_train->add_option("--pda-min", train.pda_min)->capture_default_str();
  c_train->add_option("--test-fraction", train.test_fraction)->capture_default_str();
  c_train->add_option("--absrel", train.absrel, "prediction|target")->capture_default_str();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate prediction PFMs against sparse lidar");
  c_eval->add_option("--pred-dir", ev.pred_dir)->required();
  c_eval->add_option("--dataset", ev.dataset)->required();
  c_eval->add_option("--cap", ev.cap)->capture_default_str();
  c_eval->add_option("--frames-file", ev.frames_file, "Frame ids to evaluate (default: <pred-dir>/frames.txt)");
  c_eval->add_option("--absrel", ev.absrel)->capture_default_str();
  c_eval->add_option("--out", ev.out, "Also write the JSON here");

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Tabulate run reports or re-run a manifest");
  c_rep->add_option("--run", rep.runs, "Run directory (repeatable)");
  c_rep->add_option("--rerun", rep.rerun, "manifest.json to reproduce");
  c_rep->add_option("--out", rep.out, "Output directory for --rerun");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_synth) {
      return do_synth(synth);
    }
    if (*c_prep) {
      return do_prep(prep);
    }
    if (*c_dens) {
      return do_densify(dens);
    }
    if (*c_train) {
      return do_train(train);
    }
    if (*c_eval) {
      return do_eval(ev);
    }
    if (*c_rep) {
      return do_report(rep);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

#include "radardepth/tinydepth.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace radardepth {

FeatureMap FeatureMap::from_grid(const Grid& grid, double scale) {
  FeatureMap out(1, grid.height(), grid.width());
  const auto v = grid.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.data[i] = v[i] * scale;
  }
  return out;
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  std::size_t n = 1;
  for (int d : shape) {
    n *= static_cast<std::size_t>(d);
  }
  t.shape = std::move(shape);
  t.values.assign(n, 0.0);
  return t;
}

TensorMap zeros_like(const TensorMap& params) {
  TensorMap out;
  for (const auto& [name, t] : params) {
    out.emplace(name, Tensor::zeros(t.shape));
  }
  return out;
}

int ModelConfig::width_at(int stage) const {
  int w = base_width;
  for (int s = 1; s < stage; ++s) {
    w *= 2;
  }
  return std::min(w, max_width);
}

void ModelConfig::validate() const {
  if (input_channels < 1 || base_width < 1 || max_width < base_width || stages < 1) {
    throw std::invalid_argument("ModelConfig: channel counts and stage count must be positive");
  }
  if (head == HeadKind::kOrdinal && bins < 2) {
    throw std::invalid_argument("ModelConfig: ordinal head needs at least 2 bins");
  }
}

double TrainConfig::lr_at(long iter, long max_iter) const {
  if (max_iter <= 0 || iter >= max_iter) {
    return 0.0;
  }
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iter);
  return learning_rate * std::pow(frac, poly_power);
}

class ForwardCache {
 public:
  FeatureMap input;                 // data channels plus the optional row plane
  std::vector<FeatureMap> enc_pre;  // stage s at index s-1, before ReLU
  std::vector<FeatureMap> enc_out;
  std::vector<FeatureMap> dec_up;   // decoder level l at index l-1
  std::vector<FeatureMap> dec_pre;  // conv + skip, before ReLU
  std::vector<FeatureMap> dec_out;
  FeatureMap head_up;
  FeatureMap logits;
};

namespace {

constexpr int kKernel = 3;

std::string enc_name(int s) { return "enc" + std::to_string(s); }
std::string dec_name(int l) { return "dec" + std::to_string(l); }

int conv_out_size(int in, int stride) { return (in - 1) / stride + 1; }

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// (cin·9) × (oh·ow) patch matrix of a zero-padded 3×3 convolution.
RowMatrix im2col(const FeatureMap& in, int stride, int oh, int ow) {
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(in.channels) * kKernel * kKernel,
                                   static_cast<Eigen::Index>(oh) * ow);
  for (int ci = 0; ci < in.channels; ++ci) {
    const double* iplane = in.plane(ci);
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        double* row = cols.row((ci * kKernel + ky) * kKernel + kx).data();
        const int x_lo = kx == 0 ? 1 : 0;
        const int x_hi = std::min(ow - 1, (in.width - kx) / stride);
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride + ky - 1;
          if (iy < 0 || iy >= in.height) {
            continue;
          }
          const double* irow = iplane + static_cast<std::size_t>(iy) * in.width + (kx - 1);
          double* orow = row + static_cast<std::size_t>(y) * ow;
          for (int x = x_lo; x <= x_hi; ++x) {
            orow[x] = irow[x * stride];
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters patch gradients back onto the input.
void col2im_add(const RowMatrix& cols, int stride, int oh, int ow, FeatureMap& g_in) {
  for (int ci = 0; ci < g_in.channels; ++ci) {
    double* gplane = g_in.plane(ci);
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const double* row = cols.row((ci * kKernel + ky) * kKernel + kx).data();
        const int x_lo = kx == 0 ? 1 : 0;
        const int x_hi = std::min(ow - 1, (g_in.width - kx) / stride);
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride + ky - 1;
          if (iy < 0 || iy >= g_in.height) {
            continue;
          }
          double* grow = gplane + static_cast<std::size_t>(iy) * g_in.width + (kx - 1);
          const double* crow = row + static_cast<std::size_t>(y) * ow;
          for (int x = x_lo; x <= x_hi; ++x) {
            grow[x * stride] += crow[x];
          }
        }
      }
    }
  }
}

Eigen::Map<const RowMatrix> weight_matrix(const Tensor& w) {
  return {w.values.data(), w.shape[0], static_cast<Eigen::Index>(w.shape[1]) * kKernel * kKernel};
}

FeatureMap conv3x3_forward(const FeatureMap& in, const Tensor& w, const Tensor& b, int stride) {
  const int cout = w.shape[0];
  const int oh = conv_out_size(in.height, stride);
  const int ow = conv_out_size(in.width, stride);
  const Eigen::Index pixels = static_cast<Eigen::Index>(oh) * ow;
  FeatureMap out(cout, oh, ow);
  Eigen::Map<RowMatrix> o(out.data.data(), cout, pixels);
  o.noalias() = weight_matrix(w) * im2col(in, stride, oh, ow);
  for (int co = 0; co < cout; ++co) {
    o.row(co).array() += b.values[static_cast<std::size_t>(co)];
  }
  return out;
}

/// Accumulates into gw, gb and (when non-null) g_in.
void conv3x3_backward(const FeatureMap& in, const Tensor& w, const FeatureMap& g_out, int stride,
                      FeatureMap* g_in, Tensor& gw, Tensor& gb) {
  const int cout = w.shape[0];
  const int oh = g_out.height;
  const int ow = g_out.width;
  const Eigen::Index pixels = static_cast<Eigen::Index>(oh) * ow;
  const Eigen::Map<const RowMatrix> g(g_out.data.data(), cout, pixels);
  for (int co = 0; co < cout; ++co) {
    gb.values[static_cast<std::size_t>(co)] += g.row(co).sum();
  }
  const RowMatrix cols = im2col(in, stride, oh, ow);
  Eigen::Map<RowMatrix> gwm(gw.values.data(), cout, cols.rows());
  gwm.noalias() += g * cols.transpose();
  if (g_in != nullptr) {
    const RowMatrix gcols = weight_matrix(w).transpose() * g;
    col2im_add(gcols, stride, oh, ow, *g_in);
  }
}

/// Half-pixel-centre bilinear sampling positions along one axis.
struct AxisInterp {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

AxisInterp make_axis(int in, int out) {
  AxisInterp a;
  a.lo.resize(static_cast<std::size_t>(out));
  a.hi.resize(static_cast<std::size_t>(out));
  a.frac.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int d = 0; d < out; ++d) {
    const double src = std::max(0.0, (d + 0.5) * scale - 0.5);
    const int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    a.lo[static_cast<std::size_t>(d)] = i0;
    a.hi[static_cast<std::size_t>(d)] = std::min(i0 + 1, in - 1);
    a.frac[static_cast<std::size_t>(d)] = std::min(src - i0, 1.0);
  }
  return a;
}

FeatureMap upsample_forward(const FeatureMap& in, int oh, int ow) {
  const AxisInterp ay = make_axis(in.height, oh);
  const AxisInterp ax = make_axis(in.width, ow);
  FeatureMap out(in.channels, oh, ow);
  for (int c = 0; c < in.channels; ++c) {
    const double* ip = in.plane(c);
    double* op = out.plane(c);
    for (int y = 0; y < oh; ++y) {
      const double fy = ay.frac[static_cast<std::size_t>(y)];
      const double* r0 = ip + static_cast<std::size_t>(ay.lo[static_cast<std::size_t>(y)]) * in.width;
      const double* r1 = ip + static_cast<std::size_t>(ay.hi[static_cast<std::size_t>(y)]) * in.width;
      for (int x = 0; x < ow; ++x) {
        const auto xs = static_cast<std::size_t>(x);
        const double fx = ax.frac[xs];
        const int x0 = ax.lo[xs];
        const int x1 = ax.hi[xs];
        const double top = (1.0 - fx) * r0[x0] + fx * r0[x1];
        const double bottom = (1.0 - fx) * r1[x0] + fx * r1[x1];
        op[static_cast<std::size_t>(y) * ow + xs] = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

/// Adjoint of upsample_forward: scatters output gradients back to the source grid.
void upsample_backward(const FeatureMap& g_out, FeatureMap& g_in) {
  const AxisInterp ay = make_axis(g_in.height, g_out.height);
  const AxisInterp ax = make_axis(g_in.width, g_out.width);
  for (int c = 0; c < g_out.channels; ++c) {
    const double* gp = g_out.plane(c);
    double* ip = g_in.plane(c);
    for (int y = 0; y < g_out.height; ++y) {
      const double fy = ay.frac[static_cast<std::size_t>(y)];
      double* r0 = ip + static_cast<std::size_t>(ay.lo[static_cast<std::size_t>(y)]) * g_in.width;
      double* r1 = ip + static_cast<std::size_t>(ay.hi[static_cast<std::size_t>(y)]) * g_in.width;
      for (int x = 0; x < g_out.width; ++x) {
        const auto xs = static_cast<std::size_t>(x);
        const double g = gp[static_cast<std::size_t>(y) * g_out.width + xs];
        const double fx = ax.frac[xs];
        const int x0 = ax.lo[xs];
        const int x1 = ax.hi[xs];
        r0[x0] += (1.0 - fy) * (1.0 - fx) * g;
        r0[x1] += (1.0 - fy) * fx * g;
        r1[x0] += fy * (1.0 - fx) * g;
        r1[x1] += fy * fx * g;
      }
    }
  }
}

FeatureMap relu(const FeatureMap& x) {
  FeatureMap out = x;
  for (double& v : out.data) {
    v = v > 0.0 ? v : 0.0;
  }
  return out;
}

void relu_backward_inplace(const FeatureMap& pre, FeatureMap& g) {
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!(pre.data[i] > 0.0)) {
      g.data[i] = 0.0;
    }
  }
}

void add_inplace(FeatureMap& a, const FeatureMap& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] += b.data[i];
  }
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void add_conv_params(TensorMap& params, const std::string& name, int cout, int cin) {
  params.emplace(name + ".weight", Tensor::zeros({cout, cin, kKernel, kKernel}));
  params.emplace(name + ".bias", Tensor::zeros({cout}));
}

TensorMap make_zero_params(const ModelConfig& cfg) {
  cfg.validate();
  TensorMap p;
  const int in_ch = cfg.input_channels + (cfg.row_channel ? 1 : 0);
  for (int s = 1; s <= cfg.stages; ++s) {
    add_conv_params(p, enc_name(s), cfg.width_at(s), s == 1 ? in_ch : cfg.width_at(s - 1));
  }
  for (int l = 1; l < cfg.stages; ++l) {
    add_conv_params(p, dec_name(l), cfg.width_at(l), cfg.width_at(l + 1));
  }
  add_conv_params(p, "head", cfg.output_channels(), cfg.width_at(1));
  return p;
}

const Tensor& param(const TensorMap& p, const std::string& name) { return p.at(name); }

}  // namespace

FeatureMap upsample_bilinear(const FeatureMap& in, int out_h, int out_w) {
  return upsample_forward(in, out_h, out_w);
}

void upsample_bilinear_adjoint(const FeatureMap& g_out, FeatureMap& g_in) {
  if (g_out.channels != g_in.channels)
    throw std::invalid_argument("upsample_bilinear_adjoint: channel count mismatch");
  upsample_backward(g_out, g_in);
}

TinyDepthNet::TinyDepthNet(ModelConfig cfg, std::uint64_t seed)
    : cfg_(cfg), params_(make_zero_params(cfg)) {
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : params_) {
    if (t.shape.size() != 4) {
      continue;
    }
    const int fan_in = t.shape[1] * t.shape[2] * t.shape[3];
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : t.values) {
      v = dist(rng);
    }
  }
}

TinyDepthNet TinyDepthNet::zeros(ModelConfig cfg) { return TinyDepthNet(cfg, make_zero_params(cfg)); }

TinyDepthNet::TinyDepthNet(ModelConfig cfg, TensorMap params) : cfg_(cfg), params_(std::move(params)) {
  const TensorMap expected = make_zero_params(cfg_);
  if (expected.size() != params_.size()) {
    throw std::invalid_argument("TinyDepthNet: parameter set does not match the config");
  }
  for (const auto& [name, t] : expected) {
    const auto it = params_.find(name);
    if (it == params_.end() || it->second.shape != t.shape ||
        it->second.values.size() != t.values.size()) {
      throw std::invalid_argument("TinyDepthNet: parameter '" + name + "' missing or misshapen");
    }
  }
}

TinyDepthNet::Output TinyDepthNet::forward(const FeatureMap& input) const {
  if (input.channels != cfg_.input_channels) {
    throw std::invalid_argument("TinyDepthNet::forward: expected " +
                                std::to_string(cfg_.input_channels) + " input channels, got " +
                                std::to_string(input.channels));
  }
  if (input.height < 1 || input.width < 1) {
    throw std::invalid_argument("TinyDepthNet::forward: empty input");
  }
  auto cache = std::make_shared<ForwardCache>();
  const int h = input.height;
  const int w = input.width;

  if (cfg_.row_channel) {
    cache->input = FeatureMap(input.channels + 1, h, w);
    std::copy(input.data.begin(), input.data.end(), cache->input.data.begin());
    double* row_plane = cache->input.plane(input.channels);
    for (int y = 0; y < h; ++y) {
      const double r = h > 1 ? 2.0 * y / (h - 1) - 1.0 : 0.0;
      std::fill(row_plane + static_cast<std::size_t>(y) * w, row_plane + static_cast<std::size_t>(y + 1) * w, r);
    }
  } else {
    cache->input = input;
  }

  const int stages = cfg_.stages;
  const FeatureMap* x = &cache->input;
  for (int s = 1; s <= stages; ++s) {
    cache->enc_pre.push_back(conv3x3_forward(*x, param(params_, enc_name(s) + ".weight"),
                                             param(params_, enc_name(s) + ".bias"), 2));
    cache->enc_out.push_back(relu(cache->enc_pre.back()));
    x = &cache->enc_out.back();
  }

  cache->dec_up.resize(static_cast<std::size_t>(stages - 1));
  cache->dec_pre.resize(static_cast<std::size_t>(stages - 1));
  cache->dec_out.resize(static_cast<std::size_t>(stages - 1));
  const FeatureMap* y = &cache->enc_out.back();
  for (int l = stages - 1; l >= 1; --l) {
    const auto li = static_cast<std::size_t>(l - 1);
    const FeatureMap& skip = cache->enc_out[li];
    cache->dec_up[li] = upsample_forward(*y, skip.height, skip.width);
    cache->dec_pre[li] = conv3x3_forward(cache->dec_up[li], param(params_, dec_name(l) + ".weight"),
                                         param(params_, dec_name(l) + ".bias"), 1);
    add_inplace(cache->dec_pre[li], skip);
    cache->dec_out[li] = relu(cache->dec_pre[li]);
    y = &cache->dec_out[li];
  }

  cache->head_up = upsample_forward(*y, h, w);
  cache->logits = conv3x3_forward(cache->head_up, param(params_, "head.weight"),
                                  param(params_, "head.bias"), 1);

  Output out;
  if (cfg_.head == HeadKind::kRegression) {
    Grid depth(w, h);
    for (std::size_t i = 0; i < depth.size(); ++i) {
      depth[i] = softplus(cache->logits.data[i]) + kMinPredictedDepth;
    }
    out.depth = DenseDepthImage(std::move(depth));
  } else {
    std::vector<double> p(cache->logits.data.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = sigmoid(cache->logits.data[i]);
    }
    out.probs = ProbabilityVolume(cfg_.bins, w, h, std::move(p));
  }
  out.cache = std::move(cache);
  return out;
}

TensorMap TinyDepthNet::backward(const ForwardCache* cache, std::span<const double> upstream,
                                 double weight_decay) const {
  if (cache == nullptr) {
    throw std::logic_error("TinyDepthNet::backward: no forward cache");
  }
  if (upstream.size() != cache->logits.data.size()) {
    throw std::invalid_argument("TinyDepthNet::backward: upstream gradient has the wrong size");
  }
  TensorMap grads = zeros_like(params_);
  auto grad = [&](const std::string& name) -> Tensor& { return grads.at(name); };

  FeatureMap g_logits(cache->logits.channels, cache->logits.height, cache->logits.width);
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    const double s = sigmoid(cache->logits.data[i]);
    if (cfg_.head == HeadKind::kRegression) {
      g_logits.data[i] = upstream[i] * s;
    } else {
      // Clamped probabilities have zero local derivative.
      const bool inside = s > ProbabilityVolume::kEpsilon && s < 1.0 - ProbabilityVolume::kEpsilon;
      g_logits.data[i] = inside ? upstream[i] * s * (1.0 - s) : 0.0;
    }
  }

  const int stages = cfg_.stages;
  FeatureMap g_head_up(cache->head_up.channels, cache->head_up.height, cache->head_up.width);
  conv3x3_backward(cache->head_up, param(params_, "head.weight"), g_logits, 1, &g_head_up,
                   grad("head.weight"), grad("head.bias"));

  // Gradients w.r.t. encoder outputs; skip connections and the next stage both feed them.
  std::vector<FeatureMap> g_enc;
  for (const auto& e : cache->enc_out) {
    g_enc.emplace_back(e.channels, e.height, e.width);
  }

  // g_y is the gradient of the map that was upsampled into the current level.
  FeatureMap g_y;
  if (stages == 1) {
    upsample_backward(g_head_up, g_enc[0]);
  } else {
    g_y = FeatureMap(cache->dec_out[0].channels, cache->dec_out[0].height, cache->dec_out[0].width);
    upsample_backward(g_head_up, g_y);
    for (int l = 1; l <= stages - 1; ++l) {
      const auto li = static_cast<std::size_t>(l - 1);
      relu_backward_inplace(cache->dec_pre[li], g_y);
      add_inplace(g_enc[li], g_y);
      const FeatureMap& up = cache->dec_up[li];
      FeatureMap g_up(up.channels, up.height, up.width);
      conv3x3_backward(up, param(params_, dec_name(l) + ".weight"), g_y, 1, &g_up,
                       grad(dec_name(l) + ".weight"), grad(dec_name(l) + ".bias"));
      if (l + 1 <= stages - 1) {
        const auto& next = cache->dec_out[li + 1];
        g_y = FeatureMap(next.channels, next.height, next.width);
        upsample_backward(g_up, g_y);
      } else {
        upsample_backward(g_up, g_enc[static_cast<std::size_t>(stages - 1)]);
      }
    }
  }

  for (int s = stages; s >= 1; --s) {
    const auto si = static_cast<std::size_t>(s - 1);
    FeatureMap& g = g_enc[si];
    relu_backward_inplace(cache->enc_pre[si], g);
    const FeatureMap& in = s == 1 ? cache->input : cache->enc_out[si - 1];
    FeatureMap* g_in = s == 1 ? nullptr : &g_enc[si - 1];
    conv3x3_backward(in, param(params_, enc_name(s) + ".weight"), g, 2, g_in,
                     grad(enc_name(s) + ".weight"), grad(enc_name(s) + ".bias"));
  }

  if (weight_decay != 0.0) {
    for (auto& [name, t] : grads) {
      const auto& w = params_.at(name).values;
      for (std::size_t i = 0; i < t.values.size(); ++i) {
        t.values[i] += weight_decay * w[i];
      }
    }
  }
  return grads;
}

void sgd_step(TensorMap& params, const TensorMap& grads, TensorMap& velocity,
              const TrainConfig& cfg, long iter, long max_iter) {
  for (const auto& [name, g] : grads) {
    const auto it = params.find(name);
    if (it == params.end() || it->second.values.size() != g.values.size()) {
      throw std::invalid_argument("sgd_step: gradient '" + name + "' does not match a parameter");
    }
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      if (!std::isfinite(g.values[i])) {
        throw NonFiniteGradient("sgd_step: non-finite gradient in '" + name + "' at element " +
                                std::to_string(i) + " (iteration " + std::to_string(iter) + ")");
      }
    }
  }
  if (velocity.empty()) {
    velocity = zeros_like(params);
  }
  const double lr = cfg.lr_at(iter, max_iter);
  for (const auto& [name, g] : grads) {
    auto& w = params.at(name).values;
    auto& v = velocity.at(name).values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = cfg.momentum * v[i] + g.values[i];
      w[i] -= lr * v[i];
    }
  }
}

TrainingDiverged::TrainingDiverged(int epoch_, long iter_, double loss)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch_) + ", iteration " +
                         std::to_string(iter_) + " (loss " + std::to_string(loss) + ")"),
      epoch(epoch_),
      iter(iter_) {}

namespace {

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) {
    return *mid;
  }
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

void init_head_from_targets(TinyDepthNet& model, const std::vector<TrainSample>& data,
                            const std::vector<OrdinalLabelMap>& labels) {
  auto& bias = model.parameters().at("head.bias").values;
  if (model.config().head == HeadKind::kRegression) {
    std::vector<double> targets;
    for (const auto& s : data) {
      for (double d : s.target.grid().values()) {
        if (d > 0.0) {
          targets.push_back(d);
        }
      }
    }
    const double y = std::max(median_of(std::move(targets)) - kMinPredictedDepth, 1e-6);
    bias[0] = y > 30.0 ? y : std::log(std::expm1(y));  // softplus⁻¹
    return;
  }
  const int k_bins = model.config().bins;
  std::vector<double> exceed(static_cast<std::size_t>(k_bins), 0.0);
  double count = 0.0;
  for (const auto& lm : labels) {
    for (int v = 0; v < lm.height(); ++v) {
      for (int u = 0; u < lm.width(); ++u) {
        if (!lm.valid(u, v)) {
          continue;
        }
        count += 1.0;
        for (int k = 0; k < lm.label(u, v); ++k) {
          exceed[static_cast<std::size_t>(k)] += 1.0;
        }
      }
    }
  }
  for (int k = 0; k < k_bins; ++k) {
    const double p = std::clamp(exceed[static_cast<std::size_t>(k)] / count, 0.01, 0.99);
    bias[static_cast<std::size_t>(k)] = std::log(p / (1.0 - p));
  }
}

}  // namespace

FitResult fit(const std::vector<TrainSample>& data, const ModelConfig& model_cfg,
              const TrainConfig& train_cfg, LossKind loss, const SidConfig& sid) {
  if (data.empty()) {
    throw std::invalid_argument("fit: empty dataset");
  }
  if (train_cfg.batch_size < 1 || train_cfg.epochs < 1) {
    throw std::invalid_argument("fit: batch size and epochs must be positive");
  }
  const bool ordinal = loss == LossKind::kOrdinal;
  if (ordinal != (model_cfg.head == HeadKind::kOrdinal)) {
    throw std::invalid_argument("fit: loss kind does not match the model head");
  }
  if (ordinal && model_cfg.bins != sid.bins()) {
    throw std::invalid_argument("fit: ordinal head bin count differs from the discretisation");
  }

  std::vector<OrdinalLabelMap> labels;
  if (ordinal) {
    for (const auto& s : data) {
      labels.push_back(encode_depth_map(s.target, sid));
    }
  }

  FitResult result{TinyDepthNet(model_cfg, train_cfg.seed), {}, {}};
  TinyDepthNet& model = result.model;
  if (train_cfg.init_head_from_targets) {
    init_head_from_targets(model, data, labels);
  }

  const std::size_t n = data.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(train_cfg.batch_size), n);
  const long iters_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long max_iter = iters_per_epoch * train_cfg.epochs;

  std::mt19937_64 shuffle_rng(train_cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  TensorMap velocity = zeros_like(model.parameters());

  long iter = 0;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(start + batch, n);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      TensorMap grads = zeros_like(model.parameters());
      double batch_loss = 0.0;
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t idx = order[j];
        // Inputs were validated up front, so a rejected forward pass after an
        // update means the weights blew up.
        TinyDepthNet::Output out;
        try {
          out = model.forward(data[idx].input);
        } catch (const std::invalid_argument&) {
          if (iter == 0) {
            throw;
          }
          throw TrainingDiverged(epoch, iter, std::numeric_limits<double>::infinity());
        }
        LossResult lr = ordinal ? ordinal_loss(*out.probs, labels[idx])
                                : l1_loss(*out.depth, data[idx].target);
        batch_loss += lr.value * inv_b;
        for (double& g : lr.gradient) {
          g *= inv_b;
        }
        const TensorMap g = model.backward(out.cache.get(), lr.gradient, 0.0);
        for (auto& [name, t] : grads) {
          const auto& src = g.at(name).values;
          for (std::size_t i = 0; i < t.values.size(); ++i) {
            t.values[i] += src[i];
          }
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged(epoch, iter, batch_loss);
      }
      for (auto& [name, t] : grads) {
        const auto& w = model.parameters().at(name).values;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
          t.values[i] += train_cfg.weight_decay * w[i];
        }
      }
      try {
        sgd_step(model.parameters(), grads, velocity, train_cfg, iter, max_iter);
      } catch (const NonFiniteGradient&) {
        throw TrainingDiverged(epoch, iter, batch_loss);
      }
      result.iteration_loss.push_back(batch_loss);
      epoch_sum += batch_loss;
      ++iter;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(iters_per_epoch));
  }
  return result;
}

DenseDepthImage predict_depth(const TinyDepthNet& model, const FeatureMap& input, const SidConfig& sid) {
  const auto out = model.forward(input);
  if (out.depth) {
    return *out.depth;
  }
  return decode_label_map(probs_to_labels(*out.probs), sid);
}

}  // namespace radardepth

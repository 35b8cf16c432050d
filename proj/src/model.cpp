#include "hakan/model.hpp"

#include <cmath>
#include <random>

namespace hakan {

std::size_t ModelConfig::num_patches() const {
  if (patch_len > lookback || stride == 0) return 0;
  return (lookback - patch_len) / stride + 2;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(lookback, "model.lookback");
  positive(horizon, "model.horizon");
  positive(channels, "model.channels");
  positive(patch_len, "model.patch_len");
  positive(stride, "model.stride");
  positive(d_model, "model.d_model");
  positive(bottleneck, "model.bottleneck");
  if (patch_len > lookback) {
    throw ConfigError("model.patch_len (" + std::to_string(patch_len) + ") exceeds model.lookback (" +
                      std::to_string(lookback) + ")");
  }
  if (!(revin_eps > 0.0)) throw ConfigError("model.revin_eps must be positive");
  if (!(init_scale >= 0.0)) throw ConfigError("model.init_scale must be non-negative");
  if (mode == LayerMode::kan) PolyBasis check(basis);
}

bool operator==(const BasisParams& a, const BasisParams& b) {
  return a.kind == b.kind && a.a == b.a && a.b == b.b && a.n == b.n && a.degree == b.degree;
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.lookback == b.lookback && a.horizon == b.horizon && a.channels == b.channels &&
         a.patch_len == b.patch_len && a.stride == b.stride && a.d_model == b.d_model && a.blocks == b.blocks &&
         a.bottleneck == b.bottleneck && a.basis == b.basis && a.mode == b.mode &&
         a.intra_enabled == b.intra_enabled && a.inter_enabled == b.inter_enabled && a.seed == b.seed &&
         a.revin_eps == b.revin_eps && a.init_scale == b.init_scale;
}

// ---- channel independence and RevIN ----------------------------------------

std::vector<Vector> split_channels(const RowMatrix& x) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) out.emplace_back(x.col(c));
  return out;
}

RowMatrix combine_channels(const std::vector<Vector>& series) {
  if (series.empty()) return RowMatrix(0, 0);
  RowMatrix out(series.front().size(), static_cast<Eigen::Index>(series.size()));
  for (std::size_t c = 0; c < series.size(); ++c) {
    if (series[c].size() != out.rows()) throw DimensionError("combine_channels: ragged channel lengths");
    out.col(static_cast<Eigen::Index>(c)) = series[c];
  }
  return out;
}

std::pair<Vector, RevInState> revin_normalize(const Vector& x, double eps) {
  if (x.size() == 0) throw DimensionError("revin_normalize: empty series");
  RevInState state;
  state.eps = eps;
  state.mean = x.mean();
  state.std = std::sqrt((x.array() - state.mean).square().mean());
  Vector out = (x.array() - state.mean) / (state.std + eps);
  return {std::move(out), state};
}

Vector revin_denormalize(const Vector& pred, const RevInState& state) {
  return (pred.array() * (state.std + state.eps) + state.mean).matrix();
}

// ---- patching and embedding ------------------------------------------------

RowMatrix make_patches(const Vector& x, std::size_t patch_len, std::size_t stride) {
  const auto len = static_cast<std::size_t>(x.size());
  if (patch_len == 0 || stride == 0) throw ConfigError("patch length and stride must be positive");
  if (patch_len > len) {
    throw ConfigError("patch length " + std::to_string(patch_len) + " exceeds series length " +
                      std::to_string(len));
  }
  const std::size_t n = (len - patch_len) / stride + 2;
  RowMatrix patches(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(patch_len));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t t = 0; t < patch_len; ++t) {
      const std::size_t idx = std::min(j * stride + t, len - 1);
      patches(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = x(static_cast<Eigen::Index>(idx));
    }
  }
  return patches;
}

Tensor embed(const Tensor& patches, const Tensor& w_p, const Tensor& w_pos) {
  return add_tiled(matmul(patches, w_p), w_pos);
}

Tensor block_forward(const Tensor& x, const HaKanBlock& block, std::size_t batch) {
  const Tensor mixed = block.intra ? block.intra->forward(x) : x;
  Tensor across = batch_transpose(mixed, batch);
  if (block.inter) across = block.inter->forward(across);
  return add(batch_transpose(across, batch), x);
}

// ---- model -----------------------------------------------------------------

namespace {

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

std::string layer_key(std::size_t block, const char* which, const KanLayer& layer) {
  return "block." + std::to_string(block) + "." + which + (layer.mode() == LayerMode::kan ? ".gamma" : ".weight");
}

void expect_shape(ShapeTrace* trace, const Shape& expected, const Shape& actual, const char* stage) {
  if (expected != actual) {
    throw InvariantError(std::string("forward: ") + stage + " has shape " + to_string(actual) + ", expected " +
                         to_string(expected));
  }
  if (trace) trace->stages.push_back(expected);
}

}  // namespace

HaKanModel::HaKanModel(const ModelConfig& config, Uninitialized) : config_(config) { config_.validate(); }

HaKanModel::HaKanModel(const ModelConfig& config) : HaKanModel(config, Uninitialized{}) {
  const auto& c = config_;
  const std::size_t n = c.num_patches();
  std::mt19937_64 rng(c.seed);
  w_patch_ = uniform_tensor({c.patch_len, c.d_model}, 1.0 / std::sqrt(double(c.patch_len)), rng);
  w_pos_ = normal_tensor({n, c.d_model}, 0.02, rng);
  for (std::size_t r = 0; r < c.blocks; ++r) {
    HaKanBlock block;
    auto make = [&](std::size_t width) {
      return c.mode == LayerMode::kan ? KanLayer::random_kan(width, width, c.basis, rng, c.init_scale)
                                      : KanLayer::random_linear(width, width, rng);
    };
    if (c.intra_enabled) block.intra = make(c.d_model);
    if (c.inter_enabled) block.inter = make(n);
    blocks_.push_back(std::move(block));
  }
  w_down_ = uniform_tensor({c.bottleneck, n * c.d_model}, 1.0 / std::sqrt(double(n * c.d_model)), rng);
  w_up_ = uniform_tensor({c.horizon, c.bottleneck}, 1.0 / std::sqrt(double(c.bottleneck)), rng);
}

HaKanModel HaKanModel::zeros(const ModelConfig& config) {
  HaKanModel model(config, Uninitialized{});
  const auto& c = model.config_;
  const std::size_t n = c.num_patches();
  model.w_patch_ = Tensor::zeros({c.patch_len, c.d_model}, true);
  model.w_pos_ = Tensor::zeros({n, c.d_model}, true);
  for (std::size_t r = 0; r < c.blocks; ++r) {
    HaKanBlock block;
    auto make = [&](std::size_t width) {
      if (c.mode == LayerMode::kan) {
        return KanLayer(width, width, c.basis,
                        Tensor::zeros({width, width, static_cast<std::size_t>(c.basis.degree) + 1}));
      }
      return KanLayer(width, width, Tensor::zeros({width, width}));
    };
    if (c.intra_enabled) block.intra = make(c.d_model);
    if (c.inter_enabled) block.inter = make(n);
    model.blocks_.push_back(std::move(block));
  }
  model.w_down_ = Tensor::zeros({c.bottleneck, n * c.d_model}, true);
  model.w_up_ = Tensor::zeros({c.horizon, c.bottleneck}, true);
  return model;
}

std::vector<NamedTensor> HaKanModel::parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"w_p", w_patch_});
  out.push_back({"w_pos", w_pos_});
  for (std::size_t r = 0; r < blocks_.size(); ++r) {
    if (blocks_[r].intra) out.push_back({layer_key(r, "intra", *blocks_[r].intra), blocks_[r].intra->weights()});
    if (blocks_[r].inter) out.push_back({layer_key(r, "inter", *blocks_[r].inter), blocks_[r].inter->weights()});
  }
  out.push_back({"w_down", w_down_});
  out.push_back({"w_up", w_up_});
  return out;
}

std::size_t HaKanModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

HaKanModel HaKanModel::clone() const {
  HaKanModel copy = zeros(config_);
  copy.assign(*this);
  return copy;
}

void HaKanModel::assign(const HaKanModel& other) {
  auto dst = parameters();
  const auto src = other.parameters();
  if (dst.size() != src.size()) throw DimensionError("assign: models have different parameter sets");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].tensor.shape() != src[i].tensor.shape()) {
      throw DimensionError("assign: parameter " + dst[i].name + " does not match " + src[i].name);
    }
    auto d = dst[i].tensor.mutable_data();
    auto s = src[i].tensor.data();
    std::copy(s.begin(), s.end(), d.begin());
  }
}

Tensor HaKanModel::forward_normalized(const RowMatrix& normalized, ShapeTrace* trace) const {
  const auto& c = config_;
  const std::size_t batch = static_cast<std::size_t>(normalized.rows());
  const std::size_t n = c.num_patches();
  if (static_cast<std::size_t>(normalized.cols()) != c.lookback) {
    throw DimensionError("forward: expected windows of length " + std::to_string(c.lookback) + ", got " +
                         std::to_string(normalized.cols()));
  }

  RowMatrix stacked(static_cast<Eigen::Index>(batch * n), static_cast<Eigen::Index>(c.patch_len));
  for (std::size_t b = 0; b < batch; ++b) {
    const RowMatrix patches = make_patches(normalized.row(static_cast<Eigen::Index>(b)).transpose(), c.patch_len,
                                           c.stride);
    expect_shape(b == 0 ? trace : nullptr, {n, c.patch_len},
                 {static_cast<std::size_t>(patches.rows()), static_cast<std::size_t>(patches.cols())}, "patches");
    stacked.middleRows(static_cast<Eigen::Index>(b * n), static_cast<Eigen::Index>(n)) = patches;
  }

  const Shape token_shape{n, c.d_model};
  auto per_sample = [batch](const Tensor& t) { return Shape{t.dim(0) / batch, t.dim(1)}; };

  Tensor x = embed(Tensor::from_matrix(stacked), w_patch_, w_pos_);
  expect_shape(trace, token_shape, per_sample(x), "embedding");
  for (const auto& block : blocks_) {
    x = block_forward(x, block, batch);
    expect_shape(trace, token_shape, per_sample(x), "block output");
  }
  // Row-major flatten: x_f[j*D + k] = X_k[j, k].
  Tensor flat = reshape(x, {batch, n * c.d_model});
  expect_shape(trace, {n * c.d_model}, {flat.dim(1)}, "flattened features");
  Tensor hidden = linear(flat, w_down_);
  expect_shape(trace, {c.bottleneck}, {hidden.dim(1)}, "bottleneck");
  Tensor out = linear(hidden, w_up_);
  expect_shape(trace, {c.horizon}, {out.dim(1)}, "forecast");
  return out;
}

Tensor HaKanModel::forward_batch(const RowMatrix& series, ShapeTrace* trace) const {
  const Eigen::Index batch = series.rows();
  RowMatrix normalized(batch, series.cols());
  std::vector<double> scale(static_cast<std::size_t>(batch));
  std::vector<double> shift(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    auto [z, state] = revin_normalize(series.row(b).transpose(), config_.revin_eps);
    normalized.row(b) = z.transpose();
    scale[static_cast<std::size_t>(b)] = state.std + state.eps;
    shift[static_cast<std::size_t>(b)] = state.mean;
  }
  return scale_shift_rows(forward_normalized(normalized, trace), scale, shift);
}

Vector forward(const HaKanModel& model, const Vector& series, ShapeTrace* trace) {
  const Tensor out = model.forward_batch(series.transpose(), trace);
  return out.matrix().row(0).transpose();
}

RowMatrix predict(const HaKanModel& model, const RowMatrix& window) {
  std::vector<Vector> forecasts;
  for (const auto& channel : split_channels(window)) forecasts.push_back(forward(model, channel));
  return combine_channels(forecasts);
}

ParamBreakdown param_breakdown(const ModelConfig& c) {
  ParamBreakdown out;
  const std::size_t n = c.num_patches();
  const std::size_t k = c.mode == LayerMode::kan ? static_cast<std::size_t>(c.basis.degree) + 1 : 1;
  out.items.emplace_back("w_p", c.patch_len * c.d_model);
  out.items.emplace_back("w_pos", n * c.d_model);
  for (std::size_t r = 0; r < c.blocks; ++r) {
    std::size_t block = 0;
    if (c.intra_enabled) block += c.d_model * c.d_model * k;
    if (c.inter_enabled) block += n * n * k;
    out.items.emplace_back("block." + std::to_string(r), block);
  }
  out.items.emplace_back("w_down", c.bottleneck * n * c.d_model);
  out.items.emplace_back("w_up", c.horizon * c.bottleneck);
  for (const auto& [name, count] : out.items) out.total += count;
  return out;
}

std::size_t model_param_count(const ModelConfig& config) { return param_breakdown(config).total; }

}  // namespace hakan

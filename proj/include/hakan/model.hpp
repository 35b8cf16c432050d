#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hakan/kan_layer.hpp"
#include "hakan/poly_basis.hpp"
#include "hakan/tensor.hpp"

namespace hakan {

using Vector = Eigen::VectorXd;

struct ModelConfig {
  std::size_t lookback = 96;     // L
  std::size_t horizon = 96;      // T
  std::size_t channels = 1;      // M
  std::size_t patch_len = 16;    // P
  std::size_t stride = 8;        // S
  std::size_t d_model = 128;     // D
  std::size_t blocks = 5;        // R
  std::size_t bottleneck = 336;  // H
  BasisParams basis{};           // Hahn(1, 1, 7), degree 3
  LayerMode mode = LayerMode::kan;
  bool intra_enabled = true;
  bool inter_enabled = true;
  std::uint64_t seed = 2021;
  double revin_eps = 1e-5;
  double init_scale = 1.0;

  // N = floor((L - P) / S) + 2
  std::size_t num_patches() const;
  void validate() const;
};

bool operator==(const BasisParams& a, const BasisParams& b);
bool operator==(const ModelConfig& a, const ModelConfig& b);

// ---- channel independence and RevIN ----------------------------------------

std::vector<Vector> split_channels(const RowMatrix& x);
RowMatrix combine_channels(const std::vector<Vector>& series);

struct RevInState {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation of the window
  double eps = 1e-5;
};

// (x - mean) / (std + eps) over the window.
std::pair<Vector, RevInState> revin_normalize(const Vector& x, double eps = 1e-5);
// pred * (std + eps) + mean
Vector revin_denormalize(const Vector& pred, const RevInState& state);

// ---- patching and embedding ------------------------------------------------

// N x P patches; patch j covers [j*S, j*S + P) and indices past the end
// repeat the last value.
RowMatrix make_patches(const Vector& x, std::size_t patch_len, std::size_t stride);

// patches * W_p + W_pos. `patches` may stack several samples' N x P blocks;
// W_pos is added to each block.
Tensor embed(const Tensor& patches, const Tensor& w_p, const Tensor& w_pos);

// One Hahn-KAN block. A disabled layer is left empty and acts as identity.
struct HaKanBlock {
  std::optional<KanLayer> intra;  // rows of size D -> D
  std::optional<KanLayer> inter;  // rows of size N -> N (transposed view)
};

// x holds `batch` stacked N x D samples:
//   inter(intra(x)^T)^T + x
Tensor block_forward(const Tensor& x, const HaKanBlock& block, std::size_t batch = 1);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Per-sample shape after each stage of the forward pass: patches, embedding,
// each block, flattened features, bottleneck, forecast.
struct ShapeTrace {
  std::vector<Shape> stages;
};

class HaKanModel {
 public:
  // Random initialization seeded from config.seed.
  explicit HaKanModel(const ModelConfig& config);

  static HaKanModel zeros(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t num_patches() const { return config_.num_patches(); }

  Tensor& w_patch() { return w_patch_; }
  Tensor& w_pos() { return w_pos_; }
  Tensor& w_down() { return w_down_; }
  Tensor& w_up() { return w_up_; }
  const Tensor& w_patch() const { return w_patch_; }
  const Tensor& w_pos() const { return w_pos_; }
  const Tensor& w_down() const { return w_down_; }
  const Tensor& w_up() const { return w_up_; }
  std::vector<HaKanBlock>& blocks() { return blocks_; }
  const std::vector<HaKanBlock>& blocks() const { return blocks_; }

  // Handles aliasing the model's storage, in checkpoint key order: w_p, w_pos,
  // block.{i}.intra.gamma, block.{i}.inter.gamma, w_down, w_up (".weight"
  // instead of ".gamma" for linear-mode layers).
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;

  HaKanModel clone() const;
  // Copies parameter values from a model with the same configuration.
  void assign(const HaKanModel& other);

  // Batched forward over independent univariate windows. `series` is B x L
  // raw values; the result is B x T denormalized forecasts, recorded on the
  // current tape when parameters require grad.
  Tensor forward_batch(const RowMatrix& series, ShapeTrace* trace = nullptr) const;

  // Forward from already-normalized series (no RevIN), B x T.
  Tensor forward_normalized(const RowMatrix& normalized, ShapeTrace* trace = nullptr) const;

 private:
  struct Uninitialized {};
  HaKanModel(const ModelConfig& config, Uninitialized);

  ModelConfig config_;
  Tensor w_patch_;  // P x D
  Tensor w_pos_;    // N x D
  std::vector<HaKanBlock> blocks_;
  Tensor w_down_;  // H x (N*D)
  Tensor w_up_;    // T x H
};

// Single-channel forecast (length T) for a length-L window.
Vector forward(const HaKanModel& model, const Vector& series, ShapeTrace* trace = nullptr);

// L x M window -> T x M forecast; each channel runs through the shared
// backbone on its own.
RowMatrix predict(const HaKanModel& model, const RowMatrix& window);

struct ParamBreakdown {
  std::vector<std::pair<std::string, std::size_t>> items;
  std::size_t total = 0;
};

// P*D + N*D + R*(D^2 + N^2)*(d+1) + H*N*D + T*H in kan mode; linear-mode
// blocks drop the (d+1) factor and disabled layers contribute nothing.
std::size_t model_param_count(const ModelConfig& config);
ParamBreakdown param_breakdown(const ModelConfig& config);

}  // namespace hakan

#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>

#include "hakan/poly_basis.hpp"
#include "hakan/tensor.hpp"

namespace hakan {

// Squashes an unbounded activation onto the basis interval (lo, hi):
//   lo + (hi - lo) * (tanh(x) + 1) / 2
struct DomainMap {
  double lo = 0.0;
  double hi = 1.0;

  DomainMap() = default;
  DomainMap(double lo_, double hi_);

  double operator()(double x) const { return lo + (hi - lo) * 0.5 * (std::tanh(x) + 1.0); }
  double derivative(double x) const {
    const double t = std::tanh(x);
    return 0.5 * (hi - lo) * (1.0 - t * t);
  }
};

enum class LayerMode { kan, linear };

std::string to_string(LayerMode mode);
LayerMode parse_layer_mode(const std::string& text);

// Counts basis evaluations; copyable so layers stay value types.
class EvalCounter {
 public:
  EvalCounter() = default;
  EvalCounter(const EvalCounter& other) : n_(other.value()) {}
  EvalCounter& operator=(const EvalCounter& other) {
    n_.store(other.value());
    return *this;
  }
  void add(std::size_t k) const { n_.fetch_add(k, std::memory_order_relaxed); }
  std::size_t value() const { return n_.load(std::memory_order_relaxed); }
  void reset() const { n_.store(0); }

 private:
  mutable std::atomic<std::size_t> n_{0};
};

// A (d_out x d_in) matrix of learnable univariate functions
//   phi_{q,p}(x) = sum_r gamma[q, p, r] * P_r(squash(x)),
// or, in linear mode, a bias-free fully connected layer with weight
// W[d_out x d_in].
class KanLayer {
 public:
  // Kan mode; gamma must have shape d_out x d_in x (degree + 1).
  KanLayer(std::size_t in_features, std::size_t out_features, const BasisParams& basis, Tensor gamma);
  // Linear mode; weight must have shape d_out x d_in.
  KanLayer(std::size_t in_features, std::size_t out_features, Tensor weight);

  // gamma ~ Normal(0, sqrt(init_scale / d_in)).
  static KanLayer random_kan(std::size_t in_features, std::size_t out_features, const BasisParams& basis,
                             std::mt19937_64& rng, double init_scale = 1.0);
  // W ~ Uniform(-k, k), k = sqrt(1 / d_in).
  static KanLayer random_linear(std::size_t in_features, std::size_t out_features, std::mt19937_64& rng);

  LayerMode mode() const { return mode_; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  const PolyBasis& basis() const;
  const DomainMap& squash() const { return squash_; }

  // gamma in kan mode, W in linear mode.
  Tensor& weights() { return weights_; }
  const Tensor& weights() const { return weights_; }

  Tensor forward(const Tensor& x) const;

  std::size_t basis_evaluations() const { return evaluations_.value(); }
  void reset_basis_evaluations() const { evaluations_.reset(); }

 private:
  friend Tensor kan_forward(const KanLayer& layer, const Tensor& x);

  LayerMode mode_;
  std::size_t in_;
  std::size_t out_;
  std::optional<PolyBasis> basis_;
  DomainMap squash_;
  Tensor weights_;
  EvalCounter evaluations_;
};

// out[i, q] = sum_p sum_r gamma[q, p, r] * P_r(squash(x[i, p])). Basis values
// are computed once per input element and shared by every output.
Tensor kan_forward(const KanLayer& layer, const Tensor& x);
// out = x * W^T.
Tensor linear_forward(const KanLayer& layer, const Tensor& x);

std::size_t param_count(const KanLayer& layer);

}  // namespace hakan

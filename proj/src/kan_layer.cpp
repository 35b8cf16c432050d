#include "hakan/kan_layer.hpp"

#include <cmath>
#include <utility>

namespace hakan {

DomainMap::DomainMap(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(lo < hi)) throw ConfigError("domain map needs lo < hi");
}

std::string to_string(LayerMode mode) { return mode == LayerMode::kan ? "kan" : "linear"; }

LayerMode parse_layer_mode(const std::string& text) {
  if (text == "kan") return LayerMode::kan;
  if (text == "linear" || text == "mlp") return LayerMode::linear;
  throw ConfigError("unknown layer mode '" + text + "' (expected kan or linear)");
}

KanLayer::KanLayer(std::size_t in_features, std::size_t out_features, const BasisParams& basis, Tensor gamma)
    : mode_(LayerMode::kan), in_(in_features), out_(out_features), basis_(PolyBasis(basis)),
      weights_(std::move(gamma)) {
  squash_ = DomainMap(basis_->domain_lo(), basis_->domain_hi());
  const Shape expected{out_, in_, basis_->size()};
  if (weights_.shape() != expected) {
    throw DimensionError("kan layer coefficients must have shape " + to_string(expected) + ", got " +
                         to_string(weights_.shape()));
  }
  weights_.set_requires_grad(true);
}

KanLayer::KanLayer(std::size_t in_features, std::size_t out_features, Tensor weight)
    : mode_(LayerMode::linear), in_(in_features), out_(out_features), weights_(std::move(weight)) {
  const Shape expected{out_, in_};
  if (weights_.shape() != expected) {
    throw DimensionError("linear layer weight must have shape " + to_string(expected) + ", got " +
                         to_string(weights_.shape()));
  }
  weights_.set_requires_grad(true);
}

KanLayer KanLayer::random_kan(std::size_t in_features, std::size_t out_features, const BasisParams& basis,
                              std::mt19937_64& rng, double init_scale) {
  const std::size_t k = static_cast<std::size_t>(basis.degree) + 1;
  std::normal_distribution<double> dist(0.0, std::sqrt(init_scale / static_cast<double>(in_features)));
  std::vector<double> gamma(out_features * in_features * k);
  for (auto& g : gamma) g = dist(rng);
  return KanLayer(in_features, out_features, basis, Tensor({out_features, in_features, k}, std::move(gamma)));
}

KanLayer KanLayer::random_linear(std::size_t in_features, std::size_t out_features, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in_features));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(out_features * in_features);
  for (auto& v : w) v = dist(rng);
  return KanLayer(in_features, out_features, Tensor({out_features, in_features}, std::move(w)));
}

const PolyBasis& KanLayer::basis() const {
  if (!basis_) throw ContractError("linear layer has no polynomial basis");
  return *basis_;
}

Tensor KanLayer::forward(const Tensor& x) const {
  return mode_ == LayerMode::kan ? kan_forward(*this, x) : linear_forward(*this, x);
}

Tensor kan_forward(const KanLayer& layer, const Tensor& x) {
  if (layer.mode() != LayerMode::kan) throw ContractError("kan_forward called on a linear-mode layer");
  if (x.rank() != 2 || x.dim(1) != layer.in_features()) {
    throw DimensionError("kan layer expects rows x " + std::to_string(layer.in_features()) + " input, got " +
                         to_string(x.shape()));
  }
  const Tensor& gamma = layer.weights();
  const PolyBasis& basis = layer.basis();
  const DomainMap& squash = layer.squash();
  const auto rows = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(layer.in_features());
  const auto k = static_cast<Eigen::Index>(basis.size());
  const Eigen::Index width = in * k;
  const bool grad = needs_grad({&x, &gamma});

  // phi(i, p*k + r) = P_r(squash(x(i, p))); dphi holds d phi / d x(i, p).
  // Entry (i, p) of x is point i*in + p, so phi viewed as (rows*in) x k is
  // exactly the column-wise basis table.
  const Eigen::Index points = rows * in;
  const Eigen::Map<const Eigen::ArrayXd> xs(x.data().data(), points);
  // tanh(v) = 1 - 2 / (exp(2v) + 1), which vectorizes and saturates cleanly.
  const Eigen::ArrayXd t = 1.0 - 2.0 / ((2.0 * xs).exp() + 1.0);
  const double half_span = 0.5 * (squash.hi - squash.lo);
  const Eigen::ArrayXd s = squash.lo + half_span * (t + 1.0);
  Eigen::ArrayXXd vals;
  Eigen::ArrayXXd ders;
  basis.eval_columns(s, vals, grad ? &ders : nullptr);
  using PointTable = Eigen::Map<Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  RowMatrix phi(rows, width);
  PointTable(phi.data(), points, k) = vals;
  RowMatrix dphi(grad ? rows : 0, grad ? width : 0);
  if (grad) {
    ders.colwise() *= half_span * (1.0 - t.square());
    PointTable(dphi.data(), points, k) = ders;
  }
  layer.evaluations_.add(static_cast<std::size_t>(rows * in));

  Tensor out = Tensor::zeros({x.dim(0), layer.out_features()});
  out.mutable_matrix().noalias() = phi * gamma.matrix().transpose();

  if (grad) {
    record_op({x, gamma}, out, [x, gamma, out, phi = std::move(phi), dphi = std::move(dphi), in, k]() mutable {
      auto g = out.grad_matrix();
      if (gamma.requires_grad()) gamma.grad_matrix().noalias() += g.transpose() * phi;
      if (x.requires_grad()) {
        const RowMatrix gphi = g * gamma.matrix();
        const Eigen::Index points = phi.rows() * in;
        using ConstPointTable =
            Eigen::Map<const Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
        Eigen::Map<Eigen::ArrayXd> gx(x.ensure_grad().data(), points);
        gx += (ConstPointTable(gphi.data(), points, k) * ConstPointTable(dphi.data(), points, k)).rowwise().sum();
      }
    });
  }
  check_finite(out, "kan_forward");
  return out;
}

Tensor linear_forward(const KanLayer& layer, const Tensor& x) {
  if (layer.mode() != LayerMode::linear) throw ContractError("linear_forward called on a kan-mode layer");
  return linear(x, layer.weights());
}

std::size_t param_count(const KanLayer& layer) { return layer.weights().numel(); }

}  // namespace hakan

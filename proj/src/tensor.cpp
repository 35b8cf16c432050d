#include "hakan/tensor.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace hakan {

namespace {

#ifdef HAKAN_FINITE_CHECKS_DEFAULT
constexpr bool kFiniteChecksDefault = HAKAN_FINITE_CHECKS_DEFAULT;
#else
constexpr bool kFiniteChecksDefault = true;
#endif

std::atomic<bool> g_finite_checks{kFiniteChecksDefault};
thread_local Tape* t_current_tape = nullptr;

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw RankError(std::string(op) + ": expected rank-2 tensor, got shape " + to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

Tensor finish(Tensor out, const char* op) {
  check_finite(out, op);
  return out;
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor ---------------------------------------------------------------

struct Tensor::Impl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
};

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor of shape " + to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::ones(Shape shape, bool requires_grad) { return full(std::move(shape), 1.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_matrix(const RowMatrix& m, bool requires_grad) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(data),
                requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  static const Shape empty;
  return impl_ ? impl_->shape : empty;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw RankError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
  }
  return shape()[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const double> Tensor::data() const { return impl_->data; }

std::span<double> Tensor::mutable_data() { return impl_->data; }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::mutable_grad() const { return impl_->grad; }

std::span<double> Tensor::ensure_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::clear_grad() const {
  if (impl_) {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }
}

namespace {
std::pair<Eigen::Index, Eigen::Index> matrix_extent(const Shape& shape, std::size_t numel) {
  if (shape.empty()) return {1, 1};
  if (shape.size() == 1) return {1, static_cast<Eigen::Index>(shape[0])};
  return {static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(numel / shape[0])};
}
}  // namespace

ConstMatrixMap Tensor::matrix() const {
  auto [r, c] = matrix_extent(impl_->shape, impl_->data.size());
  return ConstMatrixMap(impl_->data.data(), r, c);
}

MatrixMap Tensor::mutable_matrix() {
  auto [r, c] = matrix_extent(impl_->shape, impl_->data.size());
  return MatrixMap(impl_->data.data(), r, c);
}

MatrixMap Tensor::grad_matrix() const {
  ensure_grad();
  auto [r, c] = matrix_extent(impl_->shape, impl_->data.size());
  return MatrixMap(impl_->grad.data(), r, c);
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  const auto m = matrix();
  return m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

Tensor Tensor::clone() const {
  Tensor out(impl_->shape, impl_->data, impl_->requires_grad);
  out.impl_->grad = impl_->grad;
  return out;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

// ---- Tape -----------------------------------------------------------------

Tape::Tape() : previous_(t_current_tape) { t_current_tape = this; }

Tape::~Tape() { t_current_tape = previous_; }

Tape* Tape::current() { return t_current_tape; }

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn) {
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ContractError("backward: root must be a scalar, got shape " + to_string(root.shape()));
  }
  if (!root.requires_grad()) {
    throw ContractError("backward: root was not produced by recorded ops");
  }
  Tensor seed = root;
  seed.ensure_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output.has_grad()) it->fn();
  }
  nodes_.clear();
}

void backward(const Tensor& root) {
  Tape* tape = Tape::current();
  if (!tape) throw ContractError("backward: no active tape on this thread");
  tape->backward(root);
}

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::current()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void record_op(std::initializer_list<Tensor> inputs, Tensor& output, BackwardFn fn) {
  Tape* tape = Tape::current();
  if (!tape) return;
  bool any = false;
  for (const Tensor& t : inputs) any = any || t.requires_grad();
  if (!any) return;
  output.set_requires_grad(true);
  tape->record(std::vector<Tensor>(inputs), output, std::move(fn));
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }

bool finite_checks_enabled() { return g_finite_checks.load(); }

void check_finite(const Tensor& t, const char* op) {
  if (!finite_checks_enabled()) return;
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value in output of shape " + to_string(t.shape()));
    }
  }
}

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  Tensor out = Tensor::zeros({a.dim(0), b.dim(1)});
  out.mutable_matrix().noalias() = a.matrix() * b.matrix();
  record_op({a, b}, out, [a, b, out]() mutable {
    auto g = out.grad_matrix();
    if (a.requires_grad()) a.grad_matrix().noalias() += g * b.matrix().transpose();
    if (b.requires_grad()) b.grad_matrix().noalias() += a.matrix().transpose() * g;
  });
  return finish(out, "matmul");
}

Tensor linear(const Tensor& x, const Tensor& w) {
  require_rank2(x, "linear");
  require_rank2(w, "linear");
  if (x.dim(1) != w.dim(1)) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(w.shape()));
  }
  Tensor out = Tensor::zeros({x.dim(0), w.dim(0)});
  out.mutable_matrix().noalias() = x.matrix() * w.matrix().transpose();
  record_op({x, w}, out, [x, w, out]() mutable {
    auto g = out.grad_matrix();
    if (x.requires_grad()) x.grad_matrix().noalias() += g * w.matrix();
    if (w.requires_grad()) w.grad_matrix().noalias() += g.transpose() * x.matrix();
  });
  return finish(out, "linear");
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  Tensor out = Tensor::zeros({a.dim(1), a.dim(0)});
  out.mutable_matrix() = a.matrix().transpose();
  record_op({a}, out, [a, out]() mutable {
    if (a.requires_grad()) a.grad_matrix() += out.grad_matrix().transpose();
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  out.mutable_matrix() = a.matrix() + b.matrix();
  record_op({a, b}, out, [a, b, out]() mutable {
    auto g = out.grad_matrix();
    if (a.requires_grad()) a.grad_matrix() += g;
    if (b.requires_grad()) b.grad_matrix() += g;
  });
  return finish(out, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  out.mutable_matrix() = a.matrix() - b.matrix();
  record_op({a, b}, out, [a, b, out]() mutable {
    auto g = out.grad_matrix();
    if (a.requires_grad()) a.grad_matrix() += g;
    if (b.requires_grad()) b.grad_matrix() -= g;
  });
  return finish(out, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  out.mutable_matrix() = a.matrix().cwiseProduct(b.matrix());
  record_op({a, b}, out, [a, b, out]() mutable {
    auto g = out.grad_matrix();
    if (a.requires_grad()) a.grad_matrix() += g.cwiseProduct(b.matrix());
    if (b.requires_grad()) b.grad_matrix() += g.cwiseProduct(a.matrix());
  });
  return finish(out, "mul");
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  out.mutable_matrix() = a.matrix() * s;
  record_op({a}, out, [a, s, out]() mutable {
    if (a.requires_grad()) a.grad_matrix() += out.grad_matrix() * s;
  });
  return finish(out, "mul_scalar");
}

Tensor square(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  out.mutable_matrix() = a.matrix().array().square().matrix();
  record_op({a}, out, [a, out]() mutable {
    if (a.requires_grad()) a.grad_matrix() += 2.0 * out.grad_matrix().cwiseProduct(a.matrix());
  });
  return finish(out, "square");
}

Tensor tanh(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  out.mutable_matrix() = a.matrix().array().tanh().matrix();
  record_op({a}, out, [a, out]() mutable {
    if (!a.requires_grad()) return;
    const auto y = out.matrix().array();
    a.grad_matrix().array() += out.grad_matrix().array() * (1.0 - y.square());
  });
  return finish(out, "tanh");
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::scalar(a.matrix().sum());
  record_op({a}, out, [a, out]() mutable {
    if (a.requires_grad()) a.grad_matrix().array() += out.grad()[0];
  });
  return finish(out, "sum");
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  Tensor out = Tensor::scalar(a.matrix().sum() / n);
  record_op({a}, out, [a, n, out]() mutable {
    if (a.requires_grad()) a.grad_matrix().array() += out.grad()[0] / n;
  });
  return finish(out, "mean");
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
  record_op({a}, out, [a, out]() mutable {
    if (!a.requires_grad()) return;
    auto ga = a.ensure_grad();
    auto go = out.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
  });
  return out;
}

Tensor flatten(const Tensor& a) { return reshape(a, {a.numel()}); }

Tensor add_tiled(const Tensor& a, const Tensor& b) {
  require_rank2(a, "add_tiled");
  require_rank2(b, "add_tiled");
  const std::size_t rows = b.dim(0);
  if (a.dim(1) != b.dim(1) || a.dim(0) % rows != 0) {
    throw DimensionError("add_tiled: " + to_string(a.shape()) + " is not a stack of " + to_string(b.shape()));
  }
  const std::size_t blocks = a.dim(0) / rows;
  const auto r = static_cast<Eigen::Index>(rows);
  Tensor out = Tensor::zeros(a.shape());
  {
    auto o = out.mutable_matrix();
    const auto am = a.matrix();
    const auto bm = b.matrix();
    for (std::size_t k = 0; k < blocks; ++k) {
      const auto off = static_cast<Eigen::Index>(k) * r;
      o.middleRows(off, r) = am.middleRows(off, r) + bm;
    }
  }
  record_op({a, b}, out, [a, b, out, blocks, r]() mutable {
    auto g = out.grad_matrix();
    if (a.requires_grad()) a.grad_matrix() += g;
    if (b.requires_grad()) {
      auto gb = b.grad_matrix();
      for (std::size_t k = 0; k < blocks; ++k) gb += g.middleRows(static_cast<Eigen::Index>(k) * r, r);
    }
  });
  return finish(out, "add_tiled");
}

Tensor batch_transpose(const Tensor& a, std::size_t blocks) {
  require_rank2(a, "batch_transpose");
  if (blocks == 0 || a.dim(0) % blocks != 0) {
    throw DimensionError("batch_transpose: " + to_string(a.shape()) + " does not split into " +
                         std::to_string(blocks) + " blocks");
  }
  const auto rows = static_cast<Eigen::Index>(a.dim(0) / blocks);
  const auto cols = static_cast<Eigen::Index>(a.dim(1));
  Tensor out = Tensor::zeros({blocks * a.dim(1), a.dim(0) / blocks});
  {
    auto o = out.mutable_matrix();
    const auto am = a.matrix();
    for (std::size_t k = 0; k < blocks; ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      o.middleRows(ki * cols, cols) = am.middleRows(ki * rows, rows).transpose();
    }
  }
  record_op({a}, out, [a, out, blocks, rows, cols]() mutable {
    if (!a.requires_grad()) return;
    auto g = out.grad_matrix();
    auto ga = a.grad_matrix();
    for (std::size_t k = 0; k < blocks; ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      ga.middleRows(ki * rows, rows) += g.middleRows(ki * cols, cols).transpose();
    }
  });
  return out;
}

Tensor scale_shift_rows(const Tensor& a, std::span<const double> scale, std::span<const double> shift) {
  require_rank2(a, "scale_shift_rows");
  if (scale.size() != a.dim(0) || shift.size() != a.dim(0)) {
    throw DimensionError("scale_shift_rows: " + std::to_string(a.dim(0)) + " rows but " +
                         std::to_string(scale.size()) + " scales and " + std::to_string(shift.size()) +
                         " shifts");
  }
  Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
  Tensor out = Tensor::zeros(a.shape());
  out.mutable_matrix() = (s.asDiagonal() * a.matrix()).colwise() + t;
  record_op({a}, out, [a, s, out]() mutable {
    if (a.requires_grad()) a.grad_matrix() += s.asDiagonal() * out.grad_matrix();
  });
  return finish(out, "scale_shift_rows");
}

}  // namespace hakan

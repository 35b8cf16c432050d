#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hakan/error.hpp"

namespace hakan {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

std::string to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array of doubles with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage, which is how
// parameters are referenced from the tape and from the optimizer. Use clone()
// for a deep copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_matrix(const RowMatrix& m, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access, for parameter updates and loading. Ops never use it
  // on their inputs.
  std::span<double> mutable_data();

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  // Allocates a zero gradient buffer if none exists.
  std::span<double> ensure_grad() const;
  void zero_grad() const;
  void clear_grad() const;

  // Rank-2 views. A rank-1 tensor of length n is viewed as 1 x n; higher
  // ranks collapse trailing axes into the column dimension. Gradient access is
  // const because Tensor is a handle; the buffer lives in the shared storage.
  ConstMatrixMap matrix() const;
  MatrixMap mutable_matrix();
  MatrixMap grad_matrix() const;

  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t i, std::size_t j) const;

  Tensor clone() const;
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

using BackwardFn = std::function<void()>;

// Dynamic reverse-mode tape. Constructing a Tape makes it the current tape of
// the calling thread; ops record onto it when any input requires grad. The
// previous tape (if any) is restored on destruction.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn);
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1, runs every node once in reverse recording
  // order, then frees the recorded nodes. Leaf gradients accumulate.
  void backward(const Tensor& root);
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
  Tape* previous_;
};

// backward() on the current thread's tape.
void backward(const Tensor& root);

// True when an op with these inputs must be recorded.
bool needs_grad(std::initializer_list<const Tensor*> inputs);
// Records a custom op on the current tape if needed and marks the output.
void record_op(std::initializer_list<Tensor> inputs, Tensor& output, BackwardFn fn);

// Finite-value guards at op boundaries.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();
void check_finite(const Tensor& t, const char* op);

// ---- ops ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// x * w^T, the bias-free fully connected layer.
Tensor linear(const Tensor& x, const Tensor& w);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);

// a is (blocks*rows) x cols, b is rows x cols; b is added to every block.
Tensor add_tiled(const Tensor& a, const Tensor& b);
// a is (blocks*rows) x cols; each rows x cols block is transposed, giving
// (blocks*cols) x rows.
Tensor batch_transpose(const Tensor& a, std::size_t blocks);
// out(i, :) = a(i, :) * scale[i] + shift[i]; scale and shift are constants.
Tensor scale_shift_rows(const Tensor& a, std::span<const double> scale,
                        std::span<const double> shift);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }

}  // namespace hakan

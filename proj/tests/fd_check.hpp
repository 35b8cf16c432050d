#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hakan/tensor.hpp"

namespace hakan::testing {

// Worst |analytic - central difference| / max(1, |analytic|) over every entry
// of every input, for a scalar-valued f.
inline double worst_grad_error(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                               std::vector<Tensor> inputs, double step = 1e-6) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  {
    Tape tape;
    backward(f(inputs));
  }
  double worst = 0.0;
  for (auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto x = t.mutable_data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double saved = x[j];
      x[j] = saved + step;
      const double up = f(inputs).item();
      x[j] = saved - step;
      const double down = f(inputs).item();
      x[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, std::fabs(analytic[j] - numeric) / std::max(1.0, std::fabs(analytic[j])));
    }
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  const std::size_t n = shape_numel(shape);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace hakan::testing

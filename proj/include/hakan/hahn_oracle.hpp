#pragma once

// Closed-form Hahn polynomial as a terminating hypergeometric sum,
//
//   Q_r(x; a, b, n) = sum_{k=0}^{r} (-r)_k (r+a+b+1)_k (-x)_k
//                                   / ((a+1)_k (-n)_k k!),
//
// written independently of the recurrence in poly_basis.hpp. Test and
// acceptance code only.

#include <cstdint>
#include <string>

#include "hakan/error.hpp"

namespace hakan::oracle {

// Rising factorial (x)_k.
inline double pochhammer(double x, int k) {
  double p = 1.0;
  for (int i = 0; i < k; ++i) p *= x + i;
  return p;
}

inline double hahn_hypergeometric(double a, double b, int n, int r, double x) {
  if (r < 0) throw BasisParameterError("degree must be non-negative");
  if (r > n) throw BasisParameterError("degree " + std::to_string(r) + " exceeds n = " + std::to_string(n));
  double total = 0.0;
  double k_factorial = 1.0;
  for (int k = 0; k <= r; ++k) {
    if (k > 0) k_factorial *= k;
    // (-r)_k and (-n)_k are products of integers; keep them exact before
    // promoting to double.
    std::int64_t neg_r = 1;
    std::int64_t neg_n = 1;
    for (int i = 0; i < k; ++i) {
      neg_r *= static_cast<std::int64_t>(-r + i);
      neg_n *= static_cast<std::int64_t>(-n + i);
    }
    const double num = static_cast<double>(neg_r) * pochhammer(r + a + b + 1, k) * pochhammer(-x, k);
    const double den = pochhammer(a + 1, k) * static_cast<double>(neg_n) * k_factorial;
    total += num / den;
  }
  return total;
}

}  // namespace hakan::oracle

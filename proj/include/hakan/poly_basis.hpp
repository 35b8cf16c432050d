#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hakan/error.hpp"

namespace hakan {

enum class BasisKind { hahn, chebyshev, lucas, bspline };

std::string to_string(BasisKind kind);
BasisKind parse_basis_kind(const std::string& text);

namespace detail {

inline std::string fmt_real(double v) {
  std::string s = std::to_string(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace detail

/// Three-term recurrence coefficients (A_r, B_r) of the Hahn polynomials
/// Hahn(a, b, n), in the form
///   A_r P_r(x) = (A_r + B_r - x) P_{r-1}(x) - B_r P_{r-2}(x).
/// B_1 multiplies P_{-1} and is zero by its (r - 1) factor; it is returned
/// without evaluating the (possibly vanishing) denominator.
template <typename Scalar>
std::pair<Scalar, Scalar> hahn_recurrence_coeffs(Scalar a, Scalar b, int n, int r) {
  if (r < 1) throw BasisParameterError("recurrence index r must be >= 1, got " + std::to_string(r));
  const Scalar rs = static_cast<Scalar>(r);
  const Scalar ns = static_cast<Scalar>(n);

  const Scalar a_den1 = 2 * rs + a + b - 1;
  const Scalar a_den2 = 2 * rs + a + b;
  if (a_den1 == Scalar(0)) {
    throw BasisParameterError("A_" + std::to_string(r) + ": factor (2r+a+b-1) vanishes");
  }
  if (a_den2 == Scalar(0)) {
    throw BasisParameterError("A_" + std::to_string(r) + ": factor (2r+a+b) vanishes");
  }
  const Scalar A = (rs + a + b) * (rs + a) * (ns - rs + 1) / (a_den1 * a_den2);
  if (A == Scalar(0)) {
    throw BasisParameterError("A_" + std::to_string(r) + " vanishes (a=" + detail::fmt_real(double(a)) +
                              ", b=" + detail::fmt_real(double(b)) + ", n=" + std::to_string(n) + ")");
  }

  Scalar B = 0;
  if (r > 1) {
    const Scalar b_den1 = 2 * rs + a + b - 2;
    if (b_den1 == Scalar(0)) {
      throw BasisParameterError("B_" + std::to_string(r) + ": factor (2r+a+b-2) vanishes");
    }
    B = (rs - 1) * (rs + b - 1) * (rs + a + b + ns) / (b_den1 * a_den1);
  }
  return {A, B};
}

/// Hahn polynomials Q_r(x; a, b, n) for r = 0..degree, evaluated by the
/// three-term recurrence with P_0 = 1 and P_1 = 1 - (a+b+2) x / ((a+1) n).
/// Coefficients are computed once at construction.
template <typename Scalar>
class HahnBasis {
 public:
  HahnBasis(Scalar a, Scalar b, int n, int degree) : a_(a), b_(b), n_(n), degree_(degree) {
    if (!(a > Scalar(-1))) throw BasisParameterError("Hahn parameter a must exceed -1");
    if (!(b > Scalar(-1))) throw BasisParameterError("Hahn parameter b must exceed -1");
    if (n < 1) throw BasisParameterError("Hahn parameter n must be positive");
    if (degree < 0) throw BasisParameterError("degree must be non-negative");
    if (degree > n) {
      throw BasisParameterError("degree " + std::to_string(degree) + " exceeds n = " + std::to_string(n));
    }
    if ((a + 1) * static_cast<Scalar>(n) == Scalar(0)) {
      throw BasisParameterError("factor (a+1)n vanishes");
    }
    p1_slope_ = -(a + b + 2) / ((a + 1) * static_cast<Scalar>(n));
    coeff_a_.resize(static_cast<std::size_t>(degree) + 1, Scalar(0));
    coeff_b_.resize(static_cast<std::size_t>(degree) + 1, Scalar(0));
    for (int r = 1; r <= degree; ++r) {
      auto [A, B] = hahn_recurrence_coeffs(a, b, n, r);
      coeff_a_[static_cast<std::size_t>(r)] = A;
      coeff_b_[static_cast<std::size_t>(r)] = B;
    }
  }

  Scalar a() const { return a_; }
  Scalar b() const { return b_; }
  Scalar p1_slope() const { return p1_slope_; }
  int n() const { return n_; }
  int degree() const { return degree_; }
  std::size_t size() const { return static_cast<std::size_t>(degree_) + 1; }

  /// Cached (A_r, B_r), r in [1, degree].
  std::pair<Scalar, Scalar> recurrence_coeffs(int r) const {
    if (r < 1 || r > degree_) {
      throw BasisParameterError("recurrence index " + std::to_string(r) + " outside [1, " +
                                std::to_string(degree_) + "]");
    }
    return {coeff_a_[static_cast<std::size_t>(r)], coeff_b_[static_cast<std::size_t>(r)]};
  }

  void eval_all(Scalar x, std::span<Scalar> values) const {
    values[0] = Scalar(1);
    if (degree_ == 0) return;
    values[1] = Scalar(1) + p1_slope_ * x;
    for (std::size_t r = 2; r < size(); ++r) {
      const Scalar A = coeff_a_[r];
      const Scalar B = coeff_b_[r];
      values[r] = ((A + B - x) * values[r - 1] - B * values[r - 2]) / A;
    }
  }

  std::vector<Scalar> eval_all(Scalar x) const {
    std::vector<Scalar> v(size());
    eval_all(x, v);
    return v;
  }

  // d/dx of the recurrence:
  //   A_r P'_r = (A_r + B_r - x) P'_{r-1} - P_{r-1} - B_r P'_{r-2}
  void eval_all_with_deriv(Scalar x, std::span<Scalar> values, std::span<Scalar> derivs) const {
    values[0] = Scalar(1);
    derivs[0] = Scalar(0);
    if (degree_ == 0) return;
    values[1] = Scalar(1) + p1_slope_ * x;
    derivs[1] = p1_slope_;
    for (std::size_t r = 2; r < size(); ++r) {
      const Scalar A = coeff_a_[r];
      const Scalar B = coeff_b_[r];
      values[r] = ((A + B - x) * values[r - 1] - B * values[r - 2]) / A;
      derivs[r] = ((A + B - x) * derivs[r - 1] - values[r - 1] - B * derivs[r - 2]) / A;
    }
  }

 private:
  Scalar a_;
  Scalar b_;
  int n_;
  int degree_;
  Scalar p1_slope_{};
  std::vector<Scalar> coeff_a_;
  std::vector<Scalar> coeff_b_;
};

// Chebyshev polynomials of the first kind: T_0 = 1, T_1 = x,
// T_r = 2x T_{r-1} - T_{r-2}.
template <typename Scalar>
void chebyshev_eval_all(int degree, Scalar x, std::span<Scalar> values, std::span<Scalar> derivs = {}) {
  const bool with_deriv = !derivs.empty();
  values[0] = Scalar(1);
  if (with_deriv) derivs[0] = Scalar(0);
  if (degree == 0) return;
  values[1] = x;
  if (with_deriv) derivs[1] = Scalar(1);
  for (std::size_t r = 2; r <= static_cast<std::size_t>(degree); ++r) {
    values[r] = 2 * x * values[r - 1] - values[r - 2];
    if (with_deriv) derivs[r] = 2 * values[r - 1] + 2 * x * derivs[r - 1] - derivs[r - 2];
  }
}

template <typename Scalar>
std::vector<Scalar> chebyshev_eval_all(int degree, Scalar x) {
  std::vector<Scalar> v(static_cast<std::size_t>(degree) + 1);
  chebyshev_eval_all<Scalar>(degree, x, v);
  return v;
}

// Lucas polynomials: L_0 = 2, L_1 = x, L_r = x L_{r-1} + L_{r-2}.
template <typename Scalar>
void lucas_eval_all(int degree, Scalar x, std::span<Scalar> values, std::span<Scalar> derivs = {}) {
  const bool with_deriv = !derivs.empty();
  values[0] = Scalar(2);
  if (with_deriv) derivs[0] = Scalar(0);
  if (degree == 0) return;
  values[1] = x;
  if (with_deriv) derivs[1] = Scalar(1);
  for (std::size_t r = 2; r <= static_cast<std::size_t>(degree); ++r) {
    values[r] = x * values[r - 1] + values[r - 2];
    if (with_deriv) derivs[r] = values[r - 1] + x * derivs[r - 1] + derivs[r - 2];
  }
}

template <typename Scalar>
std::vector<Scalar> lucas_eval_all(int degree, Scalar x) {
  std::vector<Scalar> v(static_cast<std::size_t>(degree) + 1);
  lucas_eval_all<Scalar>(degree, x, v);
  return v;
}

struct BasisParams {
  BasisKind kind = BasisKind::hahn;
  double a = 1.0;
  double b = 1.0;
  int n = 7;
  int degree = 3;
};

// Runtime-selected polynomial family used by the KAN layers. Each family
// carries the interval its inputs are squashed onto: [0, n] for Hahn,
// [-1, 1] for Chebyshev and Lucas.
class PolyBasis {
 public:
  explicit PolyBasis(const BasisParams& params);

  const BasisParams& params() const { return params_; }
  BasisKind kind() const { return params_.kind; }
  int degree() const { return params_.degree; }
  std::size_t size() const { return static_cast<std::size_t>(params_.degree) + 1; }
  double domain_lo() const;
  double domain_hi() const;

  void eval(double x, std::span<double> values) const;
  void eval_with_deriv(double x, std::span<double> values, std::span<double> derivs) const;

  // Many points at once: column r of `values` holds P_r(x) for every entry
  // of x (and likewise P'_r in `derivs` when given).
  void eval_columns(const Eigen::ArrayXd& x, Eigen::ArrayXXd& values, Eigen::ArrayXXd* derivs = nullptr) const;

 private:
  BasisParams params_;
  std::vector<HahnBasis<double>> hahn_;  // holds exactly one basis for kind == hahn
};

}  // namespace hakan

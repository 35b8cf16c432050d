#include "hakan/poly_basis.hpp"

namespace hakan {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::hahn: return "hahn";
    case BasisKind::chebyshev: return "chebyshev";
    case BasisKind::lucas: return "lucas";
    case BasisKind::bspline: return "bspline";
  }
  return "unknown";
}

BasisKind parse_basis_kind(const std::string& text) {
  if (text == "hahn") return BasisKind::hahn;
  if (text == "chebyshev") return BasisKind::chebyshev;
  if (text == "lucas") return BasisKind::lucas;
  if (text == "bspline") return BasisKind::bspline;
  throw ConfigError("unknown basis '" + text + "' (expected hahn, chebyshev, lucas or bspline)");
}

PolyBasis::PolyBasis(const BasisParams& params) : params_(params) {
  if (params.degree < 0) throw BasisParameterError("degree must be non-negative");
  switch (params.kind) {
    case BasisKind::hahn:
      hahn_.emplace_back(params.a, params.b, params.n, params.degree);
      break;
    case BasisKind::chebyshev:
    case BasisKind::lucas:
      break;
    case BasisKind::bspline:
      throw ConfigError("the B-spline basis is not part of this build");
  }
}

double PolyBasis::domain_lo() const { return params_.kind == BasisKind::hahn ? 0.0 : -1.0; }

double PolyBasis::domain_hi() const {
  return params_.kind == BasisKind::hahn ? static_cast<double>(params_.n) : 1.0;
}

void PolyBasis::eval(double x, std::span<double> values) const {
  switch (params_.kind) {
    case BasisKind::hahn: hahn_.front().eval_all(x, values); return;
    case BasisKind::chebyshev: chebyshev_eval_all<double>(params_.degree, x, values); return;
    case BasisKind::lucas: lucas_eval_all<double>(params_.degree, x, values); return;
    case BasisKind::bspline: break;
  }
  throw ConfigError("unsupported basis");
}

void PolyBasis::eval_with_deriv(double x, std::span<double> values, std::span<double> derivs) const {
  switch (params_.kind) {
    case BasisKind::hahn: hahn_.front().eval_all_with_deriv(x, values, derivs); return;
    case BasisKind::chebyshev: chebyshev_eval_all<double>(params_.degree, x, values, derivs); return;
    case BasisKind::lucas: lucas_eval_all<double>(params_.degree, x, values, derivs); return;
    case BasisKind::bspline: break;
  }
  throw ConfigError("unsupported basis");
}

void PolyBasis::eval_columns(const Eigen::ArrayXd& x, Eigen::ArrayXXd& values, Eigen::ArrayXXd* derivs) const {
  const Eigen::Index k = static_cast<Eigen::Index>(size());
  values.resize(x.size(), k);
  if (derivs) derivs->resize(x.size(), k);
  const int d = params_.degree;
  switch (params_.kind) {
    case BasisKind::hahn: {
      const auto& h = hahn_.front();
      values.col(0).setOnes();
      if (derivs) derivs->col(0).setZero();
      if (d == 0) return;
      values.col(1) = 1.0 + h.p1_slope() * x;
      if (derivs) derivs->col(1).setConstant(h.p1_slope());
      for (int r = 2; r <= d; ++r) {
        const auto [A, B] = h.recurrence_coeffs(r);
        const Eigen::ArrayXd lead = (A + B) - x;
        values.col(r) = (lead * values.col(r - 1) - B * values.col(r - 2)) / A;
        if (derivs) {
          derivs->col(r) = (lead * derivs->col(r - 1) - values.col(r - 1) - B * derivs->col(r - 2)) / A;
        }
      }
      return;
    }
    case BasisKind::chebyshev: {
      values.col(0).setOnes();
      if (derivs) derivs->col(0).setZero();
      if (d == 0) return;
      values.col(1) = x;
      if (derivs) derivs->col(1).setOnes();
      for (int r = 2; r <= d; ++r) {
        values.col(r) = 2.0 * x * values.col(r - 1) - values.col(r - 2);
        if (derivs) {
          derivs->col(r) = 2.0 * values.col(r - 1) + 2.0 * x * derivs->col(r - 1) - derivs->col(r - 2);
        }
      }
      return;
    }
    case BasisKind::lucas: {
      values.col(0).setConstant(2.0);
      if (derivs) derivs->col(0).setZero();
      if (d == 0) return;
      values.col(1) = x;
      if (derivs) derivs->col(1).setOnes();
      for (int r = 2; r <= d; ++r) {
        values.col(r) = x * values.col(r - 1) + values.col(r - 2);
        if (derivs) derivs->col(r) = values.col(r - 1) + x * derivs->col(r - 1) + derivs->col(r - 2);
      }
      return;
    }
    case BasisKind::bspline: break;
  }
  throw ConfigError("unsupported basis");
}

}  // namespace hakan

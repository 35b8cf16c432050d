#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fd_check.hpp"
#include "hakan/kan_layer.hpp"

using namespace hakan;
using hakan::testing::random_tensor;
using hakan::testing::worst_grad_error;

namespace {

const BasisParams kHahn{BasisKind::hahn, 1.0, 1.0, 7, 3};

KanLayer make_kan(std::size_t in, std::size_t out, const BasisParams& basis, std::uint64_t seed) {
  return KanLayer(in, out, basis, random_tensor({out, in, static_cast<std::size_t>(basis.degree) + 1}, seed, -1, 1));
}

}  // namespace

TEST(Squash, Examples) {
  DomainMap m(0.0, 7.0);
  EXPECT_DOUBLE_EQ(m(0.0), 3.5);
  EXPECT_LT(m(20.0), 7.0 + 1e-15);
  EXPECT_NEAR(m(20.0), 7.0, 1e-12);
  EXPECT_GT(m(-20.0), -1e-15);
  EXPECT_DOUBLE_EQ(m.derivative(0.0), 3.5);
  const double h = 1e-6;
  EXPECT_NEAR((m(h) - m(-h)) / (2 * h), 3.5, 1e-8);
  for (double x = -3; x < 3; x += 0.25) EXPECT_LT(m(x), m(x + 0.25));
  EXPECT_THROW(DomainMap(1.0, 1.0), ConfigError);
}

TEST(KanForward, ZeroCoefficientsGiveZero) {
  KanLayer layer(4, 3, kHahn, Tensor::zeros({3, 4, 4}));
  Tensor out = layer.forward(random_tensor({5, 4}, 1));
  EXPECT_EQ(out.shape(), (Shape{5, 3}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(KanForward, ConstantTermsSumOverInputs) {
  const double c = 0.75;
  Tensor gamma = Tensor::zeros({3, 4, 4});
  auto g = gamma.mutable_data();
  for (std::size_t qp = 0; qp < 12; ++qp) g[qp * 4] = c;
  KanLayer layer(4, 3, kHahn, gamma);
  Tensor out = layer.forward(random_tensor({6, 4}, 2));
  for (double v : out.data()) EXPECT_NEAR(v, 4 * c, 1e-14);
}

TEST(KanForward, HandEvaluation) {
  KanLayer layer(1, 1, BasisParams{BasisKind::hahn, 1.0, 1.0, 7, 1}, Tensor({1, 1, 2}, {2.0, 3.0}));
  Tensor out = layer.forward(Tensor({1, 1}, {0.0}));
  EXPECT_NEAR(out.item(), 2.0, 1e-14);
}

TEST(KanForward, InputWidthChecked) {
  KanLayer layer = make_kan(4, 3, kHahn, 3);
  EXPECT_THROW(layer.forward(Tensor::zeros({2, 5})), DimensionError);
  EXPECT_THROW(KanLayer(4, 3, kHahn, Tensor::zeros({3, 4, 3})), DimensionError);
  EXPECT_THROW(linear_forward(layer, Tensor::zeros({2, 4})), ContractError);
}

TEST(KanForward, MatchesDirectDoubleSum) {
  KanLayer layer = make_kan(3, 2, kHahn, 4);
  Tensor x = random_tensor({4, 3}, 5);
  Tensor out = layer.forward(x);
  HahnBasis<double> basis(1.0, 1.0, 7, 3);
  const auto g = layer.weights().data();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t q = 0; q < 2; ++q) {
      double expected = 0.0;
      for (std::size_t p = 0; p < 3; ++p) {
        const double s = 3.5 * (std::tanh(x.at(i, p)) + 1.0);
        const auto v = basis.eval_all(s);
        for (std::size_t r = 0; r < 4; ++r) expected += g[(q * 3 + p) * 4 + r] * v[r];
      }
      EXPECT_NEAR(out.at(i, q), expected, 1e-12);
    }
  }
}

TEST(LinearForward, Examples) {
  Tensor eye = Tensor::zeros({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.mutable_data()[i * 5] = 1.0;
  Tensor x = random_tensor({3, 4}, 6);
  Tensor same = KanLayer(4, 4, eye).forward(x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(same.at(i), x.at(i));

  Tensor zero = KanLayer(4, 5, Tensor::zeros({5, 4})).forward(x);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);

  Tensor w = random_tensor({5, 4}, 7);
  Tensor out = KanLayer(4, 5, w).forward(x);
  const RowMatrix expected = x.matrix() * w.matrix().transpose();
  EXPECT_LT((out.matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(kan_forward(KanLayer(4, 5, w), x), ContractError);
}

TEST(ParamCount, Examples) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(param_count(KanLayer::random_kan(128, 128, kHahn, rng)), 65536u);
  EXPECT_EQ(param_count(KanLayer::random_kan(12, 12, kHahn, rng)), 576u);
  EXPECT_EQ(param_count(KanLayer::random_linear(128, 128, rng)), 16384u);
  const std::size_t block = param_count(KanLayer::random_kan(128, 128, kHahn, rng)) +
                            param_count(KanLayer::random_kan(12, 12, kHahn, rng));
  EXPECT_EQ(block, 66112u);
}

TEST(Initialization, ScalesWithFanIn) {
  std::mt19937_64 rng(3);
  KanLayer kan = KanLayer::random_kan(200, 50, kHahn, rng);
  double sq = 0.0;
  for (double v : kan.weights().data()) sq += v * v;
  EXPECT_NEAR(sq / kan.weights().numel(), 1.0 / 200.0, 0.1 / 200.0);

  KanLayer lin = KanLayer::random_linear(64, 32, rng);
  const double k = std::sqrt(1.0 / 64.0);
  for (double v : lin.weights().data()) {
    EXPECT_GE(v, -k);
    EXPECT_LE(v, k);
  }
}

TEST(KanProperty, LinearInCoefficients) {
  Tensor g1 = random_tensor({3, 5, 4}, 8);
  Tensor g2 = random_tensor({3, 5, 4}, 9);
  Tensor x = random_tensor({7, 5}, 10);
  Tensor y1 = KanLayer(5, 3, kHahn, g1).forward(x);
  Tensor y2 = KanLayer(5, 3, kHahn, g2).forward(x);
  Tensor y12 = KanLayer(5, 3, kHahn, add(g1, g2)).forward(x);
  for (std::size_t i = 0; i < y12.numel(); ++i) EXPECT_NEAR(y12.at(i), y1.at(i) + y2.at(i), 1e-10);
}

TEST(KanProperty, DegreeZeroIsInputIndependent) {
  BasisParams p = kHahn;
  p.degree = 0;
  KanLayer layer = make_kan(4, 3, p, 11);
  Tensor out = layer.forward(random_tensor({6, 4}, 12, -5, 5));
  for (std::size_t i = 1; i < 6; ++i)
    for (std::size_t q = 0; q < 3; ++q) EXPECT_EQ(out.at(i, q), out.at(0, q));
}

TEST(KanProperty, BasisEvaluatedOncePerInputElement) {
  Tensor x = random_tensor({9, 6}, 13);
  for (std::size_t out : {1u, 50u}) {
    KanLayer layer = make_kan(6, out, kHahn, 14);
    layer.reset_basis_evaluations();
    layer.forward(x);
    EXPECT_EQ(layer.basis_evaluations(), 9u * 6u) << "d_out=" << out;
  }
}

TEST(KanProperty, GradientsMatchFiniteDifferences) {
  for (BasisKind kind : {BasisKind::hahn, BasisKind::chebyshev, BasisKind::lucas}) {
    const BasisParams basis{kind, 1.0, 1.0, 7, 3};
    auto f = [&](const std::vector<Tensor>& in) {
      KanLayer layer(4, 3, basis, in[1]);
      return sum(square(layer.forward(in[0])));
    };
    const double worst = worst_grad_error(f, {random_tensor({5, 4}, 15), random_tensor({3, 4, 4}, 16, -1, 1)});
    EXPECT_LT(worst, 1e-4) << to_string(kind);
  }
  auto lin = [](const std::vector<Tensor>& in) { return sum(square(KanLayer(4, 3, in[1]).forward(in[0]))); };
  EXPECT_LT(worst_grad_error(lin, {random_tensor({5, 4}, 17), random_tensor({3, 4}, 18)}), 1e-6);
}

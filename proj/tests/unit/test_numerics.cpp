#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "imfvqa/errors.hpp"
#include "imfvqa/numerics.hpp"
#include "imfvqa/rng.hpp"

using namespace imfvqa;
using namespace imfvqa::num;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Matrix::identity(2), a), a);
}

TEST(Matmul, RowTimesColumn) {
  const Matrix r = matmul(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{3}, {4}}));
  ASSERT_EQ(r.rows(), 1u);
  ASSERT_EQ(r.cols(), 1u);
  EXPECT_EQ(r(0, 0), 11.0);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 2));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x2"), std::string::npos) << msg;
  }
}

TEST(Matmul, TransposedVariantsAgreeWithExplicitTranspose) {
  Rng rng(3);
  const Matrix a = random_matrix(4, 3, rng), b = random_matrix(4, 5, rng), c = random_matrix(3, 5, rng);
  const Matrix tn = matmul_tn(a, b), ref_tn = matmul(a.transposed(), b);
  const Matrix nt = matmul_nt(b, c), ref_nt = matmul(b, c.transposed());
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn[i], ref_tn[i], 1e-14);
  for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt[i], ref_nt[i], 1e-14);
}

TEST(Matmul, Associativity) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(6), k = 1 + rng.below(6), m = 1 + rng.below(6), p = 1 + rng.below(6);
    const Matrix a = random_matrix(n, k, rng), b = random_matrix(k, m, rng), c = random_matrix(m, p, rng);
    const Matrix left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) EXPECT_NEAR(left[i], right[i], 1e-9);
  }
}

TEST(MlpForward, IdentityLayerPassesInputThrough) {
  DenseLayer l{Parameter(Matrix::identity(2)), Parameter(Matrix(1, 2)), Activation::identity};
  const Mlp m({l});
  EXPECT_EQ(mlp_forward(m, Matrix::from_rows({{1, 2}})).y, Matrix::from_rows({{1, 2}}));
}

TEST(MlpForward, TanhOfZero) {
  DenseLayer l{Parameter(Matrix::from_rows({{0}})), Parameter(Matrix::from_rows({{0}})), Activation::tanh};
  const Mlp m({l});
  EXPECT_EQ(mlp_forward(m, Matrix::from_rows({{5}})).y(0, 0), 0.0);
}

TEST(MlpForward, TwoLayerHandTrace) {
  DenseLayer l1{Parameter(Matrix::from_rows({{0.5, -1.0}, {2.0, 0.25}})), Parameter(Matrix::from_rows({{0.1, -0.2}})),
                Activation::tanh};
  DenseLayer l2{Parameter(Matrix::from_rows({{1.5, 0.0}, {-0.5, 1.0}})), Parameter(Matrix::from_rows({{0.0, 0.3}})),
                Activation::identity};
  const Mlp m({l1, l2});
  const double x0 = 1.0, x1 = -2.0;
  const double h0 = std::tanh(x0 * 0.5 + x1 * 2.0 + 0.1);
  const double h1 = std::tanh(x0 * -1.0 + x1 * 0.25 - 0.2);
  const Matrix y = mlp_forward(m, Matrix::from_rows({{x0, x1}})).y;
  EXPECT_NEAR(y(0, 0), 1.5 * h0 - 0.5 * h1, 1e-15);
  EXPECT_NEAR(y(0, 1), h1 + 0.3, 1e-15);
}

TEST(MlpForward, InputDimensionMismatchThrows) {
  Rng rng(1);
  const Mlp m = Mlp::create({3, 2}, {Activation::tanh}, rng);
  EXPECT_THROW(mlp_forward(m, Matrix(1, 4)), ShapeError);
}

TEST(MlpBackward, MissingTapeIsStateError) {
  Rng rng(1);
  Mlp m = Mlp::create({3, 2}, {Activation::tanh}, rng);
  EXPECT_THROW(mlp_backward(m, MlpTape{}, Matrix(1, 2)), StateError);
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  Mlp m = Mlp::create({3, 4, 2}, {Activation::tanh, Activation::identity}, rng);
  const auto out = mlp_forward(m, random_matrix(1, 3, rng));
  const Matrix dx = mlp_backward(m, out.tape, Matrix(1, 2));
  for (double v : dx.data()) EXPECT_EQ(v, 0.0);
  for (const Parameter* p : m.parameters()) {
    for (double g : p->grad.data()) EXPECT_EQ(g, 0.0);
  }
}

TEST(MlpBackward, IdentityLayerInputGradientIsDyTimesWTransposed) {
  Rng rng(4);
  const Matrix w = random_matrix(3, 2, rng);
  Mlp m({DenseLayer{Parameter(w), Parameter(Matrix(1, 2)), Activation::identity}});
  const auto out = mlp_forward(m, random_matrix(1, 3, rng));
  const Matrix dy = Matrix::from_rows({{0.7, -1.3}});
  const Matrix dx = mlp_backward(m, out.tape, dy);
  const Matrix expect = matmul(dy, w.transposed());
  for (std::size_t i = 0; i < dx.size(); ++i) EXPECT_NEAR(dx[i], expect[i], 1e-15);
}

TEST(MlpBackward, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    Mlp m = Mlp::create({5, 6, 4, 3}, {Activation::tanh, Activation::tanh, Activation::identity}, rng);
    for (Parameter* p : m.parameters()) {
      for (auto& v : p->value.data()) v = rng.uniform(-1.0, 1.0);
    }
    const Matrix x = random_matrix(2, 5, rng);
    const Matrix weights = random_matrix(2, 3, rng);
    auto loss = [&] {
      const Matrix y = mlp_apply(m, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
      return s;
    };

    const auto out = mlp_forward(m, x);
    const Matrix dx = mlp_backward(m, out.tape, weights);
    auto params = m.parameters();
    std::vector<double> analytic, numeric;
    for (const Parameter* p : params) analytic.insert(analytic.end(), p->grad.data().begin(), p->grad.data().end());
    for (const Matrix& g : finite_diff_grad(loss, params)) numeric.insert(numeric.end(), g.data().begin(), g.data().end());
    EXPECT_LT(max_relative_error(analytic, numeric), 1e-6) << "seed " << seed;

    Parameter xp(x);
    Parameter* xs[] = {&xp};
    auto loss_x = [&] {
      const Matrix y = mlp_apply(m, xp.value);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
      return s;
    };
    const auto dx_num = finite_diff_grad(loss_x, xs);
    EXPECT_LT(max_relative_error(dx.data(), dx_num[0].data()), 1e-6) << "seed " << seed;
  }
}

TEST(Adam, ZeroGradientWithoutDecayOnlyAdvancesStep) {
  Parameter p(Matrix::from_rows({{1.0, -2.0}}));
  AdamState st;
  st.weight_decay = 0.0;
  Parameter* ps[] = {&p};
  adam_step(st, ps);
  EXPECT_EQ(p.value, Matrix::from_rows({{1.0, -2.0}}));
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, DecoupledDecayWithZeroGradient) {
  Parameter p(Matrix::from_rows({{1.0}}));
  AdamState st;
  Parameter* ps[] = {&p};
  adam_step(st, ps);
  EXPECT_NEAR(p.value[0], 1.0 - 5e-7, 1e-16);
}

TEST(Adam, FirstStepHandEvaluated) {
  Parameter p(Matrix::from_rows({{0.5}}));
  p.grad[0] = 1.0;
  AdamState st;
  st.weight_decay = 0.0;
  Parameter* ps[] = {&p};
  adam_step(st, ps);
  const double m = 0.1 * 1.0, v = 0.001 * 1.0;
  const double mhat = m / (1 - 0.9), vhat = v / (1 - 0.999);
  EXPECT_NEAR(p.value[0], 0.5 - 1e-3 * mhat / (std::sqrt(vhat) + 1e-8), 1e-15);
  EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Adam, EmptyParameterListIsNoOp) {
  AdamState st;
  adam_step(st, std::span<Parameter* const>{});
  SUCCEED();
}

TEST(Adam, DeterministicBitForBit) {
  auto run = [] {
    Rng rng(9);
    Parameter a(random_matrix(3, 3, rng)), b(random_matrix(1, 3, rng));
    AdamState st;
    Parameter* ps[] = {&a, &b};
    for (int i = 0; i < 5; ++i) {
      for (auto& g : a.grad.data()) g = rng.normal();
      for (auto& g : b.grad.data()) g = rng.normal();
      adam_step(st, ps);
    }
    return std::pair{a.value, b.value};
  };
  EXPECT_EQ(run(), run());
}

TEST(FiniteDiff, Square) {
  Parameter p(Matrix::from_rows({{3.0}}));
  Parameter* ps[] = {&p};
  const auto g = finite_diff_grad([&] { return p.value[0] * p.value[0]; }, ps);
  EXPECT_NEAR(g[0][0], 6.0, 1e-8);
}

TEST(FiniteDiff, ConstantAndSum) {
  Parameter p(Matrix::from_rows({{1.0, -4.0, 2.5}}));
  Parameter* ps[] = {&p};
  const auto flat = finite_diff_grad([] { return 42.0; }, ps);
  for (double v : flat[0].data()) EXPECT_EQ(v, 0.0);
  const auto g = finite_diff_grad(
      [&] {
        double s = 0.0;
        for (double v : p.value.data()) s += v;
        return s;
      },
      ps);
  for (double v : g[0].data()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDiff, NonFiniteFunctionIsNumericError) {
  Parameter p(Matrix::from_rows({{1.0}}));
  Parameter* ps[] = {&p};
  EXPECT_THROW(finite_diff_grad([] { return std::numeric_limits<double>::quiet_NaN(); }, ps), NumericError);
}

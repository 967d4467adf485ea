#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "adcare/error.h"
#include "adcare/tensor/ops.h"
#include "adcare/tensor/optim.h"
#include "support/gradcheck.h"

using namespace adcare;
using adcare::testing::gradcheck;

namespace {

Tensor rnd(Shape s, std::mt19937_64& rng) { return Tensor::randn(std::move(s), rng, 1.0); }

// Weighted sum so every output element gets a distinct upstream gradient.
Tensor probe(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

double at(const Tensor& t, std::size_t r, std::size_t c) { return t[r * t.dim(1) + c]; }

}  // namespace

TEST(Tensor, MatmulMatchesNaiveLoops) {
  std::mt19937_64 rng(1);
  auto a = rnd({4, 7}, rng), b = rnd({7, 3}, rng);
  auto c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{4, 3}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) s += at(a, i, k) * at(b, k, j);
      EXPECT_NEAR(at(c, i, j), s, 1e-12);
    }
}

TEST(Tensor, MatmulRejectsInnerMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), DimensionError);
}

TEST(Tensor, CopiesShareStorageAndCloneDoesNot) {
  auto a = Tensor::from({2}, {1, 2});
  auto b = a;
  auto c = a.clone();
  a.mutable_data()[0] = 9;
  EXPECT_EQ(b[0], 9);
  EXPECT_EQ(c[0], 1);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, SoftmaxRowsSumToOneAndCausalMaskIsExact) {
  std::mt19937_64 rng(2);
  auto x = rnd({5, 5}, rng);
  auto s = softmax_rows(x);
  auto c = causal_softmax(x);
  for (std::size_t i = 0; i < 5; ++i) {
    double rs = 0, rc = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      rs += at(s, i, j);
      rc += at(c, i, j);
      if (j > i) {
        EXPECT_EQ(at(c, i, j), 0.0);
      }
    }
    EXPECT_NEAR(rs, 1.0, 1e-12);
    EXPECT_NEAR(rc, 1.0, 1e-12);
  }
  auto l = log_softmax_rows(x);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(l[i], std::log(s[i]), 1e-12);
}

TEST(Tensor, LayerNormMatchesFormula) {
  std::mt19937_64 rng(3);
  auto x = rnd({3, 6}, rng), g = rnd({6}, rng), b = rnd({6}, rng);
  auto y = layer_norm(x, g, b);
  for (std::size_t i = 0; i < 3; ++i) {
    double m = 0, v = 0;
    for (std::size_t j = 0; j < 6; ++j) m += at(x, i, j) / 6;
    for (std::size_t j = 0; j < 6; ++j) v += (at(x, i, j) - m) * (at(x, i, j) - m) / 6;
    for (std::size_t j = 0; j < 6; ++j)
      EXPECT_NEAR(at(y, i, j), (at(x, i, j) - m) / std::sqrt(v + 1e-5) * g[j] + b[j], 1e-12);
  }
}

TEST(Tensor, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  auto a = rnd({3, 4}, rng), b = rnd({4, 5}, rng), w = rnd({3, 5}, rng);
  auto r = rnd({3, 4}, rng), bias = rnd({4}, rng), g = rnd({4}, rng), wsq = rnd({4, 4}, rng);
  const std::vector<int> ids{2, 0, 3};
  struct Case {
    const char* name;
    std::function<Tensor()> loss;
    std::vector<Tensor> leaves;
  };
  const std::vector<Case> cases{
      {"matmul", [&] { return probe(matmul(a, b), w); }, {a, b}},
      {"transpose", [&] { return probe(matmul(transpose(r), a), wsq); }, {a, r}},
      {"add_sub_mul", [&] { return sum(mul(sub(add(a, r), mul(a, a)), r)); }, {a, r}},
      {"add_broadcast", [&] { return probe(add_broadcast(a, bias), r); }, {a, bias}},
      {"mean_over_axis", [&] { return probe(mean_over_axis(a, 0), bias); }, {a}},
      {"gelu", [&] { return probe(gelu(a), r); }, {a}},
      {"layer_norm", [&] { return probe(layer_norm(a, g, bias), r); }, {a, g, bias}},
      {"softmax", [&] { return probe(softmax_rows(a), r); }, {a}},
      {"causal_softmax", [&] { return probe(causal_softmax(matmul(a, transpose(r))), matmul(r, transpose(a))); }, {a, r}},
      {"log_softmax", [&] { return probe(log_softmax_rows(a), r); }, {a}},
      {"l2_normalize", [&] { return probe(l2_normalize_rows(a), r); }, {a}},
      {"embedding_pick", [&] { return sum(pick(matmul(embedding(wsq, ids), b), ids)); }, {wsq, b}},
      {"cross_entropy", [&] { return softmax_cross_entropy(a, ids); }, {a}},
      {"concat_slice",
       [&] {
         const Tensor parts[] = {a, r};
         const Tensor cols[] = {slice_rows(concat_rows(parts), 1, 4), a};
         return probe(slice_cols(concat_cols(cols), 2, 6), slice_rows(concat_rows(parts), 2, 5));
       },
       {a, r}},
      {"reshape_scale_mean", [&] { return mean(scale(reshape(mul(a, r), {12}), 3.0)); }, {a, r}},
  };
  for (const auto& c : cases) {
    const auto res = gradcheck(c.loss, c.leaves);
    EXPECT_LT(res.max_rel_error, 1e-6) << c.name;
  }
}

TEST(Tensor, BackwardNeedsScalarLoss) {
  auto x = Tensor::zeros({2}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  auto x = Tensor::full({2, 2}, 1.0, true);
  {
    NoGradGuard guard;
    auto y = matmul(x, x);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.is_leaf());
  }
  EXPECT_TRUE(matmul(x, x).requires_grad());
}

TEST(Tensor, TapeVisitsInputsBeforeOutputs) {
  auto x = Tensor::full({2}, 1.0, true);
  auto y = mul(x, x);
  auto z = sum(add(y, x));
  auto tape = ComputationTape::record(z);
  const auto& nodes = tape.nodes();
  auto pos = [&](const Tensor& t) { return std::find(nodes.begin(), nodes.end(), t.impl()) - nodes.begin(); };
  EXPECT_LT(pos(x), pos(y));
  EXPECT_LT(pos(y), pos(z));
  tape.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
}

TEST(AdamW, ZeroGradientOnlyDecays) {
  auto w = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
  const double lr = 0.1, wd = 0.01;
  AdamW opt({{"w", "g", w}}, {.weight_decay = wd});
  std::vector<double> expect(w.data().begin(), w.data().end());
  for (int step = 0; step < 5; ++step) {
    opt.zero_grad();
    backward(scale(sum(w), 0.0));
    opt.step(lr);
    for (auto& e : expect) e *= 1.0 - lr * wd;
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(w[i], expect[i], 1e-15);
}

TEST(AdamW, ZeroLearningRateLeavesWeights) {
  auto w = Tensor::from({2}, {1.0, 2.0}, true);
  AdamW opt({{"w", "g", w}}, {});
  backward(sum(mul(w, w)));
  opt.step(0.0);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], 2.0);
}

TEST(AdamW, ClipScalesToMaxNorm) {
  auto w = Tensor::from({2}, {0.0, 0.0}, true);
  AdamW opt({{"w", "g", w}}, {});
  backward(sum(mul(w, Tensor::from({2}, {3.0, 4.0}))));
  EXPECT_DOUBLE_EQ(opt.clip_grad_norm(1.0), 5.0);
  EXPECT_NEAR(w.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(w.grad()[1], 0.8, 1e-15);
}

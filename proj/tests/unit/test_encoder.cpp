#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "adcare/data/synthetic.h"
#include "adcare/decoder/vocabulary.h"
#include "adcare/encoder/checkpoint.h"
#include "adcare/encoder/prealign.h"
#include "adcare/error.h"
#include "adcare/fusion/fusion.h"
#include "adcare/tensor/ops.h"
#include "support/gradcheck.h"

using namespace adcare;
using namespace adcare::encoder;

namespace {

VideoSample random_video(std::size_t f, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  VideoSample v{"v", f, h, w, 3, {}};
  v.pixels.resize(f * h * w * 3);
  for (auto& p : v.pixels) p = u(rng);
  return v;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<data::SyntheticItem> small_corpus(std::size_t n, std::uint64_t seed) {
  data::CorpusConfig cfg;
  cfg.n = n;
  return data::generate_synthetic_corpus(cfg, seed);
}

}  // namespace

TEST(VisualEncoder, DeskShapes) {
  VisualEncoder enc({}, 1);
  const auto e = enc.encode(random_video(8, 32, 32, 2));
  EXPECT_EQ(e.tokens.shape(), (Shape{8, 4, 4, 32}));
  EXPECT_EQ(e.patches(), 16u);
}

TEST(VisualEncoder, ZeroVideoAndZeroPositionsGiveZeros) {
  VisualEncoder enc({}, 1);
  for (auto& x : enc.positional_embedding().mutable_data()) x = 0;
  VideoSample v{"z", 2, 32, 32, 3, std::vector<double>(2 * 32 * 32 * 3, 0.0)};
  const auto e = enc.encode(v);
  for (double x : e.tokens.data()) EXPECT_EQ(x, 0.0);
}

TEST(VisualEncoder, TokenIsPatchTimesProjectionPlusPosition) {
  VisualEncoder enc({16, 16, 3, 8, 5}, 3);
  const auto v = random_video(2, 16, 16, 4);
  const auto e = enc.encode(v);
  const auto& w = enc.patch_projection();
  const auto& pos = enc.positional_embedding();
  // frame 1, patch row 1, patch col 0
  const std::size_t f = 1, py = 1, px = 0, n = py * 2 + px;
  for (std::size_t d = 0; d < 5; ++d) {
    double s = pos[n * 5 + d];
    std::size_t k = 0;
    for (std::size_t dy = 0; dy < 8; ++dy)
      for (std::size_t dx = 0; dx < 8; ++dx)
        for (std::size_t c = 0; c < 3; ++c, ++k) s += v.at(f, py * 8 + dy, px * 8 + dx, c) * w[k * 5 + d];
    EXPECT_NEAR(e.tokens[((f * 2 + py) * 2 + px) * 5 + d], s, 1e-12);
  }
}

TEST(VisualEncoder, LinearInPixelsWithoutPositions) {
  VisualEncoder enc({}, 5);
  for (auto& x : enc.positional_embedding().mutable_data()) x = 0;
  auto v = random_video(3, 32, 32, 6);
  auto scaled = v;
  for (auto& p : scaled.pixels) p *= 2.5;
  const auto a = enc.encode(v).tokens, b = enc.encode(scaled).tokens;
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(b[i], 2.5 * a[i], 1e-9);
}

TEST(VisualEncoder, IndivisibleFrameIsConfigError) {
  try {
    VisualEncoder enc({30, 32, 3, 8, 32}, 1);
    enc.encode(random_video(1, 30, 32, 1));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("30"), std::string::npos);
    EXPECT_NE(msg.find("8"), std::string::npos);
  }
}

TEST(VisualEncoder, FullResolutionGeometryPassesValidator) {
  EXPECT_NO_THROW(validate_geometry({8, 224, 224, 3, 14}));
  EXPECT_NO_THROW(validate_geometry({8, 224, 224, 3, 16}));
  EXPECT_THROW(validate_geometry({8, 224, 224, 3, 15}), ConfigError);
}

TEST(VisualEncoder, PatchProjectionGradient) {
  VisualEncoder enc({16, 16, 3, 8, 4}, 7);
  const auto v = random_video(2, 16, 16, 8);
  std::mt19937_64 rng(9);
  const auto w = Tensor::randn({2, 2, 2, 4}, rng, 1.0);
  auto loss = [&] { return sum(mul(gelu(enc.encode(v).tokens), w)); };
  const auto r = adcare::testing::gradcheck(loss, {enc.patch_projection(), enc.positional_embedding()});
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(TextEncoder, SingleTokenIsNormalizedRow) {
  TextEncoder t(10, 4, 1);
  const std::vector<int> one{3}, two{3, 3};
  const auto a = t.encode(one), b = t.encode(two);
  double norm = 0;
  for (std::size_t d = 0; d < 4; ++d) norm += t.token_embedding()[3 * 4 + d] * t.token_embedding()[3 * 4 + d];
  for (std::size_t d = 0; d < 4; ++d) {
    EXPECT_NEAR(a[d], t.token_embedding()[3 * 4 + d] / std::sqrt(norm), 1e-12);
    EXPECT_NEAR(b[d], a[d], 1e-12);
  }
}

TEST(TextEncoder, HandSetEmbeddingsGiveHandComputedMean) {
  TextEncoder t(10, 2, 1);
  auto e = t.token_embedding().mutable_data();
  e[2 * 2] = 3;
  e[2 * 2 + 1] = 0;
  e[7 * 2] = 1;
  e[7 * 2 + 1] = 4;
  const std::vector<int> ids{2, 7};
  const auto c = t.encode(ids);
  // mean (2, 2) -> (1/sqrt2, 1/sqrt2)
  EXPECT_NEAR(c[0], 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(c[1], 1 / std::sqrt(2.0), 1e-12);
}

TEST(TextEncoder, CaptionsAreUnitNormAndErrorsAreTyped) {
  TextEncoder t(64, 32, 2);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> ids(1 + rng() % 12);
    for (auto& i : ids) i = int(rng() % 64);
    const auto c = t.encode(ids);
    EXPECT_NEAR(dot(c, c), 1.0, 1e-9);
  }
  EXPECT_THROW(t.encode(std::vector<int>{}), ContractError);
  EXPECT_THROW(t.encode(std::vector<int>{64}), IndexError);
}

TEST(Checkpoint, RoundTripsAndRejectsCorruption) {
  VisualEncoder enc({}, 4);
  const auto arrays = snapshot(enc.parameters());
  const auto bytes = encode_checkpoint(arrays);
  EXPECT_EQ(bytes.substr(0, 4), "ADCV");
  EXPECT_EQ(decode_checkpoint(bytes), arrays);
  EXPECT_THROW(decode_checkpoint("ADCX" + bytes.substr(4)), ParseError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);

  VisualEncoder other({}, 5);
  restore(other.parameters(), arrays);
  EXPECT_EQ(snapshot(other.parameters()), arrays);
  auto missing = arrays;
  missing.pop_back();
  EXPECT_THROW(restore(other.parameters(), missing), Error);
}

TEST(Prealign, TwoPairsAtUnitTemperatureStartNearChance) {
  const auto items = small_corpus(10, 3);
  const auto& vocab = decoder::Vocabulary::standard();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    VisualEncoder v({}, seed);
    TextEncoder t(vocab.size(), 32, seed + 50);
    std::vector<AlignmentPair> pairs{{&items[0].video, vocab.encode(items[0].record.caption)},
                                     {&items[1].video, vocab.encode(items[1].record.caption)}};
    AlignmentConfig cfg;
    cfg.temperature = 1.0;
    cfg.steps = 1;
    cfg.batch_size = 2;
    const auto r = prealign(v, t, pairs, cfg);
    ASSERT_EQ(r.loss_history.size(), 1u);
    EXPECT_NEAR(r.loss_history[0], std::log(2.0), 0.5);
  }
}

TEST(Prealign, FewerThanTwoPairsIsContractError) {
  const auto items = small_corpus(10, 3);
  VisualEncoder v({}, 1);
  TextEncoder t(decoder::Vocabulary::standard().size(), 32, 2);
  std::vector<AlignmentPair> pairs{{&items[0].video, {5, 6}}};
  EXPECT_THROW(prealign(v, t, pairs, {}), ContractError);
}

TEST(Prealign, InfoNceMatchesDirectFormula) {
  std::mt19937_64 rng(11);
  const auto v = l2_normalize_rows(Tensor::randn({3, 4}, rng, 1.0));
  const auto t = l2_normalize_rows(Tensor::randn({3, 4}, rng, 1.0));
  const double tau = 0.5;
  double expect = 0;
  for (int dir = 0; dir < 2; ++dir) {
    for (std::size_t i = 0; i < 3; ++i) {
      double denom = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        const double s = dir == 0 ? dot(slice_rows(v, i, i + 1), slice_rows(t, j, j + 1))
                                  : dot(slice_rows(t, i, i + 1), slice_rows(v, j, j + 1));
        denom += std::exp(s / tau);
      }
      const double pos = dot(slice_rows(v, i, i + 1), slice_rows(t, i, i + 1)) / tau;
      expect += -(pos - std::log(denom)) / 3.0 / 2.0;
    }
  }
  EXPECT_NEAR(info_nce(v, t, tau).item(), expect, 1e-12);
}

TEST(Prealign, DescendsAndRetrievesHeldOutPairs) {
  const auto items = small_corpus(48, 21);
  const auto& vocab = decoder::Vocabulary::standard();
  int descended = 0, retrieved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    VisualEncoder v({}, seed);
    TextEncoder t(vocab.size(), 32, seed + 100);
    std::vector<AlignmentPair> train;
    for (std::size_t i = 0; i < 8; ++i) train.push_back({&items[i].video, vocab.encode(items[i].record.caption)});
    AlignmentConfig cfg;
    cfg.batch_size = 8;
    cfg.seed = seed;
    const auto r = prealign(v, t, train, cfg);
    for (double l : r.loss_history) ASSERT_TRUE(std::isfinite(l));
    auto mean_of = [](auto b, auto e) { return std::accumulate(b, e, 0.0) / double(e - b); };
    const auto& h = r.loss_history;
    if (mean_of(h.end() - 20, h.end()) < mean_of(h.begin(), h.begin() + 20)) ++descended;

    // held-out retrieval: matched cosine vs mismatched mean
    NoGradGuard guard;
    double matched = 0, mismatched = 0;
    std::size_t nm = 0;
    const std::size_t lo = 24, hi = 48;
    std::vector<Tensor> vids, caps;
    for (std::size_t i = lo; i < hi; ++i) {
      vids.push_back(video_descriptor(v.encode(items[i].video)));
      caps.push_back(t.encode(vocab.encode(items[i].record.caption)));
    }
    for (std::size_t i = 0; i < vids.size(); ++i)
      for (std::size_t j = 0; j < caps.size(); ++j) {
        const double c = dot(vids[i], caps[j]);
        if (items[lo + i].record.caption == items[lo + j].record.caption) {
          if (i == j) matched += c;
        } else {
          mismatched += c;
          ++nm;
        }
      }
    matched /= double(vids.size());
    if (matched > mismatched / double(nm)) ++retrieved;
  }
  EXPECT_GE(descended, 4);
  EXPECT_GE(retrieved, 4);
}

TEST(Prealign, FreezesBothTowersAfterwards) {
  const auto items = small_corpus(10, 3);
  const auto& vocab = decoder::Vocabulary::standard();
  VisualEncoder v({}, 1);
  TextEncoder t(vocab.size(), 32, 2);
  std::vector<AlignmentPair> pairs;
  for (std::size_t i = 0; i < 4; ++i) pairs.push_back({&items[i].video, vocab.encode(items[i].record.caption)});
  AlignmentConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 4;
  cfg.masked_token_loss = true;
  const auto r = prealign(v, t, pairs, cfg);
  EXPECT_EQ(r.loss_history.size(), 3u);
  for (const auto& p : v.parameters()) EXPECT_FALSE(p.tensor.requires_grad());
  for (const auto& p : t.parameters()) EXPECT_FALSE(p.tensor.requires_grad());
}

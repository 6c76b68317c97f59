#include <gtest/gtest.h>

#include <algorithm>

#include "novelseg/novelseg.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace novelseg;

namespace {

FloatMap random_map(int w, int h, Pcg32& rng) {
  FloatMap m(w, h);
  for (auto& v : m) v = static_cast<float>(rng.uniform01() * 3.0);
  return m;
}

AttentionStack random_stack(Pcg32& rng, int tokens = 3) {
  AttentionStack s;
  s.target_width = 32;
  s.target_height = 24;
  for (int k = 0; k < tokens; ++k) s.tokens.push_back("tok" + std::to_string(k));
  for (int layer = 0; layer < 2; ++layer)
    for (int t : {0, 10, 20})
      for (int head = 0; head < 2; ++head)
        for (int k = 0; k < tokens; ++k) {
          const int f = layer ? 2 : 4;
          s.slices.push_back({layer, t, head, k, random_map(32 / f, 24 / f, rng)});
        }
  return s;
}

AttentionStack single_slice(const FloatMap& values) {
  AttentionStack s;
  s.target_width = values.width();
  s.target_height = values.height();
  s.tokens = {"obj"};
  s.slices.push_back({0, 0, 0, 0, values});
  return s;
}

FloatMap noisy_disk_map(int size, double r, std::uint64_t seed) {
  const auto clean = oracle::disk(size, size, (size - 1) / 2.0, (size - 1) / 2.0, r);
  Pcg32 rng(seed, 0);
  FloatMap soft(size, size);
  for (std::size_t i = 0; i < soft.size(); ++i) {
    bool v = clean[i];
    if (rng.uniform01() < 0.1) v = !v;
    soft[i] = v ? 0.95f : 0.05f;
  }
  return soft;
}

BoundingBox box_of(const BinaryMask& m) {
  BoundingBox b{m.width(), m.height(), -1, -1};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.test(x, y)) b = {std::min(b.x_min, x), std::min(b.y_min, y), std::max(b.x_max, x), std::max(b.y_max, y)};
  return b;
}

}  // namespace

TEST(Resize, MatchesSamplingFormula) {
  Pcg32 rng(1);
  for (auto [sw, sh, dw, dh] : std::vector<std::array<int, 4>>{{8, 6, 32, 24}, {5, 7, 13, 3}, {16, 16, 16, 16}, {9, 4, 4, 9}}) {
    const auto src = random_map(sw, sh, rng);
    const auto dst = resize_bilinear(src, dw, dh);
    for (int y = 0; y < dh; ++y)
      for (int x = 0; x < dw; ++x) {
        const float want = oracle::sample_bilinear(src, (x + 0.5) * sw / dw - 0.5, (y + 0.5) * sh / dh - 0.5);
        ASSERT_NEAR(dst.at(x, y), want, 1e-5) << sw << "x" << sh << "->" << dw << "x" << dh;
      }
  }
}

TEST(Resize, ConstantStaysConstant) {
  const auto out = resize_bilinear(FloatMap(3, 5, 0.25f), 17, 11);
  for (float v : out) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Aggregate, SingleSliceIsNormalised) {
  Pcg32 rng(2);
  const auto m = random_map(10, 8, rng);
  EXPECT_EQ(aggregate(single_slice(m), 0), normalize_min_max(m));
  const auto a = aggregate(single_slice(m), 0);
  EXPECT_EQ(*std::min_element(a.begin(), a.end()), 0.0f);
  EXPECT_EQ(*std::max_element(a.begin(), a.end()), 1.0f);
}

TEST(Aggregate, DuplicateSliceChangesNothing) {
  Pcg32 rng(3);
  auto s = single_slice(random_map(10, 8, rng));
  const auto one = aggregate(s, 0);
  s.slices.push_back(s.slices.front());
  EXPECT_EQ(aggregate(s, 0), one);
}

TEST(Aggregate, SliceOrderDoesNotMatter) {
  Pcg32 rng(4);
  auto s = random_stack(rng);
  const auto base = aggregate(s, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(s.slices.begin(), s.slices.end(), rng);
    EXPECT_EQ(aggregate(s, 1), base);
  }
}

TEST(Aggregate, PositiveScaling) {
  Pcg32 rng(5);
  const auto s = random_stack(rng);
  const auto base = aggregate(s, 2);
  // Powers of two scale floats exactly, so the result is bit-identical.
  for (double c : {0.25, 2.0, 1024.0}) {
    auto scaled = s;
    for (auto& sl : scaled.slices)
      for (auto& v : sl.values) v = static_cast<float>(v * c);
    EXPECT_EQ(aggregate(scaled, 2), base) << c;
  }
  // Other factors round differently, but only in the last bits.
  for (double c : {0.3, 7.0, 1e3}) {
    auto scaled = s;
    for (auto& sl : scaled.slices)
      for (auto& v : sl.values) v = static_cast<float>(v * c);
    const auto out = aggregate(scaled, 2);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], base[i], 1e-5) << c;
  }
}

TEST(Aggregate, MissingTokenAndConstantMap) {
  Pcg32 rng(6);
  const auto s = random_stack(rng, 2);
  try {
    aggregate(s, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_token);
  }
  const auto flat = aggregate(single_slice(FloatMap(4, 4, 2.0f)), 0);
  for (float v : flat) EXPECT_EQ(v, 0.0f);
}

TEST(Threshold, Examples) {
  auto r = threshold(FloatMap(8, 8, 0.6f), 0.5);
  EXPECT_EQ(count_foreground(r.mask), 64u);
  EXPECT_EQ(r.attention_ratio, 1.0);
  r = threshold(FloatMap(8, 8, 0.4f), 0.5);
  EXPECT_EQ(count_foreground(r.mask), 0u);
  EXPECT_EQ(r.attention_ratio, 0.0);
  FloatMap half(8, 8, 0.1f);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) half.at(x, y) = 0.9f;
  EXPECT_EQ(threshold(half, 0.5).attention_ratio, 0.5);
  EXPECT_EQ(threshold(FloatMap(2, 2, 0.5f), 0.5).attention_ratio, 1.0);  // inclusive
}

TEST(BoundingBox, Examples) {
  BinaryMask m(10, 10);
  m.set(3, 4);
  EXPECT_EQ(bounding_box(m), (BoundingBox{3, 4, 3, 4}));
  EXPECT_THROW(bounding_box(BinaryMask(5, 5)), Error);
}

TEST(BoundingBox, LargestBlobWins) {
  auto m = oracle::box(40, 40, 20, 20, 25, 24);  // 30 px
  ASSERT_EQ(count_foreground(m), 30u);
  for (int x = 2; x < 7; ++x) m.set(x, 2);  // 5 px
  EXPECT_EQ(bounding_box(m), (BoundingBox{20, 20, 25, 24}));
}

TEST(BoundingBox, EqualAreasPickFirstInScanOrder) {
  auto m = oracle::box(20, 20, 10, 2, 12, 4);
  const auto second = oracle::box(20, 20, 2, 10, 4, 12);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] |= second[i];
  EXPECT_EQ(bounding_box(m), (BoundingBox{10, 2, 12, 4}));
}

TEST(ProposePoints, Examples) {
  const auto p = propose_points({0, 0, 100, 100});
  const std::array<Pixel, 5> want{{{50, 50}, {25, 50}, {75, 50}, {50, 25}, {50, 75}}};
  EXPECT_EQ(p, want);
  for (const auto& q : propose_points({10, 10, 10, 10})) EXPECT_EQ(q, (Pixel{10, 10}));
  const auto narrow = propose_points({0, 0, 3, 99});
  for (const auto& q : narrow) {
    EXPECT_GE(q.x, 0);
    EXPECT_LE(q.x, 3);
  }
  EXPECT_EQ(narrow[1], (Pixel{0, 49}));
  EXPECT_EQ(narrow[2], (Pixel{2, 49}));
}

TEST(ProposePoints, AlwaysInsideBox) {
  Pcg32 rng(8);
  for (int i = 0; i < 2000; ++i) {
    const int x0 = static_cast<int>(rng.bounded(100)), y0 = static_cast<int>(rng.bounded(100));
    const BoundingBox b{x0, y0, x0 + static_cast<int>(rng.bounded(60)), y0 + static_cast<int>(rng.bounded(60))};
    for (const auto& p : propose_points(b)) ASSERT_TRUE(b.contains(p));
  }
}

TEST(Localize, NoisyDiskBoxWithinTwoPixels) {
  const auto clean = oracle::disk(128, 128, 63.5, 63.5, 40);
  const auto expect = box_of(clean);
  CrfParams smooth_only;
  smooth_only.appearance_weight = 0;
  smooth_only.smoothness_weight = 10;
  const auto r = localize(single_slice(noisy_disk_map(128, 40, 42)), 0, RgbImage(128, 128, Rgb{128, 128, 128}),
                          0.5, smooth_only);
  EXPECT_LE(std::abs(r.bbox.x_min - expect.x_min), 2);
  EXPECT_LE(std::abs(r.bbox.y_min - expect.y_min), 2);
  EXPECT_LE(std::abs(r.bbox.x_max - expect.x_max), 2);
  EXPECT_LE(std::abs(r.bbox.y_max - expect.y_max), 2);
  EXPECT_EQ(r.attention_ratio, double(count_foreground(r.binary)) / (128.0 * 128.0));
  for (const auto& p : r.prompt_points) EXPECT_TRUE(r.bbox.contains(p));
  EXPECT_EQ(r.bbox, bounding_box(r.densified));
}

TEST(Localize, DefaultKernelsOnColouredImage) {
  const auto clean = oracle::disk(64, 64, 31.5, 31.5, 20);
  RgbImage img(64, 64);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = clean[i] ? Rgb{220, 200, 30} : Rgb{30, 60, 120};
  const auto stack = single_slice(noisy_disk_map(64, 20, 9));
  const auto r = localize(stack, 0, img);
  const auto expect = box_of(clean);
  EXPECT_LE(std::abs(r.bbox.x_min - expect.x_min), 2);
  EXPECT_LE(std::abs(r.bbox.x_max - expect.x_max), 2);
  EXPECT_LE(std::abs(r.bbox.y_min - expect.y_min), 2);
  EXPECT_LE(std::abs(r.bbox.y_max - expect.y_max), 2);
  // No randomness anywhere.
  const auto again = localize(stack, 0, img);
  EXPECT_EQ(again.densified, r.densified);
  EXPECT_EQ(again.aggregated, r.aggregated);
}

TEST(Localize, EmptyThresholdFails) {
  try {
    localize(single_slice(FloatMap(16, 16, 1.0f)), 0, RgbImage(16, 16));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::localization_failed);
    EXPECT_NE(std::string(e.what()).find("[threshold]"), std::string::npos);
  }
}

TEST(Localize, RatioBookkeeping) {
  FloatMap m(10, 10, 0.0f);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 10; ++x) m.at(x, y) = 1.0f;
  CrfParams none;
  none.iterations = 0;
  const auto r = localize(single_slice(m), 0, RgbImage(10, 10), 0.5, none);
  EXPECT_DOUBLE_EQ(r.attention_ratio, 0.6);
  EXPECT_FALSE(curate(r.densified, r.attention_ratio, {}).accepted);
  EXPECT_EQ(curate(r.densified, r.attention_ratio, {}).failed_stage, CurationStage::ratio);
}

TEST(Localize, StageTagOnSizeMismatch) {
  try {
    localize(single_slice(FloatMap(8, 8, 1.0f)), 0, RgbImage(9, 8));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("[aggregate]"), std::string::npos);
  }
}

TEST(AttentionStack, DiskRoundTrip) {
  Pcg32 rng(10);
  const auto s = random_stack(rng);
  testutil::TempDir dir;
  save_attention_stack(dir.path(), s);
  const auto back = load_attention_stack(dir.path());
  EXPECT_EQ(back.tokens, s.tokens);
  EXPECT_EQ(back.target_width, 32);
  ASSERT_EQ(back.slices.size(), s.slices.size());
  for (std::size_t i = 0; i < s.slices.size(); ++i) {
    EXPECT_EQ(back.slices[i].values, s.slices[i].values);
    EXPECT_EQ(back.slices[i].layer, s.slices[i].layer);
    EXPECT_EQ(back.slices[i].timestep, s.slices[i].timestep);
    EXPECT_EQ(back.slices[i].head, s.slices[i].head);
    EXPECT_EQ(back.slices[i].token, s.slices[i].token);
  }
  EXPECT_EQ(aggregate(back, 1), aggregate(s, 1));
}

TEST(AttentionStack, Validation) {
  Pcg32 rng(11);
  auto s = random_stack(rng, 2);
  EXPECT_EQ(s.token_index("tok1"), 1);
  EXPECT_EQ(s.token_index("0"), 0);
  EXPECT_THROW(s.token_index("bus"), Error);
  EXPECT_THROW(s.token_index("7"), Error);
  s.slices[0].token = 2;
  EXPECT_THROW(s.validate(), Error);
  s.slices[0].token = 0;
  s.slices[0].values[0] = -1.0f;
  EXPECT_THROW(s.validate(), Error);
  testutil::TempDir dir;
  EXPECT_THROW(load_attention_stack(dir.path()), Error);
  testutil::write_text(dir / "stack.json", "{\"target_width\": 4}");
  try {
    load_attention_stack(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::decode);
  }
}

#include <gtest/gtest.h>

#include <numbers>

#include "novelseg/novelseg.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace novelseg;
using std::numbers::pi;

namespace {

// Rectangle whose top edge carries `teeth` triangular teeth.
BinaryMask sawtooth(int teeth, int tooth_width, int tooth_height) {
  const int w = teeth * tooth_width + 20;
  BinaryMask m(w, 60);
  for (int x = 10; x < 10 + teeth * tooth_width; ++x) {
    const int phase = (x - 10) % tooth_width;
    const int h = tooth_height * std::min(phase, tooth_width - 1 - phase) * 2 / (tooth_width - 1);
    for (int y = 30 - h; y < 50; ++y) m.set(x, y);
  }
  return m;
}

BinaryMask square10() { return oracle::box(14, 14, 2, 2, 11, 11); }
BinaryMask strip1x20() { return oracle::box(24, 5, 2, 2, 21, 2); }

}  // namespace

TEST(PolsbyPopper, SquareIsExact) {
  EXPECT_NEAR(polsby_popper(square10()), 4 * pi * 100 / (36.0 * 36.0), 1e-12);
}

TEST(PolsbyPopper, StripUsesOutAndBackPerimeter) {
  EXPECT_NEAR(polsby_popper(strip1x20()), 4 * pi * 20 / (38.0 * 38.0), 1e-12);
  EXPECT_LT(polsby_popper(strip1x20()), 0.6);
}

TEST(PolsbyPopper, DiskGoldenValue) {
  const double pp = polsby_popper(oracle::disk(110, 110, 55, 55, 50));
  EXPECT_GE(pp, 0.85);
  EXPECT_LE(pp, 1.05);
  EXPECT_NEAR(pp, 0.90688055971771708, 1e-12);
}

TEST(PolsbyPopper, UsesLargestComponentAndRejectsDegenerate) {
  auto m = square10();
  m.set(0, 0);
  EXPECT_NEAR(polsby_popper(m), 4 * pi * 100 / (36.0 * 36.0), 1e-12);
  EXPECT_THROW(polsby_popper(BinaryMask(4, 4)), Error);
  BinaryMask dot(4, 4);
  dot.set(1, 1);
  try {
    polsby_popper(dot);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_geometry);
  }
}

TEST(Smoothness, SquaresOnlyLoseCorners) {
  // A disk element trims square corners, so the smoothed contour is shorter
  // and S sits slightly above 1.
  for (int w : {10, 20, 40}) {
    const auto m = oracle::box(w + 10, w + 10, 5, 5, w + 4, w + 4);
    const auto s = smoothness(m);
    ASSERT_TRUE(s);
    EXPECT_GE(*s, 1.0) << w;
    EXPECT_LT(*s, 1.2) << w;
  }
}

TEST(Smoothness, DiskIsUnchanged) {
  EXPECT_DOUBLE_EQ(*smoothness(oracle::disk(110, 110, 55, 55, 50)), 1.0);
}

TEST(Smoothness, SawtoothAboveOne) {
  const auto s = smoothness(sawtooth(30, 5, 4));
  ASSERT_TRUE(s);
  EXPECT_GT(*s, 1.0);
}

TEST(Smoothness, TinyBlobIsErased) {
  EXPECT_FALSE(smoothness(oracle::box(8, 8, 3, 3, 4, 4), 3));
  const auto v = curate(oracle::box(8, 8, 3, 3, 4, 4), 0.1, CurationThresholds{.min_area = 1});
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.failed_stage, CurationStage::smoothness);
  EXPECT_FALSE(v.s);
}

TEST(AngularEnergy, RectangleIsFullTurn) {
  EXPECT_NEAR(angular_energy(oracle::box(30, 20, 3, 4, 25, 15)), 2 * pi, 1e-9);
}

TEST(AngularEnergy, ConvexPolygonsTurnOnce) {
  Pcg32 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto poly = oracle::random_convex_polygon(rng, 200, 3 + static_cast<int>(rng.bounded(30)));
    if (poly.size() < 3) continue;
    EXPECT_NEAR(turning_energy(Contour{poly, ContourOrientation::outer}), 2 * pi, 1e-9) << trial;
    std::vector<Pixel> reversed(poly.rbegin(), poly.rend());
    EXPECT_NEAR(turning_energy(Contour{reversed, ContourOrientation::outer}), 2 * pi, 1e-9) << trial;
  }
}

TEST(AngularEnergy, SawtoothExceedsLimit) {
  const auto m = sawtooth(30, 5, 4);
  EXPECT_GT(angular_energy(m), 50.0);
  CurationThresholds loose;
  loose.pp_min = 0.01;
  loose.smooth_min = 0.5;
  const auto v = curate(m, 0.1, loose);
  EXPECT_EQ(v.failed_stage, CurationStage::energy);
  ASSERT_TRUE(v.e_p);
  EXPECT_GT(*v.e_p, 50.0);
  EXPECT_FALSE(curate(m, 0.1, {}).accepted);
}

TEST(AngularEnergy, FewerThanThreeVerticesIsZero) {
  EXPECT_EQ(turning_energy(Contour{{{0, 0}, {3, 0}}, ContourOrientation::outer}), 0.0);
}

TEST(Curate, DefaultThresholds) {
  const CurationThresholds t;
  EXPECT_EQ(t.pp_min, 0.6);
  EXPECT_EQ(t.smooth_min, 1.0);
  EXPECT_EQ(t.energy_max, 50.0);
  EXPECT_EQ(t.ratio_max, 0.4);
}

TEST(Curate, SquareAccepted) {
  const auto v = curate(square10(), 0.1, {});
  EXPECT_TRUE(v.accepted);
  EXPECT_EQ(v.failed_stage, CurationStage::none);
  ASSERT_TRUE(v.pp && v.s && v.e_p && v.attention_ratio && v.area);
  EXPECT_NEAR(*v.pp, 0.9696, 1e-4);
  EXPECT_GE(*v.s, 1.0);
  EXPECT_NEAR(*v.e_p, 2 * pi, 1e-9);
}

TEST(Curate, HighRatioShortCircuits) {
  const auto v = curate(square10(), 0.5, {});
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.failed_stage, CurationStage::ratio);
  EXPECT_TRUE(v.area);
  EXPECT_TRUE(v.attention_ratio);
  EXPECT_FALSE(v.pp);
  EXPECT_FALSE(v.s);
  EXPECT_FALSE(v.e_p);
}

TEST(Curate, StripFailsCompactness) {
  const auto v = curate(strip1x20(), 0.01, {});
  EXPECT_EQ(v.failed_stage, CurationStage::polsby_popper);
  ASSERT_TRUE(v.pp);
  EXPECT_NEAR(*v.pp, 0.174, 1e-3);
  EXPECT_FALSE(v.s);
  EXPECT_FALSE(v.e_p);
}

TEST(Curate, TinyAreaFailsFirst) {
  const auto v = curate(oracle::box(8, 8, 1, 1, 2, 2), 0.9, {});
  EXPECT_EQ(v.failed_stage, CurationStage::area);
  EXPECT_TRUE(v.area);
  EXPECT_FALSE(v.attention_ratio);
}

TEST(Curate, InequalityDirections) {
  CurationThresholds t;
  t.ratio_max = 0.5;
  EXPECT_NE(curate(square10(), 0.5, t).failed_stage, CurationStage::ratio);  // equal passes
  t.pp_min = 4 * pi * 100 / (36.0 * 36.0);
  EXPECT_EQ(curate(square10(), 0.1, t).failed_stage, CurationStage::polsby_popper);  // must exceed
  t.pp_min = 0.6;
  t.energy_max = 2 * pi;
  EXPECT_EQ(curate(square10(), 0.1, t).failed_stage, CurationStage::energy);  // must stay below
  EXPECT_THROW(curate(square10(), 1.5, t), Error);
}

TEST(Curate, ThresholdValidation) {
  CurationThresholds t;
  t.pp_min = 0;
  EXPECT_THROW(t.validate(), Error);
  t = {};
  t.ratio_max = 1.5;
  EXPECT_THROW(t.validate(), Error);
}

namespace {

CurationCandidate write_candidate(const fs::path& dir, const std::string& name, const BinaryMask& m, double ratio) {
  save_image(dir / (name + "_rgb.png"), RgbImage(m.width(), m.height(), Rgb{50, 60, 70}));
  save_mask(dir / (name + "_mask.png"), m);
  return {dir / (name + "_rgb.png"), dir / (name + "_mask.png"), ratio};
}

}  // namespace

TEST(CurateBatch, AllSquaresAccepted) {
  testutil::TempDir dir;
  std::vector<CurationCandidate> c;
  for (int i = 0; i < 3; ++i) c.push_back(write_candidate(dir.path(), "s" + std::to_string(i), square10(), 0.1));
  const auto r = curate_batch(c, {});
  EXPECT_EQ(r.accepted(), 3u);
  for (auto s : kRejectionStages) EXPECT_EQ(r.rejected_at(s), 0u);
}

TEST(CurateBatch, CanonicalMixAndJobsIndependence) {
  testutil::TempDir dir;
  std::vector<CurationCandidate> c = {write_candidate(dir.path(), "a", square10(), 0.1),
                                      write_candidate(dir.path(), "b", square10(), 0.5),
                                      write_candidate(dir.path(), "c", strip1x20(), 0.01)};
  const auto r1 = curate_batch(c, {}, 1);
  EXPECT_EQ(r1.accepted(), 1u);
  EXPECT_EQ(r1.rejected_at(CurationStage::ratio), 1u);
  EXPECT_EQ(r1.rejected_at(CurationStage::polsby_popper), 1u);
  const auto r3 = curate_batch(c, {}, 3);
  ASSERT_EQ(r3.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r1.records[i].verdict, r3.records[i].verdict);
  EXPECT_EQ(to_json(r1).dump(), to_json(r3).dump());
  const auto doc = to_json(r1);
  EXPECT_EQ(doc["counts"]["accepted"], 1);
  EXPECT_EQ(doc["counts"]["ratio"], 1);
  EXPECT_FALSE(doc["candidates"][1].contains("pp"));
}

TEST(CurateBatch, EmptyListAndUnreadableFiles) {
  const auto empty = curate_batch({}, {});
  EXPECT_TRUE(empty.records.empty());
  EXPECT_EQ(empty.accepted(), 0u);
  testutil::TempDir dir;
  auto good = write_candidate(dir.path(), "g", square10(), 0.1);
  testutil::write_text(dir / "bad_mask.png", "not a png");
  CurationCandidate bad{good.image, dir / "bad_mask.png", 0.1};
  const auto r = curate_batch({good, bad}, {});
  EXPECT_TRUE(r.records[0].verdict.accepted);
  EXPECT_EQ(r.records[1].verdict.failed_stage, CurationStage::io);
  EXPECT_FALSE(r.records[1].verdict.detail.empty());
  EXPECT_NE(to_csv(r).find(",io,"), std::string::npos);
}

namespace {

// Square with `teeth` triangular teeth added on top of its upper edge.
BinaryMask toothed_square(int side, int teeth, int height) {
  const int pad = height + 4;
  auto m = oracle::box(side + 8, side + pad + 4, 4, pad, side + 3, pad + side - 1);
  const double width = double(side) / teeth;
  for (int x = 0; x < side; ++x) {
    const double phase = std::fmod(x, width) / width;  // 0..1 across one tooth
    const int h = static_cast<int>(std::lround(height * (1.0 - std::abs(2.0 * phase - 1.0))));
    for (int k = 1; k <= h; ++k) m.set(4 + x, pad - k);
  }
  return m;
}

}  // namespace

TEST(PolsbyPopper, SawtoothLowersCompactness) {
  Pcg32 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const int side = 30 + static_cast<int>(rng.bounded(40));
    const int teeth = 4 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(side / 4 - 3)));
    const int height = 2 + static_cast<int>(rng.bounded(6));
    const auto plain = oracle::box(side + 8, side + height + 8, 4, height + 4, side + 3, height + 3 + side);
    EXPECT_LT(polsby_popper(toothed_square(side, teeth, height)), polsby_popper(plain))
        << side << " " << teeth << " " << height;
  }
}

TEST(Curate, LooseningThresholdsNeverRejects) {
  Pcg32 rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = oracle::random_blob(40, 40, rng);
    if (area(m) == 0) continue;
    const double ratio = rng.uniform01() * 0.6;
    CurationThresholds tight;
    tight.pp_min = 0.3 + rng.uniform01() * 0.5;
    tight.smooth_min = 0.8 + rng.uniform01() * 0.4;
    tight.energy_max = 5 + rng.uniform01() * 50;
    tight.ratio_max = 0.1 + rng.uniform01() * 0.5;
    tight.min_area = 1 + rng.bounded(60);
    CurationThresholds loose = tight;
    loose.pp_min *= rng.uniform01();
    loose.smooth_min *= rng.uniform01();
    loose.energy_max += rng.uniform01() * 20;
    loose.ratio_max = std::min(1.0, loose.ratio_max + rng.uniform01() * 0.3);
    loose.min_area = std::max<std::size_t>(1, loose.min_area - rng.bounded(static_cast<std::uint32_t>(loose.min_area)));
    if (loose.pp_min <= 0) loose.pp_min = 1e-6;
    if (loose.smooth_min <= 0) loose.smooth_min = 1e-6;
    const auto a = curate(m, ratio, tight);
    if (a.accepted) EXPECT_TRUE(curate(m, ratio, loose).accepted) << trial;
    EXPECT_EQ(curate(m, ratio, tight), a);
  }
}

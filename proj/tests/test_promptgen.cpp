#include <gtest/gtest.h>

#include <map>

#include "novelseg/novelseg.hpp"
#include "test_util.hpp"

using namespace novelseg;

namespace {

PromptSpec bus_spec() {
  return {"bus", {"school bus"}, {"in the street"}, "ego camera, color", "grayscale, artistic, painting"};
}

PromptSpec grid_spec(int variants, int locations) {
  PromptSpec s{"car", {}, {}, "ego camera", ""};
  for (int v = 0; v < variants; ++v) s.variants.push_back("car v" + std::to_string(v));
  for (int l = 0; l < locations; ++l) s.locations.push_back("at l" + std::to_string(l));
  return s;
}

}  // namespace

TEST(Prompts, SingleCombination) {
  const auto p = generate_prompts(bus_spec(), 1, 0);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].prompt, "school bus in the street, ego camera, color");
  EXPECT_EQ(p[0].simplified, "bus in the street, ego camera, color");
  EXPECT_EQ(p[0].negative, "grayscale, artistic, painting");
}

TEST(Prompts, DeterministicUnderSeed) {
  const auto spec = grid_spec(3, 4);
  EXPECT_EQ(generate_prompts(spec, 5, 17), generate_prompts(spec, 5, 17));
  // The first k prompts do not depend on n.
  const auto longer = generate_prompts(spec, 50, 17);
  const auto shorter = generate_prompts(spec, 5, 17);
  EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), longer.begin()));
  EXPECT_NE(generate_prompts(spec, 50, 18), longer);
}

TEST(Prompts, TwoByTwoFrequencies) {
  std::map<std::string, int> freq;
  for (const auto& p : generate_prompts(grid_spec(2, 2), 1000, 5)) ++freq[p.prompt];
  ASSERT_EQ(freq.size(), 4u);
  for (const auto& [k, n] : freq) {
    EXPECT_GE(n, 200) << k;
    EXPECT_LE(n, 300) << k;
  }
}

TEST(Prompts, UniformChiSquare) {
  // 12 cells, 11 degrees of freedom; 31.26 is the p = 0.001 critical value.
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::map<std::string, int> freq;
    for (const auto& p : generate_prompts(grid_spec(3, 4), 10000, seed)) ++freq[p.prompt];
    ASSERT_EQ(freq.size(), 12u);
    const double expected = 10000.0 / 12.0;
    double chi2 = 0;
    for (const auto& [k, n] : freq) chi2 += (n - expected) * (n - expected) / expected;
    EXPECT_LT(chi2, 31.26) << seed;
  }
}

TEST(Prompts, SimplifiedKeepsLocation) {
  for (const auto& p : generate_prompts(grid_spec(3, 4), 100, 9)) {
    const auto loc = p.prompt.substr(p.prompt.find(" at "));
    EXPECT_EQ(p.simplified, "car" + loc);
  }
}

TEST(Prompts, InvalidSpecs) {
  auto s = bus_spec();
  s.variants.clear();
  EXPECT_THROW(generate_prompts(s, 1, 0), Error);
  s = bus_spec();
  s.locations.clear();
  EXPECT_THROW(generate_prompts(s, 1, 0), Error);
  s = bus_spec();
  s.variants.push_back("tram");
  EXPECT_THROW(generate_prompts(s, 1, 0), Error);
  EXPECT_THROW(generate_prompts(bus_spec(), 0, 0), Error);
}

TEST(PromptSpecFile, LoadsToml) {
  testutil::TempDir dir;
  testutil::write_text(dir / "spec.toml",
                       "class_token = \"bus\"\n"
                       "variants = [\"school bus\", \"double-decker bus\"]\n"
                       "locations = [\"in the street\"]\n"
                       "style_suffix = \"ego camera, color\"\n"
                       "negative_prompt = \"grayscale\"\n");
  const auto spec = load_prompt_spec(dir / "spec.toml");
  EXPECT_EQ(spec.variants.size(), 2u);
  EXPECT_EQ(spec.negative_prompt, "grayscale");
  const auto lines = to_jsonl(generate_prompts(spec, 3, 1));
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 3);
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  EXPECT_EQ(first["simplified"], "bus in the street, ego camera, color");
}

TEST(PromptSpecFile, Errors) {
  testutil::TempDir dir;
  try {
    load_prompt_spec(dir / "missing.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
  testutil::write_text(dir / "bad.toml", "class_token = [\n");
  EXPECT_THROW(load_prompt_spec(dir / "bad.toml"), Error);
  testutil::write_text(dir / "nums.toml", "class_token = \"bus\"\nvariants = [1]\nlocations = [\"x\"]\n");
  EXPECT_THROW(load_prompt_spec(dir / "nums.toml"), Error);
}

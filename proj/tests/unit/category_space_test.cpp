#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "apidrift/category_space.hpp"
#include "apidrift/error.hpp"
#include "paper_data.hpp"

namespace apidrift {
namespace {

TEST(CategorySpace, Sizes) {
  EXPECT_EQ(CategorySpace::build({"a"}, SpaceMode::Single).size(), 1u);
  EXPECT_EQ(CategorySpace::build({"a", "b", "c"}, SpaceMode::Single).size(), 3u);
  EXPECT_EQ(CategorySpace::build({"a", "b"}, SpaceMode::Pair).size(), 9u);
  EXPECT_EQ(testdata::boutique_space()->size(), 100u);
}

TEST(CategorySpace, SingleApiEncodesToZero) {
  auto s = CategorySpace::build({"a"}, SpaceMode::Single);
  EXPECT_EQ(s.encode(Observation::single("a")), 0u);
}

TEST(CategorySpace, PairLayoutPutsNullLast) {
  auto s = CategorySpace::build({"a", "b"}, SpaceMode::Pair);
  EXPECT_EQ(s.null_position(), 2u);
  EXPECT_EQ(s.encode(Observation::pair("a", "a")), 0u);
  EXPECT_EQ(s.encode(Observation::pair("a", "b")), 1u);
  EXPECT_EQ(s.encode(Observation::pair("a", std::nullopt)), 2u);
  EXPECT_EQ(s.encode(Observation::pair(std::nullopt, "b")), 7u);
  EXPECT_EQ(s.null_pair_index(), 8u);
  EXPECT_FALSE(s.admissible(8));
  EXPECT_EQ(s.label(7), "(\xE2\x88\x85,b)");

  auto boutique = testdata::boutique_space();
  EXPECT_EQ(testdata::pair_at("frontend", "productcatalogservice"), 46u);
  EXPECT_EQ(boutique->encode(Observation::pair(std::nullopt, "frontend")), 94u);
}

TEST(CategorySpace, EnumerationCoversAllPairs) {
  auto s = CategorySpace::build({"a", "b"}, SpaceMode::Pair);
  std::set<std::string> labels;
  for (CategoryIndex i = 0; i < s.size(); ++i) labels.insert(s.label(i));
  EXPECT_EQ(labels.size(), 9u);
  EXPECT_TRUE(labels.count("(\xE2\x88\x85,\xE2\x88\x85)"));
}

TEST(CategorySpace, EncodeDecodeRoundTrip) {
  auto s = testdata::boutique_space();
  for (CategoryIndex i = 0; i < s->size(); ++i) {
    if (!s->admissible(i)) continue;
    EXPECT_EQ(s->encode(s->decode(i)), i) << s->label(i);
  }
  auto single = CategorySpace::build({"x", "y", "z"}, SpaceMode::Single);
  for (CategoryIndex i = 0; i < single.size(); ++i) EXPECT_EQ(single.encode(single.decode(i)), i);
}

TEST(CategorySpace, NullNullIsRejected) {
  auto s = testdata::boutique_space();
  EXPECT_THROW(s->encode(Observation::pair(std::nullopt, std::nullopt)), ValidationError);
  EXPECT_THROW(s->decode(s->null_pair_index()), ValidationError);
}

TEST(CategorySpace, UnknownLabelIsNamed) {
  auto s = testdata::boutique_space();
  try {
    s->encode(Observation::pair("frontend", "paymentservice"));
    FAIL() << "expected UnknownCategory";
  } catch (const UnknownCategory& e) {
    EXPECT_EQ(e.label(), "paymentservice");
  }
}

TEST(CategorySpace, RejectsBadApiLists) {
  EXPECT_THROW(CategorySpace::build({}, SpaceMode::Single), ValidationError);
  EXPECT_THROW(CategorySpace::build({"a", "a"}, SpaceMode::Pair), ValidationError);
  EXPECT_THROW(CategorySpace::build({""}, SpaceMode::Single), ValidationError);
}

TEST(CategorySpace, SingleModeRejectsParents) {
  auto s = CategorySpace::build({"a", "b"}, SpaceMode::Single);
  EXPECT_THROW(s.encode(Observation::pair("a", "b")), ValidationError);
}

TEST(CategorySpace, JsonRoundTrip) {
  auto s = testdata::boutique_space();
  auto back = space_from_json(to_json(*s));
  EXPECT_EQ(*back, *s);
  EXPECT_EQ(to_json(*s)["mode"], "pair");
  EXPECT_THROW(space_from_json(nlohmann::json{{"mode", "triple"}, {"apis", {"a"}}}), ValidationError);
}

TEST(CategorySpace, ModeNames) {
  EXPECT_EQ(parse_space_mode("single"), SpaceMode::Single);
  EXPECT_EQ(parse_space_mode("pair"), SpaceMode::Pair);
  EXPECT_THROW(parse_space_mode("both"), ValidationError);
}

}  // namespace
}  // namespace apidrift

#include "taglok/tagmap.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace taglok;

namespace {

TagEntry tag(int id, SizeClass c, double x, double y, double yaw = 0.0) {
  return {id, {Vector3(x, y, 0), UnitQuaternion::from_axis_angle(Vector3::UnitZ(), yaw)}, c};
}

TagMap parse(const std::string& text) {
  std::istringstream in(text);
  return parse_map(in, "m");
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(SizeClass, SideLengthsDoubleEachStep) {
  EXPECT_DOUBLE_EQ(side_length(SizeClass::S), 0.0575);
  EXPECT_DOUBLE_EQ(side_length(SizeClass::M), 0.115);
  EXPECT_DOUBLE_EQ(side_length(SizeClass::L), 0.23);
  EXPECT_DOUBLE_EQ(side_length(SizeClass::XL), 0.46);
  for (SizeClass c : kAllSizeClasses) EXPECT_EQ(parse_size_class(label(c)), c);
  EXPECT_FALSE(parse_size_class("XXL"));
}

TEST(TagMap, LookupAndHistogram) {
  const TagMap m({tag(7, SizeClass::XL, 1, 1), tag(3, SizeClass::S, 0.1, 0.1), tag(4, SizeClass::S, 0.2, 0.1)},
                 {2, 2});
  ASSERT_NE(m.lookup(7), nullptr);
  EXPECT_EQ(m.lookup(7)->size_class, SizeClass::XL);
  EXPECT_EQ(m.lookup(8), nullptr);
  const auto h = m.class_histogram();
  EXPECT_EQ(h[0], 2u);
  EXPECT_EQ(h[3], 1u);
}

TEST(TagMap, RejectsDuplicateIds) {
  EXPECT_THROW(TagMap({tag(1, SizeClass::S, 0, 0), tag(1, SizeClass::M, 1, 1)}, {2, 2}), MapError);
}

TEST(TagMap, RejectsSameClassOverlapButAllowsTouching) {
  EXPECT_THROW(TagMap({tag(1, SizeClass::L, 0, 0), tag(2, SizeClass::L, 0.2, 0)}, {2, 2}), MapError);
  EXPECT_NO_THROW(TagMap({tag(1, SizeClass::L, 0, 0), tag(2, SizeClass::L, 0.23, 0)}, {2, 2}));
  // Different classes may overlap (nested tags).
  EXPECT_NO_THROW(TagMap({tag(1, SizeClass::L, 0, 0), tag(2, SizeClass::S, 0, 0)}, {2, 2}));
  // A 45 degree tag has a wider axis-aligned footprint.
  EXPECT_THROW(TagMap({tag(1, SizeClass::L, 0, 0), tag(2, SizeClass::L, 0.24, 0, kPi / 4)}, {2, 2}), MapError);
}

TEST(TagMap, RejectsNonPositiveExtent) { EXPECT_THROW(TagMap({}, {0, 1}), MapError); }

TEST(PatternMap, DefaultMapSizeAndClasses) {
  const TagMap m = build_pattern_map({3, 5}, PatternSpec::default_tile());
  EXPECT_EQ(m.size(), 15u * 23u);
  const auto h = m.class_histogram();
  EXPECT_EQ(h[class_index(SizeClass::XL)], 15u);
  EXPECT_EQ(h[class_index(SizeClass::L)], 60u);
  EXPECT_EQ(h[class_index(SizeClass::M)], 120u);
  EXPECT_EQ(h[class_index(SizeClass::S)], 150u);
  for (const auto& e : m.entries()) {
    EXPECT_GE(e.pose_in_world.position.x() - e.side() / 2, -1e-12);
    EXPECT_LE(e.pose_in_world.position.x() + e.side() / 2, 3 + 1e-12);
    EXPECT_GE(e.pose_in_world.position.y() - e.side() / 2, -1e-12);
    EXPECT_LE(e.pose_in_world.position.y() + e.side() / 2, 5 + 1e-12);
    EXPECT_EQ(e.pose_in_world.position.z(), 0.0);
  }
}

TEST(PatternMap, IdsAreDenseAndTileOrdered) {
  const TagMap m = build_pattern_map({3, 2}, PatternSpec::default_tile());
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m.entries()[i].id, static_cast<int>(i));
  // Tile (col 1, row 0) begins at id 23 and is mirrored in x.
  const auto& first = *m.lookup(0);
  const auto& mirrored = *m.lookup(23);
  EXPECT_EQ(first.size_class, SizeClass::XL);
  EXPECT_NEAR(mirrored.pose_in_world.position.x(), 1.5, 1e-12);
  const auto& s0 = *m.lookup(13);  // first S of tile 0
  const auto& s1 = *m.lookup(23 + 13);
  EXPECT_EQ(s0.size_class, SizeClass::S);
  EXPECT_NEAR(s0.pose_in_world.position.x(), 0.3175, 1e-12);
  EXPECT_NEAR(s1.pose_in_world.position.x(), 1.0 + 0.6825, 1e-12);
}

TEST(PatternMap, PartialTilesAreDropped) {
  EXPECT_EQ(build_pattern_map({2.7, 1.2}, PatternSpec::default_tile()).size(), 2u * 23u);
  EXPECT_THROW(build_pattern_map({0.5, 3}, PatternSpec::default_tile()), MapError);
}

TEST(PatternMap, RejectsPatternMissingAClass) {
  PatternSpec p;
  p.tags = {{SizeClass::XL, 0.5, 0.5}};
  EXPECT_THROW(build_pattern_map({1, 1}, p), MapError);
}

TEST(MapFile, SaveLoadRoundTrip) {
  const TagMap m = build_pattern_map({2, 3}, PatternSpec::default_tile());
  const std::string path = ::testing::TempDir() + "taglok_roundtrip.map";
  save_map(m, path);
  EXPECT_EQ(load_map(path), m);
  EXPECT_EQ(serialize_map(load_map(path)), serialize_map(m));
}

TEST(MapFile, Fixture) {
  const TagMap m = load_map(std::string(TAGLOK_TEST_DATA) + "/two_tags.map");
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.extent(), (Extent{1.0, 1.0}));
  ASSERT_NE(m.lookup(10), nullptr);
  EXPECT_EQ(m.lookup(10)->size_class, SizeClass::L);
  EXPECT_NEAR(m.lookup(11)->pose_in_world.position.x(), 0.75, 1e-15);
}

TEST(MapFile, CommentsAndBlankLines) {
  const TagMap m = parse("# header follows\n\ntagmap v1 1 1\n5 S 0.1 0.1 0 1 0 0 0  # trailing\n");
  EXPECT_EQ(m.size(), 1u);
}

TEST(MapFile, ErrorsNameLineAndField) {
  EXPECT_EQ(parse_error("tagmap v1 1 1\n1 S 0 0 0 1 0 0\n"), "m:2: field qz: missing or not a number");
  EXPECT_EQ(parse_error("tagmap v1 1 1\n1 Q 0 0 0 1 0 0 0\n"), "m:2: field class: unknown label 'Q'");
  EXPECT_EQ(parse_error("tagmap v1 1 1\nx S 0 0 0 1 0 0 0\n"), "m:2: field id: not an integer 'x'");
  EXPECT_EQ(parse_error("tagmap v1 1 1\n1 S 0 a 0 1 0 0 0\n"), "m:2: field py: missing or not a number");
  EXPECT_EQ(parse_error("tagmap v2 1 1\n"), "m:1: expected header 'tagmap v1 <width> <height>'");
  EXPECT_EQ(parse_error("1 S 0 0 0 1 0 0 0\n"), "m:1: expected header 'tagmap v1 <width> <height>'");
  EXPECT_EQ(parse_error(""), "m: missing header");
  EXPECT_NE(parse_error("tagmap v1 1 1\n1 S 0 0 0 1 0 0 0\n1 S 0.5 0.5 0 1 0 0 0\n").find("duplicate tag id 1"),
            std::string::npos);
}

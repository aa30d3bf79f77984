#pragma once
/**
 * @file tagmap.hpp
 * @brief Size-heterogeneous floor map of fiducial markers.
 *
 * Tags lie on the z = 0 plane with their z-axis pointing up. A map is
 * generated by replicating one tile (PatternSpec) over the extent, mirroring
 * the tile on odd columns and/or odd rows.
 */

#include "taglok/geometry.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace taglok {

enum class SizeClass : int { S = 0, M = 1, L = 2, XL = 3 };

inline constexpr std::array<SizeClass, 4> kAllSizeClasses = {SizeClass::S, SizeClass::M, SizeClass::L,
                                                             SizeClass::XL};

/// h in {0, 1, 2, 3} for S, M, L, XL.
inline constexpr int class_index(SizeClass c) { return static_cast<int>(c); }

/// Printed side length [m]; each class doubles the previous one.
inline constexpr double side_length(SizeClass c) {
  switch (c) {
    case SizeClass::S: return 0.0575;
    case SizeClass::M: return 0.115;
    case SizeClass::L: return 0.23;
    case SizeClass::XL: return 0.46;
  }
  return 0.0;
}

inline constexpr std::string_view label(SizeClass c) {
  switch (c) {
    case SizeClass::S: return "S";
    case SizeClass::M: return "M";
    case SizeClass::L: return "L";
    case SizeClass::XL: return "XL";
  }
  return "?";
}

inline std::optional<SizeClass> parse_size_class(std::string_view s) {
  for (SizeClass c : kAllSizeClasses)
    if (label(c) == s) return c;
  return std::nullopt;
}

struct TagEntry {
  int id = 0;
  Pose pose_in_world;
  SizeClass size_class = SizeClass::S;

  double side() const { return side_length(size_class); }

  bool operator==(const TagEntry&) const = default;
};

struct Extent {
  double width = 0.0;   ///< along world x [m]
  double height = 0.0;  ///< along world y [m]

  bool operator==(const Extent&) const = default;
};

/// Raised for invariant violations on map construction.
class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by load_map; the message names the offending line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double planar_yaw(const UnitQuaternion& q) {
  const RotationMatrix r = quat_to_matrix(q);
  return std::atan2(r(1, 0), r(0, 0));
}

/// Half-width of the axis-aligned box around a square tag of side `side` rotated by `yaw`.
inline double footprint_half(double side, double yaw) {
  return 0.5 * side * (std::abs(std::cos(yaw)) + std::abs(std::sin(yaw)));
}

}  // namespace detail

/**
 * @brief Immutable collection of tags with O(1) id lookup.
 *
 * Construction enforces unique ids and no overlap between the axis-aligned
 * footprints of two tags of the same class (touching is allowed).
 */
class TagMap {
 public:
  TagMap() = default;

  TagMap(std::vector<TagEntry> entries, Extent extent) : entries_(std::move(entries)), extent_(extent) {
    if (!(extent_.width > 0.0) || !(extent_.height > 0.0)) throw MapError("TagMap: extent must be positive");
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i].id, i).second)
        throw MapError("TagMap: duplicate tag id " + std::to_string(entries_[i].id));
    }
    check_overlaps();
  }

  const std::vector<TagEntry>& entries() const { return entries_; }
  const Extent& extent() const { return extent_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// nullptr when the id is not part of the map.
  const TagEntry* lookup(int id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  std::array<std::size_t, 4> class_histogram() const {
    std::array<std::size_t, 4> h{};
    for (const auto& e : entries_) ++h[class_index(e.size_class)];
    return h;
  }

  bool operator==(const TagMap& o) const { return extent_ == o.extent_ && entries_ == o.entries_; }

 private:
  void check_overlaps() const {
    constexpr double kTol = 1e-12;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const double ha = detail::footprint_half(a.side(), detail::planar_yaw(a.pose_in_world.orientation));
      for (std::size_t j = i + 1; j < entries_.size(); ++j) {
        const auto& b = entries_[j];
        if (a.size_class != b.size_class) continue;
        const double hb = detail::footprint_half(b.side(), detail::planar_yaw(b.pose_in_world.orientation));
        const Vector3 d = (a.pose_in_world.position - b.pose_in_world.position).cwiseAbs();
        if (d.x() < ha + hb - kTol && d.y() < ha + hb - kTol)
          throw MapError("TagMap: tags " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                         " of class " + std::string(label(a.size_class)) + " overlap");
      }
    }
  }

  std::vector<TagEntry> entries_;
  Extent extent_{};
  std::unordered_map<int, std::size_t> index_;
};

/// One tag of the base tile, in tile-local coordinates (origin at the tile's lower-left corner).
struct PatternTag {
  SizeClass size_class;
  double x;
  double y;
  double yaw = 0.0;
};

struct PatternSpec {
  double tile_width = 1.0;
  double tile_height = 1.0;
  std::vector<PatternTag> tags;
  bool mirror_odd_columns = true;
  bool mirror_odd_rows = true;

  /**
   * @brief Default 1 m x 1 m tile with 23 tags.
   *
   * One XL centered, an L beyond each XL corner, two M per edge between the
   * L tags, S tags in the gaps beside the M tags (two stacked on the left gap
   * of the bottom/top edges, so the tile is not mirror-symmetric in x).
   * Neighbouring tags keep at least 1 cm of clearance.
   */
  static PatternSpec default_tile() {
    PatternSpec p;
    using enum SizeClass;
    auto& t = p.tags;
    t.push_back({XL, 0.5, 0.5});
    for (double cx : {0.145, 0.855})
      for (double cy : {0.145, 0.855}) t.push_back({L, cx, cy});
    for (double edge : {0.145, 0.855}) {
      for (double along : {0.4325, 0.5675}) {
        t.push_back({M, along, edge});  // bottom / top
        t.push_back({M, edge, along});  // left / right
      }
    }
    for (double edge : {0.145, 0.855}) {
      t.push_back({S, 0.3175, edge - 0.04});
      t.push_back({S, 0.3175, edge + 0.04});
      t.push_back({S, 0.6825, edge});
      t.push_back({S, edge, 0.3175});
      t.push_back({S, edge, 0.6825});
    }
    return p;
  }
};

/**
 * @brief Tiles `extent` with as many whole copies of the pattern as fit.
 *
 * Tile (col, row) has its origin at (col * tile_width, row * tile_height).
 * Odd columns reflect x about the tile's vertical axis, odd rows reflect y
 * about its horizontal axis; each reflection flips the sign of the tag yaw.
 * Tag id = (row * columns + col) * tags_per_tile + local index.
 */
inline TagMap build_pattern_map(Extent extent, const PatternSpec& pattern) {
  if (pattern.tags.empty()) throw MapError("build_pattern_map: empty pattern");
  if (!(pattern.tile_width > 0.0) || !(pattern.tile_height > 0.0))
    throw MapError("build_pattern_map: tile size must be positive");
  for (SizeClass c : kAllSizeClasses) {
    bool found = false;
    for (const auto& t : pattern.tags) found = found || t.size_class == c;
    if (!found) throw MapError("build_pattern_map: pattern lacks class " + std::string(label(c)));
  }
  const int cols = static_cast<int>(std::floor(extent.width / pattern.tile_width + 1e-9));
  const int rows = static_cast<int>(std::floor(extent.height / pattern.tile_height + 1e-9));
  if (cols < 1 || rows < 1) throw MapError("build_pattern_map: extent smaller than one tile");

  const int per_tile = static_cast<int>(pattern.tags.size());
  std::vector<TagEntry> entries;
  entries.reserve(static_cast<std::size_t>(cols * rows * per_tile));
  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) {
      const bool mx = pattern.mirror_odd_columns && (col % 2 == 1);
      const bool my = pattern.mirror_odd_rows && (row % 2 == 1);
      for (int k = 0; k < per_tile; ++k) {
        const PatternTag& pt = pattern.tags[static_cast<std::size_t>(k)];
        const double lx = mx ? pattern.tile_width - pt.x : pt.x;
        const double ly = my ? pattern.tile_height - pt.y : pt.y;
        double yaw = pt.yaw;
        if (mx) yaw = -yaw;
        if (my) yaw = -yaw;
        TagEntry e;
        e.id = (row * cols + col) * per_tile + k;
        e.size_class = pt.size_class;
        e.pose_in_world.position = Vector3(col * pattern.tile_width + lx, row * pattern.tile_height + ly, 0.0);
        e.pose_in_world.orientation = UnitQuaternion::from_axis_angle(Vector3::UnitZ(), yaw).canonical();
        const double h = detail::footprint_half(e.side(), yaw);
        if (lx - h < -1e-12 || lx + h > pattern.tile_width + 1e-12 || ly - h < -1e-12 ||
            ly + h > pattern.tile_height + 1e-12)
          throw MapError("build_pattern_map: pattern tag " + std::to_string(k) + " leaves its tile");
        entries.push_back(e);
      }
    }
  }
  return TagMap(std::move(entries), extent);
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Text serialization; doubles are written with 17 significant digits so load_map is lossless.
inline std::string serialize_map(const TagMap& map) {
  using detail::format_double;
  std::string out = "tagmap v1 " + format_double(map.extent().width) + " " + format_double(map.extent().height) + "\n";
  for (const auto& e : map.entries()) {
    const Vector3& p = e.pose_in_world.position;
    const UnitQuaternion q = e.pose_in_world.orientation.canonical();
    out += std::to_string(e.id) + " " + std::string(label(e.size_class));
    for (double v : {p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z()}) out += " " + format_double(v);
    out += "\n";
  }
  return out;
}

inline void save_map(const TagMap& map, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_map: cannot open " + path);
  f << serialize_map(map);
  if (!f) throw std::runtime_error("save_map: write failed for " + path);
}

inline TagMap parse_map(std::istream& in, const std::string& source = "<map>") {
  std::string line;
  int lineno = 0;
  std::optional<Extent> extent;
  std::vector<TagEntry> entries;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (!extent) {
      std::string version;
      Extent e;
      if (first != "tagmap" || !(ls >> version) || version != "v1") throw fail("expected header 'tagmap v1 <width> <height>'");
      if (!(ls >> e.width)) throw fail("header: bad width");
      if (!(ls >> e.height)) throw fail("header: bad height");
      std::string extra;
      if (ls >> extra) throw fail("header: trailing field '" + extra + "'");
      extent = e;
      continue;
    }
    TagEntry e;
    std::size_t used = 0;
    try {
      e.id = std::stoi(first, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != first.size()) throw fail("field id: not an integer '" + first + "'");
    std::string cls;
    if (!(ls >> cls)) throw fail("field class: missing");
    const auto c = parse_size_class(cls);
    if (!c) throw fail("field class: unknown label '" + cls + "'");
    e.size_class = *c;
    static constexpr const char* kNames[] = {"px", "py", "pz", "qw", "qx", "qy", "qz"};
    double v[7];
    for (int i = 0; i < 7; ++i)
      if (!(ls >> v[i])) throw fail(std::string("field ") + kNames[i] + ": missing or not a number");
    std::string extra;
    if (ls >> extra) throw fail("trailing field '" + extra + "'");
    e.pose_in_world.position = Vector3(v[0], v[1], v[2]);
    try {
      e.pose_in_world.orientation = UnitQuaternion(v[3], v[4], v[5], v[6]);
    } catch (const std::invalid_argument&) {
      throw fail("field qw..qz: zero quaternion");
    }
    entries.push_back(e);
  }
  if (!extent) throw ParseError(source + ": missing header");
  try {
    return TagMap(std::move(entries), *extent);
  } catch (const MapError& err) {
    throw ParseError(source + ": " + err.what());
  }
}

inline TagMap load_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_map: cannot open " + path);
  return parse_map(f, path);
}

}  // namespace taglok

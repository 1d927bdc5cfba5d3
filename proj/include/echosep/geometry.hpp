#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "echosep/common.hpp"

namespace echosep {

// Planar convex polygon wall with an outward unit normal and a scalar
// energy absorption coefficient.
struct Wall {
  std::vector<Vec3> vertices;  // ordered around the polygon
  Vec3 normal;                 // unit, pointing away from the interior
  double absorption = 0.0;     // energy absorption in [0, 1]

  Vec3 origin() const { return vertices.front(); }

  double signed_distance(const Vec3& p) const {
    return normal.dot(p - origin());
  }

  Vec3 reflect(const Vec3& p) const {
    return p - 2.0 * signed_distance(p) * normal;
  }

  // point assumed on (or very near) the wall plane; winding-agnostic
  bool contains(const Vec3& p, double tol = 1e-9) const {
    const std::size_t n = vertices.size();
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : vertices) centroid += v;
    centroid /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& a = vertices[i];
      const Vec3& b = vertices[(i + 1) % n];
      Vec3 edge = b - a;
      Vec3 inward = normal.cross(edge);
      if (inward.dot(centroid - a) < 0.0) inward = -inward;
      if (inward.dot(p - a) < -tol * std::max(1.0, edge.norm())) return false;
    }
    return true;
  }
};

struct Room {
  std::vector<Wall> walls;
  double speed_of_sound = kSpeedOfSound;
  double sample_rate = 16000.0;
  bool is_shoebox = false;
  Vec3 shoebox_size = Vec3::Zero();  // valid when is_shoebox

  bool contains(const Vec3& p, double margin = 0.0) const {
    for (const Wall& w : walls)
      if (w.signed_distance(p) > -margin) return false;
    return true;
  }

  void validate() const {
    if (walls.size() < 4) throw GeometryError("room needs at least 4 walls");
    if (sample_rate <= 0) throw GeometryError("sample_rate must be positive");
    for (const Wall& w : walls) {
      if (w.absorption < 0.0 || w.absorption > 1.0)
        throw GeometryError("wall absorption must lie in [0,1]");
      if (std::abs(w.normal.norm() - 1.0) > 1e-9)
        throw GeometryError("wall normal must be unit length");
    }
  }
};

// Axis-aligned shoebox [0,Lx]x[0,Ly]x[0,Lz].
// Wall order: x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
inline Room make_shoebox(const Vec3& size, double absorption,
                         double sample_rate = 16000.0) {
  Room room;
  room.sample_rate = sample_rate;
  room.is_shoebox = true;
  room.shoebox_size = size;
  const double lx = size.x(), ly = size.y(), lz = size.z();
  auto add = [&](std::vector<Vec3> verts, Vec3 n) {
    Wall w;
    w.vertices = std::move(verts);
    w.normal = n;
    w.absorption = absorption;
    room.walls.push_back(std::move(w));
  };
  add({{0, 0, 0}, {0, ly, 0}, {0, ly, lz}, {0, 0, lz}}, {-1, 0, 0});
  add({{lx, 0, 0}, {lx, 0, lz}, {lx, ly, lz}, {lx, ly, 0}}, {1, 0, 0});
  add({{0, 0, 0}, {0, 0, lz}, {lx, 0, lz}, {lx, 0, 0}}, {0, -1, 0});
  add({{0, ly, 0}, {lx, ly, 0}, {lx, ly, lz}, {0, ly, lz}}, {0, 1, 0});
  add({{0, 0, 0}, {lx, 0, 0}, {lx, ly, 0}, {0, ly, 0}}, {0, 0, -1});
  add({{0, 0, lz}, {0, ly, lz}, {lx, ly, lz}, {lx, 0, lz}}, {0, 0, 1});
  room.validate();
  return room;
}

// Convex polygon floor plan (counter-clockwise in the xy plane) extruded to
// the given height. Produces one wall per edge plus floor and ceiling.
inline Room make_prism(const std::vector<Eigen::Vector2d>& floor_plan,
                       double height, double absorption,
                       double sample_rate = 16000.0) {
  if (floor_plan.size() < 3) throw GeometryError("floor plan needs >= 3 vertices");
  Room room;
  room.sample_rate = sample_rate;
  const std::size_t n = floor_plan.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = floor_plan[i];
    const Eigen::Vector2d& b = floor_plan[(i + 1) % n];
    Eigen::Vector2d e = b - a;
    Eigen::Vector2d out(e.y(), -e.x());  // outward for CCW plans
    out.normalize();
    Wall w;
    w.vertices = {Vec3(a.x(), a.y(), 0), Vec3(b.x(), b.y(), 0),
                  Vec3(b.x(), b.y(), height), Vec3(a.x(), a.y(), height)};
    w.normal = Vec3(out.x(), out.y(), 0);
    w.absorption = absorption;
    room.walls.push_back(std::move(w));
  }
  Wall floor;
  for (std::size_t i = n; i-- > 0;)
    floor.vertices.push_back(Vec3(floor_plan[i].x(), floor_plan[i].y(), 0));
  floor.normal = Vec3(0, 0, -1);
  floor.absorption = absorption;
  room.walls.push_back(std::move(floor));
  Wall ceil;
  for (std::size_t i = 0; i < n; ++i)
    ceil.vertices.push_back(Vec3(floor_plan[i].x(), floor_plan[i].y(), height));
  ceil.normal = Vec3(0, 0, 1);
  ceil.absorption = absorption;
  room.walls.push_back(std::move(ceil));
  room.validate();
  return room;
}

struct ImageSource {
  Vec3 position;
  int order = 0;
  std::vector<int> wall_sequence;  // walls in reflection order
  double attenuation = 1.0;        // product of per-bounce (1-a) gains
};

// Checks that the unfolded path from the image to the receiver crosses each
// wall of the sequence inside its polygon. Standard image-source visibility.
inline bool image_visible(const Room& room, const ImageSource& img,
                          const Vec3& receiver) {
  Vec3 target = img.position;
  Vec3 from = receiver;
  // walk the sequence from the last reflection back to the first
  std::vector<Vec3> chain(img.wall_sequence.size() + 1);
  chain[img.wall_sequence.size()] = img.position;
  for (std::size_t k = img.wall_sequence.size(); k-- > 0;) {
    chain[k] = room.walls[img.wall_sequence[k]].reflect(chain[k + 1]);
  }
  for (std::size_t k = img.wall_sequence.size(); k-- > 0;) {
    const Wall& w = room.walls[img.wall_sequence[(int)k]];
    target = chain[k + 1];
    double d_from = w.signed_distance(from);
    double d_to = w.signed_distance(target);
    if (std::abs(d_from - d_to) < 1e-15) return false;  // parallel
    double t = d_from / (d_from - d_to);
    if (t <= -1e-12 || t >= 1.0 + 1e-12) return false;
    Vec3 hit = from + t * (target - from);
    if (!w.contains(hit, 1e-9)) return false;
    from = hit;
  }
  return true;
}

namespace detail {

struct Vec3Less {
  bool operator()(const Vec3& a, const Vec3& b) const {
    auto key = [](double v) { return std::llround(v * 1e9); };
    return std::make_tuple(key(a.x()), key(a.y()), key(a.z())) <
           std::make_tuple(key(b.x()), key(b.y()), key(b.z()));
  }
};

}  // namespace detail

// Enumerates image sources of `point` up to `max_order` reflections.
// Breadth-first over wall sequences with per-level deduplication of image
// positions; in shoeboxes commuting reflections collapse, keeping the
// enumeration polynomial in the order. When a receiver is given, images
// failing the visibility check are dropped.
inline std::vector<ImageSource> enumerate_images(
    const Room& room, const Vec3& point, int max_order,
    std::optional<Vec3> receiver = std::nullopt) {
  if (!room.contains(point)) throw GeometryError("point outside room");
  if (max_order < 0) throw GeometryError("max_order must be >= 0");

  std::vector<ImageSource> result;
  ImageSource origin;
  origin.position = point;
  result.push_back(origin);

  // Distinct wall orderings can fold to the same image position (commuting
  // reflections); such an image is valid if any ordering passes the
  // visibility trace, so a few alternative sequences are kept per position.
  constexpr std::size_t kMaxAlternatives = 8;
  struct Node {
    Vec3 position;
    std::vector<ImageSource> variants;  // same position, different sequences
  };

  std::map<Vec3, char, detail::Vec3Less> seen;
  seen[point] = 1;

  std::vector<Node> frontier = {{point, {origin}}};
  for (int order = 1; order <= max_order; ++order) {
    std::map<Vec3, Node, detail::Vec3Less> next;
    for (const Node& parent : frontier) {
      for (int w = 0; w < static_cast<int>(room.walls.size()); ++w) {
        const Wall& wall = room.walls[w];
        // only reflect images that lie on the interior side of the wall
        if (wall.signed_distance(parent.position) >= -1e-12) continue;
        const Vec3 pos = wall.reflect(parent.position);
        if (seen.count(pos)) continue;  // reached at a lower order already
        Node& node = next.try_emplace(pos, Node{pos, {}}).first->second;
        for (const ImageSource& pv : parent.variants) {
          if (node.variants.size() >= kMaxAlternatives) break;
          if (!pv.wall_sequence.empty() && pv.wall_sequence.back() == w)
            continue;
          ImageSource child;
          child.position = pos;
          child.order = order;
          child.wall_sequence = pv.wall_sequence;
          child.wall_sequence.push_back(w);
          child.attenuation = pv.attenuation * (1.0 - wall.absorption);
          node.variants.push_back(std::move(child));
        }
      }
    }
    std::vector<Node> level;
    for (auto& [pos, node] : next) {
      if (node.variants.empty()) continue;
      seen[pos] = 1;
      for (const ImageSource& v : node.variants) {
        if (!receiver || image_visible(room, v, *receiver)) {
          result.push_back(v);
          break;
        }
      }
      level.push_back(std::move(node));
    }
    frontier = std::move(level);
  }
  return result;
}

}  // namespace echosep

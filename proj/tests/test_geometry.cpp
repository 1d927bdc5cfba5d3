#include <doctest.h>

#include <map>
#include <set>

#include "echosep/geometry.hpp"

using namespace echosep;

namespace {

// Brute-force mirror enumeration: every wall sequence up to the given
// length, reflected step by step, deduplicated by position, kept if the
// visibility trace from the receiver passes. Independent of the BFS path
// in enumerate_images.
std::vector<ImageSource> brute_force_images(const Room& room, const Vec3& point,
                                            int max_order,
                                            const Vec3& receiver) {
  std::vector<ImageSource> out;
  ImageSource origin;
  origin.position = point;
  out.push_back(origin);
  std::set<std::tuple<long long, long long, long long>> seen;
  auto key = [](const Vec3& p) {
    return std::make_tuple(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9),
                           std::llround(p.z() * 1e9));
  };
  seen.insert(key(point));
  const int W = static_cast<int>(room.walls.size());
  std::vector<std::vector<int>> sequences = {{}};
  for (int order = 1; order <= max_order; ++order) {
    std::vector<std::vector<int>> next;
    for (const auto& seq : sequences)
      for (int w = 0; w < W; ++w) {
        auto s = seq;
        s.push_back(w);
        next.push_back(std::move(s));
      }
    // group this order's sequences by folded position; an image counts if
    // any of its generating sequences is visible from the receiver
    std::map<std::tuple<long long, long long, long long>,
             std::vector<ImageSource>>
        by_pos;
    for (const auto& seq : next) {
      Vec3 p = point;
      double att = 1.0;
      bool degenerate = false;
      for (int w : seq) {
        if (room.walls[w].signed_distance(p) >= -1e-12) {
          degenerate = true;
          break;
        }
        p = room.walls[w].reflect(p);
        att *= (1.0 - room.walls[w].absorption);
      }
      if (degenerate) continue;
      if (seen.count(key(p))) continue;
      ImageSource img;
      img.position = p;
      img.order = order;
      img.wall_sequence = seq;
      img.attenuation = att;
      by_pos[key(p)].push_back(std::move(img));
    }
    for (auto& [k, variants] : by_pos) {
      seen.insert(k);
      for (const ImageSource& v : variants)
        if (image_visible(room, v, receiver)) {
          out.push_back(v);
          break;
        }
    }
    sequences = std::move(next);
  }
  return out;
}

std::multiset<std::tuple<long long, long long, long long>> position_set(
    const std::vector<ImageSource>& imgs) {
  std::multiset<std::tuple<long long, long long, long long>> s;
  for (const auto& i : imgs)
    s.insert(std::make_tuple(std::llround(i.position.x() * 1e9),
                             std::llround(i.position.y() * 1e9),
                             std::llround(i.position.z() * 1e9)));
  return s;
}

}  // namespace

TEST_CASE("first-order shoebox images") {
  Room room = make_shoebox({4, 6, 3}, 0.4);
  Vec3 p(1, 1, 1);
  auto images = enumerate_images(room, p, 1, Vec3(2, 2, 1.5));
  CHECK(images.size() == 7);  // original + 6 mirrors
  bool found = false;
  for (const auto& img : images)
    if ((img.position - Vec3(-1, 1, 1)).norm() < 1e-12) found = true;
  CHECK(found);
  for (const auto& img : images)
    if (img.order == 1)
      CHECK(img.attenuation == doctest::Approx(0.6));
}

TEST_CASE("max_order 0 returns only the point") {
  Room room = make_shoebox({4, 6, 3}, 0.4);
  auto images = enumerate_images(room, {1, 1, 1}, 0);
  REQUIRE(images.size() == 1);
  CHECK(images[0].order == 0);
  CHECK(images[0].wall_sequence.empty());
  CHECK(images[0].attenuation == 1.0);
  CHECK((images[0].position - Vec3(1, 1, 1)).norm() == 0.0);
}

TEST_CASE("point outside room rejected") {
  Room room = make_shoebox({4, 6, 3}, 0.4);
  CHECK_THROWS_AS(enumerate_images(room, {5, 1, 1}, 1), GeometryError);
}

TEST_CASE("oracle equivalence, shoebox order 2") {
  Room room = make_shoebox({4, 6, 3}, 0.4);
  Vec3 p(1, 1, 1), r(2.5, 3.0, 1.5);
  auto fast = enumerate_images(room, p, 2, r);
  auto brute = brute_force_images(room, p, 2, r);
  CHECK(fast.size() == brute.size());
  CHECK(position_set(fast) == position_set(brute));
}

TEST_CASE("oracle equivalence, convex prism order 2") {
  std::vector<Eigen::Vector2d> plan = {{0, 0}, {5, 0}, {6, 3}, {3, 5}, {0, 4}};
  Room room = make_prism(plan, 2.8, 0.3);
  Vec3 p(2, 2, 1.3), r(1.0, 1.2, 1.5);
  auto fast = enumerate_images(room, p, 2, r);
  auto brute = brute_force_images(room, p, 2, r);
  CHECK(fast.size() == brute.size());
  CHECK(position_set(fast) == position_set(brute));
}

TEST_CASE("reflecting back through the wall sequence recovers the source") {
  std::vector<Eigen::Vector2d> plan = {{0, 0}, {5, 0}, {6, 3}, {3, 5}, {0, 4}};
  Room room = make_prism(plan, 2.8, 0.3);
  Vec3 p(2.2, 1.7, 1.1);
  auto images = enumerate_images(room, p, 3, Vec3(1, 1, 1));
  for (const auto& img : images) {
    Vec3 back = img.position;
    for (std::size_t k = img.wall_sequence.size(); k-- > 0;)
      back = room.walls[img.wall_sequence[k]].reflect(back);
    CHECK((back - p).norm() < 1e-9);
    CHECK(static_cast<int>(img.wall_sequence.size()) == img.order);
  }
}

TEST_CASE("image set is prefix-consistent in the order") {
  Room room = make_shoebox({4, 6, 3}, 0.4);
  Vec3 p(1.3, 2.1, 0.9), r(2, 3, 1.5);
  auto lo = enumerate_images(room, p, 2, r);
  auto hi = enumerate_images(room, p, 4, r);
  auto lo_set = position_set(lo);
  auto hi_set = position_set(hi);
  for (const auto& k : lo_set) CHECK(hi_set.count(k) == 1);
}

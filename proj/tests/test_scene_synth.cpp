#include <doctest.h>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/scene_synth.hpp"

using namespace forge;

namespace {

SceneSpec table_scene() {
  SceneSpec s;
  s.image_size = {128, 128};
  s.table_region = {0, 32, 128, 96};
  s.objects = {{"green chip bag", Shape::sprite, std::nullopt, {40, 70, 20, 16}},
               {"coke can", Shape::sprite, std::nullopt, {90, 60, 10, 18}},
               {"sink", Shape::sprite, std::nullopt, {10, 90, 24, 20}}};
  return s;
}

long long truth_total(const GroundTruth& t) {
  long long n = t.table.count() + t.background.count() + t.arm.count() + t.gripper.count();
  for (const auto& o : t.objects) n += o.visible.count();
  return n;
}

}  // namespace

TEST_CASE("generate_scene is deterministic") {
  const auto a = generate_scene(table_scene(), 5);
  const auto b = generate_scene(table_scene(), 5);
  CHECK(a.image == b.image);
  CHECK_FALSE(generate_scene(table_scene(), 6).image == a.image);
}

TEST_CASE("non-overlapping objects have disjoint masks and full visibility") {
  const auto r = generate_scene(table_scene(), 1);
  const auto* bag = r.truth.find("green chip bag");
  const auto* can = r.truth.find("coke can");
  REQUIRE(bag);
  REQUIRE(can);
  CHECK(bag->visible.disjoint_from(can->visible));
  CHECK(bag->visibility() == 1.0);
  CHECK(bag->full_pixels == 20 * 16);
}

TEST_CASE("layers partition the image and masks match drawn pixels") {
  SceneSpec s = table_scene();
  s.objects.push_back({"pepsi can", Shape::sprite, std::nullopt, {45, 72, 10, 10}});
  s.arm_pose = ArmPose{50, 60};
  const auto r = generate_scene(s, 3);
  CHECK(truth_total(r.truth) == s.image_size.pixels());

  for (std::size_t k = 0; k < s.objects.size(); ++k) {
    const Rgb color = sprite_for(s.objects[k].name).color;
    const auto& vis = r.truth.objects[k].visible;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) REQUIRE(vis.at(x, y) == (r.image.at(x, y) == color));
  }
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      REQUIRE(r.truth.table.at(x, y) == is_table_shade(r.image.at(x, y)));
      REQUIRE(r.truth.background.at(x, y) == (r.image.at(x, y) == kBackgroundColor));
    }
}

TEST_CASE("occlusion lowers visibility exactly") {
  SceneSpec s = table_scene();
  // Second object covers the left half of the bag.
  s.objects.push_back({"pepsi can", Shape::rectangle, std::nullopt, {40, 70, 10, 16}});
  const auto r = generate_scene(s, 0);
  CHECK(r.truth.find("green chip bag")->visibility() == 0.5);
}

TEST_CASE("object fully under the arm overlay has visibility 0") {
  SceneSpec s;
  s.image_size = {64, 64};
  s.table_region = {0, 0, 64, 64};
  s.objects = {{"coke can", Shape::rectangle, std::nullopt, {28, 10, 4, 4}}};
  s.arm_pose = ArmPose{30, 40};  // the link covers x in [23, 37) above the palm
  const auto r = generate_scene(s, 0);
  CHECK(r.truth.find("coke can")->visibility() == 0.0);
}

TEST_CASE("ellipse sprites are inscribed in the placement") {
  const auto r = generate_scene(table_scene(), 0);
  const auto* sink = r.truth.find("sink");
  CHECK(sink->full_pixels < 24 * 20);
  CHECK(sink->full_pixels > 24 * 20 * 3 / 4);
  CHECK(*sink->visible.bbox() == Rect{10, 90, 24, 20});
}

TEST_CASE("invalid scenes are rejected") {
  SceneSpec s = table_scene();
  s.objects.push_back({"coke can", Shape::sprite, std::nullopt, {0, 0, 4, 4}});
  CHECK_THROWS_AS(generate_scene(s, 0), ValidationError);
  SceneSpec out = table_scene();
  out.objects[0].placement = {120, 120, 20, 20};
  CHECK_THROWS_AS(generate_scene(out, 0), ValidationError);
}

TEST_CASE("sprite colors never collide with table or background shades") {
  for (const auto& noun : sprite_vocabulary()) {
    const Rgb c = sprite_for(noun).color;
    CHECK_FALSE(is_table_shade(c));
    CHECK(c != kBackgroundColor);
  }
  const Rgb unknown = sprite_for("yellow rubber duck").color;
  CHECK(unknown[0] % 2 == 1);
  CHECK(sprite_for("Yellow Rubber Duck").color == unknown);
}

TEST_CASE("generate_episode: pick green chip bag, T=10") {
  const TaskSpec task{"pick", "green chip bag", table_scene()};
  const auto ep = generate_episode(task, 10, 4);
  CHECK(ep.episode.instruction == "pick green chip bag");
  CHECK(ep.episode.length() == 10);
  CHECK(ep.contact_frame == contact_frame_for(10));
  for (const auto& f : ep.episode.frames) {
    CHECK(f.action.size() == std::size_t(kSynthActionDim));
    CHECK(f.image.size() == ImageSize{128, 128});
  }
  CHECK(ep.episode.frames.back().action[0] == 0.0);
  CHECK(ep.episode.frames.back().action[1] == 0.0);

  const auto again = generate_episode(task, 10, 4);
  CHECK(again.episode == ep.episode);
}

TEST_CASE("generate_episode: arm meets the target only from the contact frame on") {
  const TaskSpec task{"pick", "green chip bag", table_scene()};
  for (std::size_t length : {2u, 5u, 10u, 16u}) {
    const auto ep = generate_episode(task, length, 11);
    for (std::size_t i = 0; i < length; ++i) {
      const auto& spec = ep.frame_specs[i];
      Mask target(spec.image_size);
      for (const auto& o : spec.objects)
        if (o.name == "green chip bag") target.fill_rect(o.placement);
      const bool touching = !ep.truths[i].arm_overlay().disjoint_from(target);
      CHECK_MESSAGE(touching == (i >= ep.contact_frame), "length ", length, " frame ", i);
      CHECK(ep.episode.frames[i].action[6] == (i >= ep.contact_frame ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("generate_episode: T=1 has a zero-motion action") {
  const auto ep = generate_episode({"pick", "coke can", table_scene()}, 1, 2);
  REQUIRE(ep.episode.length() == 1);
  for (double v : ep.episode.frames[0].action) CHECK(v == 0.0);
}

TEST_CASE("generate_episode: actions are the pose deltas") {
  const auto ep = generate_episode({"pick", "coke can", table_scene()}, 8, 9);
  for (std::size_t i = 0; i + 1 < 8; ++i) {
    const auto a = *ep.frame_specs[i].arm_pose, b = *ep.frame_specs[i + 1].arm_pose;
    CHECK(ep.episode.frames[i].action[0] == double(b.x - a.x) / 128.0);
    CHECK(ep.episode.frames[i].action[1] == double(b.y - a.y) / 128.0);
  }
}

TEST_CASE("generate_episode: missing target") {
  CHECK_THROWS_AS(generate_episode({"pick", "yellow rubber duck", table_scene()}, 3, 0),
                  ValidationError);
  CHECK_THROWS_AS(generate_episode({"pick", "coke can", table_scene()}, 0, 0), ValidationError);
}

TEST_CASE("scene json roundtrip") {
  SceneSpec s = table_scene();
  s.objects[1].color = Rgb{1, 3, 5};
  s.objects[2].shape = Shape::rectangle;
  s.arm_pose = ArmPose{3, 4};
  const SceneSpec back = scene_from_json(scene_to_json(s));
  CHECK(scene_to_json(back) == scene_to_json(s));
  CHECK(back.objects[1].color == s.objects[1].color);
  CHECK_THROWS_AS(scene_from_json(nlohmann::json::parse(R"({"objects": [{"name": "x"}]})")),
                  ValidationError);
}

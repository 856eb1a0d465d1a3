#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forge/episode_store.hpp"
#include "forge/image.hpp"
#include "forge/mask.hpp"

namespace forge {

enum class Shape { rectangle, ellipse, sprite };

// Appearance of a named object. Sprite colors have odd values in every
// channel; table and background shades are always even, so the two never
// collide and a color uniquely identifies a sprite noun.
struct SpriteStyle {
  Rgb color;
  Shape shape;  // rectangle or ellipse
};

// Known nouns map to a fixed palette; anything else gets a color hashed from
// the noun. Lookup is case-insensitive.
SpriteStyle sprite_for(std::string_view noun);
bool is_known_sprite(std::string_view noun);
const std::vector<std::string>& sprite_vocabulary();

inline constexpr Rgb kTableColor{158, 122, 84};
inline constexpr Rgb kBackgroundColor{46, 50, 58};
inline constexpr const char* kArmName = "robot arm";
inline constexpr const char* kGripperName = "robot gripper";
inline constexpr const char* kTableName = "table";

// True for pixels that belong to the table texture family (even channels
// within a small band around the table shade).
bool is_table_shade(Rgb c);

struct SceneObject {
  std::string name;
  Shape shape = Shape::sprite;
  std::optional<Rgb> color;  // defaults to the sprite color for the name
  Rect placement;
};

// Position of the gripper palm center.
struct ArmPose {
  int x = 0;
  int y = 0;
  friend bool operator==(const ArmPose&, const ArmPose&) = default;
};

struct SceneSpec {
  ImageSize image_size{256, 256};
  Rect table_region{0, 0, 256, 256};
  std::vector<SceneObject> objects;  // drawn back to front
  std::optional<ArmPose> arm_pose;
};

struct ObjectTruth {
  std::string name;
  Mask visible;
  long long full_pixels = 0;  // un-occluded shape area

  double visibility() const {
    return full_pixels == 0 ? 0.0
                            : static_cast<double>(visible.count()) /
                                  static_cast<double>(full_pixels);
  }
};

struct GroundTruth {
  std::vector<ObjectTruth> objects;
  Mask table;       // visible table pixels
  Mask background;  // pixels outside the table region not covered by anything
  Mask arm;         // arm link
  Mask gripper;

  const ObjectTruth* find(std::string_view name) const;
  // Mask of every arm pixel (link and gripper).
  Mask arm_overlay() const;
};

struct RenderedScene {
  Image image;
  GroundTruth truth;
};

// Throws ValidationError for out-of-bounds placements or duplicate names.
void validate_scene(const SceneSpec& spec);

// Deterministic in (spec, seed); the seed only drives the table texture.
RenderedScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

struct TaskSpec {
  std::string verb;           // e.g. "pick"
  std::string target_object;  // must name an object in the scene
  SceneSpec scene;

  std::string instruction() const { return verb + " " + target_object; }
};

struct RenderedEpisode {
  Episode episode;
  std::vector<GroundTruth> truths;  // one per frame
  std::size_t contact_frame = 0;    // first frame where the gripper touches the target
  std::vector<SceneSpec> frame_specs;
};

inline constexpr int kSynthActionDim = 7;

// Scripted approach-grasp-lift of the target. Actions are the pose deltas to
// the next frame (normalized by image size) plus a gripper-closed scalar.
RenderedEpisode generate_episode(const TaskSpec& task, std::size_t length,
                                 std::uint64_t seed, std::string id = {});

// Frame index at which the gripper first overlaps the target.
std::size_t contact_frame_for(std::size_t length);

SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& spec);

}  // namespace forge

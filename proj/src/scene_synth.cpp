#include "forge/scene_synth.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/hashing.hpp"

namespace forge {

namespace {

constexpr const char* kModule = "scene-synth";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const std::map<std::string, SpriteStyle>& palette() {
  static const std::map<std::string, SpriteStyle> p = {
      {"coke can", {{201, 31, 39}, Shape::rectangle}},
      {"pepsi can", {{31, 71, 181}, Shape::rectangle}},
      {"green chip bag", {{61, 171, 71}, Shape::rectangle}},
      {"chip bag", {{221, 181, 41}, Shape::rectangle}},
      {"blue microfiber cloth", {{81, 151, 231}, Shape::rectangle}},
      {"drawer", {{121, 81, 51}, Shape::rectangle}},
      {"sink", {{171, 175, 181}, Shape::ellipse}},
      {"lunch box", {{231, 111, 161}, Shape::rectangle}},
      {"woven basket", {{181, 141, 83}, Shape::ellipse}},
      {"box of crackers", {{225, 121, 33}, Shape::rectangle}},
      {"robot arm", {{95, 95, 105}, Shape::rectangle}},
      {"robot gripper", {{55, 55, 61}, Shape::rectangle}},
  };
  return p;
}

// Arm geometry relative to the palm center. The link is long enough to
// leave the top of the image from any pose.
constexpr int kPalmHalfW = 14;
constexpr int kPalmHalfH = 3;
constexpr int kFingerW = 5;
constexpr int kFingerH = 12;
constexpr int kLinkHalfW = 7;
constexpr int kLinkH = 400;
constexpr int kLiftPerFrame = 6;

std::vector<Rect> gripper_rects(ArmPose p) {
  return {
      {p.x - kPalmHalfW, p.y - kPalmHalfH, 2 * kPalmHalfW, 2 * kPalmHalfH},
      {p.x - kPalmHalfW, p.y + kPalmHalfH, kFingerW, kFingerH},
      {p.x + kPalmHalfW - kFingerW, p.y + kPalmHalfH, kFingerW, kFingerH},
  };
}

Rect link_rect(ArmPose p) {
  return {p.x - kLinkHalfW, p.y - kPalmHalfH - kLinkH, 2 * kLinkHalfW, kLinkH};
}

Mask shape_mask(ImageSize size, Shape shape, const Rect& r) {
  Mask m(size);
  if (shape == Shape::rectangle) {
    m.fill_rect(r);
    return m;
  }
  // Ellipse inscribed in the placement, tested at pixel centers.
  const double cx = r.x + r.w / 2.0;
  const double cy = r.y + r.h / 2.0;
  const double rx = r.w / 2.0;
  const double ry = r.h / 2.0;
  for (int y = std::max(0, r.y); y < std::min(size.height, r.bottom()); ++y) {
    for (int x = std::max(0, r.x); x < std::min(size.width, r.right()); ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) m.set(x, y);
    }
  }
  return m;
}

std::uint8_t table_channel(int base, std::uint64_t noise) {
  // Even offsets in [-4, 4] keep every table value even.
  const int offset = 2 * static_cast<int>(noise % 5) - 4;
  return static_cast<std::uint8_t>(base + offset);
}

Rect clamp_into(Rect r, ImageSize size) {
  r.x = std::clamp(r.x, 0, std::max(0, size.width - r.w));
  r.y = std::clamp(r.y, 0, std::max(0, size.height - r.h));
  return r;
}

}  // namespace

const std::vector<std::string>& sprite_vocabulary() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (const auto& [name, style] : palette()) out.push_back(name);
    return out;
  }();
  return v;
}

bool is_known_sprite(std::string_view noun) { return palette().count(lower(noun)) > 0; }

SpriteStyle sprite_for(std::string_view noun) {
  const auto key = lower(noun);
  if (auto it = palette().find(key); it != palette().end()) return it->second;
  std::uint64_t h = mix64(fnv1a64(key));
  for (;;) {
    Rgb c{static_cast<std::uint8_t>((h & 0xff) | 1),
          static_cast<std::uint8_t>(((h >> 8) & 0xff) | 1),
          static_cast<std::uint8_t>(((h >> 16) & 0xff) | 1)};
    const bool taken = std::any_of(palette().begin(), palette().end(),
                                   [&](const auto& kv) { return kv.second.color == c; });
    if (!taken) {
      return {c, ((h >> 24) & 1) ? Shape::ellipse : Shape::rectangle};
    }
    h = mix64(h);
  }
}

bool is_table_shade(Rgb c) {
  for (int ch = 0; ch < 3; ++ch) {
    if (c[ch] % 2 != 0) return false;
    if (std::abs(static_cast<int>(c[ch]) - static_cast<int>(kTableColor[ch])) > 4) return false;
  }
  return true;
}

const ObjectTruth* GroundTruth::find(std::string_view name) const {
  for (const auto& o : objects) {
    if (o.name == name) return &o;
  }
  return nullptr;
}

Mask GroundTruth::arm_overlay() const {
  const Mask parts[] = {arm, gripper};
  return mask_union(parts, arm.size());
}

void validate_scene(const SceneSpec& spec) {
  if (spec.image_size.height <= 0 || spec.image_size.width <= 0) {
    throw ValidationError(kModule, "image size must be positive");
  }
  if (!spec.table_region.inside(spec.image_size)) {
    throw ValidationError(kModule, "table region lies outside the image");
  }
  std::set<std::string> names;
  for (const auto& o : spec.objects) {
    if (o.name.empty()) throw ValidationError(kModule, "object with empty name");
    if (!names.insert(o.name).second) {
      throw ValidationError(kModule, "duplicate object name '" + o.name + "'");
    }
    if (!o.placement.inside(spec.image_size)) {
      throw ValidationError(kModule, "object '" + o.name + "' placement lies outside the image");
    }
  }
}

RenderedScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  validate_scene(spec);
  const ImageSize size = spec.image_size;

  // Layer labels: 0 background, 1 table, 2 arm, 3 gripper, 4+k object k.
  constexpr std::uint8_t kBg = 0, kTable = 1, kArm = 2, kGrip = 3, kFirstObject = 4;
  if (spec.objects.size() > 250) throw ValidationError(kModule, "too many objects");
  std::vector<std::uint8_t> label(static_cast<std::size_t>(size.pixels()), kBg);
  auto at = [&](int x, int y) -> std::uint8_t& {
    return label[static_cast<std::size_t>(y) * size.width + x];
  };

  for (int y = spec.table_region.y; y < spec.table_region.bottom(); ++y) {
    for (int x = spec.table_region.x; x < spec.table_region.right(); ++x) at(x, y) = kTable;
  }

  RenderedScene out;
  std::vector<Rgb> colors;
  for (std::size_t k = 0; k < spec.objects.size(); ++k) {
    const auto& o = spec.objects[k];
    const auto style = sprite_for(o.name);
    const Shape shape = o.shape == Shape::sprite ? style.shape : o.shape;
    const Mask full = shape_mask(size, shape, o.placement);
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        if (full.at(x, y)) at(x, y) = static_cast<std::uint8_t>(kFirstObject + k);
      }
    }
    out.truth.objects.push_back({o.name, Mask(size), full.count()});
    colors.push_back(o.color.value_or(style.color));
  }

  if (spec.arm_pose) {
    const Mask link = mask_from_rect(size, link_rect(*spec.arm_pose));
    Mask grip(size);
    for (const auto& r : gripper_rects(*spec.arm_pose)) grip.fill_rect(r);
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        if (grip.at(x, y)) {
          at(x, y) = kGrip;
        } else if (link.at(x, y)) {
          at(x, y) = kArm;
        }
      }
    }
  }

  out.truth.table = Mask(size);
  out.truth.background = Mask(size);
  out.truth.arm = Mask(size);
  out.truth.gripper = Mask(size);
  out.image = Image(size);
  Rng noise(derive_seed(seed, "table-texture"));
  const Rgb arm_color = sprite_for(kArmName).color;
  const Rgb grip_color = sprite_for(kGripperName).color;
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      // Draw the noise for every pixel so the texture does not depend on
      // which pixels happen to be covered.
      const std::uint64_t n = noise.next();
      const auto l = at(x, y);
      switch (l) {
        case kBg:
          out.truth.background.set(x, y);
          out.image.set(x, y, kBackgroundColor);
          break;
        case kTable:
          out.truth.table.set(x, y);
          out.image.set(x, y, {table_channel(kTableColor[0], n),
                               table_channel(kTableColor[1], n >> 8),
                               table_channel(kTableColor[2], n >> 16)});
          break;
        case kArm:
          out.truth.arm.set(x, y);
          out.image.set(x, y, arm_color);
          break;
        case kGrip:
          out.truth.gripper.set(x, y);
          out.image.set(x, y, grip_color);
          break;
        default:
          out.truth.objects[l - kFirstObject].visible.set(x, y);
          out.image.set(x, y, colors[l - kFirstObject]);
      }
    }
  }
  return out;
}

std::size_t contact_frame_for(std::size_t length) {
  if (length <= 1) return 1;
  return std::max<std::size_t>(1, (3 * length) / 5);
}

RenderedEpisode generate_episode(const TaskSpec& task, std::size_t length,
                                 std::uint64_t seed, std::string id) {
  if (length < 1) throw ValidationError(kModule, "episode length must be >= 1");
  validate_scene(task.scene);
  const ImageSize size = task.scene.image_size;

  SceneSpec base = task.scene;
  Rng rng(derive_seed(seed, "episode-layout"));
  for (auto& o : base.objects) {
    o.placement.x += static_cast<int>(rng.between(-4, 4));
    o.placement.y += static_cast<int>(rng.between(-4, 4));
    o.placement = clamp_into(o.placement, size);
  }
  auto target_it = std::find_if(base.objects.begin(), base.objects.end(),
                                [&](const SceneObject& o) { return o.name == task.target_object; });
  if (target_it == base.objects.end()) {
    throw ValidationError(kModule, "target object '" + task.target_object +
                                       "' is not in the scene");
  }
  const std::size_t target_index = static_cast<std::size_t>(target_it - base.objects.begin());
  const Rect target = target_it->placement;

  const ArmPose start{size.width / 2 + static_cast<int>(rng.between(-10, 10)), 20};
  const ArmPose hover{target.x + target.w / 2, target.y - kPalmHalfH - kFingerH - 2};
  const ArmPose grasp{target.x + target.w / 2, target.y + kPalmHalfH};
  const std::size_t contact = contact_frame_for(length);

  std::vector<ArmPose> poses(length);
  std::vector<int> lift(length, 0);
  for (std::size_t i = 0; i < length; ++i) {
    if (i < contact) {
      if (contact == 1) {
        poses[i] = start;
      } else {
        const long long num = static_cast<long long>(i);
        const long long den = static_cast<long long>(contact - 1);
        poses[i] = {start.x + static_cast<int>((hover.x - start.x) * num / den),
                    start.y + static_cast<int>((hover.y - start.y) * num / den)};
      }
    } else {
      const int want = kLiftPerFrame * static_cast<int>(i - contact);
      lift[i] = std::min(want, target.y);
      poses[i] = {grasp.x, grasp.y - lift[i]};
    }
  }

  RenderedEpisode out;
  out.contact_frame = contact;
  out.episode.id = id.empty() ? "ep_" + std::to_string(seed) : std::move(id);
  out.episode.instruction = task.instruction();
  for (std::size_t i = 0; i < length; ++i) {
    SceneSpec frame = base;
    frame.objects[target_index].placement.y -= lift[i];
    frame.arm_pose = poses[i];
    auto rendered = generate_scene(frame, derive_seed(seed, "frame", i));

    ActionVector action(kSynthActionDim, 0.0);
    if (i + 1 < length) {
      action[0] = static_cast<double>(poses[i + 1].x - poses[i].x) / size.width;
      action[1] = static_cast<double>(poses[i + 1].y - poses[i].y) / size.height;
    }
    action[6] = (length > 1 && i >= contact) ? 1.0 : 0.0;

    out.episode.frames.push_back({std::move(rendered.image), std::move(action)});
    out.truths.push_back(std::move(rendered.truth));
    out.frame_specs.push_back(std::move(frame));
  }
  return out;
}

namespace {

Rect rect_from_json(const nlohmann::json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

Shape shape_from_string(const std::string& s) {
  if (s == "rectangle") return Shape::rectangle;
  if (s == "ellipse") return Shape::ellipse;
  if (s == "sprite") return Shape::sprite;
  throw ValidationError(kModule, "unknown shape '" + s + "'");
}

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::rectangle:
      return "rectangle";
    case Shape::ellipse:
      return "ellipse";
    default:
      return "sprite";
  }
}

}  // namespace

SceneSpec scene_from_json(const nlohmann::json& j) {
  try {
    SceneSpec spec;
    if (j.contains("image_size")) {
      spec.image_size = {j["image_size"].at(0).get<int>(), j["image_size"].at(1).get<int>()};
    }
    spec.table_region = j.contains("table_region")
                            ? rect_from_json(j["table_region"])
                            : Rect{0, 0, spec.image_size.width, spec.image_size.height};
    for (const auto& o : j.value("objects", nlohmann::json::array())) {
      SceneObject obj;
      obj.name = o.at("name").get<std::string>();
      obj.shape = shape_from_string(o.value("shape", "sprite"));
      if (o.contains("color")) {
        obj.color = Rgb{o["color"].at(0).get<std::uint8_t>(), o["color"].at(1).get<std::uint8_t>(),
                        o["color"].at(2).get<std::uint8_t>()};
      }
      obj.placement = rect_from_json(o.at("placement"));
      spec.objects.push_back(std::move(obj));
    }
    if (j.contains("arm_pose")) {
      spec.arm_pose = ArmPose{j["arm_pose"].at(0).get<int>(), j["arm_pose"].at(1).get<int>()};
    }
    validate_scene(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed scene: ") + e.what());
  }
}

nlohmann::json scene_to_json(const SceneSpec& spec) {
  nlohmann::json j;
  j["image_size"] = {spec.image_size.height, spec.image_size.width};
  const auto& t = spec.table_region;
  j["table_region"] = {t.x, t.y, t.w, t.h};
  j["objects"] = nlohmann::json::array();
  for (const auto& o : spec.objects) {
    nlohmann::json oj;
    oj["name"] = o.name;
    oj["shape"] = shape_name(o.shape);
    if (o.color) oj["color"] = {(*o.color)[0], (*o.color)[1], (*o.color)[2]};
    oj["placement"] = {o.placement.x, o.placement.y, o.placement.w, o.placement.h};
    j["objects"].push_back(std::move(oj));
  }
  if (spec.arm_pose) j["arm_pose"] = {spec.arm_pose->x, spec.arm_pose->y};
  return j;
}

}  // namespace forge

#include "forge/success_benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "forge/error.hpp"
#include "forge/hashing.hpp"
#include "forge/inpainting.hpp"
#include "forge/prompting.hpp"
#include "forge/segmentation.hpp"

namespace forge {
namespace {

constexpr const char* kModule = "evalkit";
constexpr int kTableTop = 64;
constexpr int kMaxTries = 2000;

bool overlaps(const Rect& a, const Rect& b, int gap) {
  return a.x < b.right() + gap && b.x < a.right() + gap && a.y < b.bottom() + gap &&
         b.y < a.bottom() + gap;
}

Rect random_inside(Rng& rng, const Rect& area, int w, int h, int margin) {
  const int x0 = area.x + margin, x1 = area.right() - margin - w;
  const int y0 = area.y + margin, y1 = area.bottom() - margin - h;
  if (x1 < x0 || y1 < y0) throw ValidationError(kModule, "object does not fit in the drawer");
  return {int(rng.between(x0, x1)), int(rng.between(y0, y1)), w, h};
}

// Splits a total area into `count` boxes of varied aspect.
std::vector<BoxSize> clutter_boxes(Rng& rng, long long area, int count) {
  std::vector<long long> parts;
  if (count == 1) {
    parts.push_back(area);
  } else {
    const long long first = area * rng.between(40, 60) / 100;
    parts = {first, area - first};
  }
  std::vector<BoxSize> boxes;
  for (long long a : parts) {
    const double aspect = double(rng.between(70, 140)) / 100.0;
    const int w = std::max(6, int(std::lround(std::sqrt(double(a) * aspect))));
    const int h = std::max(6, int(std::lround(double(a) / w)));
    boxes.push_back({w, h});
  }
  return boxes;
}

DrawerScene make_scene(const DrawerBenchmarkConfig& config, std::uint64_t seed,
                       const std::string& split, std::size_t index, Label label, bool clutter) {
  Rng rng(derive_seed(seed, "scene:" + split, index));
  const ImageSize size = config.image_size;
  SceneSpec spec;
  spec.image_size = size;
  spec.table_region = {0, kTableTop, size.width, size.height - kTableTop};

  const Rect drawer{int(rng.between(24, 48)), int(rng.between(100, 120)), config.drawer.w,
                    config.drawer.h};
  if (!drawer.inside(size)) throw ValidationError(kModule, "drawer does not fit the image");
  spec.objects.push_back({"drawer", Shape::sprite, std::nullopt, drawer});

  Rect bag;
  if (label == Label::success) {
    bag = random_inside(rng, drawer, config.bag.w, config.bag.h, 4);
  } else {
    const Rect table{0, kTableTop, size.width, size.height - kTableTop};
    int tries = 0;
    do {
      if (++tries > kMaxTries) throw ValidationError(kModule, "no room for the bag on the table");
      bag = random_inside(rng, table, config.bag.w, config.bag.h, 4);
    } while (overlaps(bag, drawer, 2));
  }
  spec.objects.push_back({"green chip bag", Shape::sprite, std::nullopt, bag});

  if (clutter) {
    const int count = int(rng.between(1, 2));
    const long long area = rng.between(config.ood_clutter_min_area, config.ood_clutter_max_area);
    std::vector<std::string> nouns = config.ood_clutter_nouns;
    rng.shuffle(nouns);
    if (nouns.size() < std::size_t(count)) throw ValidationError(kModule, "too few clutter nouns");
    std::vector<Rect> placed{bag};
    const auto boxes = clutter_boxes(rng, area, count);
    for (int k = 0; k < count; ++k) {
      Rect r;
      int tries = 0;
      bool clear = false;
      while (!clear) {
        if (++tries > kMaxTries) throw ValidationError(kModule, "no room for drawer clutter");
        r = random_inside(rng, drawer, boxes[k].w, boxes[k].h, 2);
        clear = std::none_of(placed.begin(), placed.end(),
                             [&](const Rect& p) { return overlaps(r, p, 1); });
      }
      placed.push_back(r);
      spec.objects.push_back({nouns[k], Shape::sprite, std::nullopt, r});
    }
  }

  auto rendered = generate_scene(spec, derive_seed(seed, "texture:" + split, index));
  char id[32];
  std::snprintf(id, sizeof id, "%s_%04zu", split.c_str(), index);
  return {id, {std::move(rendered.image), label}, std::move(rendered.truth)};
}

std::vector<DrawerScene> make_split(const DrawerBenchmarkConfig& config, std::uint64_t seed,
                                    const std::string& split, bool clutter, std::size_t per_class) {
  std::vector<DrawerScene> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i)
    out.push_back(make_scene(config, seed, split, i, i % 2 == 0 ? Label::success : Label::failure,
                             clutter));
  return out;
}

std::vector<LabeledImage> items_of(std::vector<DrawerScene>&& scenes) {
  std::vector<LabeledImage> out;
  for (auto& s : scenes) out.push_back(std::move(s.item));
  return out;
}

std::vector<LabeledImage> with_extra(const std::vector<DrawerScene>& train,
                                     const std::vector<std::vector<LabeledImage>>& extra) {
  std::vector<LabeledImage> out;
  for (const auto& s : train) out.push_back(s.item);
  for (const auto& e : extra) out.insert(out.end(), e.begin(), e.end());
  return out;
}

}  // namespace

DrawerBenchmark make_drawer_benchmark(const DrawerBenchmarkConfig& config, std::uint64_t seed) {
  DrawerBenchmark b;
  b.train = make_split(config, seed, "train", false, config.train_per_class);
  b.in_distribution = items_of(make_split(config, seed, "test", false, config.test_per_class));
  b.ood = items_of(make_split(config, seed, "ood", true, config.test_per_class));
  return b;
}

std::vector<ClutterPass> default_clutter_passes() {
  return {{"chip bag", {22, 20}}, {"coke can", {16, 30}}};
}

std::vector<LabeledImage> clutter_augment(const std::vector<DrawerScene>& train,
                                          const ClutterPass& pass, std::uint64_t seed,
                                          int parallelism) {
  if (train.empty()) return {};
  MockDetectionBackend detection;
  MockInpaintBackend inpaint;
  Dataset source;
  source.name = "drawer-train";
  source.image_size = train.front().item.image.size();
  std::map<std::string, Label> labels;
  for (const auto& s : train) {
    detection.register_frame(s.item.image, s.truth);
    source.episodes.push_back(
        {s.id, kDrawerTask, {Frame{s.item.image, ActionVector(kSynthActionDim, 0.0)}}, std::nullopt});
    labels[s.id] = s.item.label;
  }

  const AugmentationSpec spec{kDrawerTask, kClutteredDrawerTask, std::nullopt};
  const RuleBackend rules(seed, {pass.distractor});
  const PromptTriple triple = propose(rules, {}, spec);
  const auto jobs = jobs_for_task(spec, triple, ThresholdTable::defaults().get("distractor-addition"),
                                  AugmentMode::add_distractor, derive_seed(seed, "clutter:" + pass.distractor));
  PipelineConfig config;
  config.cascade = {source.image_size.width / 4, source.image_size.width};
  config.distractor_box = pass.box;
  config.parallelism = parallelism;

  const auto result = augment_dataset(source, jobs, {detection, inpaint}, config);
  if (!result.report.skips.empty())
    throw ValidationError(kModule, "clutter augmentation skipped " + result.report.skips.front().episode_id +
                                       ": " + result.report.skips.front().cause);
  std::vector<LabeledImage> out;
  for (const auto& e : result.dataset.episodes)
    out.push_back({e.frames.front().image, labels.at(e.provenance->source_episode_id)});
  return out;
}

ToyDetector toy_detector_train(const DrawerBenchmark& benchmark, bool clutter_augmented,
                               std::uint64_t seed, const std::vector<ClutterPass>& passes) {
  std::vector<std::vector<LabeledImage>> extra;
  if (clutter_augmented) {
    const auto chosen = passes.empty() ? default_clutter_passes() : passes;
    for (std::size_t k = 0; k < chosen.size(); ++k)
      extra.push_back(clutter_augment(benchmark.train, chosen[k], derive_seed(seed, "pass", k)));
  }
  const auto training = with_extra(benchmark.train, extra);
  return toy_detector_train(std::span<const LabeledImage>(training));
}

DetectorStudy run_detector_study(const DrawerBenchmarkConfig& config, std::uint64_t seed,
                                 int parallelism) {
  const auto bench = make_drawer_benchmark(config, seed);
  const auto passes = default_clutter_passes();
  std::vector<std::vector<LabeledImage>> extra;
  for (std::size_t k = 0; k < passes.size(); ++k)
    extra.push_back(clutter_augment(bench.train, passes[k], derive_seed(seed, "pass", k), parallelism));

  const std::vector<std::pair<std::string, std::size_t>> columns = {
      {"No Aug", 0}, {"Aug (A)", 1}, {"Aug (A)+(B)", 2}};
  std::vector<MethodPredictions> methods;
  DetectorStudy study;
  for (const auto& [name, n] : columns) {
    const std::vector<std::vector<LabeledImage>> used(extra.begin(), extra.begin() + long(n));
    const auto training = with_extra(bench.train, used);
    const auto detector = toy_detector_train(std::span<const LabeledImage>(training));
    MethodPredictions m{name,
                        {toy_detector_eval(detector, bench.in_distribution, Split::in_distribution),
                         toy_detector_eval(detector, bench.ood, Split::ood)}};
    if (n == 0) {
      std::vector<LabeledImage> own;
      for (const auto& s : bench.train) own.push_back(s.item);
      study.clean_train = f1(toy_detector_eval(detector, own, Split::in_distribution));
      study.clean_in = f1(m.sets[0]);
      study.clean_ood = f1(m.sets[1]);
    }
    if (n == passes.size()) {
      study.augmented_in = f1(m.sets[0]);
      study.augmented_ood = f1(m.sets[1]);
    }
    methods.push_back(std::move(m));
  }
  study.report = evaluate_splits(methods);
  return study;
}

}  // namespace forge

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/evalkit.hpp"
#include "forge/pipeline.hpp"
#include "forge/scene_synth.hpp"

namespace forge {

// Desk-scale success-detection benchmark: a green chip bag is either inside a
// drawer (success) or on the table next to it (failure). OOD scenes put extra
// items in the drawer.
struct DrawerBenchmarkConfig {
  ImageSize image_size{256, 256};
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 30;  // per split
  BoxSize bag{28, 24};
  BoxSize drawer{112, 84};
  // OOD clutter: 1-2 items whose total area falls in this range.
  long long ood_clutter_min_area = 480;
  long long ood_clutter_max_area = 1000;
  std::vector<std::string> ood_clutter_nouns{"pepsi can", "lunch box", "blue microfiber cloth"};
};

struct DrawerScene {
  std::string id;
  LabeledImage item;
  GroundTruth truth;
};

struct DrawerBenchmark {
  std::vector<DrawerScene> train;
  std::vector<LabeledImage> in_distribution;
  std::vector<LabeledImage> ood;
};

inline constexpr const char* kDrawerTask = "place green chip bag into drawer";
inline constexpr const char* kClutteredDrawerTask = "place green chip bag into cluttered drawer";

DrawerBenchmark make_drawer_benchmark(const DrawerBenchmarkConfig& config, std::uint64_t seed);

// One augmentation pass over the training scenes: add-distractor jobs on the
// drawer with mock backends. Labels carry over from the source scenes.
struct ClutterPass {
  std::string distractor;  // e.g. "chip bag"
  BoxSize box;
};

std::vector<LabeledImage> clutter_augment(const std::vector<DrawerScene>& train,
                                          const ClutterPass& pass, std::uint64_t seed,
                                          int parallelism = 1);

// Clean training, or clean training mixed with every clutter pass.
ToyDetector toy_detector_train(const DrawerBenchmark& benchmark, bool clutter_augmented,
                               std::uint64_t seed,
                               const std::vector<ClutterPass>& passes = {});

std::vector<ClutterPass> default_clutter_passes();

struct DetectorStudy {
  EvalReport report;  // columns: No Aug, Aug (A), Aug (A)+(B)
  F1Result clean_in;
  F1Result clean_ood;
  F1Result augmented_in;  // all passes
  F1Result augmented_ood;
  F1Result clean_train;  // the clean detector scored on its own training scenes
};

DetectorStudy run_detector_study(const DrawerBenchmarkConfig& config, std::uint64_t seed,
                                 int parallelism = 1);

}  // namespace forge

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forge/episode_store.hpp"
#include "forge/error.hpp"
#include "forge/inpainting.hpp"
#include "forge/prompting.hpp"
#include "forge/segmentation.hpp"

namespace forge {

enum class AugmentMode { replace_target, add_distractor };
enum class FlagPolicy { warn, reject };

AugmentMode parse_mode(const std::string& s);
const char* mode_name(AugmentMode m);
FlagPolicy parse_flag_policy(const std::string& s);

struct AugmentationJob {
  std::string episode_id;
  AugmentationSpec spec;
  PromptTriple triple;
  ThresholdConfig thresholds;
  std::uint64_t seed = 0;
  AugmentMode mode = AugmentMode::replace_target;
};

struct BoxSize {
  int w = 0;
  int h = 0;
};

struct PipelineConfig {
  CascadeConfig cascade;
  std::optional<BoxSize> distractor_box;  // required by add-distractor jobs
  int parallelism = 1;
  int locality_tolerance = 0;
  FlagPolicy flag_policy = FlagPolicy::warn;
  // One detect call per frame with region and passthrough queries together,
  // or two calls (region first).
  bool batch_queries = true;
  // Region-mask area change between adjacent frames that raises a flag.
  double irregular_mask_ratio = 5.0;
  int max_detections = kDefaultMaxDetections;
  std::string augmented_suffix = "_aug";
};

struct Backends {
  const DetectionBackend& detection;
  const InpaintBackend& inpaint;
};

struct EpisodeFlag {
  std::string episode_id;
  std::optional<std::size_t> frame_index;
  std::string kind;  // "locality" or "irregular-mask"
  std::string detail;
};

struct EpisodeSkip {
  std::string episode_id;
  std::optional<std::size_t> frame_index;
  std::string cause;
  std::optional<double> best_score;
  bool backend_failure = false;
};

// Raised by augment_episode; the whole episode is abandoned.
class EpisodeSkipped : public Error {
 public:
  explicit EpisodeSkipped(EpisodeSkip skip);
  const EpisodeSkip& skip() const { return skip_; }

 private:
  EpisodeSkip skip_;
};

struct AugmentedEpisode {
  Episode episode;
  std::vector<Mask> target_masks;  // per frame, at image resolution
  std::vector<EpisodeFlag> flags;
};

// Per frame: detect, threshold, pick the best region, subtract the
// passthrough union, place the target mask, inpaint through the cascade.
// Actions and length are preserved; the instruction changes only when the
// spec carries a new one. Throws EpisodeSkipped.
AugmentedEpisode augment_episode(const Episode& episode, const AugmentationJob& job,
                                 const Backends& backends, const PipelineConfig& config);

// Inpainting seed for one frame.
std::uint64_t frame_seed(std::uint64_t job_seed, const std::string& episode_id,
                         std::size_t frame_index);

using JobGenerator = std::function<std::optional<AugmentationJob>(const Episode&)>;

// One job per episode whose instruction equals spec.source_task.
JobGenerator jobs_for_task(AugmentationSpec spec, PromptTriple triple, ThresholdConfig thresholds,
                           AugmentMode mode, std::uint64_t seed);

struct AugmentReport {
  std::vector<EpisodeSkip> skips;
  std::vector<EpisodeFlag> flags;
  std::size_t attempted = 0;
};

struct AugmentResult {
  Dataset dataset;
  AugmentReport report;
};

// Episodes run on config.parallelism workers; results are assembled in
// episode-id order so the output does not depend on scheduling.
AugmentResult augment_dataset(const Dataset& dataset, const JobGenerator& jobs,
                              const Backends& backends, const PipelineConfig& config,
                              std::string output_name = {});

nlohmann::ordered_json skips_to_json(const std::vector<EpisodeSkip>& skips);
nlohmann::ordered_json flags_to_json(const std::vector<EpisodeFlag>& flags);

// Dataset plus skips.json and flags.json in the same directory.
void save_augment_result(const AugmentResult& result, const std::filesystem::path& directory);

enum class Origin { original, augmented };

struct MixEntry {
  Origin origin;
  std::string episode_id;
  friend bool operator==(const MixEntry&, const MixEntry&) = default;
};

struct DatasetRef {
  std::string name;
  std::string path;  // relative to the mix file's directory, may be empty
  std::size_t episodes = 0;
  double weight = 0.5;
};

struct MixManifest {
  DatasetRef original;
  DatasetRef augmented;
  std::uint64_t seed = 0;
  std::vector<MixEntry> epoch_order;
};

// Alternating epoch order starting with an original episode. Each side is
// shuffled with a seeded generator; the smaller side cycles, reshuffled per
// cycle, until the larger side is used up. Throws CannotMixError when either
// side is empty.
MixManifest mix_datasets(const Dataset& original, const Dataset& augmented, std::uint64_t seed);

std::string mix_json(const MixManifest& mix);
MixManifest mix_from_json(const nlohmann::json& j);

}  // namespace forge

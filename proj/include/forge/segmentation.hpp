#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forge/http.hpp"
#include "forge/image.hpp"
#include "forge/mask.hpp"
#include "forge/scene_synth.hpp"

namespace forge {

struct Detection {
  std::string query;
  double score = 0.0;
  Rect bbox;
  Mask mask;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Checks score range and that bbox is the tight box of the mask.
bool detection_valid(const Detection& d, ImageSize image_size);

// Builds a detection whose bbox is the tight box of the mask; the mask must
// be nonempty.
Detection make_detection(std::string query, double score, Mask mask);

class DetectionBackend {
 public:
  virtual ~DetectionBackend() = default;
  // Zero or more detections per query, at most max_detections per query.
  virtual std::vector<Detection> detect(const Image& image, std::span<const std::string> queries,
                                        int max_detections) const = 0;
};

inline constexpr int kDefaultMaxDetections = 16;

// Validates queries and every returned detection, then forwards.
std::vector<Detection> detect(const DetectionBackend& backend, const Image& image,
                              std::span<const std::string> queries,
                              int max_detections = kDefaultMaxDetections);

// True when every token of name also appears in query (case-insensitive).
// "drawer" matches "empty drawer"; "pepsi can" does not match "coke can".
bool name_matches_query(std::string_view name, std::string_view query);

// Offline stand-in for an open-vocabulary detector.
//
// Frames registered with their ground truth are answered exactly: one
// detection per visible ground-truth entity (objects, "table", "robot arm",
// "robot gripper") whose name matches the query, scored by its visibility
// fraction. Any other image is answered by color key: each sprite noun
// matching the query is located by its palette color and scored by how much
// of its bounding box it fills.
class MockDetectionBackend : public DetectionBackend {
 public:
  // Register before sharing the backend across threads.
  void register_frame(const Image& image, const GroundTruth& truth);
  std::size_t registered() const;

  std::vector<Detection> detect(const Image& image, std::span<const std::string> queries,
                                int max_detections) const override;

 private:
  struct Entry {
    Image image;
    GroundTruth truth;
  };
  const GroundTruth* lookup(const Image& image) const;

  mutable std::mutex mu_;
  std::multimap<std::uint64_t, Entry> registry_;
};

// Client for POST /v1/detect.
class HttpDetectionBackend : public DetectionBackend {
 public:
  HttpDetectionBackend(std::string base_url, RetryPolicy retry = {});

  std::vector<Detection> detect(const Image& image, std::span<const std::string> queries,
                                int max_detections) const override;

 private:
  JsonHttpClient client_;
};

// Wire helpers shared by client and test servers.
nlohmann::json rle_to_json(const Rle& rle);
Rle rle_from_json(const nlohmann::json& j);
nlohmann::json detection_to_json(const Detection& d);
Detection detection_from_json(const nlohmann::json& j);
nlohmann::json detect_request_json(const Image& image, std::span<const std::string> queries,
                                   int max_detections);
nlohmann::json detect_response_json(std::span<const Detection> detections);

struct ThresholdConfig {
  std::string task_family;
  double region_threshold = 0.0;
  double passthrough_threshold = 0.0;

  friend bool operator==(const ThresholdConfig&, const ThresholdConfig&) = default;
};

// Score thresholds keyed by task family.
class ThresholdTable {
 public:
  // novel-object-pick (0.07, 0.05), sink-placement (0.04, 0.03),
  // distractor-addition (0.3, 0.3).
  static ThresholdTable defaults();
  static ThresholdTable load(const std::filesystem::path& path);
  static ThresholdTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Throws ValidationError for unknown families.
  const ThresholdConfig& get(const std::string& family) const;
  const std::vector<ThresholdConfig>& entries() const { return entries_; }
  void set(ThresholdConfig config);

 private:
  std::vector<ThresholdConfig> entries_;
};

inline const std::vector<std::string>& default_passthrough_queries() {
  static const std::vector<std::string> q = {"robot arm", "robot gripper"};
  return q;
}

// Detections with score >= threshold, input order kept.
std::vector<Detection> filter_by_threshold(std::span<const Detection> detections,
                                           double threshold);

// Highest score; ties go to the earliest. Throws NoDetectionError when empty.
const Detection& select_best(std::span<const Detection> detections);

// region AND NOT union(passthroughs). Throws ValidationError on size mismatch.
Mask subtract_passthrough(const Mask& region, std::span<const Mask> passthroughs);

inline constexpr int kMaxPlacementAttempts = 10000;

// Seeded rejection sampling of a w x h rectangle fully inside region and
// disjoint from every obstacle. Candidates are uniform top-left corners over
// the positions where the rectangle fits inside the region's bounding box.
// Throws PlacementExhaustedError when no candidate succeeds.
Mask sample_free_region(const Mask& region, std::span<const Mask> obstacles, int w, int h,
                        std::uint64_t seed, int max_attempts = kMaxPlacementAttempts);

}  // namespace forge

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forge/image.hpp"

namespace forge {

enum class Label { success, failure };
enum class Split { in_distribution, ood };

const char* label_name(Label l);
const char* split_name(Split s);

inline constexpr double kSuccessThreshold = 0.5;

struct Prediction {
  double score = 0.0;  // in [0,1]
  Label label = Label::failure;
};

struct PredictionSet {
  Split split = Split::in_distribution;
  std::vector<Prediction> items;
};

struct Confusion {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;

  long long total() const { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion;
};

// score >= threshold counts as predicted success.
Confusion confusion_at(std::span<const Prediction> items, double threshold = kSuccessThreshold);
// Undefined precision or recall is 0; F1 is 0 when precision + recall is 0.
F1Result f1_from_confusion(const Confusion& c);
F1Result f1(const PredictionSet& predictions, double threshold = kSuccessThreshold);

struct MethodPredictions {
  std::string method;
  std::vector<PredictionSet> sets;  // must cover both splits
};

struct MethodReport {
  std::string method;
  Confusion in_distribution;
  Confusion ood;
  Confusion overall;  // pooled
  F1Result f1_in_distribution;
  F1Result f1_ood;
  F1Result f1_overall;        // from the pooled confusion
  double f1_overall_mean = 0;  // mean of the two split F1s
};

struct EvalReport {
  std::vector<MethodReport> methods;

  // Rows Overall / In-Distribution / OOD, one column per method, two decimals.
  std::string render_table() const;
  nlohmann::ordered_json to_json() const;
};

// Throws ValidationError naming a method whose split is missing.
EvalReport evaluate_splits(std::span<const MethodPredictions> methods,
                           double threshold = kSuccessThreshold);

// [{"score", "label", "split"}] grouped by split (in-distribution first).
std::vector<PredictionSet> load_predictions(const std::filesystem::path& path);
std::vector<PredictionSet> predictions_from_json(const nlohmann::json& j);
nlohmann::json predictions_to_json(std::span<const PredictionSet> sets);

struct Rollout {
  std::string family;
  std::string task;
  bool success = false;
};

struct TaskKey {
  std::string family;
  std::string task;
};

struct TaskRate {
  std::string task;
  std::size_t rollouts = 0;
  std::optional<double> rate;  // absent when there were no rollouts
};

struct FamilyRate {
  std::string family;
  std::vector<TaskRate> tasks;
  std::optional<double> rate;  // unweighted mean over tasks with a rate
};

// Tasks listed in `tasks` appear even without rollouts; tasks seen only in
// rollouts are appended in first-seen order.
std::vector<FamilyRate> success_rate_table(std::span<const TaskKey> tasks,
                                           std::span<const Rollout> rollouts);
std::string render_success_table(std::span<const FamilyRate> table);

// Nearest-centroid success detector over per-image color histograms.
inline constexpr int kHistogramBins = 32;

// kHistogramBins per channel, each channel normalized to sum to 1.
std::vector<double> color_histogram(const Image& image);

struct LabeledImage {
  Image image;
  Label label = Label::failure;
};

class ToyDetector {
 public:
  ToyDetector(std::vector<double> success_centroid, std::vector<double> failure_centroid);

  // Logistic of (distance to failure centroid - distance to success centroid).
  double score(const Image& image) const;

  const std::vector<double>& success_centroid() const { return success_; }
  const std::vector<double>& failure_centroid() const { return failure_; }

 private:
  std::vector<double> success_;
  std::vector<double> failure_;
};

// Throws ValidationError unless both labels are present.
ToyDetector toy_detector_train(std::span<const LabeledImage> training);
PredictionSet toy_detector_eval(const ToyDetector& detector, std::span<const LabeledImage> scenes,
                                Split split);

}  // namespace forge

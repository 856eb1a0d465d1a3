#include "forge/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/error.hpp"

namespace forge {
namespace {

constexpr const char* kModule = "evalkit";

Label parse_label(const std::string& s) {
  if (s == "success") return Label::success;
  if (s == "failure") return Label::failure;
  throw ValidationError(kModule, "unknown label '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "in_distribution") return Split::in_distribution;
  if (s == "ood") return Split::ood;
  throw ValidationError(kModule, "unknown split '" + s + "'");
}

nlohmann::ordered_json confusion_json(const Confusion& c) {
  nlohmann::ordered_json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["tn"] = c.tn;
  return j;
}

nlohmann::ordered_json f1_json(const F1Result& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["confusion"] = confusion_json(r.confusion);
  return j;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

const char* label_name(Label l) { return l == Label::success ? "success" : "failure"; }
const char* split_name(Split s) { return s == Split::in_distribution ? "in_distribution" : "ood"; }

Confusion confusion_at(std::span<const Prediction> items, double threshold) {
  Confusion c;
  for (const auto& p : items) {
    const bool predicted = p.score >= threshold;
    const bool actual = p.label == Label::success;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

F1Result f1_from_confusion(const Confusion& c) {
  F1Result r;
  r.confusion = c;
  r.precision = c.tp + c.fp > 0 ? double(c.tp) / double(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn > 0 ? double(c.tp) / double(c.tp + c.fn) : 0.0;
  const double sum = r.precision + r.recall;
  r.f1 = sum > 0.0 ? 2.0 * r.precision * r.recall / sum : 0.0;
  return r;
}

F1Result f1(const PredictionSet& predictions, double threshold) {
  return f1_from_confusion(confusion_at(predictions.items, threshold));
}

EvalReport evaluate_splits(std::span<const MethodPredictions> methods, double threshold) {
  EvalReport report;
  for (const auto& m : methods) {
    MethodReport r;
    r.method = m.method;
    bool seen_in = false, seen_ood = false;
    for (const auto& set : m.sets) {
      for (const auto& p : set.items)
        if (!(p.score >= 0.0 && p.score <= 1.0))
          throw ValidationError(kModule, "method '" + m.method + "': score outside [0,1]");
      const Confusion c = confusion_at(set.items, threshold);
      if (set.split == Split::in_distribution) {
        r.in_distribution += c;
        seen_in = true;
      } else {
        r.ood += c;
        seen_ood = true;
      }
    }
    if (!seen_in)
      throw ValidationError(kModule, "method '" + m.method + "' is missing split in_distribution");
    if (!seen_ood) throw ValidationError(kModule, "method '" + m.method + "' is missing split ood");
    r.overall = r.in_distribution;
    r.overall += r.ood;
    r.f1_in_distribution = f1_from_confusion(r.in_distribution);
    r.f1_ood = f1_from_confusion(r.ood);
    r.f1_overall = f1_from_confusion(r.overall);
    r.f1_overall_mean = (r.f1_in_distribution.f1 + r.f1_ood.f1) / 2.0;
    report.methods.push_back(std::move(r));
  }
  return report;
}

std::string EvalReport::render_table() const {
  const std::array<std::string, 3> rows = {"Overall", "In-Distribution", "OOD"};
  std::size_t label_w = 0;
  for (const auto& r : rows) label_w = std::max(label_w, r.size());
  std::vector<std::size_t> widths;
  for (const auto& m : methods) widths.push_back(std::max<std::size_t>(m.method.size(), 4));

  std::string out = fmt::format("{:<{}}", "", label_w);
  for (std::size_t i = 0; i < methods.size(); ++i)
    out += fmt::format(" | {:>{}}", methods[i].method, widths[i]);
  out += "\n";
  for (std::size_t row = 0; row < rows.size(); ++row) {
    out += fmt::format("{:<{}}", rows[row], label_w);
    for (std::size_t i = 0; i < methods.size(); ++i) {
      const auto& m = methods[i];
      const double v = row == 0 ? m.f1_overall.f1 : row == 1 ? m.f1_in_distribution.f1 : m.f1_ood.f1;
      out += fmt::format(" | {:>{}.2f}", v, widths[i]);
    }
    out += "\n";
  }
  return out;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json methods_json = nlohmann::ordered_json::array();
  for (const auto& m : methods) {
    nlohmann::ordered_json j;
    j["method"] = m.method;
    j["overall"] = f1_json(m.f1_overall);
    j["overall_mean_of_splits"] = m.f1_overall_mean;
    j["in_distribution"] = f1_json(m.f1_in_distribution);
    j["ood"] = f1_json(m.f1_ood);
    methods_json.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["threshold"] = kSuccessThreshold;
  out["methods"] = std::move(methods_json);
  return out;
}

std::vector<PredictionSet> predictions_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError(kModule, "predictions must be a JSON array");
  PredictionSet in{Split::in_distribution, {}}, ood{Split::ood, {}};
  std::size_t index = 0;
  for (const auto& item : j) {
    try {
      Prediction p;
      p.score = item.at("score").get<double>();
      if (!(p.score >= 0.0 && p.score <= 1.0))
        throw ValidationError(kModule, "score outside [0,1]");
      p.label = parse_label(item.at("label").get<std::string>());
      const Split split = parse_split(item.at("split").get<std::string>());
      (split == Split::in_distribution ? in : ood).items.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(kModule, "prediction " + std::to_string(index) + ": " + e.what());
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      throw ValidationError(kModule, "prediction " + std::to_string(index) + ": " +
                                         what.substr(std::string(kModule).size() + 2));
    }
    ++index;
  }
  std::vector<PredictionSet> out;
  if (!in.items.empty()) out.push_back(std::move(in));
  if (!ood.items.empty()) out.push_back(std::move(ood));
  return out;
}

std::vector<PredictionSet> load_predictions(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(kModule, path.string() + ": " + e.what());
  }
  return predictions_from_json(j);
}

nlohmann::json predictions_to_json(std::span<const PredictionSet> sets) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& set : sets)
    for (const auto& p : set.items)
      out.push_back({{"score", p.score}, {"label", label_name(p.label)}, {"split", split_name(set.split)}});
  return out;
}

std::vector<FamilyRate> success_rate_table(std::span<const TaskKey> tasks,
                                           std::span<const Rollout> rollouts) {
  std::vector<FamilyRate> table;
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> counts;
  auto family_of = [&](const std::string& name) -> FamilyRate& {
    for (auto& f : table)
      if (f.family == name) return f;
    table.push_back(FamilyRate{name, {}, std::nullopt});
    return table.back();
  };
  auto ensure_task = [&](const std::string& family, const std::string& task) {
    auto& f = family_of(family);
    for (const auto& t : f.tasks)
      if (t.task == task) return;
    f.tasks.push_back(TaskRate{task, 0, std::nullopt});
  };
  for (const auto& t : tasks) ensure_task(t.family, t.task);
  for (const auto& r : rollouts) {
    ensure_task(r.family, r.task);
    auto& c = counts[{r.family, r.task}];
    ++c.first;
    if (r.success) ++c.second;
  }
  for (auto& f : table) {
    double sum = 0.0;
    std::size_t rated = 0;
    for (auto& t : f.tasks) {
      const auto it = counts.find({f.family, t.task});
      if (it == counts.end() || it->second.first == 0) continue;
      t.rollouts = it->second.first;
      t.rate = double(it->second.second) / double(it->second.first);
      sum += *t.rate;
      ++rated;
    }
    if (rated > 0) f.rate = sum / double(rated);
  }
  return table;
}

std::string render_success_table(std::span<const FamilyRate> table) {
  std::size_t w = 6;
  for (const auto& f : table) {
    w = std::max(w, f.family.size());
    for (const auto& t : f.tasks) w = std::max(w, t.task.size() + 2);
  }
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string("-"); };
  std::string out = fmt::format("{:<{}} | {:>5} | {:>8}\n", "Task", w, "Rate", "Rollouts");
  for (const auto& f : table) {
    out += fmt::format("{:<{}} | {:>5} | {:>8}\n", f.family, w, cell(f.rate), "");
    for (const auto& t : f.tasks)
      out += fmt::format("{:<{}} | {:>5} | {:>8}\n", "  " + t.task, w, cell(t.rate), t.rollouts);
  }
  return out;
}

std::vector<double> color_histogram(const Image& image) {
  std::vector<double> h(3 * kHistogramBins, 0.0);
  const std::size_t n = std::size_t(image.size().height) * std::size_t(image.size().width);
  if (n == 0) return h;
  const auto& bytes = image.bytes();
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) h[c * kHistogramBins + bytes[3 * i + c] * kHistogramBins / 256] += 1.0;
  for (auto& v : h) v /= double(n);
  return h;
}

ToyDetector::ToyDetector(std::vector<double> success_centroid, std::vector<double> failure_centroid)
    : success_(std::move(success_centroid)), failure_(std::move(failure_centroid)) {
  if (success_.size() != failure_.size())
    throw ValidationError(kModule, "centroid dimensions differ");
}

double ToyDetector::score(const Image& image) const {
  const auto h = color_histogram(image);
  if (h.size() != success_.size()) throw ValidationError(kModule, "feature dimension mismatch");
  return logistic(distance(h, failure_) - distance(h, success_));
}

ToyDetector toy_detector_train(std::span<const LabeledImage> training) {
  std::vector<double> s(3 * kHistogramBins, 0.0), f(3 * kHistogramBins, 0.0);
  std::size_t ns = 0, nf = 0;
  for (const auto& item : training) {
    const auto h = color_histogram(item.image);
    auto& acc = item.label == Label::success ? s : f;
    for (std::size_t i = 0; i < h.size(); ++i) acc[i] += h[i];
    (item.label == Label::success ? ns : nf) += 1;
  }
  if (ns == 0 || nf == 0)
    throw ValidationError(kModule, "training data needs both success and failure examples");
  for (auto& v : s) v /= double(ns);
  for (auto& v : f) v /= double(nf);
  return ToyDetector(std::move(s), std::move(f));
}

PredictionSet toy_detector_eval(const ToyDetector& detector, std::span<const LabeledImage> scenes,
                                Split split) {
  PredictionSet out{split, {}};
  out.items.reserve(scenes.size());
  for (const auto& scene : scenes) out.items.push_back({detector.score(scene.image), scene.label});
  return out;
}

}  // namespace forge

#include "forge/segmentation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/error.hpp"
#include "forge/hashing.hpp"

namespace forge {

namespace {

constexpr const char* kModule = "segmentation";

std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::uint64_t image_key(const Image& image) {
  std::uint64_t h = fnv1a64(image.bytes());
  return mix64(h ^ (static_cast<std::uint64_t>(image.height()) << 32) ^
               static_cast<std::uint64_t>(image.width()));
}

void sort_and_cap(std::vector<Detection>& dets, int max_detections) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (max_detections >= 0 && dets.size() > static_cast<std::size_t>(max_detections)) {
    dets.resize(static_cast<std::size_t>(max_detections));
  }
}

// Summed-area table over blocked pixels.
class BlockedIntegral {
 public:
  BlockedIntegral(const Mask& region, std::span<const Mask> obstacles)
      : w_(region.width()), sums_(static_cast<std::size_t>((region.height() + 1) * (w_ + 1)), 0) {
    for (int y = 0; y < region.height(); ++y) {
      for (int x = 0; x < w_; ++x) {
        bool blocked = !region.at(x, y);
        for (const auto& o : obstacles) blocked = blocked || o.at(x, y);
        cell(x + 1, y + 1) = (blocked ? 1 : 0) + cell(x, y + 1) + cell(x + 1, y) - cell(x, y);
      }
    }
  }

  long long blocked(const Rect& r) const {
    return cell(r.right(), r.bottom()) - cell(r.x, r.bottom()) - cell(r.right(), r.y) +
           cell(r.x, r.y);
  }

 private:
  long long& cell(int x, int y) { return sums_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
  long long cell(int x, int y) const { return sums_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }

  int w_;
  std::vector<long long> sums_;
};

}  // namespace

bool detection_valid(const Detection& d, ImageSize image_size) {
  if (!(d.score >= 0.0 && d.score <= 1.0)) return false;
  if (d.mask.size() != image_size) return false;
  const auto box = d.mask.bbox();
  return box && *box == d.bbox;
}

Detection make_detection(std::string query, double score, Mask mask) {
  const auto box = mask.bbox();
  if (!box) throw ValidationError(kModule, "detection mask is empty");
  return {std::move(query), score, *box, std::move(mask)};
}

std::vector<Detection> detect(const DetectionBackend& backend, const Image& image,
                              std::span<const std::string> queries, int max_detections) {
  if (queries.empty()) throw ValidationError(kModule, "detect needs at least one query");
  auto dets = backend.detect(image, queries, max_detections);
  for (const auto& d : dets) {
    if (!detection_valid(d, image.size())) {
      throw MalformedResponseError(kModule, "backend returned an invalid detection for '" +
                                                d.query + "'",
                                   detection_to_json(d).dump());
    }
  }
  return dets;
}

bool name_matches_query(std::string_view name, std::string_view query) {
  const auto name_tokens = tokens(name);
  if (name_tokens.empty()) return false;
  const auto query_tokens = tokens(query);
  const std::set<std::string> q(query_tokens.begin(), query_tokens.end());
  return std::all_of(name_tokens.begin(), name_tokens.end(),
                     [&](const std::string& t) { return q.count(t) > 0; });
}

void MockDetectionBackend::register_frame(const Image& image, const GroundTruth& truth) {
  std::lock_guard lock(mu_);
  const auto key = image_key(image);
  auto [lo, hi] = registry_.equal_range(key);
  for (auto it = lo; it != hi; ++it) {
    if (it->second.image == image) {
      it->second.truth = truth;
      return;
    }
  }
  registry_.emplace(key, Entry{image, truth});
}

std::size_t MockDetectionBackend::registered() const {
  std::lock_guard lock(mu_);
  return registry_.size();
}

const GroundTruth* MockDetectionBackend::lookup(const Image& image) const {
  std::lock_guard lock(mu_);
  auto [lo, hi] = registry_.equal_range(image_key(image));
  for (auto it = lo; it != hi; ++it) {
    if (it->second.image == image) return &it->second.truth;
  }
  return nullptr;
}

std::vector<Detection> MockDetectionBackend::detect(const Image& image,
                                                    std::span<const std::string> queries,
                                                    int max_detections) const {
  std::vector<Detection> out;
  const GroundTruth* truth = lookup(image);
  for (const auto& query : queries) {
    std::vector<Detection> dets;
    if (truth) {
      auto consider = [&](std::string_view name, const Mask& visible, long long full) {
        const long long seen = visible.count();
        if (seen == 0 || full == 0 || !name_matches_query(name, query)) return;
        dets.push_back(make_detection(query, static_cast<double>(seen) / static_cast<double>(full),
                                      visible));
      };
      for (const auto& o : truth->objects) consider(o.name, o.visible, o.full_pixels);
      consider(kArmName, truth->arm, truth->arm.count());
      consider(kGripperName, truth->gripper, truth->gripper.count());
      // The table's un-occluded extent is the table region: everything not
      // background.
      consider(kTableName, truth->table,
               truth->table.size().pixels() - truth->background.count());
    } else {
      std::vector<std::string> nouns;
      for (const auto& noun : sprite_vocabulary()) {
        if (name_matches_query(noun, query)) nouns.push_back(noun);
      }
      const auto q = tokens(query);
      std::string joined;
      for (const auto& t : q) joined += (joined.empty() ? "" : " ") + t;
      if (!joined.empty() && !is_known_sprite(joined) && joined != kTableName) {
        nouns.push_back(joined);
      }
      const bool wants_table = name_matches_query(kTableName, query);
      for (const auto& noun : nouns) {
        const Rgb key = sprite_for(noun).color;
        Mask m(image.size());
        for (int y = 0; y < image.height(); ++y) {
          for (int x = 0; x < image.width(); ++x) {
            if (image.at(x, y) == key) m.set(x, y);
          }
        }
        if (!m.any()) continue;
        const auto box = *m.bbox();
        const double score = static_cast<double>(m.count()) /
                             (static_cast<double>(box.w) * static_cast<double>(box.h));
        dets.push_back(make_detection(query, score, std::move(m)));
      }
      if (wants_table) {
        Mask m(image.size());
        for (int y = 0; y < image.height(); ++y) {
          for (int x = 0; x < image.width(); ++x) {
            if (is_table_shade(image.at(x, y))) m.set(x, y);
          }
        }
        if (m.any()) {
          const auto box = *m.bbox();
          const double score = static_cast<double>(m.count()) /
                               (static_cast<double>(box.w) * static_cast<double>(box.h));
          dets.push_back(make_detection(query, score, std::move(m)));
        }
      }
    }
    sort_and_cap(dets, max_detections);
    for (auto& d : dets) out.push_back(std::move(d));
  }
  return out;
}

HttpDetectionBackend::HttpDetectionBackend(std::string base_url, RetryPolicy retry)
    : client_(std::move(base_url), kModule, retry) {}

std::vector<Detection> HttpDetectionBackend::detect(const Image& image,
                                                    std::span<const std::string> queries,
                                                    int max_detections) const {
  const auto reply = client_.post("/v1/detect", detect_request_json(image, queries, max_detections));
  std::vector<Detection> out;
  try {
    for (const auto& d : reply.at("detections")) {
      out.push_back(detection_from_json(d));
      if (!detection_valid(out.back(), image.size())) {
        throw MalformedResponseError(kModule, "detection violates bbox/score/size contract",
                                     d.dump());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponseError(kModule, std::string("malformed detect reply: ") + e.what(),
                                 reply.dump());
  } catch (const ValidationError& e) {
    throw MalformedResponseError(kModule, e.what(), reply.dump());
  }
  return out;
}

nlohmann::json rle_to_json(const Rle& rle) {
  return {{"size", {rle.size.height, rle.size.width}}, {"counts", rle.counts}};
}

Rle rle_from_json(const nlohmann::json& j) {
  Rle rle;
  rle.size = {j.at("size").at(0).get<int>(), j.at("size").at(1).get<int>()};
  rle.counts = j.at("counts").get<std::vector<long long>>();
  return rle;
}

nlohmann::json detection_to_json(const Detection& d) {
  return {{"query", d.query},
          {"score", d.score},
          {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
          {"mask_rle", rle_to_json(rle_encode(d.mask))}};
}

Detection detection_from_json(const nlohmann::json& j) {
  Detection d;
  d.query = j.at("query").get<std::string>();
  d.score = j.at("score").get<double>();
  const auto& b = j.at("bbox");
  d.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
  d.mask = rle_decode(rle_from_json(j.at("mask_rle")));
  return d;
}

nlohmann::json detect_request_json(const Image& image, std::span<const std::string> queries,
                                   int max_detections) {
  const auto png = png_encode(image);
  return {{"image_png_b64", base64_encode(png)},
          {"queries", std::vector<std::string>(queries.begin(), queries.end())},
          {"max_detections", max_detections}};
}

nlohmann::json detect_response_json(std::span<const Detection> detections) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : detections) arr.push_back(detection_to_json(d));
  return {{"detections", arr}};
}

ThresholdTable ThresholdTable::defaults() {
  ThresholdTable t;
  t.entries_ = {
      {"novel-object-pick", 0.07, 0.05},
      {"sink-placement", 0.04, 0.03},
      {"distractor-addition", 0.3, 0.3},
  };
  return t;
}

ThresholdTable ThresholdTable::from_json(const nlohmann::json& j) {
  ThresholdTable t;
  try {
    for (const auto& [family, v] : j.items()) {
      ThresholdConfig c{family, v.at("region_threshold").get<double>(),
                        v.at("passthrough_threshold").get<double>()};
      t.set(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed threshold table: ") + e.what());
  }
  return t;
}

ThresholdTable ThresholdTable::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, path.string() + ": " + e.what());
  }
}

nlohmann::json ThresholdTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& c : entries_) {
    j[c.task_family] = {{"region_threshold", c.region_threshold},
                        {"passthrough_threshold", c.passthrough_threshold}};
  }
  return j;
}

const ThresholdConfig& ThresholdTable::get(const std::string& family) const {
  for (const auto& c : entries_) {
    if (c.task_family == family) return c;
  }
  throw ValidationError(kModule, "no thresholds for task family '" + family + "'");
}

void ThresholdTable::set(ThresholdConfig config) {
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_range(config.region_threshold) || !in_range(config.passthrough_threshold)) {
    throw ValidationError(kModule, "thresholds for '" + config.task_family + "' must lie in [0,1]");
  }
  for (auto& c : entries_) {
    if (c.task_family == config.task_family) {
      c = std::move(config);
      return;
    }
  }
  entries_.push_back(std::move(config));
}

std::vector<Detection> filter_by_threshold(std::span<const Detection> detections,
                                           double threshold) {
  std::vector<Detection> out;
  for (const auto& d : detections) {
    if (d.score >= threshold) out.push_back(d);
  }
  return out;
}

const Detection& select_best(std::span<const Detection> detections) {
  if (detections.empty()) throw NoDetectionError(kModule, "no detection to select from");
  const Detection* best = &detections.front();
  for (const auto& d : detections) {
    if (d.score > best->score) best = &d;
  }
  return *best;
}

Mask subtract_passthrough(const Mask& region, std::span<const Mask> passthroughs) {
  for (const auto& p : passthroughs) {
    if (p.size() != region.size()) {
      throw ValidationError(kModule, "passthrough mask size differs from region mask size");
    }
  }
  Mask out = region;
  for (int y = 0; y < region.height(); ++y) {
    for (int x = 0; x < region.width(); ++x) {
      if (!out.at(x, y)) continue;
      for (const auto& p : passthroughs) {
        if (p.at(x, y)) {
          out.set(x, y, false);
          break;
        }
      }
    }
  }
  return out;
}

Mask sample_free_region(const Mask& region, std::span<const Mask> obstacles, int w, int h,
                        std::uint64_t seed, int max_attempts) {
  const ImageSize size = region.size();
  for (const auto& o : obstacles) {
    if (o.size() != size) throw ValidationError(kModule, "obstacle mask size differs from region");
  }
  if (w <= 0 || h <= 0 || w > size.width || h > size.height) {
    throw ValidationError(kModule, "placement box " + std::to_string(w) + "x" +
                                       std::to_string(h) + " does not fit the image");
  }
  const auto box = region.bbox();
  if (!box || box->w < w || box->h < h) {
    throw PlacementExhaustedError(kModule, "region cannot contain a " + std::to_string(w) + "x" +
                                               std::to_string(h) + " box");
  }
  const BlockedIntegral blocked(region, obstacles);
  Rng rng(seed);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const Rect candidate{static_cast<int>(rng.between(box->x, box->right() - w)),
                         static_cast<int>(rng.between(box->y, box->bottom() - h)), w, h};
    if (blocked.blocked(candidate) == 0) return mask_from_rect(size, candidate);
  }
  throw PlacementExhaustedError(kModule, "no free " + std::to_string(w) + "x" + std::to_string(h) +
                                             " placement after " + std::to_string(max_attempts) +
                                             " attempts");
}

}  // namespace forge

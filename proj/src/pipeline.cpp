#include "forge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/hashing.hpp"

namespace forge {

namespace {

constexpr const char* kModule = "pipeline";

std::string skip_message(const EpisodeSkip& s) {
  std::string msg = "episode " + s.episode_id + " skipped";
  if (s.frame_index) msg += " at frame " + std::to_string(*s.frame_index);
  msg += ": " + s.cause;
  return msg;
}

struct FrameDetections {
  std::vector<Detection> region;
  std::vector<Detection> passthrough;
};

FrameDetections run_detection(const Image& image, const PromptTriple& triple,
                              const Backends& backends, const PipelineConfig& config) {
  FrameDetections out;
  auto sort_into = [&](std::vector<Detection> dets) {
    for (auto& d : dets) {
      if (d.query == triple.region_query) {
        out.region.push_back(std::move(d));
      } else if (std::find(triple.passthrough_queries.begin(), triple.passthrough_queries.end(),
                           d.query) != triple.passthrough_queries.end()) {
        out.passthrough.push_back(std::move(d));
      }
    }
  };
  if (config.batch_queries) {
    std::vector<std::string> queries{triple.region_query};
    queries.insert(queries.end(), triple.passthrough_queries.begin(),
                   triple.passthrough_queries.end());
    sort_into(detect(backends.detection, image, queries, config.max_detections));
  } else {
    const std::vector<std::string> region{triple.region_query};
    sort_into(detect(backends.detection, image, region, config.max_detections));
    sort_into(detect(backends.detection, image, triple.passthrough_queries, config.max_detections));
  }
  return out;
}

}  // namespace

AugmentMode parse_mode(const std::string& s) {
  if (s == "replace-target") return AugmentMode::replace_target;
  if (s == "add-distractor") return AugmentMode::add_distractor;
  throw ValidationError(kModule, "unknown mode '" + s + "' (replace-target | add-distractor)");
}

const char* mode_name(AugmentMode m) {
  return m == AugmentMode::replace_target ? "replace-target" : "add-distractor";
}

FlagPolicy parse_flag_policy(const std::string& s) {
  if (s == "warn") return FlagPolicy::warn;
  if (s == "reject") return FlagPolicy::reject;
  throw ValidationError(kModule, "unknown flag policy '" + s + "' (warn | reject)");
}

EpisodeSkipped::EpisodeSkipped(EpisodeSkip skip)
    : Error(kModule, skip_message(skip)), skip_(std::move(skip)) {}

std::uint64_t frame_seed(std::uint64_t job_seed, const std::string& episode_id,
                         std::size_t frame_index) {
  return derive_seed(job_seed, "frame:" + episode_id, frame_index);
}

AugmentedEpisode augment_episode(const Episode& episode, const AugmentationJob& job,
                                 const Backends& backends, const PipelineConfig& config) {
  if (episode.frames.empty()) throw ValidationError(kModule, "episode " + episode.id + " is empty");
  if (!job.triple.valid()) throw ValidationError(kModule, "job prompt triple has an empty field");
  if (!job.spec.valid()) throw ValidationError(kModule, "job augmentation spec is incomplete");
  if (job.mode == AugmentMode::add_distractor && !config.distractor_box) {
    throw ValidationError(kModule, "add-distractor jobs need a distractor box size");
  }

  auto skip = [&](std::optional<std::size_t> frame, std::string cause,
                  std::optional<double> best = std::nullopt, bool backend = false) {
    throw EpisodeSkipped({episode.id, frame, std::move(cause), best, backend});
  };

  AugmentedEpisode out;
  out.episode.id = episode.id + config.augmented_suffix;
  out.episode.instruction = job.spec.new_instruction.value_or(episode.instruction);
  out.episode.provenance = AugmentedFrom{episode.id, job.triple, job.seed};

  std::optional<Mask> distractor;
  long long previous_area = -1;

  for (std::size_t i = 0; i < episode.frames.size(); ++i) {
    const Frame& frame = episode.frames[i];
    try {
      const auto dets = run_detection(frame.image, job.triple, backends, config);
      const auto regions = filter_by_threshold(dets.region, job.thresholds.region_threshold);
      if (regions.empty()) {
        std::optional<double> best;
        if (!dets.region.empty()) best = select_best(dets.region).score;
        skip(i, "region '" + job.triple.region_query + "' not detected above threshold " +
                    std::to_string(job.thresholds.region_threshold),
             best);
      }
      const Detection& region = select_best(regions);

      std::vector<Mask> pass_masks;
      for (const auto& d : filter_by_threshold(dets.passthrough, job.thresholds.passthrough_threshold)) {
        pass_masks.push_back(d.mask);
      }
      const Mask pass_union = mask_union(pass_masks, frame.image.size());
      const Mask pass_union_arr[] = {pass_union};
      const Mask free = subtract_passthrough(region.mask, pass_union_arr);

      Mask target;
      if (job.mode == AugmentMode::replace_target) {
        target = free;
      } else {
        if (!distractor) {
          try {
            distractor = sample_free_region(free, {}, config.distractor_box->w,
                                            config.distractor_box->h,
                                            derive_seed(job.seed, "placement:" + episode.id));
          } catch (const PlacementExhaustedError& e) {
            skip(i, std::string("distractor placement failed: ") + e.what());
          }
        }
        // The box must stay on the region; passthrough objects may pass in
        // front of it.
        const Mask extent_parts[] = {region.mask, pass_union};
        if (!distractor->subset_of(mask_union(extent_parts, frame.image.size()))) {
          skip(i, "distractor placement no longer lies on region '" + job.triple.region_query + "'");
        }
        target = subtract_passthrough(*distractor, pass_union_arr);
      }

      const long long area = region.mask.count();
      if (previous_area > 0) {
        const double ratio = static_cast<double>(std::max(area, previous_area)) /
                             static_cast<double>(std::min(area, previous_area));
        if (ratio > config.irregular_mask_ratio) {
          out.flags.push_back({episode.id, i, "irregular-mask",
                               "region area " + std::to_string(previous_area) + " -> " +
                                   std::to_string(area)});
        }
      }
      previous_area = area;

      Image image = frame.image;
      if (target.any()) {
        image = inpaint_cascade(backends.inpaint,
                                {frame.image, target, job.triple.inpaint_prompt,
                                 frame_seed(job.seed, episode.id, i)},
                                config.cascade);
        const auto locality = verify_locality(frame.image, image, target, config.locality_tolerance);
        if (!locality.ok) {
          out.flags.push_back({episode.id, i, "locality",
                               "pixel (" + std::to_string(locality.worst_pixel->first) + ", " +
                                   std::to_string(locality.worst_pixel->second) + ") changed by " +
                                   std::to_string(locality.worst_delta)});
        }
      }
      out.episode.frames.push_back({std::move(image), frame.action});
      out.target_masks.push_back(std::move(target));
    } catch (const EpisodeSkipped&) {
      throw;
    } catch (const TransportError& e) {
      skip(i, e.what(), std::nullopt, true);
    } catch (const MalformedResponseError& e) {
      skip(i, e.what(), std::nullopt, true);
    } catch (const Error& e) {
      skip(i, e.what());
    }
  }

  if (config.flag_policy == FlagPolicy::reject && !out.flags.empty()) {
    const auto& f = out.flags.front();
    skip(f.frame_index, "rejected by flag policy: " + f.kind + " (" + f.detail + ")");
  }
  return out;
}

JobGenerator jobs_for_task(AugmentationSpec spec, PromptTriple triple, ThresholdConfig thresholds,
                           AugmentMode mode, std::uint64_t seed) {
  return [=](const Episode& e) -> std::optional<AugmentationJob> {
    if (e.instruction != spec.source_task) return std::nullopt;
    return AugmentationJob{e.id, spec, triple, thresholds, seed, mode};
  };
}

AugmentResult augment_dataset(const Dataset& dataset, const JobGenerator& jobs,
                              const Backends& backends, const PipelineConfig& config,
                              std::string output_name) {
  if (config.parallelism < 1) throw ValidationError(kModule, "parallelism must be >= 1");

  std::vector<const Episode*> order;
  for (const auto& e : dataset.episodes) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](const Episode* a, const Episode* b) { return a->id < b->id; });

  std::vector<std::pair<const Episode*, AugmentationJob>> work;
  for (const auto* e : order) {
    if (auto job = jobs(*e)) work.emplace_back(e, std::move(*job));
  }

  using Outcome = std::variant<std::monostate, AugmentedEpisode, EpisodeSkip>;
  std::vector<Outcome> results(work.size());
  std::vector<std::exception_ptr> failures(work.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < work.size(); k = next++) {
      try {
        results[k] = augment_episode(*work[k].first, work[k].second, backends, config);
      } catch (const EpisodeSkipped& s) {
        results[k] = s.skip();
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(config.parallelism),
                                                std::max<std::size_t>(work.size(), 1));
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
    worker();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  AugmentResult out;
  out.dataset.version = dataset.version;
  out.dataset.name = output_name.empty() ? dataset.name + "-augmented" : std::move(output_name);
  out.dataset.action_dim = dataset.action_dim;
  out.dataset.image_size = dataset.image_size;
  out.report.attempted = work.size();
  for (auto& r : results) {
    if (auto* ok = std::get_if<AugmentedEpisode>(&r)) {
      for (auto& f : ok->flags) out.report.flags.push_back(std::move(f));
      out.dataset.episodes.push_back(std::move(ok->episode));
    } else if (auto* s = std::get_if<EpisodeSkip>(&r)) {
      out.report.skips.push_back(std::move(*s));
    }
  }
  return out;
}

nlohmann::ordered_json skips_to_json(const std::vector<EpisodeSkip>& skips) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : skips) {
    nlohmann::ordered_json j;
    j["episode_id"] = s.episode_id;
    if (s.frame_index) j["frame_index"] = *s.frame_index;
    j["cause"] = s.cause;
    if (s.best_score) j["best_score"] = *s.best_score;
    arr.push_back(std::move(j));
  }
  return arr;
}

nlohmann::ordered_json flags_to_json(const std::vector<EpisodeFlag>& flags) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : flags) {
    nlohmann::ordered_json j;
    j["episode_id"] = f.episode_id;
    if (f.frame_index) j["frame_index"] = *f.frame_index;
    j["kind"] = f.kind;
    j["detail"] = f.detail;
    arr.push_back(std::move(j));
  }
  return arr;
}

void save_augment_result(const AugmentResult& result, const std::filesystem::path& directory) {
  save_dataset(result.dataset, directory);
  write_text_file(directory / "skips.json", skips_to_json(result.report.skips).dump(2) + "\n");
  write_text_file(directory / "flags.json", flags_to_json(result.report.flags).dump(2) + "\n");
}

MixManifest mix_datasets(const Dataset& original, const Dataset& augmented, std::uint64_t seed) {
  if (original.episodes.empty() || augmented.episodes.empty()) {
    throw CannotMixError(kModule, std::string("cannot mix: ") +
                                      (original.episodes.empty() ? "original" : "augmented") +
                                      " dataset is empty");
  }
  auto sorted_ids = [](const Dataset& d) {
    std::vector<std::string> ids;
    for (const auto& e : d.episodes) ids.push_back(e.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  const auto orig_ids = sorted_ids(original);
  const auto aug_ids = sorted_ids(augmented);
  const std::size_t n = std::max(orig_ids.size(), aug_ids.size());

  auto sequence = [&](const std::vector<std::string>& ids, std::string_view side) {
    std::vector<std::string> out;
    for (std::uint64_t cycle = 0; out.size() < n; ++cycle) {
      auto perm = ids;
      Rng(derive_seed(seed, std::string("mix:") + std::string(side), cycle)).shuffle(perm);
      for (auto& id : perm) {
        if (out.size() == n) break;
        out.push_back(std::move(id));
      }
    }
    return out;
  };
  const auto orig_seq = sequence(orig_ids, "original");
  const auto aug_seq = sequence(aug_ids, "augmented");

  MixManifest mix;
  mix.original = {original.name, {}, orig_ids.size(), 0.5};
  mix.augmented = {augmented.name, {}, aug_ids.size(), 0.5};
  mix.seed = seed;
  mix.epoch_order.reserve(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    mix.epoch_order.push_back({Origin::original, orig_seq[k]});
    mix.epoch_order.push_back({Origin::augmented, aug_seq[k]});
  }
  return mix;
}

std::string mix_json(const MixManifest& mix) {
  auto ref = [](const DatasetRef& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["path"] = r.path;
    j["episodes"] = r.episodes;
    return j;
  };
  nlohmann::ordered_json j;
  j["original"] = ref(mix.original);
  j["augmented"] = ref(mix.augmented);
  j["weights"] = {{"original", mix.original.weight}, {"augmented", mix.augmented.weight}};
  j["seed"] = mix.seed;
  auto order = nlohmann::ordered_json::array();
  for (const auto& e : mix.epoch_order) {
    order.push_back({e.origin == Origin::original ? "orig" : "aug", e.episode_id});
  }
  j["epoch_order"] = std::move(order);
  return j.dump(2) + "\n";
}

MixManifest mix_from_json(const nlohmann::json& j) {
  try {
    auto ref = [](const nlohmann::json& r, double weight) {
      return DatasetRef{r.at("name").get<std::string>(), r.value("path", ""),
                        r.at("episodes").get<std::size_t>(), weight};
    };
    MixManifest mix;
    mix.original = ref(j.at("original"), j.at("weights").at("original").get<double>());
    mix.augmented = ref(j.at("augmented"), j.at("weights").at("augmented").get<double>());
    mix.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("epoch_order")) {
      const auto tag = e.at(0).get<std::string>();
      if (tag != "orig" && tag != "aug") throw ValidationError(kModule, "bad origin tag '" + tag + "'");
      mix.epoch_order.push_back(
          {tag == "orig" ? Origin::original : Origin::augmented, e.at(1).get<std::string>()});
    }
    return mix;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed mix manifest: ") + e.what());
  }
}

}  // namespace forge

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forge/image.hpp"
#include "forge/prompt_triple.hpp"

namespace forge {

inline constexpr int kManifestVersion = 1;

using ActionVector = std::vector<double>;

struct Frame {
  Image image;
  ActionVector action;
  friend bool operator==(const Frame&, const Frame&) = default;
};

struct AugmentedFrom {
  std::string source_episode_id;
  PromptTriple prompt_triple;
  std::uint64_t seed = 0;
  friend bool operator==(const AugmentedFrom&, const AugmentedFrom&) = default;
};

// nullopt means the episode was collected; otherwise it was generated from
// another episode.
using Provenance = std::optional<AugmentedFrom>;

struct Episode {
  std::string id;
  std::string instruction;
  std::vector<Frame> frames;
  Provenance provenance;

  std::size_t length() const { return frames.size(); }
  friend bool operator==(const Episode&, const Episode&) = default;
};

struct Dataset {
  int version = kManifestVersion;
  std::string name;
  int action_dim = 7;
  ImageSize image_size{256, 256};
  std::vector<Episode> episodes;

  const Episode* find(std::string_view id) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct Violation {
  std::string episode_id;  // empty for dataset-level violations
  std::string invariant;
  std::string detail;
};

std::string describe(const Violation& v);

// Empty iff every invariant holds. When co_loaded is nonempty, augmented
// provenance must resolve to an episode id in the dataset itself or in one
// of the co-loaded datasets.
std::vector<Violation> validate_dataset(const Dataset& dataset,
                                        std::span<const Dataset* const> co_loaded = {});

// Throws ValidationError (before touching the disk) if validation fails.
// A previously saved dataset in the directory (manifest.json and episodes/)
// is replaced; other files are left alone. Callers own the directory for the
// duration of the call.
void save_dataset(const Dataset& dataset, const std::filesystem::path& directory);

Dataset load_dataset(const std::filesystem::path& directory);

// manifest.json text for a dataset, keys in the canonical order.
std::string manifest_json(const Dataset& dataset);

}  // namespace forge

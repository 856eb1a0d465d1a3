#include "forge/episode_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/error.hpp"

namespace forge {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kModule = "episode-store";

bool safe_id(const std::string& id) {
  if (id.empty() || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.png", index);
  return buf;
}

ojson provenance_json(const Provenance& p) {
  ojson j = ojson::object();
  if (!p) {
    j["origin"] = "collected";
    return j;
  }
  j["origin"] = "augmented";
  j["source_episode_id"] = p->source_episode_id;
  ojson triple = ojson::object();
  triple["region_query"] = p->prompt_triple.region_query;
  triple["passthrough_queries"] = p->prompt_triple.passthrough_queries;
  triple["inpaint_prompt"] = p->prompt_triple.inpaint_prompt;
  j["prompt_triple"] = std::move(triple);
  j["seed"] = p->seed;
  return j;
}

Provenance provenance_from_json(const ojson& j, const std::string& id) {
  const auto origin = j.at("origin").get<std::string>();
  if (origin == "collected") return std::nullopt;
  if (origin != "augmented") {
    throw ValidationError(kModule, "episode " + id + ": unknown provenance origin '" +
                                       origin + "'");
  }
  AugmentedFrom a;
  a.source_episode_id = j.at("source_episode_id").get<std::string>();
  const auto& t = j.at("prompt_triple");
  a.prompt_triple.region_query = t.at("region_query").get<std::string>();
  a.prompt_triple.passthrough_queries =
      t.at("passthrough_queries").get<std::vector<std::string>>();
  a.prompt_triple.inpaint_prompt = t.at("inpaint_prompt").get<std::string>();
  a.seed = j.at("seed").get<std::uint64_t>();
  return a;
}

std::vector<const Episode*> sorted_episodes(const Dataset& d) {
  std::vector<const Episode*> out;
  out.reserve(d.episodes.size());
  for (const auto& e : d.episodes) out.push_back(&e);
  std::sort(out.begin(), out.end(),
            [](const Episode* a, const Episode* b) { return a->id < b->id; });
  return out;
}

std::string actions_json(const Episode& e) {
  ojson arr = ojson::array();
  for (const auto& f : e.frames) arr.push_back(f.action);
  return arr.dump() + "\n";
}

}  // namespace

const Episode* Dataset::find(std::string_view id) const {
  for (const auto& e : episodes) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::string describe(const Violation& v) {
  std::string out = v.episode_id.empty() ? "dataset" : "episode " + v.episode_id;
  out += ": " + v.invariant;
  if (!v.detail.empty()) out += " (" + v.detail + ")";
  return out;
}

std::vector<Violation> validate_dataset(const Dataset& dataset,
                                        std::span<const Dataset* const> co_loaded) {
  std::vector<Violation> out;
  if (dataset.version != kManifestVersion) {
    out.push_back({"", "supported version", "version " + std::to_string(dataset.version)});
  }
  if (dataset.action_dim <= 0) {
    out.push_back({"", "positive action_dim", std::to_string(dataset.action_dim)});
  }
  if (dataset.image_size.height <= 0 || dataset.image_size.width <= 0) {
    out.push_back({"", "positive image_size", ""});
  }

  std::set<std::string> ids;
  for (const auto& e : dataset.episodes) {
    if (!ids.insert(e.id).second) {
      out.push_back({e.id, "unique episode id", "duplicate"});
    }
    if (!safe_id(e.id)) {
      out.push_back({e.id, "episode id is a safe file name", ""});
    }
    if (e.instruction.empty()) {
      out.push_back({e.id, "nonempty instruction", ""});
    }
    if (e.frames.empty()) {
      out.push_back({e.id, "length >= 1", "episode has no frames"});
    }
    for (std::size_t i = 0; i < e.frames.size(); ++i) {
      const auto& f = e.frames[i];
      if (f.image.size() != dataset.image_size) {
        out.push_back({e.id, "frame size equals image_size",
                       "frame " + std::to_string(i) + " is " +
                           std::to_string(f.image.height()) + "x" +
                           std::to_string(f.image.width())});
      }
      if (static_cast<int>(f.action.size()) != dataset.action_dim) {
        out.push_back({e.id, "action length equals action_dim",
                       "frame " + std::to_string(i) + " has " +
                           std::to_string(f.action.size())});
      }
      for (double v : f.action) {
        if (!std::isfinite(v)) {
          out.push_back({e.id, "finite action values", "frame " + std::to_string(i)});
          break;
        }
      }
    }
    if (e.provenance) {
      if (e.provenance->source_episode_id.empty()) {
        out.push_back({e.id, "augmented provenance names a source episode", ""});
      }
      if (!e.provenance->prompt_triple.valid()) {
        out.push_back({e.id, "augmented provenance carries a valid prompt triple", ""});
      }
    }
  }

  if (!co_loaded.empty()) {
    std::set<std::string> known = ids;
    for (const auto* other : co_loaded) {
      for (const auto& e : other->episodes) known.insert(e.id);
    }
    for (const auto& e : dataset.episodes) {
      if (e.provenance && !known.count(e.provenance->source_episode_id)) {
        out.push_back({e.id, "provenance resolves (dangling source episode)",
                       e.provenance->source_episode_id});
      }
    }
  }
  return out;
}

std::string manifest_json(const Dataset& dataset) {
  ojson j = ojson::object();
  j["version"] = dataset.version;
  j["name"] = dataset.name;
  j["action_dim"] = dataset.action_dim;
  j["image_size"] = {dataset.image_size.height, dataset.image_size.width};
  ojson eps = ojson::array();
  for (const auto* e : sorted_episodes(dataset)) {
    ojson d = ojson::object();
    d["id"] = e->id;
    d["instruction"] = e->instruction;
    d["length"] = e->frames.size();
    d["frames"] = "episodes/" + e->id + "/frames";
    d["actions"] = "episodes/" + e->id + "/actions.json";
    d["provenance"] = provenance_json(e->provenance);
    eps.push_back(std::move(d));
  }
  j["episodes"] = std::move(eps);
  return j.dump(2) + "\n";
}

void save_dataset(const Dataset& dataset, const fs::path& directory) {
  const auto violations = validate_dataset(dataset);
  if (!violations.empty()) {
    std::string msg = "refusing to save invalid dataset:";
    for (const auto& v : violations) msg += "\n  " + describe(v);
    throw ValidationError(kModule, msg);
  }

  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw ValidationError(kModule, "cannot create " + directory.string());
  fs::remove(directory / "manifest.json", ec);
  fs::remove_all(directory / "episodes", ec);

  for (const auto* e : sorted_episodes(dataset)) {
    const auto ep_dir = directory / "episodes" / e->id;
    fs::create_directories(ep_dir / "frames", ec);
    if (ec) throw ValidationError(kModule, "cannot create " + ep_dir.string());
    for (std::size_t i = 0; i < e->frames.size(); ++i) {
      write_png(ep_dir / "frames" / frame_name(i), e->frames[i].image);
    }
    write_text_file(ep_dir / "actions.json", actions_json(*e));
  }
  // Manifest last: a directory with a manifest is a complete dataset.
  write_text_file(directory / "manifest.json", manifest_json(dataset));
}

Dataset load_dataset(const fs::path& directory) {
  const auto manifest_path = directory / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw ValidationError(kModule, "missing manifest " + manifest_path.string());
  }
  ojson j;
  try {
    j = ojson::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, "malformed manifest: " + std::string(e.what()));
  }

  Dataset d;
  try {
    d.version = j.at("version").get<int>();
    if (d.version != kManifestVersion) {
      throw ValidationError(kModule, "manifest version " + std::to_string(d.version) +
                                         " is not supported (expected " +
                                         std::to_string(kManifestVersion) + ")");
    }
    d.name = j.at("name").get<std::string>();
    d.action_dim = j.at("action_dim").get<int>();
    const auto size = j.at("image_size");
    d.image_size = {size.at(0).get<int>(), size.at(1).get<int>()};

    for (const auto& desc : j.at("episodes")) {
      Episode e;
      e.id = desc.at("id").get<std::string>();
      if (!safe_id(e.id)) {
        throw ValidationError(kModule, "unsafe episode id '" + e.id + "'");
      }
      e.instruction = desc.at("instruction").get<std::string>();
      const auto length = desc.at("length").get<std::size_t>();
      e.provenance = provenance_from_json(desc.at("provenance"), e.id);

      const auto frames_dir = directory / desc.at("frames").get<std::string>();
      std::size_t present = 0;
      if (fs::is_directory(frames_dir)) {
        for (const auto& entry : fs::directory_iterator(frames_dir)) {
          if (entry.path().extension() == ".png") ++present;
        }
      }
      if (present != length) {
        throw ValidationError(kModule, "episode " + e.id + ": length mismatch, manifest says " +
                                           std::to_string(length) + " frames, found " +
                                           std::to_string(present) + " images");
      }

      ojson actions;
      try {
        actions = ojson::parse(
            read_text_file(directory / desc.at("actions").get<std::string>()));
      } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(kModule, "episode " + e.id + ": malformed actions file: " +
                                           ex.what());
      }
      if (!actions.is_array() || actions.size() != length) {
        throw ValidationError(kModule, "episode " + e.id + ": length mismatch, manifest says " +
                                           std::to_string(length) + " actions, found " +
                                           std::to_string(actions.size()));
      }

      e.frames.reserve(length);
      for (std::size_t i = 0; i < length; ++i) {
        Frame f;
        f.image = read_png(frames_dir / frame_name(i));
        for (const auto& v : actions[i]) {
          if (!v.is_number()) {
            throw ValidationError(kModule, "episode " + e.id + ": frame " +
                                               std::to_string(i) +
                                               " has a non-finite or non-numeric action value");
          }
          f.action.push_back(v.get<double>());
        }
        e.frames.push_back(std::move(f));
      }
      d.episodes.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, "malformed manifest: " + std::string(e.what()));
  }

  const auto violations = validate_dataset(d);
  if (!violations.empty()) {
    std::string msg = "invalid dataset in " + directory.string() + ":";
    for (const auto& v : violations) msg += "\n  " + describe(v);
    throw ValidationError(kModule, msg);
  }
  return d;
}

}  // namespace forge

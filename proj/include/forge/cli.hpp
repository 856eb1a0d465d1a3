#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "forge/pipeline.hpp"

namespace forge {

// Exactly one of endpoint / mock.
struct BackendSpec {
  std::optional<std::string> endpoint;
  bool mock = false;
};

struct RunConfig {
  BackendSpec detect;
  BackendSpec inpaint_base;
  BackendSpec inpaint_sr;
  BackendSpec complete;
  std::optional<std::filesystem::path> thresholds;
  std::optional<std::filesystem::path> prompt_registry;
  std::optional<std::filesystem::path> exemplars;
  int parallelism = 1;
  std::uint64_t seed = 0;
  // Defaults to 0 for the mock inpainter and to the remote tolerance otherwise.
  std::optional<int> locality_tolerance;
  FlagPolicy flag_policy = FlagPolicy::warn;

  // Throws ValidationError.
  void validate() const;
};

// Relative paths resolve against base_dir.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

inline constexpr const char* kConfigEnvVar = "ROSIE_FORGE_CONFIG";

// Exit codes: 0 success, 1 validation or domain error, 2 backend failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace forge

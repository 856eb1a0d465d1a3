#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "forge/http.hpp"
#include "forge/prompt_triple.hpp"

namespace forge {

struct AugmentationSpec {
  std::string source_task;
  std::string target_task;
  // Present iff the augmentation creates a new task.
  std::optional<std::string> new_instruction;

  bool valid() const { return !source_task.empty() && !target_task.empty(); }
};

struct FewShotExemplar {
  AugmentationSpec spec;
  PromptTriple triple;
};

inline constexpr std::string_view kSourcePrefix = "Source task:";
inline constexpr std::string_view kTargetPrefix = "Target task:";
inline constexpr std::string_view kRegionPrefix = "ViT region prompt:";
inline constexpr std::string_view kPassthroughPrefix = "passthrough object prompt:";
inline constexpr std::string_view kInpaintPrefix = "inpainting prompt:";

// The exemplar used throughout the experiments (counter clutter).
FewShotExemplar counter_clutter_exemplar();

// One five-line block per exemplar followed by the query's Source/Target
// lines; lines are joined by '\n' with no trailing newline.
std::string build_fewshot_prompt(std::span<const FewShotExemplar> exemplars,
                                 const AugmentationSpec& spec);

// The three answer lines for a triple, in prompt order.
std::string render_triple(const PromptTriple& triple);

// Extracts the three prefixed fields (case-sensitive, at line start).
// Throws ParseError naming the first missing prefix.
PromptTriple parse_prompt_triple(std::string_view response);

// Payloads of "<int>. <payload>" lines, ordered by their number.
std::vector<std::string> parse_numbered_list(std::string_view response);

class PromptBackend {
 public:
  virtual ~PromptBackend() = default;
  virtual PromptTriple propose(std::span<const FewShotExemplar> exemplars,
                               const AugmentationSpec& spec) const = 0;
};

// Deterministic pattern tables standing in for the language model.
//
//   clutter:    target "... cluttered X" (or "clutter X") where source has X
//               -> region "empty <head of X>", inpaint "add a <distractor>
//               in|on the <head of X>"
//   background: target = source + " on a|an <B>" -> region "table",
//               passthrough adds the manipulated object, inpaint "<B>"
//   replace:    source and target differ in one contiguous span A -> B
//               -> region A, inpaint "replace the A with a B"
//
// Distractors are drawn from a seeded table. Throws UnmatchedTemplateError.
class RuleBackend : public PromptBackend {
 public:
  explicit RuleBackend(std::uint64_t seed = 0,
                       std::vector<std::string> distractors = default_distractors());

  static std::vector<std::string> default_distractors();

  PromptTriple propose(std::span<const FewShotExemplar> exemplars,
                       const AugmentationSpec& spec) const override;

 private:
  std::uint64_t seed_;
  std::vector<std::string> distractors_;
};

// Client for POST /v1/complete; builds the few-shot prompt and parses the
// completion.
class HttpCompletionBackend : public PromptBackend {
 public:
  explicit HttpCompletionBackend(std::string base_url, RetryPolicy retry = {},
                                 int max_tokens = 256, double temperature = 0.0);

  std::string complete(const std::string& prompt) const;

  PromptTriple propose(std::span<const FewShotExemplar> exemplars,
                       const AugmentationSpec& spec) const override;

 private:
  JsonHttpClient client_;
  int max_tokens_;
  double temperature_;
};

// Hand-engineered prompts keyed by target task; consulted before any backend.
class PromptRegistry {
 public:
  static PromptRegistry load(const std::filesystem::path& path);
  static PromptRegistry from_json(const nlohmann::json& j);

  std::optional<PromptTriple> find(const std::string& task) const;
  void add(std::string task, PromptTriple triple);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, PromptTriple> entries_;
};

std::vector<FewShotExemplar> load_exemplars(const std::filesystem::path& path);
std::vector<FewShotExemplar> exemplars_from_json(const nlohmann::json& j);

nlohmann::json triple_to_json(const PromptTriple& t);
PromptTriple triple_from_json(const nlohmann::json& j);

// Registry hit, else backend.
PromptTriple propose(const PromptBackend& backend, std::span<const FewShotExemplar> exemplars,
                     const AugmentationSpec& spec, const PromptRegistry* registry = nullptr);

}  // namespace forge

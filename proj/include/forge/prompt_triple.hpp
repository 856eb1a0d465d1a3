#pragma once

#include <string>
#include <vector>

namespace forge {

// The three strings driving one augmentation: what region to detect, what
// must never be painted over, and what to paint.
struct PromptTriple {
  std::string region_query;
  std::vector<std::string> passthrough_queries;
  std::string inpaint_prompt;

  bool valid() const;
  friend bool operator==(const PromptTriple&, const PromptTriple&) = default;
};

}  // namespace forge

#include "forge/prompt_triple.hpp"

#include <algorithm>

namespace forge {

bool PromptTriple::valid() const {
  if (region_query.empty() || inpaint_prompt.empty() || passthrough_queries.empty()) {
    return false;
  }
  return std::none_of(passthrough_queries.begin(), passthrough_queries.end(),
                      [](const std::string& q) { return q.empty(); });
}

}  // namespace forge

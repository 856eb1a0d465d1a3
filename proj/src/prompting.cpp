#include "forge/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <regex>

#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/error.hpp"
#include "forge/hashing.hpp"

namespace forge {

namespace {

constexpr const char* kModule = "prompting";

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(start, nl - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
    start = nl + 1;
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::size_t begin, std::size_t end,
                 std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += sep;
    out += parts[i];
  }
  return out;
}

std::string with_article(const std::string& noun) {
  const bool vowel = !noun.empty() && std::string_view("aeiouAEIOU").find(noun[0]) != std::string_view::npos;
  return (vowel ? "an " : "a ") + noun;
}

std::string strip_article(const std::string& phrase) {
  for (std::string_view a : {"a ", "an ", "the "}) {
    if (phrase.rfind(a, 0) == 0) return phrase.substr(a.size());
  }
  return phrase;
}

bool is_container(const std::string& noun) {
  static const std::vector<std::string> containers = {"drawer", "sink", "basket", "box",
                                                      "bowl",   "bin",  "pot",    "jar"};
  return std::find(containers.begin(), containers.end(), noun) != containers.end();
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::optional<PromptTriple> clutter_rule(const AugmentationSpec& spec, const std::string& distractor) {
  for (std::string_view marker : {"cluttered ", "clutter "}) {
    const auto pos = spec.target_task.find(marker);
    if (pos == std::string::npos) continue;
    if (pos > 0 && spec.target_task[pos - 1] != ' ') continue;
    const std::string place = trim(spec.target_task.substr(pos + marker.size()));
    if (place.empty() || !ends_with(spec.source_task, place)) continue;
    const auto place_words = words(place);
    const std::string head = place_words.back();
    PromptTriple t;
    t.region_query = "empty " + head;
    t.passthrough_queries = {"robot arm", "robot gripper"};
    t.inpaint_prompt = "add " + with_article(distractor) + (is_container(head) ? " in the " : " on the ") + head;
    return t;
  }
  return std::nullopt;
}

std::optional<PromptTriple> background_rule(const AugmentationSpec& spec) {
  const std::string lead = spec.source_task + " on ";
  if (spec.target_task.rfind(lead, 0) != 0) return std::nullopt;
  const std::string background = strip_article(trim(spec.target_task.substr(lead.size())));
  const auto source_words = words(spec.source_task);
  if (background.empty() || source_words.size() < 2) return std::nullopt;
  PromptTriple t;
  t.region_query = "table";
  t.passthrough_queries = {"robot arm", "robot gripper", join(source_words, 1, source_words.size())};
  t.inpaint_prompt = "replace the table top with " + with_article(background);
  return t;
}

std::optional<PromptTriple> replace_rule(const AugmentationSpec& spec) {
  const auto s = words(spec.source_task);
  const auto t = words(spec.target_task);
  std::size_t prefix = 0;
  while (prefix < s.size() && prefix < t.size() && s[prefix] == t[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < s.size() - prefix && suffix < t.size() - prefix &&
         s[s.size() - 1 - suffix] == t[t.size() - 1 - suffix]) {
    ++suffix;
  }
  if (prefix == 0 || prefix + suffix >= s.size() || prefix + suffix >= t.size()) {
    return std::nullopt;
  }
  const std::string from = join(s, prefix, s.size() - suffix);
  const std::string to = join(t, prefix, t.size() - suffix);
  PromptTriple triple;
  triple.region_query = from;
  triple.passthrough_queries = {"robot arm", "robot gripper"};
  triple.inpaint_prompt = "replace the " + from + " with " + with_article(to);
  return triple;
}

}  // namespace

FewShotExemplar counter_clutter_exemplar() {
  return {{"place pepsi can on the counter", "place pepsi can on the clutter counter", std::nullopt},
          {"empty counter", {"robot arm", "robot gripper"}, "add a chip bag on the counter"}};
}

std::string render_triple(const PromptTriple& triple) {
  std::string out;
  out += std::string(kRegionPrefix) + " " + triple.region_query + "\n";
  out += std::string(kPassthroughPrefix) + " ";
  for (std::size_t i = 0; i < triple.passthrough_queries.size(); ++i) {
    if (i) out += ", ";
    out += triple.passthrough_queries[i];
  }
  out += "\n";
  out += std::string(kInpaintPrefix) + " " + triple.inpaint_prompt;
  return out;
}

std::string build_fewshot_prompt(std::span<const FewShotExemplar> exemplars,
                                 const AugmentationSpec& spec) {
  std::string out;
  for (const auto& ex : exemplars) {
    out += std::string(kSourcePrefix) + " " + ex.spec.source_task + "\n";
    out += std::string(kTargetPrefix) + " " + ex.spec.target_task + "\n";
    out += render_triple(ex.triple) + "\n";
  }
  out += std::string(kSourcePrefix) + " " + spec.source_task + "\n";
  out += std::string(kTargetPrefix) + " " + spec.target_task;
  return out;
}

PromptTriple parse_prompt_triple(std::string_view response) {
  std::optional<std::string> region, passthrough, inpaint;
  for (const auto& line : lines_of(response)) {
    auto take = [&](std::string_view prefix, std::optional<std::string>& slot) {
      if (!slot && line.rfind(prefix, 0) == 0) slot = trim(line.substr(prefix.size()));
    };
    take(kRegionPrefix, region);
    take(kPassthroughPrefix, passthrough);
    take(kInpaintPrefix, inpaint);
  }
  auto require = [](const std::optional<std::string>& v, std::string_view prefix) {
    if (!v) throw ParseError(kModule, "response lacks '" + std::string(prefix) + "'");
    if (v->empty()) throw ParseError(kModule, "'" + std::string(prefix) + "' is empty");
  };
  require(region, kRegionPrefix);
  require(passthrough, kPassthroughPrefix);
  require(inpaint, kInpaintPrefix);

  PromptTriple t;
  t.region_query = *region;
  t.inpaint_prompt = *inpaint;
  std::size_t start = 0;
  const std::string& p = *passthrough;
  for (;;) {
    const auto pos = p.find(", ", start);
    auto item = trim(p.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (!item.empty()) t.passthrough_queries.push_back(std::move(item));
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  if (t.passthrough_queries.empty()) {
    throw ParseError(kModule, "'" + std::string(kPassthroughPrefix) + "' has no queries");
  }
  return t;
}

std::vector<std::string> parse_numbered_list(std::string_view response) {
  static const std::regex item(R"(^\s*(\d+)\.\s+(.*\S)\s*$)");
  std::vector<std::pair<long long, std::string>> found;
  for (const auto& line : lines_of(response)) {
    std::smatch m;
    if (std::regex_match(line, m, item)) {
      try {
        found.emplace_back(std::stoll(m[1].str()), m[2].str());
      } catch (const std::out_of_range&) {
        // numbers too large to be list indices are not list lines
      }
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  out.reserve(found.size());
  for (auto& [n, payload] : found) out.push_back(std::move(payload));
  return out;
}

RuleBackend::RuleBackend(std::uint64_t seed, std::vector<std::string> distractors)
    : seed_(seed), distractors_(std::move(distractors)) {
  if (distractors_.empty()) throw ValidationError(kModule, "rule backend needs distractors");
}

std::vector<std::string> RuleBackend::default_distractors() {
  return {"coke can", "chip bag", "box of crackers"};
}

PromptTriple RuleBackend::propose(std::span<const FewShotExemplar>,
                                  const AugmentationSpec& spec) const {
  if (!spec.valid()) throw ValidationError(kModule, "augmentation spec needs source and target tasks");
  Rng rng(derive_seed(seed_, "distractor:" + spec.target_task));
  const auto& distractor = distractors_[rng.below(distractors_.size())];
  if (auto t = clutter_rule(spec, distractor)) return *t;
  if (auto t = background_rule(spec)) return *t;
  if (auto t = replace_rule(spec)) return *t;
  throw UnmatchedTemplateError(kModule, "no template matches '" + spec.source_task + "' -> '" +
                                            spec.target_task + "'");
}

HttpCompletionBackend::HttpCompletionBackend(std::string base_url, RetryPolicy retry,
                                             int max_tokens, double temperature)
    : client_(std::move(base_url), kModule, retry),
      max_tokens_(max_tokens),
      temperature_(temperature) {}

std::string HttpCompletionBackend::complete(const std::string& prompt) const {
  const auto reply = client_.post(
      "/v1/complete", {{"prompt", prompt}, {"max_tokens", max_tokens_}, {"temperature", temperature_}});
  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
    throw MalformedResponseError(kModule, "completion reply lacks a text field", reply.dump());
  }
  return reply["text"].get<std::string>();
}

PromptTriple HttpCompletionBackend::propose(std::span<const FewShotExemplar> exemplars,
                                            const AugmentationSpec& spec) const {
  if (exemplars.empty()) {
    std::cerr << "prompting: warning: zero-shot prompt; completions are often unparseable\n";
  }
  return parse_prompt_triple(complete(build_fewshot_prompt(exemplars, spec)));
}

nlohmann::json triple_to_json(const PromptTriple& t) {
  return {{"region_query", t.region_query},
          {"passthrough_queries", t.passthrough_queries},
          {"inpaint_prompt", t.inpaint_prompt}};
}

PromptTriple triple_from_json(const nlohmann::json& j) {
  PromptTriple t;
  t.region_query = j.at("region_query").get<std::string>();
  t.passthrough_queries = j.at("passthrough_queries").get<std::vector<std::string>>();
  t.inpaint_prompt = j.at("inpaint_prompt").get<std::string>();
  if (!t.valid()) throw ValidationError(kModule, "prompt triple has an empty field");
  return t;
}

PromptRegistry PromptRegistry::from_json(const nlohmann::json& j) {
  PromptRegistry r;
  try {
    for (const auto& [task, triple] : j.items()) r.add(task, triple_from_json(triple));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed prompt registry: ") + e.what());
  }
  return r;
}

PromptRegistry PromptRegistry::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, path.string() + ": " + e.what());
  }
}

std::optional<PromptTriple> PromptRegistry::find(const std::string& task) const {
  if (auto it = entries_.find(task); it != entries_.end()) return it->second;
  return std::nullopt;
}

void PromptRegistry::add(std::string task, PromptTriple triple) {
  entries_[std::move(task)] = std::move(triple);
}

std::vector<FewShotExemplar> exemplars_from_json(const nlohmann::json& j) {
  std::vector<FewShotExemplar> out;
  try {
    for (const auto& e : j) {
      FewShotExemplar ex;
      ex.spec.source_task = e.at("source_task").get<std::string>();
      ex.spec.target_task = e.at("target_task").get<std::string>();
      if (e.contains("new_instruction")) ex.spec.new_instruction = e["new_instruction"].get<std::string>();
      ex.triple = triple_from_json(e.at("triple"));
      if (!ex.spec.valid()) throw ValidationError(kModule, "exemplar with empty task");
      out.push_back(std::move(ex));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed exemplars: ") + e.what());
  }
  return out;
}

std::vector<FewShotExemplar> load_exemplars(const std::filesystem::path& path) {
  try {
    return exemplars_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, path.string() + ": " + e.what());
  }
}

PromptTriple propose(const PromptBackend& backend, std::span<const FewShotExemplar> exemplars,
                     const AugmentationSpec& spec, const PromptRegistry* registry) {
  if (registry) {
    if (auto hit = registry->find(spec.target_task)) return *hit;
  }
  return backend.propose(exemplars, spec);
}

}  // namespace forge

#include "forge/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/hashing.hpp"
#include "forge/scene_synth.hpp"
#include "forge/success_benchmark.hpp"

namespace fs = std::filesystem;

namespace forge {
namespace {

constexpr const char* kModule = "cli";

BackendSpec backend_from_json(const nlohmann::json& j, const std::string& name) {
  BackendSpec b;
  if (!j.is_object()) throw ValidationError(kModule, "backend " + name + " must be an object");
  if (j.contains("endpoint")) b.endpoint = j.at("endpoint").get<std::string>();
  b.mock = j.value("mock", false);
  return b;
}

void check_backend(const BackendSpec& b, const std::string& name) {
  if (b.mock == b.endpoint.has_value())
    throw ValidationError(kModule, "backend " + name + " needs exactly one of endpoint or mock");
  if (b.endpoint && b.endpoint->empty())
    throw ValidationError(kModule, "backend " + name + " has an empty endpoint");
}

// Everything one subcommand invocation needs, after flags and config merge.
struct Context {
  RunConfig config;
  bool mock_all = false;
  fs::path out;
  std::ostream* out_stream = nullptr;
  std::ostream* err_stream = nullptr;

  const BackendSpec& spec(const BackendSpec& b) const {
    static const BackendSpec mock{std::nullopt, true};
    return mock_all ? mock : b;
  }

  void require_backend(const BackendSpec& b, const std::string& name) const {
    check_backend(spec(b), name);
  }

  std::unique_ptr<DetectionBackend> detection() const {
    require_backend(config.detect, "detect");
    if (spec(config.detect).mock) return std::make_unique<MockDetectionBackend>();
    return std::make_unique<HttpDetectionBackend>(*config.detect.endpoint);
  }

  bool mock_inpaint() const {
    require_backend(config.inpaint_base, "inpaint_base");
    require_backend(config.inpaint_sr, "inpaint_sr");
    const bool base = spec(config.inpaint_base).mock, sr = spec(config.inpaint_sr).mock;
    if (base != sr) throw ValidationError(kModule, "inpaint_base and inpaint_sr must both be mock or both remote");
    return base;
  }

  std::unique_ptr<InpaintBackend> inpaint() const {
    if (mock_inpaint()) return std::make_unique<MockInpaintBackend>();
    return std::make_unique<HttpInpaintBackend>(*config.inpaint_base.endpoint,
                                                *config.inpaint_sr.endpoint);
  }

  std::unique_ptr<PromptBackend> prompter() const {
    require_backend(config.complete, "complete");
    if (spec(config.complete).mock) return std::make_unique<RuleBackend>(config.seed);
    return std::make_unique<HttpCompletionBackend>(*config.complete.endpoint);
  }

  ThresholdTable thresholds() const {
    return config.thresholds ? ThresholdTable::load(*config.thresholds) : ThresholdTable::defaults();
  }

  std::vector<FewShotExemplar> exemplars() const {
    if (config.exemplars) return load_exemplars(*config.exemplars);
    return {counter_clutter_exemplar()};
  }

  std::optional<PromptRegistry> registry() const {
    if (!config.prompt_registry) return std::nullopt;
    return PromptRegistry::load(*config.prompt_registry);
  }

  fs::path out_dir() const {
    if (out.empty()) throw ValidationError(kModule, "--out is required");
    fs::create_directories(out);
    return out;
  }
};

BoxSize parse_box(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    BoxSize b{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    if (b.w <= 0 || b.h <= 0) throw std::invalid_argument(s);
    return b;
  } catch (const std::logic_error&) {
    throw ValidationError(kModule, "box must look like WxH, got '" + s + "'");
  }
}

const Episode& find_episode(const Dataset& d, const std::string& id) {
  const Episode* e = d.find(id);
  if (!e) throw ValidationError(kModule, "dataset " + d.name + " has no episode '" + id + "'");
  return *e;
}

// Frames of each row side by side; rows stacked. Short rows are padded black.
Image strip(const std::vector<const Episode*>& rows) {
  int w = 0, h = 0, cols = 0;
  for (const auto* e : rows) {
    const auto s = e->frames.front().image.size();
    w = std::max(w, s.width);
    h = std::max(h, s.height);
    cols = std::max(cols, int(e->frames.size()));
  }
  Image out({h * int(rows.size()), w * cols});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r]->frames.size(); ++c) {
      const auto& img = rows[r]->frames[c].image;
      for (int y = 0; y < img.size().height; ++y)
        for (int x = 0; x < img.size().width; ++x)
          out.set(int(c) * w + x, int(r) * h + y, img.at(x, y));
    }
  return out;
}

int cmd_synth(const Context& ctx, const fs::path& scene_path, const std::string& verb,
              std::string target, std::size_t episodes, std::size_t length, const std::string& name) {
  const SceneSpec scene = scene_from_json(nlohmann::json::parse(read_text_file(scene_path)));
  if (scene.objects.empty()) throw ValidationError(kModule, "scene has no objects");
  if (target.empty()) target = scene.objects.front().name;
  if (episodes == 0) throw ValidationError(kModule, "--episodes must be >= 1");
  const TaskSpec task{verb, target, scene};
  Dataset ds;
  ds.name = name;
  ds.image_size = scene.image_size;
  ds.action_dim = kSynthActionDim;
  for (std::size_t i = 0; i < episodes; ++i) {
    auto rendered = generate_episode(task, length, derive_seed(ctx.config.seed, "synth", i),
                                     fmt::format("ep_{:04}", i));
    ds.episodes.push_back(std::move(rendered.episode));
  }
  save_dataset(ds, ctx.out_dir());
  *ctx.out_stream << fmt::format("wrote {} episode(s) of length {} to {}\n", episodes, length,
                                 ctx.out.string());
  return 0;
}

int cmd_segment(const Context& ctx, const fs::path& dataset_dir, const std::string& episode,
                std::size_t frame, const std::vector<std::string>& queries, int max_detections) {
  const Dataset ds = load_dataset(dataset_dir);
  const Episode& e = find_episode(ds, episode);
  if (frame >= e.frames.size())
    throw ValidationError(kModule, fmt::format("episode {} has no frame {}", episode, frame));
  const auto backend = ctx.detection();
  const auto detections = detect(*backend, e.frames[frame].image, queries, max_detections);
  const std::string text = detect_response_json(detections).dump(2) + "\n";
  if (ctx.out.empty()) {
    *ctx.out_stream << text;
  } else {
    write_text_file(ctx.out_dir() / "detections.json", text);
    for (const auto& d : detections)
      *ctx.out_stream << fmt::format("{}\t{:.4f}\t{} {} {} {}\n", d.query, d.score, d.bbox.x,
                                     d.bbox.y, d.bbox.w, d.bbox.h);
  }
  return 0;
}

PromptTriple propose_for(const Context& ctx, const AugmentationSpec& spec) {
  const auto backend = ctx.prompter();
  const auto exemplars = ctx.exemplars();
  const auto registry = ctx.registry();
  return propose(*backend, exemplars, spec, registry ? &*registry : nullptr);
}

int cmd_propose(const Context& ctx, const AugmentationSpec& spec) {
  const PromptTriple triple = propose_for(ctx, spec);
  *ctx.out_stream << render_triple(triple) << "\n";
  if (!ctx.out.empty())
    write_text_file(ctx.out_dir() / "triple.json", triple_to_json(triple).dump(2) + "\n");
  return 0;
}

int cmd_augment(const Context& ctx, const fs::path& dataset_dir, const AugmentationSpec& spec,
                const std::string& family, const std::string& mode, const std::string& box) {
  const Dataset ds = load_dataset(dataset_dir);
  const fs::path out = ctx.out_dir();
  const PromptTriple triple = propose_for(ctx, spec);
  const auto detection = ctx.detection();
  const auto inpaint = ctx.inpaint();
  const bool mock = ctx.mock_inpaint();

  PipelineConfig config;
  config.parallelism = ctx.config.parallelism;
  config.flag_policy = ctx.config.flag_policy;
  config.locality_tolerance =
      ctx.config.locality_tolerance.value_or(mock ? 0 : kRemoteLocalityTolerance);
  config.cascade = {ds.image_size.width / 4, ds.image_size.width};
  if (!box.empty()) config.distractor_box = parse_box(box);
  const AugmentMode m = parse_mode(mode);
  if (m == AugmentMode::add_distractor && !config.distractor_box)
    throw ValidationError(kModule, "--box is required for add-distractor");

  const auto jobs = jobs_for_task(spec, triple, ctx.thresholds().get(family), m, ctx.config.seed);
  const auto result = augment_dataset(ds, jobs, {*detection, *inpaint}, config);
  save_augment_result(result, out);

  bool backend_failed = false;
  for (const auto& s : result.report.skips) {
    backend_failed = backend_failed || s.backend_failure;
    *ctx.err_stream << "skipped " << s.episode_id;
    if (s.frame_index) *ctx.err_stream << " at frame " << *s.frame_index;
    *ctx.err_stream << ": " << s.cause << "\n";
  }
  for (const auto& f : result.report.flags)
    *ctx.err_stream << "flag " << f.kind << " on " << f.episode_id << ": " << f.detail << "\n";
  *ctx.out_stream << fmt::format("augmented {} of {} matching episode(s); {} skipped\n",
                                 result.dataset.episodes.size(), result.report.attempted,
                                 result.report.skips.size());
  return backend_failed ? 2 : 0;
}

int cmd_mix(const Context& ctx, const fs::path& original_dir, const fs::path& augmented_dir) {
  const Dataset original = load_dataset(original_dir);
  const Dataset augmented = load_dataset(augmented_dir);
  MixManifest mix = mix_datasets(original, augmented, ctx.config.seed);
  const fs::path out = ctx.out_dir();
  auto rel = [&](const fs::path& p) {
    return fs::relative(fs::absolute(p), fs::absolute(out)).generic_string();
  };
  mix.original.path = rel(original_dir);
  mix.augmented.path = rel(augmented_dir);
  write_text_file(out / "mix.json", mix_json(mix));
  *ctx.out_stream << fmt::format("mixed {} + {} episodes into {} entries\n", original.episodes.size(),
                                 augmented.episodes.size(), mix.epoch_order.size());
  return 0;
}

int cmd_eval(const Context& ctx, const std::vector<std::string>& predictions, bool toy_study) {
  EvalReport report;
  if (toy_study) {
    if (!predictions.empty())
      throw ValidationError(kModule, "--toy-study and --predictions are exclusive");
    report = run_detector_study({}, ctx.config.seed, ctx.config.parallelism).report;
  } else {
    if (predictions.empty()) throw ValidationError(kModule, "eval needs --predictions or --toy-study");
    std::vector<MethodPredictions> methods;
    for (const auto& p : predictions) {
      const auto eq = p.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ValidationError(kModule, "--predictions expects NAME=PATH, got '" + p + "'");
      methods.push_back({p.substr(0, eq), load_predictions(p.substr(eq + 1))});
    }
    report = evaluate_splits(methods);
  }
  *ctx.out_stream << report.render_table();
  if (!ctx.out.empty())
    write_text_file(ctx.out_dir() / "eval_report.json", report.to_json().dump(2) + "\n");
  return 0;
}

int cmd_inspect(const Context& ctx, const fs::path& dataset_dir, const std::string& episode,
                const std::optional<fs::path>& pair_dir) {
  const Dataset ds = load_dataset(dataset_dir);
  const Episode& e = find_episode(ds, episode);
  std::vector<const Episode*> rows{&e};
  std::optional<Dataset> pair;
  if (pair_dir) {
    pair = load_dataset(*pair_dir);
    const Episode* other = nullptr;
    if (e.provenance) {
      other = pair->find(e.provenance->source_episode_id);
      if (other) rows.insert(rows.begin(), other);
    } else {
      for (const auto& cand : pair->episodes)
        if (cand.provenance && cand.provenance->source_episode_id == e.id) {
          other = &cand;
          rows.push_back(other);
          break;
        }
    }
    if (!other)
      *ctx.err_stream << "no provenance link between " << episode << " and " << pair_dir->string()
                      << "; writing a single row\n";
  }
  const fs::path path = ctx.out_dir() / (episode + "_strip.png");
  write_png(path, strip(rows));
  *ctx.out_stream << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

void RunConfig::validate() const {
  if (parallelism < 1) throw ValidationError(kModule, "parallelism must be >= 1");
  if (locality_tolerance && *locality_tolerance < 0)
    throw ValidationError(kModule, "locality_tolerance must be >= 0");
  check_backend(detect, "detect");
  check_backend(inpaint_base, "inpaint_base");
  check_backend(inpaint_sr, "inpaint_sr");
  check_backend(complete, "complete");
}

RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ValidationError(kModule, "run config must be an object");
    const auto& b = j.at("backends");
    c.detect = backend_from_json(b.at("detect"), "detect");
    c.inpaint_base = backend_from_json(b.at("inpaint_base"), "inpaint_base");
    c.inpaint_sr = backend_from_json(b.at("inpaint_sr"), "inpaint_sr");
    c.complete = backend_from_json(b.at("complete"), "complete");
    auto path = [&](const char* key) -> std::optional<fs::path> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      const fs::path p = j.at(key).get<std::string>();
      return p.is_absolute() ? p : base_dir / p;
    };
    c.thresholds = path("thresholds");
    c.prompt_registry = path("prompt_registry");
    c.exemplars = path("exemplars");
    c.parallelism = j.value("parallelism", 1);
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("locality_tolerance")) c.locality_tolerance = j.at("locality_tolerance").get<int>();
    c.flag_policy = parse_flag_policy(j.value("flag_policy", std::string("warn")));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(kModule, path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic augmentation for episodic robot datasets", "rosie-forge"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  bool mock_all = false;
  std::string out_dir;
  app.add_option("--config", config_path,
                 std::string("run config JSON (falls back to $") + kConfigEnvVar + ")");
  app.add_option("--seed", seed, "global seed; overrides the config");
  app.add_flag("--mock-all", mock_all, "use the offline mock for every backend");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--parallelism", parallelism, "worker count; overrides the config")
      ->check(CLI::PositiveNumber);

  std::string scene_path, verb = "pick", target, name = "synth";
  std::size_t episodes = 1, length = 10;
  auto* synth = app.add_subcommand("synth", "render scripted episodes from a scene");
  synth->add_option("--scene", scene_path, "scene JSON")->required();
  synth->add_option("--verb", verb, "instruction verb");
  synth->add_option("--target", target, "object to manipulate (default: first object)");
  synth->add_option("--episodes", episodes, "number of episodes");
  synth->add_option("--length", length, "frames per episode");
  synth->add_option("--name", name, "dataset name");

  std::string dataset_dir, episode;
  std::size_t frame = 0;
  std::vector<std::string> queries;
  int max_detections = kDefaultMaxDetections;
  auto* segment = app.add_subcommand("segment", "dump detections for one frame");
  segment->add_option("--dataset", dataset_dir, "dataset directory")->required();
  segment->add_option("--episode", episode, "episode id")->required();
  segment->add_option("--frame", frame, "frame index");
  segment->add_option("--query", queries, "detection query (repeatable)")->required();
  segment->add_option("--max-detections", max_detections, "per-query cap");

  AugmentationSpec spec;
  std::string new_instruction;
  auto add_spec = [&](CLI::App* cmd) {
    cmd->add_option("--source-task", spec.source_task, "source task instruction")->required();
    cmd->add_option("--target-task", spec.target_task, "target task description")->required();
    cmd->add_option("--new-instruction", new_instruction, "relabelled instruction");
  };
  auto* propose_cmd = app.add_subcommand("propose", "propose a prompt triple");
  add_spec(propose_cmd);

  std::string family = "distractor-addition", mode = "replace-target", box;
  auto* augment = app.add_subcommand("augment", "augment every matching episode");
  augment->add_option("--dataset", dataset_dir, "source dataset directory")->required();
  add_spec(augment);
  augment->add_option("--family", family, "threshold family");
  augment->add_option("--mode", mode, "replace-target or add-distractor");
  augment->add_option("--box", box, "distractor box WxH (add-distractor)");

  std::string original_dir, augmented_dir;
  auto* mix = app.add_subcommand("mix", "write a 1:1 mixing manifest");
  mix->add_option("--original", original_dir, "original dataset directory")->required();
  mix->add_option("--augmented", augmented_dir, "augmented dataset directory")->required();

  std::vector<std::string> predictions;
  bool toy_study = false;
  auto* eval = app.add_subcommand("eval", "F1 report over prediction files");
  eval->add_option("--predictions", predictions, "NAME=PATH prediction file (repeatable)");
  eval->add_flag("--toy-study", toy_study, "run the synthetic drawer success-detection study");

  std::string pair_dir;
  auto* inspect = app.add_subcommand("inspect", "write a PNG strip of an episode");
  inspect->add_option("--dataset", dataset_dir, "dataset directory")->required();
  inspect->add_option("--episode", episode, "episode id")->required();
  inspect->add_option("--pair", pair_dir,
                      "dataset linked by provenance; adds the original or augmented row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    Context ctx;
    if (config_path.empty()) {
      if (const char* env = std::getenv(kConfigEnvVar); env && *env) config_path = env;
    }
    if (!config_path.empty()) ctx.config = load_run_config(config_path);
    if (seed) ctx.config.seed = *seed;
    if (parallelism) ctx.config.parallelism = *parallelism;
    ctx.mock_all = mock_all;
    ctx.out = out_dir;
    ctx.out_stream = &out;
    ctx.err_stream = &err;
    if (!new_instruction.empty()) spec.new_instruction = new_instruction;

    if (*synth) return cmd_synth(ctx, scene_path, verb, target, episodes, length, name);
    if (*segment) return cmd_segment(ctx, dataset_dir, episode, frame, queries, max_detections);
    if (*propose_cmd) return cmd_propose(ctx, spec);
    if (*augment) return cmd_augment(ctx, dataset_dir, spec, family, mode, box);
    if (*mix) return cmd_mix(ctx, original_dir, augmented_dir);
    if (*eval) return cmd_eval(ctx, predictions, toy_study);
    if (*inspect)
      return cmd_inspect(ctx, dataset_dir, episode,
                         pair_dir.empty() ? std::nullopt : std::optional<fs::path>(pair_dir));
    return 1;
  } catch (const TransportError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const MalformedResponseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: json: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: filesystem: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace forge

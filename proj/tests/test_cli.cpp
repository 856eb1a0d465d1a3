#include <doctest.h>

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "forge/cli.hpp"
#include "forge/codec.hpp"
#include "forge/episode_store.hpp"
#include "support.hpp"

using namespace forge;
using testing::run_cli;

namespace {

const std::string kConfig = FORGE_CONFIG_DIR;

std::string mock_config(const testing::TempDir& dir, const std::string& extra = "") {
  const auto path = dir / "run.json";
  write_text_file(path, R"({"backends": {"detect": {"mock": true}, "inpaint_base": {"mock": true},
    "inpaint_sr": {"mock": true}, "complete": {"mock": true}},
    "thresholds": ")" + kConfig + R"(/thresholds.json",
    "prompt_registry": ")" + kConfig + R"(/prompt_registry.json",
    "parallelism": 2, "seed": 4)" + extra + "}");
  return path.string();
}

void synth(const testing::TempDir& dir, const std::string& config, int episodes = 2) {
  const auto r = run_cli({"--config", config, "--out", (dir / "src").string(), "synth", "--scene",
                          kConfig + "/scenes/chip_bag_table.json", "--target", "green chip bag",
                          "--episodes", std::to_string(episodes), "--length", "4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
}

std::vector<std::string> augment_args(const testing::TempDir& dir, const std::string& config,
                                      const std::string& out) {
  return {"--config", config, "--out", (dir / out).string(), "augment", "--dataset",
          (dir / "src").string(), "--source-task", "pick green chip bag", "--target-task",
          "pick blue microfiber cloth", "--new-instruction", "pick blue microfiber cloth",
          "--family", "novel-object-pick"};
}

}  // namespace

TEST_CASE("synth, augment, mix and inspect") {
  testing::TempDir dir("cli");
  const auto config = mock_config(dir);
  synth(dir, config);
  const Dataset src = load_dataset(dir / "src");
  CHECK(src.episodes.size() == 2);
  CHECK(src.episodes[0].id == "ep_0000");
  CHECK(src.episodes[0].instruction == "pick green chip bag");

  const auto a = run_cli(augment_args(dir, config, "aug1"));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const auto b = run_cli(augment_args(dir, config, "aug2"));
  REQUIRE(b.code == 0);
  CHECK(testing::tree_hash(dir / "aug1") == testing::tree_hash(dir / "aug2"));
  const Dataset aug = load_dataset(dir / "aug1");
  REQUIRE(aug.episodes.size() == 2);
  CHECK(aug.episodes[0].instruction == "pick blue microfiber cloth");
  // The registry triple was used.
  CHECK(aug.episodes[0].provenance->prompt_triple.inpaint_prompt ==
        "replace the green chip bag with a blue microfiber cloth");
  CHECK(std::filesystem::exists(dir / "aug1" / "skips.json"));
  CHECK(std::filesystem::exists(dir / "aug1" / "flags.json"));

  const auto m = run_cli({"--config", config, "--out", (dir / "mix").string(), "mix", "--original",
                          (dir / "src").string(), "--augmented", (dir / "aug1").string()});
  REQUIRE_MESSAGE(m.code == 0, m.err);
  const auto mix = mix_from_json(nlohmann::json::parse(read_text_file(dir / "mix" / "mix.json")));
  CHECK(mix.epoch_order.size() == 4);
  CHECK(mix.original.path == "../src");
  CHECK(mix.seed == 4);

  const auto i = run_cli({"--out", (dir / "inspect").string(), "inspect", "--dataset",
                          (dir / "aug1").string(), "--episode", "ep_0000_aug", "--pair",
                          (dir / "src").string()});
  REQUIRE_MESSAGE(i.code == 0, i.err);
  const Image strip = read_png(dir / "inspect" / "ep_0000_aug_strip.png");
  CHECK(strip.size() == ImageSize{512, 1024});
  // Top row is the original episode.
  CHECK(strip.at(10, 200) == src.episodes[0].frames[0].image.at(10, 200));

  const auto s = run_cli({"--config", config, "segment", "--dataset", (dir / "src").string(),
                          "--episode", "ep_0000", "--query", "coke can"});
  REQUIRE(s.code == 0);
  CHECK(nlohmann::json::parse(s.out)["detections"].size() == 1);
}

TEST_CASE("mixing with an empty augmented dataset fails with exit 1") {
  testing::TempDir dir("cli");
  const auto config = mock_config(dir);
  synth(dir, config, 1);
  // No episode matches the source task, so the augmented dataset is empty.
  auto args = augment_args(dir, config, "aug");
  args[8] = "pick coke can";
  REQUIRE(run_cli(args).code == 0);
  CHECK(load_dataset(dir / "aug").episodes.empty());
  const auto m = run_cli({"--config", config, "--out", (dir / "mix").string(), "mix", "--original",
                          (dir / "src").string(), "--augmented", (dir / "aug").string()});
  CHECK(m.code == 1);
  CHECK(m.err.find("cannot mix") != std::string::npos);
}

TEST_CASE("propose prints the drawer triple") {
  const auto r = run_cli({"--mock-all", "propose", "--source-task", "place coke can into top drawer",
                          "--target-task", "place coke can into cluttered top drawer"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("ViT region prompt: empty drawer\n") == 0);
  CHECK(r.out.find("passthrough object prompt: robot arm, robot gripper\n") != std::string::npos);
  CHECK(r.out.find("inpainting prompt: add a") != std::string::npos);
  CHECK(r.out.find(" in the drawer") != std::string::npos);
}

TEST_CASE("help lists every flag") {
  const auto top = run_cli({"--help"});
  CHECK(top.code == 0);
  for (const char* flag : {"--config", "--seed", "--mock-all", "--out", "--parallelism", "synth", "segment",
                           "propose", "augment", "mix", "eval", "inspect"})
    CHECK_MESSAGE(top.out.find(flag) != std::string::npos, flag);

  const std::vector<std::pair<std::string, std::vector<std::string>>> subs = {
      {"synth", {"--scene", "--verb", "--target", "--episodes", "--length", "--name"}},
      {"segment", {"--dataset", "--episode", "--frame", "--query", "--max-detections"}},
      {"propose", {"--source-task", "--target-task", "--new-instruction"}},
      {"augment", {"--dataset", "--source-task", "--target-task", "--new-instruction", "--family", "--mode", "--box"}},
      {"mix", {"--original", "--augmented"}},
      {"eval", {"--predictions", "--toy-study"}},
      {"inspect", {"--dataset", "--episode", "--pair"}}};
  for (const auto& [sub, flags] : subs) {
    const auto h = run_cli({sub, "--help"});
    CHECK(h.code == 0);
    for (const auto& f : flags) CHECK_MESSAGE(h.out.find(f) != std::string::npos, sub << " " << f);
  }
  CHECK(run_cli({"--parallelism", "0", "eval", "--toy-study"}).code == 1);
  CHECK(run_cli({}).code == 1);
}

TEST_CASE("run config") {
  testing::TempDir dir("cfg");
  const auto shipped = load_run_config(kConfig + "/run.mock.json");
  CHECK(shipped.detect.mock);
  CHECK(shipped.parallelism == 2);
  CHECK(shipped.thresholds->is_absolute());
  const auto remote = load_run_config(kConfig + "/run.remote.json");
  CHECK(remote.detect.endpoint);
  CHECK(remote.flag_policy == FlagPolicy::reject);

  auto bad = [&](const std::string& text) {
    write_text_file(dir / "bad.json", text);
    CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ValidationError);
  };
  bad(R"({"backends": {"detect": {"mock": true, "endpoint": "http://x"}, "inpaint_base": {"mock": true},
          "inpaint_sr": {"mock": true}, "complete": {"mock": true}}})");
  bad(R"({"backends": {"detect": {}, "inpaint_base": {"mock": true},
          "inpaint_sr": {"mock": true}, "complete": {"mock": true}}})");
  bad(R"({"backends": {"detect": {"mock": true}, "inpaint_base": {"mock": true},
          "inpaint_sr": {"mock": true}, "complete": {"mock": true}}, "parallelism": 0})");
  bad(R"({"backends": {"detect": {"mock": true}, "inpaint_base": {"mock": true},
          "inpaint_sr": {"mock": true}, "complete": {"mock": true}}, "flag_policy": "ignore"})");
  bad("{not json");

  SUBCASE("environment fallback") {
    const auto config = mock_config(dir);
    ::setenv(kConfigEnvVar, config.c_str(), 1);
    const auto r = run_cli({"propose", "--source-task", "pick green chip bag", "--target-task",
                            "pick blue microfiber cloth"});
    ::unsetenv(kConfigEnvVar);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    // The registry from the config file answered.
    CHECK(r.out.find("inpainting prompt: replace the green chip bag with a blue microfiber cloth") !=
          std::string::npos);
    // Without a config nothing names a backend.
    CHECK(run_cli({"propose", "--source-task", "a b", "--target-task", "a c"}).code == 1);
  }
}

TEST_CASE("unreachable backends exit with code 2") {
  testing::TempDir dir("cli");
  synth(dir, mock_config(dir), 1);
  const int port = testing::unused_local_port();
  REQUIRE(port > 0);
  const std::string url = "http://127.0.0.1:" + std::to_string(port);
  write_text_file(dir / "remote.json", R"({"backends": {"detect": {"endpoint": ")" + url +
                                           R"("}, "inpaint_base": {"mock": true},
    "inpaint_sr": {"mock": true}, "complete": {"mock": true}}})");
  const auto s = run_cli({"--config", (dir / "remote.json").string(), "segment", "--dataset",
                          (dir / "src").string(), "--episode", "ep_0000", "--query", "coke can"});
  CHECK(s.code == 2);
  CHECK(s.err.find("error: segmentation:") == 0);

  const auto a = run_cli({"--config", (dir / "remote.json").string(), "--out", (dir / "aug").string(),
                          "augment", "--dataset", (dir / "src").string(), "--source-task",
                          "pick green chip bag", "--target-task", "pick blue microfiber cloth"});
  CHECK(a.code == 2);
  CHECK(a.err.find("skipped ep_0000 at frame 0") != std::string::npos);

  const auto bad = run_cli({"--config", (dir / "remote.json").string(), "segment", "--dataset",
                            (dir / "missing").string(), "--episode", "x", "--query", "q"});
  CHECK(bad.code == 1);
}

TEST_CASE("eval over prediction files") {
  testing::TempDir dir("cli");
  write_text_file(dir / "p.json", R"([{"score": 0.9, "label": "success", "split": "in_distribution"},
    {"score": 0.1, "label": "failure", "split": "in_distribution"},
    {"score": 0.7, "label": "failure", "split": "ood"},
    {"score": 0.8, "label": "success", "split": "ood"}])");
  const auto r = run_cli({"--out", (dir / "out").string(), "eval", "--predictions",
                          "mine=" + (dir / "p.json").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("mine") != std::string::npos);
  const auto j = nlohmann::json::parse(read_text_file(dir / "out" / "eval_report.json"));
  CHECK(j["methods"][0]["in_distribution"]["f1"] == 1.0);
  CHECK(run_cli({"eval", "--predictions", "nope"}).code == 1);
  CHECK(run_cli({"eval"}).code == 1);
}

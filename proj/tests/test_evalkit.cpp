#include <doctest.h>

#include <nlohmann/json.hpp>

#include "forge/codec.hpp"
#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/scene_synth.hpp"
#include "forge/success_benchmark.hpp"
#include "support.hpp"
#include "table2_fixture.hpp"

using namespace forge;

namespace {

// Counts straight from the definition.
Confusion count_oracle(const std::vector<Prediction>& items, double t) {
  Confusion c;
  for (const auto& p : items) {
    const bool pos = p.score >= t;
    const bool succ = p.label == Label::success;
    if (pos && succ) ++c.tp;
    if (pos && !succ) ++c.fp;
    if (!pos && succ) ++c.fn;
    if (!pos && !succ) ++c.tn;
  }
  return c;
}

double f1_oracle(const Confusion& c) {
  const double p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
  const double r = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

PredictionSet random_set(Rng& rng, Split split, std::size_t n) {
  PredictionSet s{split, {}};
  for (std::size_t i = 0; i < n; ++i)
    s.items.push_back({rng.unit(), rng.below(2) ? Label::success : Label::failure});
  return s;
}

}  // namespace

TEST_CASE("f1 worked example") {
  const PredictionSet s{Split::in_distribution,
                        {{0.6, Label::success}, {0.4, Label::success}, {0.7, Label::failure}}};
  const auto r = f1(s);
  CHECK(r.confusion == Confusion{1, 1, 1, 0});
  CHECK(r.f1 == doctest::Approx(0.5));
  CHECK(f1({Split::ood, {{0.9, Label::success}, {0.1, Label::failure}}}).f1 == 1.0);
  CHECK(f1({Split::ood, {{0.1, Label::failure}}}).f1 == 0.0);
  CHECK(f1({Split::ood, {}}).f1 == 0.0);
  // The threshold itself counts as positive.
  CHECK(f1({Split::ood, {{0.5, Label::success}}}).confusion.tp == 1);
}

TEST_CASE("f1 matches the oracle on every vector up to length 8") {
  long long cases = 0;
  for (int n = 0; n <= 8; ++n) {
    // Each element: score in {0.4, 0.6} x label in {success, failure}.
    const long long combos = 1LL << (2 * n);
    for (long long code = 0; code < combos; ++code) {
      std::vector<Prediction> items;
      for (int i = 0; i < n; ++i) {
        const int bits = int((code >> (2 * i)) & 3);
        items.push_back({bits & 1 ? 0.6 : 0.4, bits & 2 ? Label::success : Label::failure});
      }
      const auto r = f1({Split::in_distribution, items});
      const auto c = count_oracle(items, 0.5);
      REQUIRE(r.confusion == c);
      REQUIRE(r.f1 == doctest::Approx(f1_oracle(c)).epsilon(1e-12));
      ++cases;
    }
  }
  CHECK(cases == 87381);
}

TEST_CASE("predicted positives are antitone in the threshold") {
  Rng rng(12);
  for (int c = 0; c < 200; ++c) {
    const auto s = random_set(rng, Split::ood, 1 + rng.below(30));
    const double t1 = rng.unit();
    const double t2 = t1 + (1 - t1) * rng.unit();
    const auto lo = confusion_at(s.items, t1);
    const auto hi = confusion_at(s.items, t2);
    CHECK(hi.tp <= lo.tp);
    CHECK(hi.fp <= lo.fp);
    CHECK(hi.total() == lo.total());
  }
}

TEST_CASE("published success-detection table from confusion-equivalent inputs") {
  const auto inputs = testing::table2_inputs();
  const auto report = evaluate_splits(inputs);
  const std::string table = report.render_table();
  CHECK(testing::table_row(table, "") ==
        std::vector<std::string>{"", "No Aug", "Aug (A)", "Aug (A)+(B)"});
  CHECK(testing::table_row(table, "Overall") ==
        std::vector<std::string>{"Overall", "0.43", "0.56", "0.62"});
  CHECK(testing::table_row(table, "In-Distribution") ==
        std::vector<std::string>{"In-Distribution", "0.66", "0.67", "0.66"});
  CHECK(testing::table_row(table, "OOD") == std::vector<std::string>{"OOD", "0.19", "0.45", "0.57"});

  for (const auto& m : report.methods) {
    CHECK(m.in_distribution.total() == 76);
    CHECK(m.ood.total() == 58);
  }
  const auto j = report.to_json();
  CHECK(j["threshold"] == 0.5);
  REQUIRE(j["methods"].size() == 3);
  CHECK(j["methods"][0]["method"] == "No Aug");
  CHECK(j["methods"][0]["overall"]["f1"].get<double>() == doctest::Approx(56.0 / 130.0));
  CHECK(j["methods"][0]["overall_mean_of_splits"].get<double>() ==
        doctest::Approx((44.0 / 67.0 + 12.0 / 63.0) / 2));
}

TEST_CASE("evaluate_splits pooling and validation") {
  Rng rng(77);
  for (int c = 0; c < 50; ++c) {
    const std::vector<MethodPredictions> ms = {
        {"m", {random_set(rng, Split::in_distribution, 1 + rng.below(20)), random_set(rng, Split::ood, 1 + rng.below(20))}}};
    const auto r = evaluate_splits(ms).methods[0];
    Confusion sum = r.in_distribution;
    sum += r.ood;
    CHECK(r.overall == sum);
    std::vector<Prediction> pooled = ms[0].sets[0].items;
    pooled.insert(pooled.end(), ms[0].sets[1].items.begin(), ms[0].sets[1].items.end());
    CHECK(r.overall == count_oracle(pooled, 0.5));
    CHECK(r.f1_overall.f1 == doctest::Approx(f1_oracle(sum)));
  }

  const auto same = random_set(rng, Split::in_distribution, 15);
  auto ood = same;
  ood.split = Split::ood;
  const std::vector<MethodPredictions> twin = {{"twin", {same, ood}}};
  const auto r = evaluate_splits(twin).methods[0];
  CHECK(r.f1_overall.f1 == doctest::Approx(r.f1_in_distribution.f1));
  CHECK(r.f1_overall.f1 == doctest::Approx(r.f1_ood.f1));

  const std::vector<MethodPredictions> missing = {{"lonely", {same}}};
  try {
    evaluate_splits(missing);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("lonely") != std::string::npos);
    CHECK(std::string(e.what()).find("ood") != std::string::npos);
  }
  const std::vector<MethodPredictions> out_of_range = {
      {"bad", {{Split::in_distribution, {{1.5, Label::success}}}, ood}}};
  CHECK_THROWS_AS(evaluate_splits(out_of_range), ValidationError);
}

TEST_CASE("prediction files") {
  testing::TempDir dir("pred");
  Rng rng(5);
  const std::vector<PredictionSet> sets = {random_set(rng, Split::in_distribution, 6),
                                           random_set(rng, Split::ood, 4)};
  write_text_file(dir / "p.json", predictions_to_json(sets).dump());
  const auto back = load_predictions(dir / "p.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0].split == Split::in_distribution);
  CHECK(back[1].split == Split::ood);
  CHECK(back[0].items.size() == 6);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back[1].items[i].score == sets[1].items[i].score);
    CHECK(back[1].items[i].label == sets[1].items[i].label);
  }
  const auto interleaved = nlohmann::json::parse(
      R"([{"score": 0.2, "label": "failure", "split": "ood"},
          {"score": 0.8, "label": "success", "split": "in_distribution"}])");
  const auto grouped = predictions_from_json(interleaved);
  REQUIRE(grouped.size() == 2);
  CHECK(grouped[0].split == Split::in_distribution);

  try {
    predictions_from_json(nlohmann::json::parse(
        R"([{"score": 0.2, "label": "failure", "split": "ood"}, {"score": 0.2, "label": "maybe", "split": "ood"}])"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("success-rate table") {
  auto rollouts_for = [](const std::string& family, const std::string& task, int n, int wins) {
    std::vector<Rollout> out;
    for (int i = 0; i < n; ++i) out.push_back({family, task, i < wins});
    return out;
  };
  std::vector<Rollout> rollouts;
  for (auto v : {rollouts_for("Pick up novel object", "pick blue microfiber cloth", 10, 8),
                 rollouts_for("Pick up novel object", "pick black microfiber cloth", 10, 7),
                 rollouts_for("two", "a", 10, 8), rollouts_for("two", "b", 10, 9)})
    rollouts.insert(rollouts.end(), v.begin(), v.end());
  const std::vector<TaskKey> declared = {{"two", "never run"}};
  const auto table = success_rate_table(declared, rollouts);

  auto family = [&](const std::string& name) -> const FamilyRate& {
    for (const auto& f : table)
      if (f.family == name) return f;
    FAIL("missing family " << name);
    return table.front();
  };
  const auto& novel = family("Pick up novel object");
  REQUIRE(novel.rate);
  CHECK(*novel.rate == doctest::Approx(0.75));
  const auto& two = family("two");
  REQUIRE(two.rate);
  CHECK(*two.rate == doctest::Approx(0.85));
  REQUIRE(two.tasks.size() == 3);
  CHECK(two.tasks[0].task == "never run");
  CHECK_FALSE(two.tasks[0].rate);
  CHECK(two.tasks[0].rollouts == 0);

  const std::string text = render_success_table(table);
  CHECK(testing::table_row(text, "never run")[1] == "-");
  CHECK(testing::table_row(text, "two")[1] == "0.85");

  // The published "move near novel object" family row is the unweighted task mean.
  std::vector<Rollout> move;
  for (int wins : {8, 7, 10, 9, 9}) {
    auto v = rollouts_for("move", "t" + std::to_string(wins) + std::to_string(move.size()), 10, wins);
    move.insert(move.end(), v.begin(), v.end());
  }
  CHECK(*success_rate_table({}, move)[0].rate == doctest::Approx(0.86));
}

TEST_CASE("color histogram") {
  Image img({4, 4}, Rgb{0, 128, 255});
  img.set(0, 0, Rgb{8, 135, 247});
  const auto h = color_histogram(img);
  REQUIRE(h.size() == std::size_t(3 * kHistogramBins));
  CHECK(h[0] == doctest::Approx(15.0 / 16));
  CHECK(h[1] == doctest::Approx(1.0 / 16));
  CHECK(h[kHistogramBins + 16] == doctest::Approx(1.0));
  CHECK(h[2 * kHistogramBins + 31] == doctest::Approx(15.0 / 16));
  CHECK(h[2 * kHistogramBins + 30] == doctest::Approx(1.0 / 16));
}

TEST_CASE("toy detector on separable scenes") {
  auto scene = [](Rgb c) { return Image({16, 16}, c); };
  std::vector<LabeledImage> train, test;
  for (int i = 0; i < 6; ++i) {
    train.push_back({scene(Rgb{std::uint8_t(200 + i), 20, 20}), Label::success});
    train.push_back({scene(Rgb{20, 20, std::uint8_t(200 + i)}), Label::failure});
    test.push_back({scene(Rgb{std::uint8_t(230 + i), 20, 20}), Label::success});
    test.push_back({scene(Rgb{20, 20, std::uint8_t(230 + i)}), Label::failure});
  }
  const auto det = toy_detector_train(train);
  const auto r = f1(toy_detector_eval(det, test, Split::in_distribution));
  CHECK(r.confusion == Confusion{6, 0, 0, 6});
  CHECK(r.f1 == 1.0);
  for (const auto& p : toy_detector_eval(det, test, Split::ood).items) {
    CHECK(p.score >= 0.0);
    CHECK(p.score <= 1.0);
  }
  const std::vector<LabeledImage> one_class(train.begin(), train.begin() + 1);
  CHECK_THROWS_AS(toy_detector_train(one_class), ValidationError);
  CHECK_THROWS_AS(toy_detector_train(std::vector<LabeledImage>{}), ValidationError);
}

TEST_CASE("drawer benchmark scenes match their labels") {
  DrawerBenchmarkConfig cfg;
  cfg.train_per_class = 6;
  cfg.test_per_class = 4;
  const auto b = make_drawer_benchmark(cfg, 3);
  CHECK(b.train.size() == 12);
  CHECK(b.in_distribution.size() == 8);
  CHECK(b.ood.size() == 8);
  for (const auto& s : b.train) {
    const auto* bag = s.truth.find("green chip bag");
    const auto* drawer = s.truth.find("drawer");
    REQUIRE(bag);
    REQUIRE(drawer);
    const Rect db = *drawer->visible.bbox();
    const Rect bb = *bag->visible.bbox();
    const bool inside = bb.x >= db.x && bb.y >= db.y && bb.right() <= db.right() && bb.bottom() <= db.bottom();
    CHECK(inside == (s.item.label == Label::success));
  }
  CHECK(make_drawer_benchmark(cfg, 3).ood[0].image == b.ood[0].image);
}

TEST_CASE("clutter augmentation improves OOD detection and is deterministic") {
  const auto a = run_detector_study({}, 0);
  CHECK(a.augmented_ood.f1 > a.clean_ood.f1);
  CHECK(a.clean_train.f1 >= a.clean_in.f1);
  CHECK(a.clean_in.f1 == 1.0);
  REQUIRE(a.report.methods.size() == 3);
  CHECK(a.report.methods[0].method == "No Aug");

  const auto b = run_detector_study({}, 0);
  CHECK(a.clean_ood.f1 == b.clean_ood.f1);
  CHECK(a.augmented_ood.f1 == b.augmented_ood.f1);
  CHECK(a.augmented_in.f1 == b.augmented_in.f1);
}

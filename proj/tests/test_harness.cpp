#include "catch.hpp"

#include <fstream>
#include <set>

#include "glacier/error.hpp"
#include "glacier/harness/config.hpp"
#include "glacier/harness/dataset.hpp"
#include "glacier/harness/training.hpp"
#include "glacier/network/checkpoint.hpp"
#include "support.hpp"

using namespace glacier;
using namespace glacier::harness;

namespace {

bool has_code(const std::function<void()>& f, ErrorCode code) {
    try {
        f();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

const Dataset& small_dataset() {
    static const Dataset ds = [] {
        geodata::SceneSpec spec;
        spec.height = spec.width = 256;
        spec.feature_scale = 12;
        spec.seed = 3;
        PrepareConfig prep;
        prep.cell_size = 64;
        prep.tile_size = 32;
        return synthetic_dataset(spec, prep);
    }();
    return ds;
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.model.base_features = 4;
    cfg.optimizer.epochs = 2;
    cfg.optimizer.learning_rate = 1e-3;
    cfg.seed = 1;
    return cfg;
}

// Constant-output model: zero head weights and a large bias of the given sign.
network::UNet constant_model(double bias) {
    auto m = network::build_model({8, 4, 2, 0.1}, 0);
    torch::NoGradGuard g;
    for (auto& p : m->named_parameters()) {
        if (p.key() == "head.weight") p.value().zero_();
        if (p.key() == "head.bias") p.value().fill_(bias);
    }
    return m;
}

}  // namespace

TEST_CASE("run config from key value text") {
    const auto kv = KeyValueConfig::parse(
        "class = clean\nloss = combined\nalpha = 0.1\ntheta = 2\nbase_features = 16\ndepth = 3\n"
        "learning_rate = 0.001\nepochs = 30\nbatch_size = 4\nseed = 9\n");
    const auto cfg = RunConfig::from_keyvalue(kv);
    CHECK(cfg.class_id() == 1);
    CHECK(cfg.loss.kind == losses::LossKind::combined);
    CHECK(cfg.loss.alpha == 0.1);
    CHECK(cfg.loss.boundary.theta == 2);
    CHECK(cfg.model.base_features == 16);
    CHECK(cfg.model.depth == 3);
    CHECK_FALSE(cfg.auto_depth);
    CHECK(cfg.optimizer.epochs == 30);
    CHECK(cfg.seed == 9);
    const auto back = RunConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());

    CHECK(has_code([] { RunConfig::from_keyvalue(KeyValueConfig::parse("loss = focal\n")); }, ErrorCode::invalid_config));
    CHECK(has_code([] { RunConfig::from_keyvalue(KeyValueConfig::parse("loss = combined\nalpha = 2\n")).validate(); },
                   ErrorCode::invalid_weight));
    CHECK(has_code([] { RunConfig::from_keyvalue(KeyValueConfig::parse("optimizer = sgd\n")).validate(); },
                   ErrorCode::invalid_config));
    CHECK(has_code([] { RunConfig::from_keyvalue(KeyValueConfig::parse("class = rock\n")).validate(); },
                   ErrorCode::invalid_config));
}

TEST_CASE("defaults follow the documented settings") {
    const RunConfig cfg;
    CHECK(cfg.optimizer.learning_rate == 1e-4);
    CHECK(cfg.optimizer.batch_size == 8);
    CHECK(cfg.optimizer.epochs == 250);
    CHECK(cfg.augment_probability == 0.15);
    CHECK(cfg.model.base_features == 32);
    CHECK(cfg.model.dropout_rate == 0.1);
    const PrepareConfig prep;
    CHECK(prep.tile_size == 512);
    CHECK(prep.min_glacier_fraction == 0.10);
}

TEST_CASE("prepared dataset keeps splits disjoint and normalizes with train statistics") {
    const auto& ds = small_dataset();
    REQUIRE_FALSE(ds.train.empty());
    REQUIRE_FALSE(ds.val.empty());
    REQUIRE_FALSE(ds.test.empty());

    std::set<std::string> cells_seen[3];
    const std::vector<const std::vector<Sample>*> splits{&ds.train, &ds.val, &ds.test};
    for (int s = 0; s < 3; ++s) {
        for (const auto& sample : *splits[s]) {
            CHECK(sample.tile.normalized);
            CHECK(sample.tile.stats_id == ds.stats.id());
            CHECK(sample.tile.pixels.size(1) == 32);
            CHECK(sample.label.glacier_fraction() >= 0.10);
            cells_seen[s].insert(sample.tile.cell_id);
        }
    }
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            for (const auto& c : cells_seen[a]) CHECK(cells_seen[b].count(c) == 0);

    // Statistics recomputed from the raw training tiles.
    std::vector<geodata::MultispectralTile> raw;
    for (const auto& s : ds.train) raw.push_back(geodata::denormalize(s.tile, ds.stats));
    const auto again = geodata::compute_normalization(raw);
    for (int c = 0; c < 8; ++c) {
        CHECK(again.mean[c] == Catch::Approx(ds.stats.mean[c]).margin(1e-4));
        CHECK(again.std[c] == Catch::Approx(ds.stats.std[c]).epsilon(1e-4));
    }
    const auto dist = label_distribution(ds.train);
    CHECK(dist[0] + dist[1] + dist[2] + dist[3] == Catch::Approx(1.0));
}

TEST_CASE("datasets survive a save and load") {
    const auto dir = testing::temp_dir("dataset");
    const auto& ds = small_dataset();
    save_dataset(dir, ds);
    const auto back = load_dataset(dir);
    CHECK(back.train.size() == ds.train.size());
    CHECK(back.val.size() == ds.val.size());
    CHECK(back.test.size() == ds.test.size());
    CHECK(back.stats.id() == ds.stats.id());
    CHECK(back.split_digest() == ds.split_digest());
    std::map<std::string, const Sample*> by_id;
    for (const auto& s : ds.train) by_id[s.tile.tile_id] = &s;
    for (const auto& s : back.train) {
        REQUIRE(by_id.count(s.tile.tile_id) == 1);
        CHECK(torch::equal(s.tile.pixels, by_id[s.tile.tile_id]->tile.pixels));
        CHECK(torch::equal(s.label.classes, by_id[s.tile.tile_id]->label.classes));
    }
}

TEST_CASE("one tile is overfit within 200 steps") {
    const auto& ds = small_dataset();
    Dataset one;
    one.train = {ds.train.front()};
    one.val = {ds.train.front()};
    one.stats = ds.stats;
    RunConfig cfg;
    cfg.class_name = "clean";
    cfg.loss.kind = losses::LossKind::dice;
    cfg.model.base_features = 16;
    cfg.optimizer.learning_rate = 1e-3;
    cfg.optimizer.epochs = 200;
    cfg.optimizer.batch_size = 1;
    cfg.augment_probability = 0.0;
    const auto run = train_model(cfg, one);
    REQUIRE(run.manifest.history.size() == 200);
    CHECK(run.manifest.history.back().train_dice < 0.05);
}

TEST_CASE("training writes a complete manifest, checkpoint and weight chart") {
    const auto dir = testing::temp_dir("train_run");
    auto cfg = tiny_config();
    cfg.optimizer.epochs = 3;
    cfg.out_dir = dir.string();
    const auto run = train_model(cfg, small_dataset());
    CHECK(std::filesystem::exists(dir / "best.ckpt"));
    CHECK(std::filesystem::exists(dir / "weights.png"));
    const auto m = RunManifest::load(dir / "manifest.json");
    CHECK(m.status == "completed");
    REQUIRE(m.history.size() == 3);
    for (const auto& e : m.history) {
        CHECK(std::isfinite(e.w_dice));
        CHECK(std::isfinite(e.w_boundary));
        CHECK(e.w_dice == Catch::Approx(1.0 / (2.0 * e.alpha1 * e.alpha1)));
    }
    CHECK(m.best_epoch >= 1);
    CHECK(m.best_val_iou == m.history[m.best_epoch - 1].val_iou);
    CHECK(m.split_digest == small_dataset().split_digest());
    CHECK(m.stats_id == small_dataset().stats.id());
    CHECK(m.train_tiles.size() == small_dataset().train.size());

    // Reloaded best checkpoint evaluates identically to the in-memory model.
    const auto from_disk = evaluate_run(dir / "manifest.json", small_dataset(), geodata::Split::val);
    auto model = run.model;
    const auto in_memory = evaluate_model(model, small_dataset().val, cfg.class_id(), cfg.threshold);
    CHECK(from_disk.pooled == in_memory.pooled);
    CHECK(from_disk.pooled.iou == m.best_val_iou);
}

TEST_CASE("identical configs reproduce the validation IoU") {
    const auto a = train_model(tiny_config(), small_dataset());
    const auto b = train_model(tiny_config(), small_dataset());
    CHECK(std::abs(a.manifest.history.back().val_iou - b.manifest.history.back().val_iou) <
          a.manifest.config.reproducibility_tolerance);
}

TEST_CASE("non-finite objectives abort with a diagnostic manifest") {
    const auto dir = testing::temp_dir("nan_run");
    Dataset ds = small_dataset();
    // Copies share tensor storage; clone before poisoning.
    ds.train.front().tile.pixels = ds.train.front().tile.pixels.clone();
    ds.train.front().tile.pixels.index_put_({0, 0, 0}, std::nanf(""));
    auto cfg = tiny_config();
    cfg.out_dir = dir.string();
    CHECK(has_code([&] { train_model(cfg, ds); }, ErrorCode::non_finite_loss));
    const auto m = RunManifest::load(dir / "manifest.json");
    CHECK(m.status == "aborted_non_finite");
    CHECK(m.diagnostic.find("epoch 1") != std::string::npos);
}

TEST_CASE("training input errors") {
    Dataset empty_val = small_dataset();
    empty_val.val.clear();
    CHECK(has_code([&] { train_model(tiny_config(), empty_val); }, ErrorCode::empty_dataset));
    Dataset raw = small_dataset();
    raw.train.front().tile.normalized = false;
    CHECK(has_code([&] { train_model(tiny_config(), raw); }, ErrorCode::unnormalized_input));
    const auto dir = testing::temp_dir("missing_run");
    CHECK(has_code([&] { evaluate_run(dir / "manifest.json", small_dataset(), geodata::Split::test); },
                   ErrorCode::missing_checkpoint));
}

TEST_CASE("oracle and constant predictors") {
    const auto& test = small_dataset().test;
    std::vector<metrics::MetricsReport> perfect, blank;
    for (const auto& s : test) {
        perfect.push_back(metrics::evaluate(s.label.indicator(1), s.label, 1));
        blank.push_back(metrics::evaluate(torch::zeros_like(s.label.indicator(2)), s.label, 2));
    }
    CHECK(metrics::aggregate(perfect).iou == 1.0);
    const auto b = metrics::aggregate(blank);
    CHECK(b.precision == 0.0);
    CHECK(b.recall == 0.0);
    CHECK(b.iou == 0.0);
}

TEST_CASE("prediction fuses the two single-class models") {
    const auto& test = small_dataset().test;
    auto all_on = constant_model(100.0);
    auto all_off = constant_model(-100.0);
    for (const auto& p : predict(all_on, all_off, test, 0.5)) {
        CHECK((p.fused == 1).all().item<bool>());
    }
    for (const auto& p : predict(all_off, all_off, test, 0.5)) {
        CHECK((p.fused == 0).all().item<bool>());
    }
    const auto dir = testing::temp_dir("predict");
    const auto both = predict(all_on, all_on, test, 0.5, dir);
    CHECK((both.front().fused == 2).all().item<bool>());
    CHECK(std::filesystem::exists(dir / (test.front().tile.tile_id + ".fused.png")));
    CHECK(std::filesystem::file_size(dir / (test.front().tile.tile_id + ".fused.bin")) == 32 * 32);
    auto mismatched = network::build_model({7, 4, 2, 0.1}, 0);
    CHECK(has_code([&] { predict(all_on, mismatched, test, 0.5); }, ErrorCode::band_mismatch));
}

TEST_CASE("saliency over a split is deterministic") {
    auto model = network::build_model({8, 4, 2, 0.1}, 2);
    const std::vector<Sample> one{small_dataset().test.front()};
    const auto dir = testing::temp_dir("saliency");
    const auto r = run_saliency(model, one, "debris", true, dir);
    const auto single = saliency::average_report(saliency::inference_logits(model),
                                                 std::vector<geodata::MultispectralTile>{one.front().tile});
    CHECK(r.per_channel_scores == single.per_channel_scores);
    CHECK(saliency::to_json(run_saliency(model, one, "debris")).dump() == saliency::to_json(r).dump());
    CHECK(std::filesystem::exists(dir / "saliency.json"));
    CHECK(std::filesystem::exists(dir / "saliency.png"));
}

TEST_CASE("ablation emits one complete row per variant") {
    auto cfg = tiny_config();
    cfg.optimizer.epochs = 1;
    const auto variants = default_ablation();
    REQUIRE(variants.size() == 7);
    const auto result = run_ablation(cfg, small_dataset(), variants);
    REQUIRE(result.rows.size() == variants.size());
    CHECK(result.json.size() == 2 * variants.size());
    for (std::size_t i = 0; i < variants.size(); ++i) {
        CHECK(result.rows[i].loss == variants[i].label());
        CHECK(result.rows[i].clean.class_name == "clean");
        CHECK(result.rows[i].debris.class_name == "debris");
        CHECK(result.rows[i].clean.tp + result.rows[i].clean.fp + result.rows[i].clean.fn + result.rows[i].clean.tn > 0);
    }
    CHECK(result.rows[1].weights == "0");
    CHECK(result.rows[6].weights == "dynamic");
    CHECK(result.table.find("dynamic") != std::string::npos);
}

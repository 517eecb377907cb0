#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "glacier/error.hpp"
#include "glacier/geodata/io.hpp"
#include "glacier/geodata/synthetic.hpp"
#include "glacier/harness/config.hpp"
#include "glacier/harness/dataset.hpp"
#include "glacier/harness/training.hpp"
#include "glacier/keyvalue.hpp"
#include "glacier/network/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace glacier;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--config", c.config, "key = value config file");
    cmd->add_option("--seed", c.seed, "overrides the config seed");
    auto* out = cmd->add_option("--out", c.out, "output directory");
    if (out_required) out->required();
}

KeyValueConfig load_kv(const std::string& path) {
    return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

void write_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

geodata::Raster labels_to_raster(const geodata::LabelGrid& label, const geodata::GeoTransform& t) {
    return {label.classes.unsqueeze(0).clone(), t};
}

harness::RunConfig run_config(const Common& c, const std::string& data_dir) {
    auto cfg = harness::RunConfig::from_keyvalue(load_kv(c.config));
    if (c.seed) cfg.seed = *c.seed;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!c.out.empty()) cfg.out_dir = c.out;
    cfg.validate();
    return cfg;
}

network::UNet load_run_model(const fs::path& run_dir, harness::RunManifest* manifest = nullptr) {
    const auto m = harness::RunManifest::load(run_dir / "manifest.json");
    require(!m.best_checkpoint.empty(), ErrorCode::missing_checkpoint, "run has no checkpoint: " + run_dir.string());
    if (manifest) *manifest = m;
    return network::load_checkpoint(run_dir / m.best_checkpoint).model;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Glacier segmentation toolkit"};
    app.require_subcommand(1);

    Common synth_c;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene as GeoTIFFs");
    add_common(synth, synth_c);

    Common prep_c;
    std::string prep_image, prep_labels, prep_scene;
    auto* prep = app.add_subcommand("prepare", "fishnet, filter, split, tile and normalize a scene");
    add_common(prep, prep_c);
    prep->add_option("--image", prep_image, "multispectral GeoTIFF");
    prep->add_option("--labels", prep_labels, "label GeoTIFF (0 background, 1 clean, 2 debris, 3 masked)");
    prep->add_option("--synthetic", prep_scene, "scene config; generates the scene instead of reading GeoTIFFs");

    Common train_c;
    std::string train_data;
    auto* train = app.add_subcommand("train", "train one single-class model");
    add_common(train, train_c);
    train->add_option("--data", train_data, "prepared dataset directory (overrides data_dir)");

    Common eval_c;
    std::string eval_run, eval_data, eval_split = "test";
    auto* eval = app.add_subcommand("evaluate", "evaluate a run's best checkpoint");
    add_common(eval, eval_c, false);
    eval->add_option("--run", eval_run, "run directory")->required();
    eval->add_option("--data", eval_data, "prepared dataset directory")->required();
    eval->add_option("--split", eval_split, "train, val or test");

    Common pred_c;
    std::string pred_clean, pred_debris, pred_data, pred_split = "test";
    double pred_threshold = 0.5;
    auto* pred = app.add_subcommand("predict", "fuse clean and debris predictions");
    add_common(pred, pred_c);
    pred->add_option("--clean-run", pred_clean, "clean-ice run directory")->required();
    pred->add_option("--debris-run", pred_debris, "debris run directory")->required();
    pred->add_option("--data", pred_data, "prepared dataset directory")->required();
    pred->add_option("--split", pred_split, "train, val or test");
    pred->add_option("--threshold", pred_threshold, "binarization threshold");

    Common sal_c;
    std::string sal_run, sal_data, sal_split = "test";
    bool sal_raw = false;
    auto* sal = app.add_subcommand("saliency", "per-channel gradient saliency of a trained model");
    add_common(sal, sal_c);
    sal->add_option("--run", sal_run, "run directory")->required();
    sal->add_option("--data", sal_data, "prepared dataset directory")->required();
    sal->add_option("--split", sal_split, "train, val or test");
    sal->add_flag("--raw", sal_raw, "skip per-tile normalization");

    Common abl_c;
    std::string abl_data, abl_split = "test";
    auto* abl = app.add_subcommand("ablation", "train every loss variant for both classes");
    add_common(abl, abl_c);
    abl->add_option("--data", abl_data, "prepared dataset directory (overrides data_dir)");
    abl->add_option("--split", abl_split, "train, val or test");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            auto spec = synth_c.config.empty() ? geodata::SceneSpec{} : geodata::load_scene_spec(synth_c.config);
            if (synth_c.seed) spec.seed = *synth_c.seed;
            const auto scene = geodata::generate_synthetic_scene(spec);
            const fs::path out = synth_c.out;
            fs::create_directories(out);
            const geodata::GeoTransform t{0.0, static_cast<double>(spec.height), 1.0, 1.0};
            geodata::write_geotiff(out / "image.tif", {scene.tile.pixels, t});
            geodata::write_geotiff(out / "labels.tif", labels_to_raster(scene.label, t));
            std::ofstream(out / "scene.cfg") << geodata::format_scene_spec(spec);
            const auto f = geodata::class_fractions(scene.label);
            write_json(out / "fractions.json",
                       {{"background", f[0]}, {"clean", f[1]}, {"debris", f[2]}, {"masked", f[3]}});
            std::cout << "scene " << spec.height << "x" << spec.width << " -> " << out << "\n";
        } else if (*prep) {
            auto cfg = harness::PrepareConfig::from_keyvalue(load_kv(prep_c.config));
            if (prep_c.seed) cfg.seed = *prep_c.seed;
            harness::Dataset ds;
            if (!prep_scene.empty()) {
                ds = harness::synthetic_dataset(geodata::load_scene_spec(prep_scene), cfg);
            } else {
                require(!prep_image.empty() && !prep_labels.empty(), ErrorCode::invalid_config,
                        "prepare needs --image and --labels, or --synthetic");
                ds = harness::prepare_dataset(geodata::read_geotiff(prep_image), geodata::read_geotiff(prep_labels), cfg);
            }
            harness::save_dataset(prep_c.out, ds);
            write_json(fs::path(prep_c.out) / "prepare.json", cfg.to_json());
            std::cout << "tiles train " << ds.train.size() << " val " << ds.val.size() << " test " << ds.test.size()
                      << "\n";
        } else if (*train) {
            const auto cfg = run_config(train_c, train_data);
            const auto ds = harness::load_dataset(cfg.data_dir);
            const auto run = harness::train_model(cfg, ds, [](const harness::EpochRecord& e) {
                std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss
                          << " val_iou " << e.val_iou << " w_dice " << e.w_dice << " w_boundary " << e.w_boundary
                          << std::endl;
            });
            std::cout << "best epoch " << run.manifest.best_epoch << " val_iou " << run.manifest.best_val_iou << "\n";
        } else if (*eval) {
            const auto ds = harness::load_dataset(eval_data);
            const auto split = geodata::split_from_string(eval_split);
            const auto ev = harness::evaluate_run(fs::path(eval_run) / "manifest.json", ds, split);
            const auto j = metrics::to_json(ev.pooled, eval_split);
            std::cout << j.dump() << "\n";
            if (!eval_c.out.empty()) write_json(fs::path(eval_c.out) / "metrics.json", j);
        } else if (*pred) {
            const auto ds = harness::load_dataset(pred_data);
            auto clean = load_run_model(pred_clean);
            auto debris = load_run_model(pred_debris);
            const auto preds = harness::predict(clean, debris, ds.split(geodata::split_from_string(pred_split)),
                                                pred_threshold, fs::path(pred_c.out));
            json rows = json::array();
            for (const auto& p : preds) {
                rows.push_back({{"tile_id", p.tile_id},
                                {"clean", metrics::to_json(p.clean, pred_split)},
                                {"debris", metrics::to_json(p.debris, pred_split)}});
            }
            write_json(fs::path(pred_c.out) / "predictions.json", rows);
            std::cout << preds.size() << " tiles -> " << pred_c.out << "\n";
        } else if (*sal) {
            const auto ds = harness::load_dataset(sal_data);
            harness::RunManifest m;
            auto model = load_run_model(sal_run, &m);
            const auto report = harness::run_saliency(model, ds.split(geodata::split_from_string(sal_split)),
                                                      m.config.class_name, !sal_raw, fs::path(sal_c.out));
            std::cout << saliency::to_json(report).dump() << "\n";
        } else if (*abl) {
            const auto cfg = run_config(abl_c, abl_data);
            const auto ds = harness::load_dataset(cfg.data_dir);
            const auto result =
                harness::run_ablation(cfg, ds, harness::default_ablation(), geodata::split_from_string(abl_split));
            std::cout << result.table;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

#include "glacier/harness/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <torch/torch.h>

#include "glacier/error.hpp"
#include "glacier/harness/plot.hpp"
#include "glacier/network/checkpoint.hpp"
#include "glacier/rng.hpp"

namespace glacier::harness {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json RunManifest::to_json() const {
    json hist = json::array();
    for (const auto& e : history) {
        hist.push_back({{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"train_dice", e.train_dice},
                        {"train_boundary", e.train_boundary},
                        {"val_loss", e.val_loss},
                        {"val_iou", e.val_iou},
                        {"w_dice", e.w_dice},
                        {"w_boundary", e.w_boundary},
                        {"alpha1", e.alpha1},
                        {"alpha2", e.alpha2}});
    }
    return {{"format", "glacier-run-manifest"},
            {"format_version", 1},
            {"config", config.to_json()},
            {"split_digest", split_digest},
            {"normalization_stats_id", stats_id},
            {"history", hist},
            {"best_epoch", best_epoch},
            {"best_val_iou", best_val_iou},
            {"best_checkpoint", best_checkpoint},
            {"status", status},
            {"diagnostic", diagnostic},
            {"reproducibility_tolerance", {{"metric", "final val_iou"}, {"abs", config.reproducibility_tolerance}}},
            {"train_tiles", train_tiles}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.config = RunConfig::from_json(j.at("config"));
        m.split_digest = j.value("split_digest", "");
        m.stats_id = j.value("normalization_stats_id", "");
        for (const auto& e : j.at("history")) {
            EpochRecord r;
            r.epoch = e.at("epoch").get<int>();
            r.train_loss = e.at("train_loss").get<double>();
            r.train_dice = e.value("train_dice", 0.0);
            r.train_boundary = e.value("train_boundary", 0.0);
            r.val_loss = e.at("val_loss").get<double>();
            r.val_iou = e.at("val_iou").get<double>();
            r.w_dice = e.at("w_dice").get<double>();
            r.w_boundary = e.at("w_boundary").get<double>();
            r.alpha1 = e.at("alpha1").get<double>();
            r.alpha2 = e.at("alpha2").get<double>();
            m.history.push_back(r);
        }
        m.best_epoch = j.value("best_epoch", 0);
        m.best_val_iou = j.value("best_val_iou", 0.0);
        m.best_checkpoint = j.value("best_checkpoint", "");
        m.status = j.value("status", "completed");
        m.diagnostic = j.value("diagnostic", "");
        m.train_tiles = j.value("train_tiles", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::io, std::string("bad run manifest: ") + e.what());
    }
    return m;
}

void RunManifest::save(const fs::path& path) const {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "cannot write manifest " + path.string());
    out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::load(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot read manifest " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::io, std::string("bad run manifest: ") + e.what());
    }
}

namespace {

struct Batch {
    torch::Tensor input;   // [B, C, H, W]
    torch::Tensor target;  // [B, H, W] float
    torch::Tensor valid;   // [B, H, W] float
};

Batch make_batch(const std::vector<const Sample*>& samples, int class_id) {
    std::vector<torch::Tensor> x, g, v;
    for (const auto* s : samples) {
        x.push_back(s->tile.pixels);
        g.push_back(s->label.indicator(class_id));
        v.push_back(s->label.valid());
    }
    return {torch::stack(x), torch::stack(g), torch::stack(v)};
}

std::vector<torch::Tensor> snapshot(const network::UNet& model) {
    std::vector<torch::Tensor> state;
    for (const auto& p : model->parameters()) state.push_back(p.detach().clone());
    for (const auto& b : model->buffers()) state.push_back(b.detach().clone());
    return state;
}

void restore(network::UNet& model, const std::vector<torch::Tensor>& state) {
    torch::NoGradGuard no_grad;
    std::size_t k = 0;
    for (auto& p : model->parameters()) p.copy_(state[k++]);
    for (auto& b : model->buffers()) b.copy_(state[k++]);
}

double scalar_or_zero(const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; }

}  // namespace

TrainedRun train_model(const RunConfig& input_config, const Dataset& dataset, const EpochCallback& on_epoch) {
    RunConfig config = input_config;
    config.validate();
    require(!dataset.train.empty(), ErrorCode::empty_dataset, "training split is empty");
    require(!dataset.val.empty(), ErrorCode::empty_dataset, "validation split is empty");
    const int class_id = config.class_id();
    const auto tile_size = dataset.train.front().tile.height();
    if (config.auto_depth) {
        config.model.depth = network::desk_scale_depth(tile_size);
    }
    for (const auto* split : {&dataset.train, &dataset.val}) {
        for (const auto& s : *split) {
            require(s.tile.normalized, ErrorCode::unnormalized_input, "tile " + s.tile.tile_id + " is not normalized");
        }
    }

    torch::manual_seed(config.seed);
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainedRun run;
    run.model = network::build_model(config.model, config.seed);
    std::vector<torch::Tensor> params = run.model->parameters();
    if (config.loss.kind == losses::LossKind::slba) {
        run.slba = losses::SlbaWeights(1.0, 1.0);
        for (const auto& p : run.slba->parameters()) params.push_back(p);
    }
    torch::optim::Adam optimizer(params, torch::optim::AdamOptions(config.optimizer.learning_rate));

    auto& manifest = run.manifest;
    manifest.config = config;
    manifest.split_digest = dataset.split_digest();
    manifest.stats_id = dataset.stats.id();
    for (const auto& s : dataset.train) manifest.train_tiles.push_back(s.tile.tile_id);

    const std::optional<fs::path> out_dir =
        config.out_dir.empty() ? std::nullopt : std::optional<fs::path>(config.out_dir);
    const auto abort_non_finite = [&](const std::string& what) {
        manifest.status = "aborted_non_finite";
        manifest.diagnostic = what;
        if (out_dir) manifest.save(*out_dir / "manifest.json");
        throw Error(ErrorCode::non_finite_loss, what);
    };

    std::vector<std::size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<torch::Tensor> best_state;
    double best_iou = -1.0;
    losses::SlbaWeights* slba = run.slba.is_empty() ? nullptr : &run.slba;

    for (int epoch = 1; epoch <= config.optimizer.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        run.model->train(true);
        double loss_sum = 0.0, dice_sum = 0.0, boundary_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.optimizer.batch_size)) {
            const auto stop = std::min(order.size(), start + static_cast<std::size_t>(config.optimizer.batch_size));
            std::vector<Sample> augmented;
            augmented.reserve(stop - start);
            for (auto i = start; i < stop; ++i) {
                const auto& s = dataset.train[order[i]];
                auto a = geodata::augment(s.tile, s.label, rng, config.augment_probability);
                augmented.push_back(Sample{std::move(a.tile), std::move(a.label)});
            }
            std::vector<const Sample*> ptrs;
            for (const auto& a : augmented) ptrs.push_back(&a);
            const auto batch = make_batch(ptrs, class_id);

            optimizer.zero_grad();
            const auto logits = run.model->forward(batch.input);
            const auto terms = losses::compute_loss(config.loss, logits, batch.target, batch.valid, slba);
            const double value = terms.total.item<double>();
            if (!std::isfinite(value)) {
                std::ostringstream msg;
                msg << "epoch " << epoch << " batch " << batches << ": objective " << value << ", dice "
                    << scalar_or_zero(terms.dice) << ", boundary " << scalar_or_zero(terms.boundary);
                abort_non_finite(msg.str());
            }
            terms.total.backward();
            optimizer.step();
            loss_sum += value;
            dice_sum += scalar_or_zero(terms.dice);
            boundary_sum += scalar_or_zero(terms.boundary);
            ++batches;
        }

        // Validation: objective under current weights, pooled IoU.
        run.model->eval();
        double val_loss = 0.0;
        int val_batches = 0;
        std::vector<metrics::MetricsReport> reports;
        {
            torch::NoGradGuard no_grad;
            for (std::size_t start = 0; start < dataset.val.size(); start += static_cast<std::size_t>(config.optimizer.batch_size)) {
                const auto stop = std::min(dataset.val.size(), start + static_cast<std::size_t>(config.optimizer.batch_size));
                std::vector<const Sample*> ptrs;
                for (auto i = start; i < stop; ++i) ptrs.push_back(&dataset.val[i]);
                const auto batch = make_batch(ptrs, class_id);
                const auto logits = run.model->forward(batch.input);
                val_loss += losses::compute_loss(config.loss, logits, batch.target, batch.valid, slba).total.item<double>();
                ++val_batches;
                const auto probs = torch::sigmoid(logits);
                for (std::size_t k = 0; k < ptrs.size(); ++k) {
                    reports.push_back(metrics::evaluate(probs[static_cast<std::int64_t>(k)], ptrs[k]->label, class_id,
                                                        config.threshold));
                }
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / batches;
        rec.train_dice = dice_sum / batches;
        rec.train_boundary = boundary_sum / batches;
        rec.val_loss = val_loss / val_batches;
        rec.val_iou = metrics::aggregate(reports).iou;
        std::tie(rec.w_dice, rec.w_boundary) = losses::effective_weights(config.loss, slba);
        if (slba) {
            rec.alpha1 = (*slba)->alpha1();
            rec.alpha2 = (*slba)->alpha2();
        }
        if (!std::isfinite(rec.val_loss)) {
            abort_non_finite("epoch " + std::to_string(epoch) + ": validation objective is not finite");
        }
        manifest.history.push_back(rec);
        if (rec.val_iou > best_iou) {
            best_iou = rec.val_iou;
            manifest.best_epoch = epoch;
            manifest.best_val_iou = rec.val_iou;
            best_state = snapshot(run.model);
        }
        if (on_epoch) on_epoch(rec);
    }

    restore(run.model, best_state);
    run.model->eval();

    if (out_dir) {
        fs::create_directories(*out_dir);
        network::CheckpointInfo info;
        info.config = run.model->config();
        info.class_name = config.class_name;
        info.loss = losses::to_string(config.loss.kind);
        info.epoch = manifest.best_epoch;
        info.stats = dataset.stats;
        if (slba) {
            info.slba_log_alphas = std::make_pair((*slba)->log_alpha1.item<double>(), (*slba)->log_alpha2.item<double>());
        }
        info.metadata = {{"split_digest", manifest.split_digest}, {"seed", config.seed}};
        network::save_checkpoint(*out_dir / "best.ckpt", run.model, info);
        manifest.best_checkpoint = "best.ckpt";
        manifest.save(*out_dir / "manifest.json");
        if (config.loss.kind == losses::LossKind::slba) {
            write_weight_trajectory(manifest, *out_dir / "weights.png");
        }
    }
    return run;
}

RunManifest train(const RunConfig& config) {
    require(!config.data_dir.empty(), ErrorCode::invalid_config, "data_dir is required");
    const auto dataset = load_dataset(config.data_dir);
    return train_model(config, dataset).manifest;
}

std::vector<torch::Tensor> predict_probabilities(network::UNet& model, const std::vector<Sample>& samples,
                                                 int batch_size) {
    torch::NoGradGuard no_grad;
    model->eval();
    std::vector<torch::Tensor> out;
    out.reserve(samples.size());
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto stop = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<torch::Tensor> x;
        for (auto i = start; i < stop; ++i) {
            require(samples[i].tile.normalized, ErrorCode::unnormalized_input,
                    "tile " + samples[i].tile.tile_id + " is not normalized");
            x.push_back(samples[i].tile.pixels);
        }
        const auto batch = torch::stack(x);
        network::check_input_shape(model->config(), batch);
        const auto probs = torch::sigmoid(model->forward(batch));
        for (std::int64_t k = 0; k < probs.size(0); ++k) out.push_back(probs[k].clone());
    }
    return out;
}

SplitEvaluation evaluate_model(network::UNet& model, const std::vector<Sample>& samples, int class_id,
                               double threshold) {
    require(!samples.empty(), ErrorCode::empty_dataset, "cannot evaluate an empty split");
    SplitEvaluation ev;
    const auto probs = predict_probabilities(model, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ev.per_tile.push_back(metrics::evaluate(probs[i], samples[i].label, class_id, threshold));
    }
    ev.pooled = metrics::aggregate(ev.per_tile);
    return ev;
}

SplitEvaluation evaluate_run(const fs::path& manifest_path, const Dataset& dataset, geodata::Split split) {
    require(fs::exists(manifest_path), ErrorCode::missing_checkpoint, "no manifest at " + manifest_path.string());
    const auto manifest = RunManifest::load(manifest_path);
    require(!manifest.best_checkpoint.empty(), ErrorCode::missing_checkpoint, "manifest names no checkpoint");
    auto ckpt = network::load_checkpoint(manifest_path.parent_path() / manifest.best_checkpoint);
    return evaluate_model(ckpt.model, dataset.split(split), manifest.config.class_id(), manifest.config.threshold);
}

std::vector<Prediction> predict(network::UNet& clean_model, network::UNet& debris_model,
                                const std::vector<Sample>& samples, double threshold,
                                const std::optional<fs::path>& out_dir) {
    require(clean_model->config().in_channels == debris_model->config().in_channels, ErrorCode::band_mismatch,
            "clean and debris models expect different band counts");
    const auto clean_probs = predict_probabilities(clean_model, samples);
    const auto debris_probs = predict_probabilities(debris_model, samples);
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto clean_bin = clean_probs[i] >= threshold;
        const auto debris_bin = debris_probs[i] >= threshold;
        Prediction p;
        p.tile_id = samples[i].tile.tile_id;
        p.fused = metrics::fuse_labels(clean_bin, debris_bin);
        p.clean = metrics::evaluate(clean_probs[i], samples[i].label, static_cast<int>(LabelClass::clean), threshold);
        p.debris = metrics::evaluate(debris_probs[i], samples[i].label, static_cast<int>(LabelClass::debris), threshold);
        if (out_dir) {
            fs::create_directories(*out_dir);
            const auto fused = p.fused.contiguous();
            std::ofstream bin(*out_dir / (p.tile_id + ".fused.bin"), std::ios::binary);
            bin.write(static_cast<const char*>(fused.data_ptr()), static_cast<std::streamsize>(fused.numel()));
            plot::write_png(*out_dir / (p.tile_id + ".fused.png"), plot::label_map(p.fused));
            plot::write_png(*out_dir / (p.tile_id + ".clean_errors.png"),
                            plot::error_map(clean_bin, samples[i].label.classes, static_cast<int>(LabelClass::clean)));
            plot::write_png(*out_dir / (p.tile_id + ".debris_errors.png"),
                            plot::error_map(debris_bin, samples[i].label.classes, static_cast<int>(LabelClass::debris)));
        }
        out.push_back(std::move(p));
    }
    return out;
}

saliency::SaliencyReport run_saliency(network::UNet& model, const std::vector<Sample>& samples,
                                      const std::string& class_name, bool normalize,
                                      const std::optional<fs::path>& out_dir) {
    std::vector<geodata::MultispectralTile> tiles;
    for (const auto& s : samples) {
        require(s.tile.normalized, ErrorCode::unnormalized_input, "tile " + s.tile.tile_id + " is not normalized");
        tiles.push_back(s.tile);
    }
    const auto report = saliency::average_report(saliency::inference_logits(model), tiles, normalize, class_name);
    if (out_dir) {
        fs::create_directories(*out_dir);
        std::ofstream out(*out_dir / "saliency.json");
        out << saliency::to_json(report).dump(2) << '\n';
        plot::write_png(*out_dir / "saliency.png", plot::saliency_bar_chart({report}));
    }
    return report;
}

void write_weight_trajectory(const RunManifest& manifest, const fs::path& png_path) {
    plot::Series dice{"w_dice", {31, 119, 180}, {}};
    plot::Series boundary{"w_boundary", {255, 127, 14}, {}};
    for (const auto& e : manifest.history) {
        dice.values.push_back(e.w_dice);
        boundary.values.push_back(e.w_boundary);
    }
    plot::write_png(png_path, plot::line_chart("LOSS WEIGHTS PER EPOCH", {dice, boundary}));
}

std::string AblationVariant::label() const {
    return kind == losses::LossKind::combined ? "combined" : losses::to_string(kind);
}

std::string AblationVariant::weight_label() const {
    switch (kind) {
        case losses::LossKind::combined: {
            std::ostringstream s;
            s << alpha;
            return s.str();
        }
        case losses::LossKind::slba: return "dynamic";
        default: return "-";
    }
}

std::vector<AblationVariant> default_ablation() {
    using losses::LossKind;
    return {{LossKind::ce, 0.0},       {LossKind::combined, 0.0}, {LossKind::combined, 0.1},
            {LossKind::combined, 0.5}, {LossKind::combined, 0.9}, {LossKind::combined, 1.0},
            {LossKind::slba, 0.5}};
}

AblationResult run_ablation(const RunConfig& base, const Dataset& dataset, const std::vector<AblationVariant>& variants,
                            geodata::Split split) {
    AblationResult result;
    result.json = json::array();
    for (const auto& v : variants) {
        metrics::TableRow row;
        row.loss = v.label();
        row.weights = v.weight_label();
        for (const char* cls : {"clean", "debris"}) {
            RunConfig cfg = base;
            cfg.class_name = cls;
            cfg.loss.kind = v.kind;
            cfg.loss.alpha = v.alpha;
            if (!base.out_dir.empty()) {
                cfg.out_dir = (fs::path(base.out_dir) / (row.loss + "_" + row.weights + "_" + cls)).string();
            }
            auto run = train_model(cfg, dataset);
            const auto ev = evaluate_model(run.model, dataset.split(split), cfg.class_id(), cfg.threshold);
            (std::string(cls) == "clean" ? row.clean : row.debris) = ev.pooled;
            auto j = metrics::to_json(ev.pooled, geodata::to_string(split));
            j["loss"] = row.loss;
            j["weights"] = row.weights;
            result.json.push_back(j);
        }
        result.rows.push_back(row);
    }
    result.table = metrics::format_table(result.rows);
    if (!base.out_dir.empty()) {
        fs::create_directories(base.out_dir);
        std::ofstream(fs::path(base.out_dir) / "ablation.json") << result.json.dump(2) << '\n';
        std::ofstream(fs::path(base.out_dir) / "ablation.txt") << result.table;
    }
    return result;
}

}  // namespace glacier::harness

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glacier/harness/config.hpp"
#include "glacier/harness/dataset.hpp"
#include "glacier/losses.hpp"
#include "glacier/metrics.hpp"
#include "glacier/network/unet.hpp"
#include "glacier/saliency.hpp"

namespace glacier::harness {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_dice = 0.0;
    double train_boundary = 0.0;
    double val_loss = 0.0;
    double val_iou = 0.0;
    double w_dice = 0.0;
    double w_boundary = 0.0;
    double alpha1 = 1.0;
    double alpha2 = 1.0;
};

struct RunManifest {
    RunConfig config;
    std::string split_digest;
    std::string stats_id;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_iou = 0.0;
    /// Relative to the manifest's directory when written by train().
    std::string best_checkpoint;
    std::string status = "completed";
    std::string diagnostic;
    std::vector<std::string> train_tiles;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

struct TrainedRun {
    RunManifest manifest;
    /// Parameters of the best validation epoch.
    network::UNet model{nullptr};
    losses::SlbaWeights slba{nullptr};
};

/// Trains one single-class model. When config.out_dir is set, writes
/// best.ckpt, manifest.json and (for slba) weights.png there. Throws
/// empty_dataset for an empty train or val split and non_finite_loss (after
/// writing a diagnostic manifest) when the objective stops being finite.
using EpochCallback = std::function<void(const EpochRecord&)>;
TrainedRun train_model(const RunConfig& config, const Dataset& dataset, const EpochCallback& on_epoch = {});

/// Loads config.data_dir and trains.
RunManifest train(const RunConfig& config);

/// Runs inference with p = sigmoid(logits) per sample, batched, in eval mode.
std::vector<torch::Tensor> predict_probabilities(network::UNet& model, const std::vector<Sample>& samples,
                                                 int batch_size = 16);

struct SplitEvaluation {
    metrics::MetricsReport pooled;
    std::vector<metrics::MetricsReport> per_tile;
};

SplitEvaluation evaluate_model(network::UNet& model, const std::vector<Sample>& samples, int class_id,
                               double threshold = metrics::kDefaultThreshold);

/// Loads the run's best checkpoint (missing_checkpoint when absent) and
/// evaluates it on a split.
SplitEvaluation evaluate_run(const std::filesystem::path& manifest_path, const Dataset& dataset,
                             geodata::Split split);

struct Prediction {
    std::string tile_id;
    torch::Tensor fused;  // uint8 class codes
    metrics::MetricsReport clean;
    metrics::MetricsReport debris;
};

/// Runs both single-class models, binarizes and fuses. With out_dir set,
/// writes <tile>.fused.bin plus fused and per-class TP/FP/FN PNGs.
std::vector<Prediction> predict(network::UNet& clean_model, network::UNet& debris_model,
                                const std::vector<Sample>& samples, double threshold,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Saliency over a split for the run's best checkpoint; with out_dir set
/// writes saliency.json and saliency.png.
saliency::SaliencyReport run_saliency(network::UNet& model, const std::vector<Sample>& samples,
                                      const std::string& class_name, bool normalize = true,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Line chart of per-epoch w_dice and w_boundary.
void write_weight_trajectory(const RunManifest& manifest, const std::filesystem::path& png_path);

struct AblationVariant {
    losses::LossKind kind = losses::LossKind::slba;
    double alpha = 0.5;

    std::string label() const;
    std::string weight_label() const;
};

/// ce, combined at 0 / 0.1 / 0.5 / 0.9 / 1, slba.
std::vector<AblationVariant> default_ablation();

struct AblationResult {
    std::vector<metrics::TableRow> rows;
    std::string table;
    nlohmann::json json;
};

/// Trains a clean and a debris model per variant on `base`'s settings and
/// evaluates both on `split`.
AblationResult run_ablation(const RunConfig& base, const Dataset& dataset, const std::vector<AblationVariant>& variants,
                            geodata::Split split = geodata::Split::test);

}  // namespace glacier::harness

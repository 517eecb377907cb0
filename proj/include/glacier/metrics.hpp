#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/types.h>

#include "glacier/geodata/tiles.hpp"

namespace glacier::metrics {

inline constexpr double kDefaultThreshold = 0.5;

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double iou = 0.0;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
    std::string class_name;
    double threshold = kDefaultThreshold;

    bool operator==(const MetricsReport&) const = default;
};

/// Ratios from counts; each is 0 when its denominator is 0.
MetricsReport from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn,
                          const std::string& class_name, double threshold = kDefaultThreshold);

/// Binarizes pred (p >= threshold) and counts against target == class_id over
/// non-masked pixels. class_id is 1 (clean) or 2 (debris).
MetricsReport evaluate(const torch::Tensor& pred, const geodata::LabelGrid& target, int class_id,
                       double threshold = kDefaultThreshold);

/// Per pixel: debris where debris_pred is set, else clean where clean_pred is
/// set, else background. Returns uint8 class codes.
torch::Tensor fuse_labels(const torch::Tensor& clean_pred, const torch::Tensor& debris_pred);

/// Micro-average: pooled counts, ratios recomputed.
MetricsReport aggregate(std::span<const MetricsReport> reports);

nlohmann::json to_json(const MetricsReport& report, const std::string& split);

/// One row of the comparison table: a loss variant with clean and debris results.
struct TableRow {
    std::string loss;
    std::string weights;
    MetricsReport clean;
    MetricsReport debris;
};

/// Plain-text table: Loss | Weight(s) | clean P R IoU | debris P R IoU, in percent.
std::string format_table(std::span<const TableRow> rows);

}  // namespace glacier::metrics

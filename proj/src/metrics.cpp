#include "glacier/metrics.hpp"

#include <cstdio>
#include <sstream>

#include <torch/torch.h>

#include "glacier/bands.hpp"
#include "glacier/error.hpp"

namespace glacier::metrics {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn,
                          const std::string& class_name, double threshold) {
    MetricsReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.tn = tn;
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    r.iou = ratio(tp, tp + fp + fn);
    r.class_name = class_name;
    r.threshold = threshold;
    return r;
}

MetricsReport evaluate(const torch::Tensor& pred, const geodata::LabelGrid& target, int class_id,
                       double threshold) {
    const auto name = class_name(class_id);
    require(threshold > 0.0 && threshold < 1.0, ErrorCode::invalid_input, "threshold must lie in (0, 1)");
    require(pred.defined() && pred.sizes() == target.classes.sizes(), ErrorCode::shape_mismatch,
            "prediction and label grid differ in shape");
    const auto valid = target.classes != static_cast<int>(LabelClass::masked);
    const auto positive = pred >= threshold;
    const auto truth = target.classes == class_id;
    const auto count = [&](const torch::Tensor& m) { return (m & valid).sum().item<std::int64_t>(); };
    return from_counts(count(positive & truth), count(positive & ~truth), count(~positive & truth),
                       count(~positive & ~truth), name, threshold);
}

torch::Tensor fuse_labels(const torch::Tensor& clean_pred, const torch::Tensor& debris_pred) {
    require(clean_pred.sizes() == debris_pred.sizes(), ErrorCode::shape_mismatch,
            "clean and debris predictions differ in shape");
    auto fused = torch::zeros(clean_pred.sizes(), torch::kUInt8);
    fused.masked_fill_(clean_pred.to(torch::kBool), static_cast<int>(LabelClass::clean));
    fused.masked_fill_(debris_pred.to(torch::kBool), static_cast<int>(LabelClass::debris));
    return fused;
}

MetricsReport aggregate(std::span<const MetricsReport> reports) {
    require(!reports.empty(), ErrorCode::invalid_input, "cannot aggregate an empty report list");
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& r : reports) {
        require(r.class_name == reports.front().class_name, ErrorCode::invalid_input,
                "cannot aggregate reports for different classes");
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
        tn += r.tn;
    }
    return from_counts(tp, fp, fn, tn, reports.front().class_name, reports.front().threshold);
}

nlohmann::json to_json(const MetricsReport& r, const std::string& split) {
    return {{"class", r.class_name},
            {"split", split},
            {"precision", r.precision},
            {"recall", r.recall},
            {"iou", r.iou},
            {"counts", {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"tn", r.tn}}},
            {"threshold", r.threshold}};
}

std::string format_table(std::span<const TableRow> rows) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "| %-10s | %-10s | %-29s | %-29s |\n", "Loss", "Weight(s)", "clean",
                  "debris");
    out << line;
    std::snprintf(line, sizeof(line), "| %-10s | %-10s | %9s %9s %9s | %9s %9s %9s |\n", "", "", "Precision",
                  "Recall", "IoU", "Precision", "Recall", "IoU");
    out << line;
    out << "|" << std::string(12, '-') << "|" << std::string(12, '-') << "|" << std::string(31, '-') << "|"
        << std::string(31, '-') << "|\n";
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "| %-10s | %-10s | %8.2f%% %8.2f%% %8.2f%% | %8.2f%% %8.2f%% %8.2f%% |\n",
                      r.loss.c_str(), r.weights.c_str(), 100.0 * r.clean.precision, 100.0 * r.clean.recall,
                      100.0 * r.clean.iou, 100.0 * r.debris.precision, 100.0 * r.debris.recall,
                      100.0 * r.debris.iou);
        out << line;
    }
    return out.str();
}

}  // namespace glacier::metrics

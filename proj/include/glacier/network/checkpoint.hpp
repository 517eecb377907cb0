#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "glacier/geodata/tiles.hpp"
#include "glacier/network/unet.hpp"

namespace glacier::network {

/// Checkpoint container, version 1.
///
///   offset 0   8 bytes   magic "GLCKPT01"
///   offset 8   u32 LE    format version (1)
///   offset 12  u64 LE    header length L
///   offset 20  L bytes   UTF-8 JSON header
///   offset 20+L          tensor payload, concatenated little-endian blobs
///
/// The header carries the model config, class name, loss name, epoch,
/// normalization stats (with id), the learned SLBA log-weights when present,
/// free-form metadata, and a `tensors` array of {name, dtype, shape, offset,
/// nbytes} where offset is relative to the payload start. dtype is "float32"
/// or "int64". Tensor names are the module's parameter and buffer paths.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
    ModelConfig config;
    std::string class_name;
    std::string loss;
    std::int64_t epoch = 0;
    std::optional<geodata::NormalizationStats> stats;
    std::optional<std::pair<double, double>> slba_log_alphas;
    nlohmann::json metadata = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const UNet& model, const CheckpointInfo& info);

struct LoadedCheckpoint {
    UNet model{nullptr};
    CheckpointInfo info;
};

/// Throws missing_checkpoint when the file is absent, io on a malformed file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace glacier::network

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace glacier::network {

struct ModelConfig {
    std::int64_t in_channels = 8;
    std::int64_t base_features = 32;
    /// Number of 2x down-sampling stages.
    std::int64_t depth = 4;
    double dropout_rate = 0.1;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// conv3x3 -> batch norm -> GELU, twice. Zero padding keeps the spatial size.
class ConvBlockImpl : public torch::nn::Module {
public:
    ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr};
    torch::nn::BatchNorm2d norm1_{nullptr};
    torch::nn::Conv2d conv2_{nullptr};
    torch::nn::BatchNorm2d norm2_{nullptr};
};
TORCH_MODULE(ConvBlock);

/// Encoder-decoder with concatenating skips and a single-logit head.
///
/// Encoder stage i runs a ConvBlock with base * 2^i maps, then max-pools and
/// applies spatial dropout. The bottleneck block has base * 2^depth maps and no
/// dropout of its own. Each decoder stage up-samples with a stride-2
/// transposed convolution, concatenates the matching encoder output, runs a
/// ConvBlock and applies spatial dropout. A 1x1 convolution yields the logit.
class UNetImpl : public torch::nn::Module {
public:
    explicit UNetImpl(const ModelConfig& config);

    /// [N, C, H, W] -> logits [N, H, W].
    torch::Tensor forward(const torch::Tensor& x);

    const ModelConfig& config() const { return config_; }
    /// Feature maps produced by the first block.
    std::int64_t first_block_features() const { return config_.base_features; }

private:
    ModelConfig config_;
    torch::nn::ModuleList encoders_;
    torch::nn::ModuleList decoders_;
    torch::nn::ModuleList upsamplers_;
    ConvBlock bottleneck_{nullptr};
    torch::nn::Dropout2d dropout_{nullptr};
    torch::nn::MaxPool2d pool_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(UNet);

/// Builds the network and draws its initial weights from a generator seeded
/// with `seed`: fan-in scaled normal (He) for convolutions, ones/zeros for
/// batch norm, zero biases.
UNet build_model(const ModelConfig& config, std::uint64_t seed);

struct SegmentationOutput {
    torch::Tensor logits;         // [N, H, W]
    torch::Tensor probabilities;  // sigmoid(logits)
};

struct ForwardOptions {
    bool training = false;
    /// Throw on unnormalized tiles instead of warning once.
    bool strict_normalization = true;
};

/// Runs a [C, H, W] tile or [N, C, H, W] batch. training=false puts dropout and
/// batch norm into inference mode.
SegmentationOutput forward(UNet& model, const torch::Tensor& input, bool normalized,
                           const ForwardOptions& options = {});

/// Checks channels and divisibility by 2^depth; throws shape_mismatch.
void check_input_shape(const ModelConfig& config, const torch::Tensor& batch);

/// Depth used at desk scale: 4, reduced to 3 for tiles under 128 pixels.
std::int64_t desk_scale_depth(std::int64_t tile_size);

}  // namespace glacier::network

#include "glacier/network/unet.hpp"

#include <cmath>
#include <iostream>

#include "glacier/error.hpp"

namespace glacier::network {

void ModelConfig::validate() const {
    require(in_channels > 0, ErrorCode::invalid_config, "in_channels must be positive");
    require(base_features > 0, ErrorCode::invalid_config, "base_features must be positive");
    require(depth > 0 && depth <= 8, ErrorCode::invalid_config, "depth must lie in [1, 8]");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCode::invalid_config,
            "dropout_rate must lie in [0, 1)");
}

ConvBlockImpl::ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels) {
    namespace nn = torch::nn;
    conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 3).padding(1).bias(false)));
    norm1_ = register_module("norm1", nn::BatchNorm2d(out_channels));
    conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out_channels, out_channels, 3).padding(1).bias(false)));
    norm2_ = register_module("norm2", nn::BatchNorm2d(out_channels));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) {
    auto y = torch::gelu(norm1_->forward(conv1_->forward(x)));
    return torch::gelu(norm2_->forward(conv2_->forward(y)));
}

UNetImpl::UNetImpl(const ModelConfig& config) : config_(config) {
    config_.validate();
    namespace nn = torch::nn;
    const auto base = config_.base_features;
    std::int64_t in = config_.in_channels;
    for (std::int64_t i = 0; i < config_.depth; ++i) {
        const auto out = base << i;
        encoders_->push_back(ConvBlock(in, out));
        in = out;
    }
    bottleneck_ = ConvBlock(in, base << config_.depth);
    for (std::int64_t i = config_.depth - 1; i >= 0; --i) {
        const auto out = base << i;
        upsamplers_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(out * 2, out, 2).stride(2)));
        decoders_->push_back(ConvBlock(out * 2, out));
    }
    register_module("encoders", encoders_);
    register_module("bottleneck", bottleneck_);
    register_module("upsamplers", upsamplers_);
    register_module("decoders", decoders_);
    dropout_ = register_module("dropout", nn::Dropout2d(nn::Dropout2dOptions(config_.dropout_rate)));
    pool_ = register_module("pool", nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2)));
    head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(base, 1, 1)));
}

torch::Tensor UNetImpl::forward(const torch::Tensor& input) {
    std::vector<torch::Tensor> skips;
    skips.reserve(static_cast<std::size_t>(config_.depth));
    auto x = input;
    for (const auto& enc : *encoders_) {
        x = enc->as<ConvBlock>()->forward(x);
        skips.push_back(x);
        x = dropout_->forward(pool_->forward(x));
    }
    x = bottleneck_->forward(x);
    for (std::size_t k = 0; k < decoders_->size(); ++k) {
        x = upsamplers_[k]->as<torch::nn::ConvTranspose2d>()->forward(x);
        x = torch::cat({x, skips[skips.size() - 1 - k]}, 1);
        x = dropout_->forward(decoders_[k]->as<ConvBlock>()->forward(x));
    }
    return head_->forward(x).squeeze(1);
}

UNet build_model(const ModelConfig& config, std::uint64_t seed) {
    UNet model(config);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    torch::NoGradGuard no_grad;
    for (auto& m : model->modules(/*include_self=*/false)) {
        if (auto* conv = m->as<torch::nn::Conv2d>()) {
            const auto& w = conv->weight;
            const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
            w.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
            if (conv->bias.defined()) {
                conv->bias.zero_();
            }
        } else if (auto* up = m->as<torch::nn::ConvTranspose2d>()) {
            // Weight layout is [in, out, kh, kw]. With kernel == stride every output
            // pixel receives exactly one tap per input channel.
            const auto& w = up->weight;
            const double fan_in = static_cast<double>(w.size(0));
            w.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
            if (up->bias.defined()) {
                up->bias.zero_();
            }
        } else if (auto* bn = m->as<torch::nn::BatchNorm2d>()) {
            bn->weight.fill_(1.0);
            bn->bias.zero_();
        }
    }
    return model;
}

void check_input_shape(const ModelConfig& config, const torch::Tensor& batch) {
    require(batch.dim() == 4, ErrorCode::shape_mismatch, "expected [N, C, H, W] input");
    require(batch.size(1) == config.in_channels, ErrorCode::band_mismatch,
            "model expects " + std::to_string(config.in_channels) + " channels, got " +
                std::to_string(batch.size(1)));
    const std::int64_t factor = std::int64_t{1} << config.depth;
    require(batch.size(2) > 0 && batch.size(3) > 0 && batch.size(2) % factor == 0 &&
                batch.size(3) % factor == 0,
            ErrorCode::shape_mismatch,
            "spatial size " + std::to_string(batch.size(2)) + "x" + std::to_string(batch.size(3)) +
                " is not divisible by 2^depth = " + std::to_string(factor));
}

SegmentationOutput forward(UNet& model, const torch::Tensor& input, bool normalized,
                           const ForwardOptions& options) {
    if (!normalized) {
        require(!options.strict_normalization, ErrorCode::unnormalized_input,
                "forward() expects normalized tiles");
        static bool warned = false;
        if (!warned) {
            std::cerr << "warning: running the model on unnormalized input\n";
            warned = true;
        }
    }
    const auto batch = input.dim() == 3 ? input.unsqueeze(0) : input;
    check_input_shape(model->config(), batch);
    model->train(options.training);
    SegmentationOutput out;
    out.logits = model->forward(batch.to(torch::kFloat32));
    out.probabilities = torch::sigmoid(out.logits);
    return out;
}

std::int64_t desk_scale_depth(std::int64_t tile_size) { return tile_size < 128 ? 3 : 4; }

}  // namespace glacier::network

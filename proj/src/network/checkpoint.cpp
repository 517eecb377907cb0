#include "glacier/network/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>

#include "glacier/error.hpp"

namespace glacier::network {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'G', 'L', 'C', 'K', 'P', 'T', '0', '1'};

json config_to_json(const ModelConfig& c) {
    return {{"in_channels", c.in_channels},
            {"base_features", c.base_features},
            {"depth", c.depth},
            {"dropout_rate", c.dropout_rate},
            {"activation", "gelu"},
            {"padding", "zero"}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.in_channels = j.at("in_channels").get<std::int64_t>();
    c.base_features = j.at("base_features").get<std::int64_t>();
    c.depth = j.at("depth").get<std::int64_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    return c;
}

std::vector<std::pair<std::string, torch::Tensor>> named_state(const UNet& model) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& p : model->named_parameters(true)) {
        out.emplace_back(p.key(), p.value());
    }
    for (const auto& b : model->named_buffers(true)) {
        out.emplace_back(b.key(), b.value());
    }
    return out;
}

}  // namespace

void save_checkpoint(const fs::path& path, const UNet& model, const CheckpointInfo& info) {
    json header;
    header["format"] = "glacier-checkpoint";
    header["format_version"] = kCheckpointVersion;
    header["model_config"] = config_to_json(model->config());
    header["class_name"] = info.class_name;
    header["loss"] = info.loss;
    header["epoch"] = info.epoch;
    if (info.stats) {
        header["normalization"] = {{"id", info.stats->id()},
                                   {"computed_from", info.stats->computed_from},
                                   {"mean", info.stats->mean},
                                   {"std", info.stats->std}};
    }
    if (info.slba_log_alphas) {
        header["slba_log_alphas"] = {info.slba_log_alphas->first, info.slba_log_alphas->second};
    }
    header["metadata"] = info.metadata;

    std::vector<torch::Tensor> blobs;
    json tensors = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : named_state(model)) {
        const bool is_int = t.scalar_type() == torch::kInt64;
        auto blob = t.detach().to(is_int ? torch::kInt64 : torch::kFloat32).contiguous();
        const auto nbytes = static_cast<std::uint64_t>(blob.numel()) * blob.element_size();
        tensors.push_back({{"name", name},
                           {"dtype", is_int ? "int64" : "float32"},
                           {"shape", blob.sizes().vec()},
                           {"offset", offset},
                           {"nbytes", nbytes}});
        offset += nbytes;
        blobs.push_back(std::move(blob));
    }
    header["tensors"] = tensors;

    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::io, "cannot write checkpoint " + path.string());
    const auto text = header.dump();
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t header_len = text.size();
    out.write(kMagic.data(), kMagic.size());
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& b : blobs) {
        out.write(static_cast<const char*>(b.data_ptr()),
                  static_cast<std::streamsize>(b.numel() * b.element_size()));
    }
    require(out.good(), ErrorCode::io, "short write to checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
    require(fs::exists(path), ErrorCode::missing_checkpoint, "no checkpoint at " + path.string());
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io, "cannot read checkpoint " + path.string());

    std::array<char, 8> magic{};
    std::uint32_t version = 0;
    std::uint64_t header_len = 0;
    in.read(magic.data(), magic.size());
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    require(in.good() && magic == kMagic, ErrorCode::io, path.string() + " is not a glacier checkpoint");
    require(version == kCheckpointVersion, ErrorCode::io,
            "unsupported checkpoint version " + std::to_string(version));
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    require(in.good(), ErrorCode::io, "truncated checkpoint header");

    LoadedCheckpoint loaded;
    json header;
    try {
        header = json::parse(text);
        auto& info = loaded.info;
        info.config = config_from_json(header.at("model_config"));
        info.class_name = header.value("class_name", "");
        info.loss = header.value("loss", "");
        info.epoch = header.value("epoch", std::int64_t{0});
        if (header.contains("normalization")) {
            geodata::NormalizationStats stats;
            const auto& n = header["normalization"];
            stats.mean = n.at("mean").get<std::array<double, kNumBands>>();
            stats.std = n.at("std").get<std::array<double, kNumBands>>();
            stats.computed_from = n.value("computed_from", "train");
            info.stats = stats;
        }
        if (header.contains("slba_log_alphas")) {
            const auto a = header["slba_log_alphas"].get<std::vector<double>>();
            info.slba_log_alphas = std::make_pair(a.at(0), a.at(1));
        }
        info.metadata = header.value("metadata", json::object());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::io, "bad checkpoint header: " + std::string(e.what()));
    }

    const auto payload_start = static_cast<std::streamoff>(20 + header_len);
    loaded.model = UNet(loaded.info.config);
    std::map<std::string, torch::Tensor> targets;
    for (auto& [name, t] : named_state(loaded.model)) {
        targets.emplace(name, t);
    }
    torch::NoGradGuard no_grad;
    std::size_t restored = 0;
    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto it = targets.find(name);
        require(it != targets.end(), ErrorCode::io, "checkpoint tensor '" + name + "' has no slot in the model");
        const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        require(it->second.sizes().vec() == shape, ErrorCode::io, "shape mismatch for tensor '" + name + "'");
        const bool is_int = entry.at("dtype").get<std::string>() == "int64";
        auto blob = torch::empty(shape, is_int ? torch::kInt64 : torch::kFloat32);
        const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
        require(nbytes == static_cast<std::uint64_t>(blob.numel()) * blob.element_size(), ErrorCode::io,
                "byte count mismatch for tensor '" + name + "'");
        in.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
        in.read(static_cast<char*>(blob.data_ptr()), static_cast<std::streamsize>(nbytes));
        require(in.good(), ErrorCode::io, "truncated checkpoint payload");
        it->second.copy_(blob);
        ++restored;
    }
    require(restored == targets.size(), ErrorCode::io, "checkpoint does not cover every model tensor");
    loaded.model->eval();
    return loaded;
}

}  // namespace glacier::network

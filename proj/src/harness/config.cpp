#include "glacier/harness/config.hpp"

#include <cmath>

#include "glacier/bands.hpp"
#include "glacier/error.hpp"

namespace glacier::harness {

void OptimizerConfig::validate() const {
    require(kind == "adam", ErrorCode::invalid_config, "only the adam optimizer is supported");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::invalid_config,
            "learning_rate must be positive");
    require(epochs >= 1, ErrorCode::invalid_config, "epochs must be >= 1");
    require(batch_size >= 1, ErrorCode::invalid_config, "batch_size must be >= 1");
}

void RunConfig::validate() const {
    (void)class_id();
    optimizer.validate();
    model.validate();
    loss.boundary.validate();
    if (loss.kind == losses::LossKind::combined) {
        require(loss.alpha >= 0.0 && loss.alpha <= 1.0, ErrorCode::invalid_weight, "alpha must lie in [0, 1]");
    }
    require(augment_probability >= 0.0 && augment_probability <= 1.0, ErrorCode::invalid_config,
            "augment_probability must lie in [0, 1]");
    require(threshold > 0.0 && threshold < 1.0, ErrorCode::invalid_config, "threshold must lie in (0, 1)");
    require(reproducibility_tolerance >= 0.0, ErrorCode::invalid_config, "tolerance must be nonnegative");
}

int RunConfig::class_id() const {
    try {
        return class_id_from_name(class_name);
    } catch (const Error&) {
        throw Error(ErrorCode::invalid_config, "class must be clean or debris, got '" + class_name + "'");
    }
}

RunConfig RunConfig::from_keyvalue(const KeyValueConfig& kv) {
    RunConfig c;
    c.class_name = kv.get_string("class", c.class_name);
    c.loss.kind = losses::loss_kind_from_string(kv.get_string("loss", losses::to_string(c.loss.kind)));
    c.loss.alpha = kv.get_double("alpha", c.loss.alpha);
    c.loss.boundary.theta = static_cast<int>(kv.get_int("theta", c.loss.boundary.theta));
    c.loss.boundary.kernel = static_cast<int>(kv.get_int("kernel", c.loss.boundary.kernel));
    c.model.in_channels = kv.get_int("in_channels", c.model.in_channels);
    c.model.base_features = kv.get_int("base_features", c.model.base_features);
    const auto depth = kv.get_string("depth", "auto");
    c.auto_depth = depth == "auto";
    if (!c.auto_depth) {
        c.model.depth = kv.get_int("depth", c.model.depth);
    }
    c.model.dropout_rate = kv.get_double("dropout", c.model.dropout_rate);
    c.optimizer.kind = kv.get_string("optimizer", c.optimizer.kind);
    c.optimizer.learning_rate = kv.get_double("learning_rate", c.optimizer.learning_rate);
    c.optimizer.epochs = static_cast<int>(kv.get_int("epochs", c.optimizer.epochs));
    c.optimizer.batch_size = static_cast<int>(kv.get_int("batch_size", c.optimizer.batch_size));
    c.augment_probability = kv.get_double("augment_probability", c.augment_probability);
    c.threshold = kv.get_double("threshold", c.threshold);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    c.data_dir = kv.get_string("data_dir", "");
    c.out_dir = kv.get_string("out_dir", "");
    c.reproducibility_tolerance = kv.get_double("reproducibility_tolerance", c.reproducibility_tolerance);
    c.validate();
    return c;
}

nlohmann::json RunConfig::to_json() const {
    return {{"class", class_name},
            {"loss",
             {{"kind", losses::to_string(loss.kind)},
              {"alpha", loss.alpha},
              {"theta", loss.boundary.theta},
              {"kernel", loss.boundary.kernel}}},
            {"model",
             {{"in_channels", model.in_channels},
              {"base_features", model.base_features},
              {"depth", model.depth},
              {"auto_depth", auto_depth},
              {"dropout", model.dropout_rate}}},
            {"optimizer",
             {{"kind", optimizer.kind},
              {"learning_rate", optimizer.learning_rate},
              {"epochs", optimizer.epochs},
              {"batch_size", optimizer.batch_size}}},
            {"augment_probability", augment_probability},
            {"threshold", threshold},
            {"seed", seed},
            {"data_dir", data_dir},
            {"out_dir", out_dir},
            {"reproducibility_tolerance", reproducibility_tolerance}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.class_name = j.at("class").get<std::string>();
        const auto& l = j.at("loss");
        c.loss.kind = losses::loss_kind_from_string(l.at("kind").get<std::string>());
        c.loss.alpha = l.at("alpha").get<double>();
        c.loss.boundary.theta = l.at("theta").get<int>();
        c.loss.boundary.kernel = l.at("kernel").get<int>();
        const auto& m = j.at("model");
        c.model.in_channels = m.at("in_channels").get<std::int64_t>();
        c.model.base_features = m.at("base_features").get<std::int64_t>();
        c.model.depth = m.at("depth").get<std::int64_t>();
        c.auto_depth = m.value("auto_depth", false);
        c.model.dropout_rate = m.at("dropout").get<double>();
        const auto& o = j.at("optimizer");
        c.optimizer.kind = o.at("kind").get<std::string>();
        c.optimizer.learning_rate = o.at("learning_rate").get<double>();
        c.optimizer.epochs = o.at("epochs").get<int>();
        c.optimizer.batch_size = o.at("batch_size").get<int>();
        c.augment_probability = j.at("augment_probability").get<double>();
        c.threshold = j.at("threshold").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.data_dir = j.value("data_dir", "");
        c.out_dir = j.value("out_dir", "");
        c.reproducibility_tolerance = j.value("reproducibility_tolerance", 1e-3);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_config, std::string("bad run config JSON: ") + e.what());
    }
    c.validate();
    return c;
}

void PrepareConfig::validate() const {
    require(cell_size > 0.0, ErrorCode::invalid_config, "cell_size must be positive");
    require(tile_size > 0, ErrorCode::invalid_config, "tile_size must be positive");
    require(min_glacier_fraction >= 0.0 && min_glacier_fraction < 1.0, ErrorCode::invalid_config,
            "min_glacier_fraction must lie in [0, 1)");
}

PrepareConfig PrepareConfig::from_keyvalue(const KeyValueConfig& kv) {
    PrepareConfig c;
    c.cell_size = kv.get_double("cell_size", c.cell_size);
    c.tile_size = kv.get_int("tile_size", c.tile_size);
    c.min_glacier_fraction = kv.get_double("min_glacier_fraction", c.min_glacier_fraction);
    if (kv.has("ratios")) {
        const auto r = kv.get_doubles("ratios");
        require(r.size() == 3, ErrorCode::invalid_config, "ratios lists train val test");
        c.ratios = geodata::SplitRatios{r[0], r[1], r[2]};
    }
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    c.validate();
    return c;
}

nlohmann::json PrepareConfig::to_json() const {
    return {{"cell_size", cell_size},
            {"tile_size", tile_size},
            {"min_glacier_fraction", min_glacier_fraction},
            {"ratios", {ratios.train, ratios.val, ratios.test}},
            {"seed", seed}};
}

}  // namespace glacier::harness

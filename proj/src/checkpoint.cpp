#include "semcom/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace semcom {

using nlohmann::json;

namespace {

json tensor_json(const Tensor& t) {
    return {{"shape", t.shape()}, {"data", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from(const json& j) {
    if (j.is_null()) return {};
    return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

json layer_json(const Layer& l) {
    json j{{"kind", to_string(l.kind)}, {"activation", to_string(l.activation)}};
    if (l.units) j["units"] = l.units;
    if (l.size) j["size"] = l.size;
    if (l.kind == LayerKind::Dropout) j["rate"] = l.rate;
    if (!l.target.empty()) j["target"] = l.target;
    if (!l.weight.empty()) {
        j["weight"] = tensor_json(l.weight);
        j["bias"] = tensor_json(l.bias);
    }
    return j;
}

Layer layer_from(const json& j) {
    Layer l;
    l.kind = parse_layer_kind(j.at("kind").get<std::string>());
    l.activation = parse_activation(j.at("activation").get<std::string>());
    l.units = j.value("units", std::size_t{0});
    l.size = j.value("size", std::size_t{0});
    l.rate = j.value("rate", 0.0);
    l.target = j.value("target", Shape{});
    if (j.contains("weight")) {
        l.weight = tensor_from(j.at("weight"));
        l.bias = tensor_from(j.at("bias"));
    }
    return l;
}

json model_json(const Model& m) {
    json layers = json::array();
    for (const auto& l : m.layers()) layers.push_back(layer_json(l));
    return {{"role", to_string(m.role())}, {"input_shape", m.input_shape()}, {"seed", m.seed()}, {"layers", layers}};
}

Model model_from(const json& j) {
    std::vector<Layer> layers;
    for (const auto& l : j.at("layers")) layers.push_back(layer_from(l));
    Model m(parse_role(j.at("role").get<std::string>()), j.at("input_shape").get<Shape>(), std::move(layers));
    m.set_seed(j.at("seed").get<std::uint64_t>());
    return m;
}

template <class F>
auto guarded(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw CheckpointError(where + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(where + ": " + e.what());
    } catch (const ShapeError& e) {
        throw CheckpointError(where + ": " + e.what());
    }
}

}  // namespace

std::string model_to_json(const Model& model) { return model_json(model).dump(); }

Model model_from_json(const std::string& text) {
    return guarded("model", [&] { return model_from(json::parse(text)); });
}

void save_checkpoint(const std::filesystem::path& path, const Models& models, const ModelConfig& cfg,
                     std::uint64_t seed) {
    json doc{{"format", "semcom-checkpoint"},
             {"version", kCheckpointVersion},
             {"config", {{"n_c", cfg.n_c}, {"input_shape", cfg.input_shape}, {"num_classes", cfg.num_classes}}},
             {"seed", seed},
             {"encoder", model_json(models.encoder)}};
    if (models.semantic) doc["semantic_decoder"] = model_json(*models.semantic);
    if (models.reconstruction) doc["reconstruction_decoder"] = model_json(*models.reconstruction);
    if (models.sensing) doc["sensing_decoder"] = model_json(*models.sensing);
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open " + path.string());
    return guarded(path.string(), [&] {
        const json doc = json::parse(in);
        if (doc.value("format", "") != "semcom-checkpoint") throw CheckpointError(path.string() + ": not a checkpoint");
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
        }
        Checkpoint cp;
        const auto& c = doc.at("config");
        cp.cfg.n_c = c.at("n_c").get<std::size_t>();
        cp.cfg.input_shape = c.at("input_shape").get<Shape>();
        cp.cfg.num_classes = c.at("num_classes").get<std::size_t>();
        cp.cfg.validate();
        cp.seed = doc.at("seed").get<std::uint64_t>();
        cp.models.encoder = model_from(doc.at("encoder"));
        auto optional_model = [&](const char* key) -> std::optional<Model> {
            if (!doc.contains(key)) return std::nullopt;
            return model_from(doc.at(key));
        };
        cp.models.semantic = optional_model("semantic_decoder");
        cp.models.reconstruction = optional_model("reconstruction_decoder");
        cp.models.sensing = optional_model("sensing_decoder");
        return cp;
    });
}

}  // namespace semcom

#include "semcom/models.hpp"

#include <sstream>
#include <stdexcept>

#include "semcom/random.hpp"

namespace semcom {

namespace {

using enum ActivationKind;

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

ModelConfig ModelConfig::reduced(std::size_t n_c, std::size_t classes) {
    ModelConfig cfg;
    cfg.n_c = n_c;
    cfg.input_shape = {8, 8, 3};
    cfg.num_classes = classes;
    return cfg;
}

void ModelConfig::validate() const {
    if (n_c < 2 || n_c % 2 != 0) {
        throw std::invalid_argument("n_c must be an even integer >= 2, got " + std::to_string(n_c));
    }
    if (input_shape.size() != 3 || input_shape[0] < 8 || input_shape[1] < 8 || input_shape[2] == 0) {
        throw std::invalid_argument("input shape must be (H>=8, W>=8, C>=1), got " + shape_string(input_shape));
    }
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
}

Model build_encoder(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model model(Role::Encoder, cfg.input_shape,
                {
                    Layer::conv2d(32, kKernelSize, ReLU),
                    Layer::max_pool(kPoolSize),
                    Layer::dropout(kDropoutRate),
                    Layer::conv2d(64, kKernelSize, ReLU),
                    Layer::max_pool(kPoolSize),
                    Layer::dropout(kDropoutRate),
                    Layer::conv2d(128, kKernelSize, ReLU),
                    Layer::max_pool(kPoolSize),
                    Layer::dropout(kDropoutRate),
                    Layer::flatten(),
                    Layer::dense(512, ReLU),
                    Layer::dropout(kDropoutRate),
                    Layer::dense(cfg.n_c, Linear),
                });
    model.initialize(derive_seed(seed, "encoder"));
    model.set_seed(seed);
    return model;
}

Model build_semantic_decoder(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model model(Role::SemanticDecoder, {cfg.n_c},
                {
                    Layer::dense(cfg.n_c, ReLU),
                    Layer::dense(cfg.n_c, ReLU),
                    Layer::dense(cfg.num_classes, Softmax),
                });
    model.initialize(derive_seed(seed, "semantic"));
    model.set_seed(seed);
    return model;
}

Model build_reconstruction_decoder(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model model(Role::ReconstructionDecoder, {cfg.n_c},
                {
                    Layer::dense(cfg.n_c, ReLU),
                    Layer::dense(128, ReLU),
                    Layer::dense(256, ReLU),
                    Layer::dense(512, ReLU),
                    Layer::dense(cfg.input_size(), Linear),
                    Layer::reshape(cfg.input_shape),
                });
    model.initialize(derive_seed(seed, "reconstruction"));
    model.set_seed(seed);
    return model;
}

Model build_sensing_decoder(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model model(Role::SensingDecoder, {cfg.n_c},
                {
                    Layer::dense(cfg.n_c, ReLU),
                    Layer::dense(cfg.n_c / 2, ReLU),
                    Layer::dense(2, Softmax),
                });
    model.initialize(derive_seed(seed, "sensing"));
    model.set_seed(seed);
    return model;
}

double compression_ratio(const ModelConfig& cfg) {
    return static_cast<double>(cfg.n_c) / static_cast<double>(cfg.input_size());
}

std::string describe_layer(const Layer& layer) {
    const std::string act(to_string(layer.activation));
    switch (layer.kind) {
    case LayerKind::Conv2D:
        return "Conv2D(" + std::to_string(layer.units) + "," + std::to_string(layer.size) + "x" +
               std::to_string(layer.size) + "," + act + ")";
    case LayerKind::MaxPool2D:
        return "MaxPool2D(" + std::to_string(layer.size) + "x" + std::to_string(layer.size) + ")";
    case LayerKind::Dropout:
        return "Dropout(" + fmt_double(layer.rate) + ")";
    case LayerKind::Flatten:
        return "Flatten";
    case LayerKind::Dense:
        return "Dense(" + std::to_string(layer.units) + "," + act + ")";
    case LayerKind::Reshape:
        return "Reshape" + shape_string(layer.target);
    case LayerKind::Activation:
        return "Activation(" + act + ")";
    }
    return "?";
}

std::vector<std::string> audit_model(const Model& model, const ModelConfig& cfg) {
    const auto nc = std::to_string(cfg.n_c);
    std::vector<std::string> expected;
    switch (model.role()) {
    case Role::Encoder:
        expected = {"Conv2D(32,3x3,ReLU)", "MaxPool2D(2x2)", "Dropout(0.25)",  "Conv2D(64,3x3,ReLU)",
                    "MaxPool2D(2x2)",      "Dropout(0.25)",  "Conv2D(128,3x3,ReLU)", "MaxPool2D(2x2)",
                    "Dropout(0.25)",       "Flatten",        "Dense(512,ReLU)",  "Dropout(0.25)",
                    "Dense(" + nc + ",Linear)"};
        break;
    case Role::SemanticDecoder:
        expected = {"Dense(" + nc + ",ReLU)", "Dense(" + nc + ",ReLU)",
                    "Dense(" + std::to_string(cfg.num_classes) + ",Softmax)"};
        break;
    case Role::ReconstructionDecoder:
        expected = {"Dense(" + nc + ",ReLU)", "Dense(128,ReLU)", "Dense(256,ReLU)", "Dense(512,ReLU)",
                    "Dense(" + std::to_string(cfg.input_size()) + ",Linear)", "Reshape" + shape_string(cfg.input_shape)};
        break;
    case Role::SensingDecoder:
        expected = {"Dense(" + nc + ",ReLU)", "Dense(" + std::to_string(cfg.n_c / 2) + ",ReLU)", "Dense(2,Softmax)"};
        break;
    case Role::Custom:
        return {"custom models have no preset"};
    }

    std::vector<std::string> problems;
    const auto& layers = model.layers();
    if (layers.size() != expected.size()) {
        problems.push_back("expected " + std::to_string(expected.size()) + " layers, found " + std::to_string(layers.size()));
    }
    for (std::size_t i = 0; i < std::min(layers.size(), expected.size()); ++i) {
        const auto got = describe_layer(layers[i]);
        if (got != expected[i]) problems.push_back("layer " + std::to_string(i) + ": expected " + expected[i] + ", found " + got);
    }
    const Shape in = model.role() == Role::Encoder ? cfg.input_shape : Shape{cfg.n_c};
    if (model.input_shape() != in) {
        problems.push_back("input shape " + shape_string(model.input_shape()) + ", expected " + shape_string(in));
    }
    return problems;
}

}  // namespace semcom

#include "semcom/model.hpp"

namespace semcom {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::Encoder: return "Encoder";
    case Role::SemanticDecoder: return "SemanticDecoder";
    case Role::ReconstructionDecoder: return "ReconstructionDecoder";
    case Role::SensingDecoder: return "SensingDecoder";
    case Role::Custom: return "Custom";
    }
    return "?";
}

Role parse_role(std::string_view name) {
    for (auto r : {Role::Encoder, Role::SemanticDecoder, Role::ReconstructionDecoder, Role::SensingDecoder, Role::Custom}) {
        if (to_string(r) == name) return r;
    }
    throw std::invalid_argument("unknown model role '" + std::string(name) + "'");
}

Model::Model(Role role, Shape input_shape, std::vector<Layer> layers)
    : role_(role), input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    (void)layer_shapes();  // validates the stack
}

std::vector<Shape> Model::layer_shapes() const {
    std::vector<Shape> shapes{input_shape_};
    for (const auto& layer : layers_) shapes.push_back(layer_output_shape(layer, shapes.back()));
    return shapes;
}

Shape Model::output_shape() const { return layer_shapes().back(); }

void Model::initialize(std::uint64_t seed) {
    seed_ = seed;
    Rng rng(seed);
    Shape shape = input_shape_;
    for (auto& layer : layers_) {
        initialize_layer(layer, shape, rng);
        shape = layer_output_shape(layer, shape);
    }
}

std::vector<ParamId> Model::parameter_ids(std::size_t slot) const {
    std::vector<ParamId> ids;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!layers_[i].trainable()) continue;
        ids.push_back({slot, i, 0});
        ids.push_back({slot, i, 1});
    }
    return ids;
}

Tensor& Model::parameter(ParamId id) {
    auto& layer = layers_.at(id.layer);
    return id.slot == 0 ? layer.weight : layer.bias;
}

const Tensor& Model::parameter(ParamId id) const {
    const auto& layer = layers_.at(id.layer);
    return id.slot == 0 ? layer.weight : layer.bias;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (auto id : parameter_ids()) n += parameter(id).size();
    return n;
}

Tensor Model::forward(const Tensor& input, Tape& tape, std::size_t slot) const {
    Shape expected{input.rank() ? input.dim(0) : 0};
    expected.insert(expected.end(), input_shape_.begin(), input_shape_.end());
    if (input.shape() != expected) {
        throw ShapeError(std::string(to_string(role_)) + ": expected input " + shape_string(expected) + " but got " +
                         shape_string(input.shape()));
    }
    Tensor x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) x = apply_layer(layers_[i], {slot, i, 0}, x, tape);
    return x;
}

Tensor Model::predict(const Tensor& input) const {
    Tape tape(Tape::Mode::Inference, nullptr, false);
    return forward(input, tape);
}

bool operator==(const Layer& a, const Layer& b) {
    return a.kind == b.kind && a.units == b.units && a.size == b.size && a.rate == b.rate && a.target == b.target &&
           a.activation == b.activation && a.weight == b.weight && a.bias == b.bias;
}

bool operator==(const Model& a, const Model& b) {
    return a.role_ == b.role_ && a.input_shape_ == b.input_shape_ && a.seed_ == b.seed_ && a.layers_ == b.layers_;
}

}  // namespace semcom

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "semcom/layers.hpp"

namespace semcom {

enum class Role { Encoder, SemanticDecoder, ReconstructionDecoder, SensingDecoder, Custom };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

/// Ordered layer stack with a fixed per-sample input shape.
class Model {
public:
    Model() = default;
    Model(Role role, Shape input_shape, std::vector<Layer> layers);

    /// He-uniform weights, zero biases, drawn from `seed`.
    void initialize(std::uint64_t seed);

    Role role() const { return role_; }
    const Shape& input_shape() const { return input_shape_; }
    Shape output_shape() const;
    /// Per-sample shape entering each layer, plus the final output shape.
    std::vector<Shape> layer_shapes() const;
    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t seed) { seed_ = seed; }

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    std::vector<ParamId> parameter_ids(std::size_t slot = 0) const;
    Tensor& parameter(ParamId id);
    const Tensor& parameter(ParamId id) const;
    std::size_t parameter_count() const;

    /// Batched forward pass recorded on `tape`. Parameter gradients are keyed
    /// with `slot` as their model index.
    Tensor forward(const Tensor& input, Tape& tape, std::size_t slot = 0) const;
    /// Inference-mode forward pass without recording.
    Tensor predict(const Tensor& input) const;

    friend bool operator==(const Model&, const Model&);

private:
    Role role_ = Role::Custom;
    Shape input_shape_;
    std::vector<Layer> layers_;
    std::uint64_t seed_ = 0;
};

bool operator==(const Layer& a, const Layer& b);

}  // namespace semcom

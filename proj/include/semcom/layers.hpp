#pragma once

#include <string>
#include <string_view>

#include "semcom/tape.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

enum class LayerKind { Conv2D, MaxPool2D, Dropout, Flatten, Dense, Reshape, Activation };
enum class ActivationKind { Linear, ReLU, Softmax };

std::string_view to_string(LayerKind kind);
std::string_view to_string(ActivationKind kind);
LayerKind parse_layer_kind(std::string_view name);
/// Throws std::invalid_argument("unknown activation ...") for anything else.
ActivationKind parse_activation(std::string_view name);

/// One network layer. Hyperparameter fields are only meaningful for the
/// kinds that use them:
///   Conv2D      units = filters, size = kernel (SAME padding, stride 1)
///   MaxPool2D   size = pool (stride = pool, floor on odd extents)
///   Dropout     rate
///   Dense       units
///   Reshape     target (per-sample shape)
/// Conv2D, Dense and Activation apply `activation` to their output.
struct Layer {
    LayerKind kind = LayerKind::Dense;
    std::size_t units = 0;
    std::size_t size = 0;
    double rate = 0.0;
    Shape target;
    ActivationKind activation = ActivationKind::Linear;
    Tensor weight;
    Tensor bias;

    bool trainable() const { return kind == LayerKind::Conv2D || kind == LayerKind::Dense; }

    static Layer conv2d(std::size_t filters, std::size_t kernel, ActivationKind act);
    static Layer max_pool(std::size_t pool);
    static Layer dropout(double rate);
    static Layer flatten();
    static Layer dense(std::size_t units, ActivationKind act);
    static Layer reshape(Shape target);
    static Layer activation_layer(ActivationKind act);
};

class LayerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-sample output shape of `layer` for per-sample input shape `input`.
Shape layer_output_shape(const Layer& layer, const Shape& input);

/// Allocates weight and bias for the per-sample input shape, He-uniform
/// over fan-in, zero bias. No-op for parameterless kinds.
void initialize_layer(Layer& layer, const Shape& input, Rng& rng);

/// Runs one layer on a batched input (axis 0 = batch) and records its
/// backward step on the tape. `id` carries the model slot and layer index
/// that key the parameter gradients (its tensor slot is ignored).
Tensor apply_layer(const Layer& layer, ParamId id, const Tensor& input, Tape& tape);

/// Standalone activation on a batched tensor (rows = samples).
Tensor apply_activation(ActivationKind act, const Tensor& input, Tape& tape);

}  // namespace semcom

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/model.hpp"

namespace semcom {

/// Network dimensions. The preset is 32x32x3 CIFAR-10 images with 10
/// classes; `reduced()` is a small 8x8x3 variant for fast tests.
struct ModelConfig {
    std::size_t n_c = 20;
    Shape input_shape{32, 32, 3};
    std::size_t num_classes = 10;

    static ModelConfig reduced(std::size_t n_c = 4, std::size_t classes = 4);

    bool is_preset() const { return input_shape == Shape{32, 32, 3} && num_classes == 10; }
    std::size_t input_size() const { return shape_size(input_shape); }
    /// Throws std::invalid_argument for odd or < 2 n_c and malformed shapes.
    void validate() const;
};

inline constexpr double kDropoutRate = 0.25;
inline constexpr std::size_t kKernelSize = 3;
inline constexpr std::size_t kPoolSize = 2;

Model build_encoder(const ModelConfig& cfg, std::uint64_t seed);
Model build_semantic_decoder(const ModelConfig& cfg, std::uint64_t seed);
Model build_reconstruction_decoder(const ModelConfig& cfg, std::uint64_t seed);
Model build_sensing_decoder(const ModelConfig& cfg, std::uint64_t seed);

/// n_c over the source dimensionality.
double compression_ratio(const ModelConfig& cfg);

/// Compact one-line description such as "Dense(20,ReLU)".
std::string describe_layer(const Layer& layer);

/// Checks a built model's layer sequence, widths and activations against
/// the preset for its role. Returns the list of discrepancies.
std::vector<std::string> audit_model(const Model& model, const ModelConfig& cfg);

}  // namespace semcom

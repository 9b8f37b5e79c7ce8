#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "semcom/training.hpp"

namespace semcom {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// JSON document for a model: role, input shape, init seed and every
/// layer's hyperparameters and tensors (shape plus row-major values).
std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

/// Versioned bundle of an encoder and its decoders with the model config
/// and training seed. Doubles are written with round-trip precision, so a
/// save/load cycle is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Models& models, const ModelConfig& cfg,
                     std::uint64_t seed);

struct Checkpoint {
    Models models;
    ModelConfig cfg;
    std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semcom

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "semcom/model.hpp"

namespace semcom {

enum class LossKind { CrossEntropy, MeanSquared, Probe };

struct LossSpec {
    LossKind kind = LossKind::Probe;
    std::vector<int> labels;  // CrossEntropy
    Tensor target;            // MeanSquared target or Probe coefficients
};

/// Builds the scalar objective on `tape` from a network output.
Tensor apply_loss(const LossSpec& loss, const Tensor& output, Tape& tape);

/// A differentiable pipeline: models interleaved with the elementwise
/// channel operations, optionally closed by a loss. Constants (noise,
/// gains) are frozen and must match the batched activation shape.
struct Chain {
    struct ModelStage {
        const Model* model;
    };
    struct NormalizeStage {};
    struct AddStage {
        Tensor constant;
    };
    struct MultiplyStage {
        Tensor gain;
    };
    struct DivideStage {
        Tensor gain;
        double floor;
    };
    using Stage = std::variant<ModelStage, NormalizeStage, AddStage, MultiplyStage, DivideStage>;

    std::vector<Stage> stages;
    std::optional<LossSpec> loss;

    /// Models in stage order; the i-th model runs with tape slot i.
    std::vector<const Model*> models() const;
};

/// Runs the chain on the tape path.
Tensor run_chain(const Chain& chain, const Tensor& input, Tape& tape);

struct GradCheckOptions {
    double fd_step = 1e-5;
    /// 2: (f(x+h) - f(x-h)) / 2h. 4: fourth-order central difference, which
    /// tolerates a larger h and so resolves much smaller gradients.
    int stencil = 2;
    Tape::Mode mode = Tape::Mode::Inference;
    /// Training-mode checks draw dropout masks from this seed, once.
    std::uint64_t dropout_seed = 0;
    /// 0 checks every entry; otherwise a seeded random sample per tensor.
    std::size_t max_entries_per_tensor = 0;
    std::uint64_t sample_seed = 0;
    bool check_input = true;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    /// Probes whose +h or -h evaluation flipped a piecewise branch (ReLU
    /// sign, pooling winner, clamp). Excluded from the maximum.
    std::size_t kinks_skipped = 0;
    std::string worst;
};

class GradCheckError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Compares every analytic gradient entry (all model parameters, and the
/// input) against a central finite difference. The finite differences come
/// from a separate extended-precision reference evaluator, not the tape
/// path. Relative error is |a - b| / max(|a|, |b|, 1e-12).
GradCheckReport grad_check(const Chain& chain, const Tensor& input, const GradCheckOptions& options = {});

/// Single model followed by `loss`.
GradCheckReport grad_check(const Model& model, const Tensor& input, const LossSpec& loss, double fd_step,
                           Tape::Mode mode = Tape::Mode::Inference);

}  // namespace semcom

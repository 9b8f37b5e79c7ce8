#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

/// Identifies one trainable tensor: model slot on the tape, layer index,
/// and tensor slot (0 = weight, 1 = bias).
struct ParamId {
    std::size_t model = 0;
    std::size_t layer = 0;
    std::size_t slot = 0;
    auto operator<=>(const ParamId&) const = default;
};

struct Gradients {
    std::map<ParamId, Tensor> params;
    Tensor input;

    void accumulate(ParamId id, const Tensor& grad);
};

class TapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear record of executed operations. Each entry owns a closure mapping
/// the gradient of its output to the gradient of its input and adds any
/// parameter gradients to the supplied map.
class Tape {
public:
    enum class Mode { Training, Inference };
    using Backward = std::function<Tensor(const Tensor& grad_output, Gradients& grads)>;

    explicit Tape(Mode mode = Mode::Inference, Rng* dropout_rng = nullptr, bool recording = true);

    Mode mode() const { return mode_; }
    bool recording() const { return recording_; }
    Rng& dropout_rng();

    void record(std::string name, Shape output_shape, Backward backward);

    /// Records a softmax whose pre-activation values a following
    /// cross-entropy may consume directly.
    void record_softmax(Shape output_shape, Tensor logits, Backward backward);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::string& name(std::size_t i) const { return entries_.at(i).name; }
    const Shape& output_shape() const;

    /// Logits of the final entry when that entry is an unfused softmax.
    const Tensor* trailing_softmax_logits() const;
    /// Marks the trailing softmax as folded into the next entry; backward
    /// then skips it.
    void fuse_trailing_softmax();

    /// Walks entries in reverse execution order. The seed must have the
    /// shape of the last recorded output.
    Gradients backward(const Tensor& seed) const;

    /// Piecewise branch bookkeeping (ReLU masks, pooling winners, clamps)
    /// so finite-difference checks can tell when a probe crossed a kink.
    bool tracks_branches() const { return track_branches_; }
    void set_track_branches(bool on) { track_branches_ = on; }
    void note_branch(std::uint64_t value);
    std::uint64_t branch_signature() const { return branch_hash_; }

private:
    struct Entry {
        std::string name;
        Shape output_shape;
        Backward backward;
        std::optional<Tensor> softmax_logits;
        bool fused = false;
    };

    Mode mode_;
    Rng* dropout_rng_;
    bool recording_;
    bool track_branches_ = false;
    std::uint64_t branch_hash_ = 1469598103934665603ULL;
    std::vector<Entry> entries_;
};

}  // namespace semcom

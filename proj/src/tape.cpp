#include "semcom/tape.hpp"

namespace semcom {

void Gradients::accumulate(ParamId id, const Tensor& grad) {
    auto it = params.find(id);
    if (it == params.end()) {
        params.emplace(id, grad);
    } else {
        it->second += grad;
    }
}

Tape::Tape(Mode mode, Rng* dropout_rng, bool recording)
    : mode_(mode), dropout_rng_(dropout_rng), recording_(recording) {}

Rng& Tape::dropout_rng() {
    if (dropout_rng_ == nullptr) throw TapeError("training-mode tape has no dropout RNG");
    return *dropout_rng_;
}

void Tape::record(std::string name, Shape output_shape, Backward backward) {
    if (!recording_) return;
    entries_.push_back({std::move(name), std::move(output_shape), std::move(backward), std::nullopt, false});
}

void Tape::record_softmax(Shape output_shape, Tensor logits, Backward backward) {
    if (!recording_) return;
    entries_.push_back({"Softmax", std::move(output_shape), std::move(backward), std::move(logits), false});
}

const Shape& Tape::output_shape() const {
    if (entries_.empty()) throw TapeError("tape is empty");
    return entries_.back().output_shape;
}

const Tensor* Tape::trailing_softmax_logits() const {
    if (entries_.empty()) return nullptr;
    const auto& last = entries_.back();
    if (last.fused || !last.softmax_logits) return nullptr;
    return &*last.softmax_logits;
}

void Tape::fuse_trailing_softmax() {
    if (trailing_softmax_logits() == nullptr) throw TapeError("no trailing softmax to fuse");
    entries_.back().fused = true;
}

void Tape::note_branch(std::uint64_t value) {
    // FNV-1a style mixing, order sensitive.
    branch_hash_ ^= value + 0x9e3779b97f4a7c15ULL + (branch_hash_ << 6) + (branch_hash_ >> 2);
    branch_hash_ *= 1099511628211ULL;
}

Gradients Tape::backward(const Tensor& seed) const {
    if (entries_.empty()) throw TapeError("backward called on an empty tape");
    if (seed.shape() != entries_.back().output_shape) {
        throw TapeError("seed shape " + shape_string(seed.shape()) + " does not match tape output " +
                        shape_string(entries_.back().output_shape));
    }
    Gradients grads;
    Tensor grad = seed;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->fused) continue;
        grad = it->backward(grad, grads);
    }
    grads.input = std::move(grad);
    return grads;
}

}  // namespace semcom

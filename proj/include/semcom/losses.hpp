#pragma once

#include <span>

#include "semcom/tape.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

/// Probabilities below this are floored before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over rows of -log(max(p[label], floor)). Labels must lie in
/// [0, columns).
double cross_entropy(const Tensor& probs, std::span<const int> labels);

/// Mean over all elements of (a - b)^2.
double mean_squared_error(const Tensor& a, const Tensor& b);

/// Cross-entropy recorded on the tape; returns a {1} tensor. When the
/// tape ends in a softmax the loss is computed from its logits with a
/// log-sum-exp and the softmax is folded into this entry.
Tensor cross_entropy_loss(const Tensor& probs, std::span<const int> labels, Tape& tape);

/// Mean squared error against a constant target, recorded on the tape.
Tensor mse_loss(const Tensor& prediction, const Tensor& target, Tape& tape);

/// sum(coefficients * output), recorded on the tape. A generic linear probe
/// for gradient checks of arbitrary outputs.
Tensor probe_loss(const Tensor& output, const Tensor& coefficients, Tape& tape);

/// Multiplies a {1} loss by a constant weight on the tape.
Tensor scale_loss(const Tensor& loss, double weight, Tape& tape);

}  // namespace semcom

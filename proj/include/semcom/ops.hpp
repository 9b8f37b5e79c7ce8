#pragma once

#include <vector>

#include "semcom/tape.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

/// Norm floor for all-zero rows in normalize_rows.
inline constexpr double kNormFloor = 1e-12;

/// Scales each row so its mean squared value is 1. A row whose norm is
/// below kNormFloor is divided by (norm + kNormFloor) instead and flagged
/// in `degenerate` (if given).
Tensor normalize_rows(const Tensor& x, Tape& tape, std::vector<bool>* degenerate = nullptr);

/// x + c with c held constant (gradient passes through unchanged).
Tensor add_constant(const Tensor& x, const Tensor& c, Tape& tape);

/// gain ⊙ x with gain held constant.
Tensor multiply_constant(const Tensor& x, const Tensor& gain, Tape& tape);

/// x ⊘ max(gain, floor) with gain held constant.
Tensor divide_clamped(const Tensor& x, const Tensor& gain, double floor, Tape& tape);

}  // namespace semcom

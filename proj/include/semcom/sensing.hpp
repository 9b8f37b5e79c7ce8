#pragma once

#include <cstdint>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

/// Monostatic target-detection setup. The echo of the transmitted latent
/// returns through a round-trip channel of quality `snr_db`.
struct SensingScenario {
    bool target_present = true;
    double snr_db = 10.0;
    double presence_prior = 0.5;
    bool strict = false;

    void validate() const;
};

struct Reflection {
    Tensor r;
    int label = 0;
};

/// Present: r = g ⊙ x + n with Rayleigh round-trip gain g (E[g^2] = 1);
/// absent: r = n. Noise variance is 10^(-snr/10) per dimension. `x` is one
/// power-normalized latent of shape (n_c).
Reflection simulate_reflection(const Tensor& x, const SensingScenario& scenario, Rng& rng);

/// Batch of echoes with independent Bernoulli(prior) presence per sample.
/// `gain` rows are zero for absent targets, so r = gain ⊙ latents + noise
/// holds for every row.
struct SensingBatch {
    Tensor inputs;
    std::vector<int> labels;
    Tensor gain;
    Tensor noise;
};

SensingBatch make_sensing_batch(const Tensor& latents, const SensingScenario& scenario, Rng& rng);

/// Labels, gains and noise for a batch of `shape`, without the latents.
/// make_sensing_batch is draw_sensing followed by reflect.
SensingBatch draw_sensing(const Shape& shape, const SensingScenario& scenario, Rng& rng);

/// gain ⊙ latents + noise for a previously drawn batch.
Tensor reflect(const Tensor& latents, const SensingBatch& draw);

/// Monte-Carlo accuracy of the classical energy detector (threshold on
/// ||r||^2) for unit-power Gaussian latents of size n_c. The threshold is
/// fitted on one draw of `trials` echoes and scored on an independent draw.
double energy_detector_accuracy(std::size_t n_c, double snr_db, double prior, std::size_t trials, std::uint64_t seed);

}  // namespace semcom

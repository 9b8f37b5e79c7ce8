#include "semcom/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semcom/channel.hpp"

namespace semcom {

namespace {

void check_unit_power(const Tensor& x, bool strict) {
    if (!strict) return;
    for (std::size_t r = 0; r < x.dim(0); ++r) {
        double p = 0.0;
        for (double v : x.row(r)) p += v * v;
        p /= static_cast<double>(x.row_size());
        if (std::abs(p - 1.0) > 0.1) {
            throw std::invalid_argument("sensing input row " + std::to_string(r) + " has power " + std::to_string(p) +
                                        ", expected 1");
        }
    }
}

}  // namespace

void SensingScenario::validate() const {
    if (!std::isfinite(snr_db) && snr_db < 0) throw std::invalid_argument("sensing SNR must not be -inf");
    if (std::isnan(snr_db)) throw std::invalid_argument("sensing SNR must be a number");
    if (!(presence_prior >= 0.0 && presence_prior <= 1.0)) {
        throw std::invalid_argument("presence prior must lie in [0,1]");
    }
}

Reflection simulate_reflection(const Tensor& x, const SensingScenario& scenario, Rng& rng) {
    scenario.validate();
    const Tensor batch = x.reshaped({1, x.size()});
    check_unit_power(batch, scenario.strict);
    Reflection out{Tensor(x.shape()), scenario.target_present ? 1 : 0};
    if (scenario.target_present) {
        const Tensor g = draw_rayleigh(x.shape(), rng);
        for (std::size_t i = 0; i < x.size(); ++i) out.r[i] = g[i] * x[i];
    }
    Tensor noise(x.shape());
    fill_normal(noise, rng, std::sqrt(noise_variance(scenario.snr_db)));
    out.r += noise;
    return out;
}

SensingBatch draw_sensing(const Shape& shape, const SensingScenario& scenario, Rng& rng) {
    scenario.validate();
    if (shape.size() != 2 || shape[0] == 0) {
        throw std::invalid_argument("sensing batch needs a nonempty (batch, n_c) shape, got " + shape_string(shape));
    }
    const auto n = shape[0];
    SensingBatch out;
    out.labels.resize(n);
    std::bernoulli_distribution present(scenario.presence_prior);
    for (auto& l : out.labels) l = present(rng) ? 1 : 0;
    out.gain = draw_rayleigh(shape, rng);
    for (std::size_t r = 0; r < n; ++r) {
        if (out.labels[r] == 0) std::fill(out.gain.row(r).begin(), out.gain.row(r).end(), 0.0);
    }
    out.noise = Tensor(shape);
    fill_normal(out.noise, rng, std::sqrt(noise_variance(scenario.snr_db)));
    return out;
}

Tensor reflect(const Tensor& latents, const SensingBatch& draw) {
    if (latents.shape() != draw.gain.shape()) {
        throw std::invalid_argument("latents " + shape_string(latents.shape()) + " do not match sensing draw " +
                                    shape_string(draw.gain.shape()));
    }
    Tensor r = latents;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= draw.gain[i];
    r += draw.noise;
    return r;
}

SensingBatch make_sensing_batch(const Tensor& latents, const SensingScenario& scenario, Rng& rng) {
    auto out = draw_sensing(latents.shape(), scenario, rng);
    check_unit_power(latents, scenario.strict);
    out.inputs = reflect(latents, out);
    return out;
}

double energy_detector_accuracy(std::size_t n_c, double snr_db, double prior, std::size_t trials, std::uint64_t seed) {
    Rng rng(seed);
    SensingScenario scenario;
    scenario.snr_db = snr_db;
    scenario.presence_prior = prior;

    auto sample = [&]() {
        Tensor x({trials, n_c});
        fill_normal(x, rng);
        const auto batch = make_sensing_batch(normalize_power(x).z, scenario, rng);
        std::vector<std::pair<double, int>> stats(trials);
        for (std::size_t i = 0; i < trials; ++i) {
            double e = 0.0;
            for (double v : batch.inputs.row(i)) e += v * v;
            stats[i] = {e, batch.labels[i]};
        }
        return stats;
    };

    // Fit: sweep thresholds over the sorted training energies, declaring
    // "present" above the threshold.
    auto train = sample();
    std::sort(train.begin(), train.end());
    std::size_t positives = 0;
    for (const auto& s : train) positives += static_cast<std::size_t>(s.second);
    std::size_t best_correct = positives;  // threshold below everything
    double threshold = train.empty() ? 0.0 : train.front().first - 1.0;
    std::size_t negatives_below = 0, positives_below = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        (train[i].second ? positives_below : negatives_below)++;
        const std::size_t correct = negatives_below + (positives - positives_below);
        if (correct > best_correct) {
            best_correct = correct;
            threshold = i + 1 < train.size() ? 0.5 * (train[i].first + train[i + 1].first) : train[i].first + 1.0;
        }
    }

    const auto test = sample();
    std::size_t correct = 0;
    for (const auto& [energy, label] : test) correct += static_cast<std::size_t>((energy > threshold ? 1 : 0) == label);
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace semcom

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semcom/channel.hpp"
#include "semcom/models.hpp"
#include "semcom/sensing.hpp"

using namespace semcom;

namespace {

Tensor unit_power_batch(std::size_t rows, std::size_t n, Rng& rng) {
    Tensor x({rows, n});
    fill_normal(x, rng);
    return normalize_power(x).z;
}

// Two-sided KS statistic of a sample against the unit-second-moment
// Rayleigh CDF 1 - exp(-h^2).
double ks_statistic(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = 1.0 - std::exp(-sample[i] * sample[i]);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return d;
}

}  // namespace

TEST(NormalizePower, ScalesToUnitMeanSquare) {
    const auto out = normalize_power(Tensor({1, 2}, {3, 4}));
    EXPECT_NEAR(out.z[0], 3 * std::sqrt(2.0) / 5, 1e-15);
    EXPECT_NEAR(out.z[1], 4 * std::sqrt(2.0) / 5, 1e-15);
    EXPECT_FALSE(out.degenerate[0]);
}

TEST(NormalizePower, IdempotentOnUnitPower) {
    Rng rng(1);
    const auto x = unit_power_batch(8, 20, rng);
    const auto y = normalize_power(x).z;
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-12);
}

TEST(NormalizePower, ZeroRowIsFlaggedAndFinite) {
    const auto out = normalize_power(Tensor({2, 4}, {0, 0, 0, 0, 1, 1, 1, 1}));
    EXPECT_TRUE(out.degenerate[0]);
    EXPECT_FALSE(out.degenerate[1]);
    EXPECT_TRUE(out.z.all_finite());
}

TEST(Transmit, NoiselessLimitAtCappedSnr) {
    Rng rng(2);
    const auto x = unit_power_batch(4, 20, rng);
    Channel channel({ChannelKind::AWGN, std::numeric_limits<double>::infinity()}, 5);
    const auto out = channel.transmit(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out.y[i], x[i], 1e-12);
}

TEST(Transmit, ZeroDbMeansUnitNoiseVariance) { EXPECT_DOUBLE_EQ(noise_variance(0.0), 1.0); }

TEST(Transmit, EmpiricalSnrMatchesTarget) {
    Rng rng(3);
    const auto x = unit_power_batch(5000, 20, rng);  // 10^5 channel uses
    for (auto kind : {ChannelKind::AWGN, ChannelKind::Rayleigh}) {
        for (double snr : {-5.0, 0.0, 10.0, 15.0}) {
            Channel channel({kind, snr}, 11);
            const auto out = channel.transmit(x);
            Tensor received_signal = out.y;
            for (std::size_t i = 0; i < x.size(); ++i) received_signal[i] -= out.draw.noise[i];
            EXPECT_NEAR(empirical_snr_db(received_signal, out.draw.noise), snr, 0.2) << to_string(kind);
        }
    }
}

TEST(Transmit, StrictModeRejectsUnnormalizedInput) {
    Channel strict({ChannelKind::AWGN, 10.0, FadingMode::PerDim, kDefaultGainFloor, true}, 1);
    EXPECT_THROW(strict.transmit(Tensor({1, 4}, 3.0)), ChannelError);
    Channel lenient({ChannelKind::AWGN, 10.0}, 1);
    lenient.transmit(Tensor({1, 4}, 3.0));
    EXPECT_EQ(lenient.power_warnings(), 1u);
}

TEST(Transmit, SeedDeterministic) {
    Rng rng(4);
    const auto x = unit_power_batch(16, 10, rng);
    Channel a({ChannelKind::Rayleigh, 5.0}, 99), b({ChannelKind::Rayleigh, 5.0}, 99);
    EXPECT_EQ(a.transmit(x).y, b.transmit(x).y);
}

TEST(Fading, SecondMomentAndRayleighLaw) {
    Rng rng(5);
    const auto h = draw_rayleigh({100000}, rng);
    EXPECT_NEAR(h.squared_norm() / 1e5, 1.0, 0.01);
    // Critical value of the one-sample KS test at 1% significance.
    EXPECT_LT(ks_statistic({h.values().begin(), h.values().end()}), 1.628 / std::sqrt(1e5));
}

TEST(Fading, PerBlockSharesGainAcrossRow) {
    Channel channel({ChannelKind::Rayleigh, 10.0, FadingMode::PerBlock}, 3);
    const auto draw = channel.draw({4, 6});
    for (std::size_t r = 0; r < 4; ++r) {
        auto row = draw.fading->h.row(r);
        EXPECT_TRUE(std::all_of(row.begin(), row.end(), [&](double v) { return v == row[0]; }));
    }
}

TEST(Equalize, InvertsNoiselessFading) {
    const FadingRealization h{Tensor({1, 3}, {0.5, 1.5, 2.0})};
    const Tensor x({1, 3}, {1.0, -2.0, 0.25});
    Tensor y = x;
    for (std::size_t i = 0; i < 3; ++i) y[i] *= h.h[i];
    const auto back = equalize(y, &h);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], x[i], 1e-15);
}

TEST(Equalize, ClampsTinyGain) {
    const FadingRealization h{Tensor({1, 2}, {1e-9, 1.0})};
    const auto y = equalize(Tensor({1, 2}, {1.0, 1.0}), &h, 1e-3);
    EXPECT_DOUBLE_EQ(y[0], 1e3);
    EXPECT_TRUE(y.all_finite());
}

TEST(Equalize, MissingRealizationIsError) { EXPECT_THROW(equalize(Tensor({1, 2}), nullptr), ChannelError); }

TEST(Equalize, EndToEndRayleighAtHighSnr) {
    Rng rng(6);
    const auto x = unit_power_batch(64, 20, rng);
    Channel channel({ChannelKind::Rayleigh, 300.0}, 7);
    const auto out = channel.transmit(x);
    const auto& h = out.draw.fading->h;
    const auto back = equalize(out.y, &*out.draw.fading);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (h[i] > kDefaultGainFloor) EXPECT_NEAR(back[i], x[i], 1e-9);
    }
}

TEST(ChannelGradient, AwgnIsIdentityAndRayleighChainMatchesDifferences) {
    Rng rng(8);
    const auto x = unit_power_batch(3, 6, rng);
    Channel awgn({ChannelKind::AWGN, 5.0}, 1);
    const auto draw = awgn.draw(x.shape());
    Tape tape;
    const auto y = apply_channel(x, draw, awgn.params(), tape);
    Tensor seed(y.shape());
    fill_normal(seed, rng);
    EXPECT_EQ(tape.backward(seed).input, seed);

    ChannelParams rp{ChannelKind::Rayleigh, 5.0};
    Channel rayleigh(rp, 2);
    Chain chain;
    append_channel_stages(chain, rayleigh.draw(x.shape()), rp);
    Tensor coeffs(x.shape());
    fill_normal(coeffs, rng);
    chain.loss = LossSpec{LossKind::Probe, {}, coeffs};
    Tensor raw(x.shape());
    fill_normal(raw, rng);
    EXPECT_LT(grad_check(chain, raw).max_relative_error, 1e-6);
}

// Sensing ---------------------------------------------------------------

TEST(Sensing, AbsentTargetEchoIsIndependentOfSignal) {
    Rng rng(9);
    SensingScenario absent{false, 10.0};
    double sxy = 0, sxx = 0, syy = 0;
    for (int t = 0; t < 100000; ++t) {
        Tensor x({1}, {std::normal_distribution<double>()(rng)});
        const auto refl = simulate_reflection(x, absent, rng);
        EXPECT_EQ(refl.label, 0);
        sxy += x[0] * refl.r[0];
        sxx += x[0] * x[0];
        syy += refl.r[0] * refl.r[0];
    }
    EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.02);
}

TEST(Sensing, PresentTargetNoiselessEchoIsScaledSignal) {
    Rng rng(10), replay(10);
    const auto x = unit_power_batch(1, 20, rng).reshaped({20});
    const auto refl = simulate_reflection(x, {true, 300.0}, replay);
    Rng again(10);
    const auto g = draw_rayleigh({20}, again);
    EXPECT_EQ(refl.label, 1);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(refl.r[i], g[i] * x[i], 1e-9);
}

TEST(Sensing, BatchPriorBoundariesAndBalance) {
    Rng rng(11);
    const auto latents = unit_power_batch(10000, 4, rng);
    for (double prior : {0.0, 1.0}) {
        SensingScenario s{true, 10.0, prior};
        const auto batch = make_sensing_batch(slice_rows(latents, 0, 100), s, rng);
        for (int l : batch.labels) EXPECT_EQ(l, static_cast<int>(prior));
    }
    const auto batch = make_sensing_batch(latents, {true, 10.0, 0.5}, rng);
    const double mean = std::accumulate(batch.labels.begin(), batch.labels.end(), 0.0) / 1e4;
    EXPECT_NEAR(mean, 0.5, 0.02);
    EXPECT_THROW(make_sensing_batch(Tensor({0, 4}), {true, 10.0, 0.5}, rng), std::invalid_argument);
}

TEST(Sensing, EnergyDetectorMatchesIndependentOracle) {
    // Reference values from a separate 10^6-trial simulation.
    EXPECT_NEAR(energy_detector_accuracy(20, 10.0, 0.5, 100000, 1), 0.9998, 0.02);
    EXPECT_NEAR(energy_detector_accuracy(20, 0.0, 0.5, 100000, 2), 0.8566, 0.02);
    EXPECT_NEAR(energy_detector_accuracy(20, -40.0, 0.5, 100000, 3), 0.5014, 0.02);
}

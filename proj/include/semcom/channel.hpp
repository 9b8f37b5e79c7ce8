#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "semcom/grad_check.hpp"
#include "semcom/tape.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

enum class ChannelKind { AWGN, Rayleigh };
enum class FadingMode { PerDim, PerBlock };

std::string_view to_string(ChannelKind kind);
std::string_view to_string(FadingMode mode);
ChannelKind parse_channel_kind(std::string_view name);
FadingMode parse_fading_mode(std::string_view name);

/// SNR values above this are treated as this (covers +inf).
inline constexpr double kMaxSnrDb = 300.0;
inline constexpr double kDefaultGainFloor = 1e-3;

struct ChannelParams {
    ChannelKind kind = ChannelKind::AWGN;
    double snr_db = 10.0;
    FadingMode fading = FadingMode::PerDim;
    double h_floor = kDefaultGainFloor;
    /// Reject inputs whose per-row power is off unit by more than 10%.
    bool strict = false;

    void validate() const;
};

/// Per-dimension noise variance for unit signal power: 10^(-snr/10).
double noise_variance(double snr_db);

/// Rayleigh-distributed magnitudes with E[h^2] = 1.
Tensor draw_rayleigh(const Shape& shape, Rng& rng);

struct FadingRealization {
    Tensor h;
};

/// One frozen channel draw for a batch: additive noise plus the fading gain
/// (Rayleigh only).
struct ChannelDraw {
    Tensor noise;
    std::optional<FadingRealization> fading;
};

struct Normalized {
    Tensor z;
    std::vector<bool> degenerate;
};

/// Unit mean-square power per row.
Normalized normalize_power(const Tensor& z);

/// Draws noise (and fading) for a batch of the given shape from `rng`.
ChannelDraw draw_channel(const Shape& shape, const ChannelParams& params, Rng& rng);

class ChannelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stochastic channel with an owned RNG. One instance per worker.
class Channel {
public:
    Channel(ChannelParams params, std::uint64_t seed);

    const ChannelParams& params() const { return params_; }

    /// Fresh noise (and fading for Rayleigh) for a batch of this shape.
    ChannelDraw draw(const Shape& shape);

    struct Output {
        Tensor y;
        ChannelDraw draw;
    };

    /// y = x + n (AWGN) or y = h ⊙ x + n (Rayleigh). The input is expected
    /// to be power-normalized; see ChannelParams::strict.
    Output transmit(const Tensor& x);

    /// Count of non-strict power warnings raised so far.
    std::size_t power_warnings() const { return warnings_; }

private:
    void check_power(const Tensor& x);

    ChannelParams params_;
    Rng rng_;
    std::size_t warnings_ = 0;
};

/// y ⊘ max(h, h_floor). Throws ChannelError when no realization is given.
Tensor equalize(const Tensor& y, const FadingRealization* realization, double h_floor = kDefaultGainFloor);

/// Applies a frozen draw to an already normalized batch on the tape,
/// followed by perfect-CSI equalization for Rayleigh.
Tensor apply_channel(const Tensor& x, const ChannelDraw& draw, const ChannelParams& params, Tape& tape);

/// Appends normalize -> channel -> equalize stages for a frozen draw.
void append_channel_stages(Chain& chain, const ChannelDraw& draw, const ChannelParams& params);

/// 10 log10(mean signal^2 / mean noise^2).
double empirical_snr_db(const Tensor& signal, const Tensor& noise);

}  // namespace semcom

#include "semcom/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semcom/ops.hpp"

namespace semcom {

std::string_view to_string(ChannelKind kind) { return kind == ChannelKind::AWGN ? "awgn" : "rayleigh"; }

std::string_view to_string(FadingMode mode) { return mode == FadingMode::PerDim ? "per-dim" : "per-block"; }

ChannelKind parse_channel_kind(std::string_view name) {
    if (name == "awgn" || name == "AWGN") return ChannelKind::AWGN;
    if (name == "rayleigh" || name == "Rayleigh") return ChannelKind::Rayleigh;
    throw std::invalid_argument("unknown channel kind '" + std::string(name) + "' (expected awgn|rayleigh)");
}

FadingMode parse_fading_mode(std::string_view name) {
    if (name == "per-dim") return FadingMode::PerDim;
    if (name == "per-block") return FadingMode::PerBlock;
    throw std::invalid_argument("unknown fading mode '" + std::string(name) + "' (expected per-dim|per-block)");
}

void ChannelParams::validate() const {
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("channel SNR must be finite or +inf");
    }
    if (!(h_floor > 0.0)) throw std::invalid_argument("h_floor must be positive");
}

double noise_variance(double snr_db) { return std::pow(10.0, -std::min(snr_db, kMaxSnrDb) / 10.0); }

Tensor draw_rayleigh(const Shape& shape, Rng& rng) {
    Tensor h(shape);
    std::normal_distribution<double> dist(0.0, std::sqrt(0.5));
    for (auto& v : h.values()) {
        const double re = dist(rng);
        const double im = dist(rng);
        v = std::hypot(re, im);
    }
    return h;
}

Normalized normalize_power(const Tensor& z) {
    Tape tape(Tape::Mode::Inference, nullptr, false);
    Normalized out;
    out.z = normalize_rows(z, tape, &out.degenerate);
    return out;
}

Channel::Channel(ChannelParams params, std::uint64_t seed) : params_(params), rng_(seed) { params_.validate(); }

ChannelDraw draw_channel(const Shape& shape, const ChannelParams& params, Rng& rng) {
    ChannelDraw d;
    d.noise = Tensor(shape);
    fill_normal(d.noise, rng, std::sqrt(noise_variance(params.snr_db)));
    if (params.kind == ChannelKind::Rayleigh) {
        if (params.fading == FadingMode::PerDim) {
            d.fading = FadingRealization{draw_rayleigh(shape, rng)};
        } else {
            const Tensor per_row = draw_rayleigh({shape.at(0)}, rng);
            Tensor h(shape);
            const auto n = h.row_size();
            for (std::size_t r = 0; r < shape[0]; ++r) std::fill_n(h.data() + r * n, n, per_row[r]);
            d.fading = FadingRealization{std::move(h)};
        }
    }
    return d;
}

ChannelDraw Channel::draw(const Shape& shape) { return draw_channel(shape, params_, rng_); }

void Channel::check_power(const Tensor& x) {
    for (std::size_t r = 0; r < (x.rank() ? x.dim(0) : 0); ++r) {
        double p = 0.0;
        for (double v : x.row(r)) p += v * v;
        p /= static_cast<double>(std::max<std::size_t>(x.row_size(), 1));
        if (std::abs(p - 1.0) > 0.1) {
            if (params_.strict) {
                throw ChannelError("channel input row " + std::to_string(r) + " has power " + std::to_string(p) +
                                   ", expected 1 (normalize before transmitting)");
            }
            ++warnings_;
            return;
        }
    }
}

Channel::Output Channel::transmit(const Tensor& x) {
    check_power(x);
    Output out{x, draw(x.shape())};
    if (out.draw.fading) {
        const auto& h = out.draw.fading->h;
        for (std::size_t i = 0; i < out.y.size(); ++i) out.y[i] *= h[i];
    }
    out.y += out.draw.noise;
    return out;
}

Tensor equalize(const Tensor& y, const FadingRealization* realization, double h_floor) {
    if (realization == nullptr) throw ChannelError("equalize requires a fading realization");
    Tape tape(Tape::Mode::Inference, nullptr, false);
    return divide_clamped(y, realization->h, h_floor, tape);
}

Tensor apply_channel(const Tensor& x, const ChannelDraw& draw, const ChannelParams& params, Tape& tape) {
    if (draw.fading) {
        Tensor y = multiply_constant(x, draw.fading->h, tape);
        y = add_constant(y, draw.noise, tape);
        return divide_clamped(y, draw.fading->h, params.h_floor, tape);
    }
    return add_constant(x, draw.noise, tape);
}

void append_channel_stages(Chain& chain, const ChannelDraw& draw, const ChannelParams& params) {
    chain.stages.emplace_back(Chain::NormalizeStage{});
    if (draw.fading) chain.stages.emplace_back(Chain::MultiplyStage{draw.fading->h});
    chain.stages.emplace_back(Chain::AddStage{draw.noise});
    if (draw.fading) chain.stages.emplace_back(Chain::DivideStage{draw.fading->h, params.h_floor});
}

double empirical_snr_db(const Tensor& signal, const Tensor& noise) {
    return 10.0 * std::log10(signal.squared_norm() / static_cast<double>(signal.size()) /
                             (noise.squared_norm() / static_cast<double>(noise.size())));
}

}  // namespace semcom

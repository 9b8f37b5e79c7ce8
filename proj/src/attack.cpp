#include "semcom/attack.hpp"

#include <cmath>
#include <limits>

#include "semcom/channel.hpp"
#include "semcom/random.hpp"

namespace semcom {

std::string_view to_string(AttackKind kind) {
    switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::FGSM: return "fgsm";
    case AttackKind::Gaussian: return "gaussian";
    }
    return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
    if (name == "none") return AttackKind::None;
    if (name == "fgsm") return AttackKind::FGSM;
    if (name == "gaussian") return AttackKind::Gaussian;
    throw std::invalid_argument("unknown attack '" + std::string(name) + "' (expected fgsm|gaussian|none)");
}

void AttackParams::validate() const {
    if (kind != AttackKind::None && !std::isfinite(psr_db)) throw std::invalid_argument("PSR must be finite");
}

namespace {

double energy(std::span<const double> x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
}

double psr_factor(double psr_db) { return std::pow(10.0, std::max(psr_db, kMinPsrDb) / 10.0); }

}  // namespace

double psr_to_epsilon(double psr_db, std::span<const double> x) {
    if (std::isnan(psr_db)) throw std::invalid_argument("PSR must be a number");
    const double e = energy(x);
    if (!(e > 0.0)) throw AttackError("cannot scale a perturbation against a zero-power input");
    return std::sqrt(psr_factor(psr_db) * e / static_cast<double>(x.size()));
}

double realized_psr_db(std::span<const double> x, std::span<const double> perturbed) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (perturbed[i] - x[i]) * (perturbed[i] - x[i]);
    return 10.0 * std::log10(d / energy(x));
}

Chain semantic_attack_chain(const Models& models, const ChannelDraw& draw, const ChannelParams& params,
                            std::vector<int> labels) {
    if (!models.semantic) throw AttackError("the attack needs a semantic decoder");
    Chain chain;
    chain.stages.emplace_back(Chain::ModelStage{&models.encoder});
    append_channel_stages(chain, draw, params);
    chain.stages.emplace_back(Chain::ModelStage{&*models.semantic});
    chain.loss = LossSpec{LossKind::CrossEntropy, std::move(labels), {}};
    return chain;
}

Tensor fgsm(const Chain& chain, const Tensor& x, std::span<const double> eps) {
    if (!chain.loss) throw AttackError("FGSM needs a chain that ends in a loss");
    if (x.rank() == 0 || eps.size() != x.dim(0)) {
        throw std::invalid_argument("FGSM needs one step size per batch row");
    }
    Tape tape(Tape::Mode::Inference);
    const Tensor loss = run_chain(chain, x, tape);
    const Tensor grad = tape.backward(Tensor(loss.shape(), 1.0)).input;
    if (grad.shape() != x.shape() || !grad.all_finite()) throw AttackError("input gradient unavailable");
    Tensor out = x;
    const auto n = x.row_size();
    for (std::size_t r = 0; r < x.dim(0); ++r) {
        if (eps[r] < 0.0) throw std::invalid_argument("FGSM step must be >= 0");
        if (eps[r] == 0.0) continue;
        for (std::size_t i = r * n; i < (r + 1) * n; ++i) {
            const double g = grad[i];
            out[i] += g > 0.0 ? eps[r] : (g < 0.0 ? -eps[r] : 0.0);
        }
    }
    return out;
}

Tensor gaussian_perturb(const Tensor& x, double psr_db, Rng& rng) {
    if (x.rank() == 0) throw std::invalid_argument("gaussian_perturb needs a batched tensor");
    Tensor noise(x.shape());
    fill_normal(noise, rng);
    Tensor out = x;
    for (std::size_t r = 0; r < x.dim(0); ++r) {
        const double power = energy(x.row(r));
        if (!(power > 0.0)) throw AttackError("cannot scale a perturbation against a zero-power input");
        const double target = psr_factor(psr_db) * power;
        auto row = noise.row(r);
        const double scale = std::sqrt(target / energy(row));
        auto dst = out.row(r);
        for (std::size_t i = 0; i < row.size(); ++i) dst[i] += scale * row[i];
    }
    return out;
}

std::vector<AttackPoint> evaluate_attack(const Models& models, const Dataset& data, std::span<const double> psr_grid,
                                         std::span<const AttackKind> kinds, const ChannelParams& channel,
                                         const SensingScenario& sensing, std::uint64_t seed,
                                         const EvalOptions& options) {
    if (psr_grid.empty()) throw std::invalid_argument("attack PSR grid is empty");
    if (data.size() == 0) throw std::invalid_argument("evaluation set is empty");
    const auto draws = make_eval_draws(data.size(), models.encoder.output_shape().at(0), channel, sensing, seed, options);

    std::vector<AttackPoint> points;
    points.push_back({AttackKind::None, -std::numeric_limits<double>::infinity(),
                      evaluate_images(models, data.images, data, channel, draws, options)});

    for (const auto kind : kinds) {
        for (std::size_t p = 0; p < psr_grid.size(); ++p) {
            const AttackParams params{kind, psr_grid[p]};
            params.validate();
            if (kind == AttackKind::None) continue;
            Tensor perturbed(data.images.shape());
            Rng rng(derive_seed(seed, "gaussian-attack", p));
            std::size_t batch = 0;
            for (std::size_t b = 0; b < data.size(); b += options.batch_size, ++batch) {
                const auto e = std::min(b + options.batch_size, data.size());
                const Tensor x = slice_rows(data.images, b, e);
                Tensor adv;
                if (kind == AttackKind::FGSM) {
                    std::vector<double> eps(e - b);
                    for (std::size_t r = 0; r < eps.size(); ++r) eps[r] = psr_to_epsilon(params.psr_db, x.row(r));
                    const auto chain = semantic_attack_chain(
                        models, draws.channel.at(batch), channel,
                        std::vector<int>(data.labels.begin() + static_cast<std::ptrdiff_t>(b),
                                         data.labels.begin() + static_cast<std::ptrdiff_t>(e)));
                    adv = fgsm(chain, x, eps);
                } else {
                    adv = gaussian_perturb(x, params.psr_db, rng);
                }
                std::copy(adv.data(), adv.data() + adv.size(), perturbed.data() + b * x.row_size());
            }
            points.push_back({kind, params.psr_db, evaluate_images(models, perturbed, data, channel, draws, options)});
        }
    }
    return points;
}

}  // namespace semcom

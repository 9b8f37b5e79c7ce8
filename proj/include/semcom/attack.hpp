#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "semcom/grad_check.hpp"
#include "semcom/training.hpp"

namespace semcom {

enum class AttackKind { None, FGSM, Gaussian };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

/// PSR values below this are treated as this (the zero-perturbation limit).
inline constexpr double kMinPsrDb = -300.0;

struct AttackParams {
    AttackKind kind = AttackKind::FGSM;
    double psr_db = -10.0;

    void validate() const;
};

class AttackError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sign-step size whose perturbation eps * sign(g) over x.size() elements
/// has energy 10^(psr/10) * ||x||^2.
double psr_to_epsilon(double psr_db, std::span<const double> x);

/// 10 log10(||perturbed - x||^2 / ||x||^2).
double realized_psr_db(std::span<const double> x, std::span<const double> perturbed);

/// Encoder -> power normalization -> frozen channel draw -> equalization ->
/// semantic decoder -> cross-entropy.
Chain semantic_attack_chain(const Models& models, const ChannelDraw& draw, const ChannelParams& params,
                            std::vector<int> labels);

/// x + eps_i * sign(d loss / d x) per batch row i, with sign(0) = 0. The
/// chain runs in inference mode and must end in a loss.
Tensor fgsm(const Chain& chain, const Tensor& x, std::span<const double> eps);

/// Each row of x plus Gaussian noise rescaled to the exact target PSR.
Tensor gaussian_perturb(const Tensor& x, double psr_db, Rng& rng);

struct AttackPoint {
    AttackKind kind = AttackKind::None;
    double psr_db = 0.0;
    MetricsRecord metrics;
};

/// Clean baseline (kind None, psr -inf) followed by one point per
/// (kind, psr) in grid order. All points share the frozen channel and echo
/// draws of evaluate() with the same seed.
std::vector<AttackPoint> evaluate_attack(const Models& models, const Dataset& data, std::span<const double> psr_grid,
                                         std::span<const AttackKind> kinds, const ChannelParams& channel,
                                         const SensingScenario& sensing, std::uint64_t seed,
                                         const EvalOptions& options = {});

}  // namespace semcom

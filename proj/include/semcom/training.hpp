#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/data.hpp"
#include "semcom/models.hpp"
#include "semcom/sensing.hpp"

namespace semcom {

struct MultiTaskWeights {
    double semantic = 1.0;
    double reconstruction = 1.0;
    double sensing = 1.0;

    /// All weights finite and >= 0, at least one positive.
    void validate() const;
    /// "w_sem,w_rec,w_sens"
    static MultiTaskWeights parse(std::string_view text);
    bool operator==(const MultiTaskWeights&) const = default;
};

struct LossBreakdown {
    double semantic_ce = 0.0;
    double reconstruction_mse = 0.0;
    double sensing_ce = 0.0;
    double total = 0.0;
};

/// Weighted sum in a fixed order; every reported total comes from here.
double combine(const MultiTaskWeights& w, double semantic_ce, double reconstruction_mse, double sensing_ce);

/// Mean cross-entropy of class probabilities against labels in [0, classes).
double semantic_loss(const Tensor& probs, std::span<const int> labels);
/// Mean squared error over all elements.
double reconstruction_loss(const Tensor& reconstruction, const Tensor& images);
/// Cross-entropy of (absent, present) probabilities against 0/1 labels.
double sensing_loss(const Tensor& probs, std::span<const int> labels);

enum class SnrMode { Matched, RandomizedRange };

std::string_view to_string(SnrMode mode);
SnrMode parse_snr_mode(std::string_view name);

struct AdamParams {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    ModelConfig cfg;
    ChannelParams channel;
    SensingScenario sensing;
    MultiTaskWeights weights;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    AdamParams adam;
    std::uint64_t seed = 1;
    SnrMode snr_mode = SnrMode::Matched;
    /// Channel and sensing SNR ranges sampled per batch under
    /// RandomizedRange.
    double snr_min_db = -5.0;
    double snr_max_db = 15.0;
    double sensing_snr_min_db = -5.0;
    double sensing_snr_max_db = 15.0;

    void validate() const;
};

/// Encoder plus up to three decoders. An absent decoder takes no part in
/// training and its metrics are reported as missing.
struct Models {
    Model encoder;
    std::optional<Model> semantic;
    std::optional<Model> reconstruction;
    std::optional<Model> sensing;

    bool operator==(const Models&) const = default;
};

/// All four networks for `cfg`, initialized from `seed`.
Models build_models(const ModelConfig& cfg, std::uint64_t seed);

class Adam {
public:
    explicit Adam(AdamParams params = {}) : params_(params) {}

    /// Advances the shared step counter; call once per optimizer step.
    void begin_step() { ++t_; }
    /// Applies gradients to `model`; `group` keeps moment state separate
    /// per model.
    void update(std::size_t group, Model& model, const std::map<ParamId, Tensor>& grads);
    std::size_t steps() const { return t_; }

private:
    struct Moments {
        Tensor m, v;
    };
    AdamParams params_;
    std::size_t t_ = 0;
    std::map<std::pair<std::size_t, ParamId>, Moments> state_;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Joint optimizer state and RNG streams (dropout, channel, sensing) for one
/// training run. Each stream is seeded independently so the presence of a
/// decoder never shifts another consumer's draws.
class Trainer {
public:
    Trainer(const TrainConfig& config, Models& models);

    /// One forward/backward pass and one optimizer update. Throws
    /// TrainingError on a non-finite loss.
    LossBreakdown step(const Tensor& images, std::span<const int> labels);

    const TrainConfig& config() const { return config_; }

private:
    TrainConfig config_;
    Models& models_;
    Adam adam_;
    Rng dropout_rng_, channel_rng_, sensing_rng_;
};

struct TrainResult {
    Models models;
    /// Per-epoch mean of the step losses; total recombined via combine().
    std::vector<LossBreakdown> history;
};

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown&)>;

TrainResult train(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch = {});
/// Trains caller-supplied models (e.g. with decoders removed).
TrainResult train(const TrainConfig& config, const Dataset& data, Models models, const EpochCallback& on_epoch = {});

struct MetricsRecord {
    ChannelKind channel = ChannelKind::AWGN;
    double snr_db = 0.0;
    std::size_t n_c = 0;
    std::optional<double> task_accuracy;
    std::optional<double> reconstruction_mse;
    std::optional<double> sensing_accuracy;
    std::size_t task_correct = 0;
    std::size_t sensing_correct = 0;
    std::size_t sensing_trials = 0;
    std::size_t sample_count = 0;
    /// Argmax semantic predictions, in dataset order.
    std::vector<int> predictions;
};

struct EvalOptions {
    std::size_t batch_size = 256;
    /// Independent echo draws per test sample for sensing accuracy.
    std::size_t sensing_draws = 4;
};

/// Frozen channel and echo realizations for a whole evaluation set, so that
/// clean and perturbed evaluations see identical randomness.
struct EvalDraws {
    std::vector<ChannelDraw> channel;     // one per batch
    std::vector<SensingBatch> sensing;    // sensing_draws per batch
};

EvalDraws make_eval_draws(std::size_t samples, std::size_t n_c, const ChannelParams& channel,
                          const SensingScenario& sensing, std::uint64_t seed, const EvalOptions& options = {});

/// Scores `images` (possibly perturbed copies of data.images) against the
/// labels of `data` under frozen draws.
MetricsRecord evaluate_images(const Models& models, const Tensor& images, const Dataset& data,
                              const ChannelParams& channel, const EvalDraws& draws, const EvalOptions& options = {});

/// Inference-mode metrics over the whole dataset. Deterministic in `seed`.
MetricsRecord evaluate(const Models& models, const Dataset& data, const ChannelParams& channel,
                       const SensingScenario& sensing, std::uint64_t seed, const EvalOptions& options = {});

}  // namespace semcom

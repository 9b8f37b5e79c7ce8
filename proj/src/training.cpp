#include "semcom/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "semcom/losses.hpp"
#include "semcom/ops.hpp"
#include "semcom/random.hpp"

namespace semcom {

void MultiTaskWeights::validate() const {
    for (double w : {semantic, reconstruction, sensing}) {
        if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("loss weights must be finite and >= 0");
    }
    if (semantic == 0.0 && reconstruction == 0.0 && sensing == 0.0) {
        throw std::invalid_argument("at least one loss weight must be positive");
    }
}

MultiTaskWeights MultiTaskWeights::parse(std::string_view text) {
    std::vector<double> values;
    std::stringstream in{std::string(text)};
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw std::invalid_argument("weights: '" + item + "' is not a number");
        }
        values.push_back(v);
    }
    if (values.size() != 3) throw std::invalid_argument("weights: expected w_sem,w_rec,w_sens, got '" + std::string(text) + "'");
    MultiTaskWeights w{values[0], values[1], values[2]};
    w.validate();
    return w;
}

double combine(const MultiTaskWeights& w, double semantic_ce, double reconstruction_mse, double sensing_ce) {
    return w.semantic * semantic_ce + w.reconstruction * reconstruction_mse + w.sensing * sensing_ce;
}

double semantic_loss(const Tensor& probs, std::span<const int> labels) { return cross_entropy(probs, labels); }

double reconstruction_loss(const Tensor& reconstruction, const Tensor& images) {
    return mean_squared_error(reconstruction, images);
}

double sensing_loss(const Tensor& probs, std::span<const int> labels) {
    if (probs.rank() != 2 || probs.dim(1) != 2) {
        throw std::invalid_argument("sensing probabilities must be (batch, 2), got " + shape_string(probs.shape()));
    }
    return cross_entropy(probs, labels);
}

std::string_view to_string(SnrMode mode) { return mode == SnrMode::Matched ? "matched" : "randomized"; }

SnrMode parse_snr_mode(std::string_view name) {
    if (name == "matched") return SnrMode::Matched;
    if (name == "randomized") return SnrMode::RandomizedRange;
    throw std::invalid_argument("unknown SNR mode '" + std::string(name) + "' (expected matched|randomized)");
}

void TrainConfig::validate() const {
    cfg.validate();
    channel.validate();
    sensing.validate();
    weights.validate();
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate)) {
        throw std::invalid_argument("learning rate must be finite and >= 0");
    }
    if (snr_mode == SnrMode::RandomizedRange &&
        !(snr_min_db <= snr_max_db && sensing_snr_min_db <= sensing_snr_max_db)) {
        throw std::invalid_argument("randomized SNR range is empty");
    }
}

Models build_models(const ModelConfig& cfg, std::uint64_t seed) {
    return Models{build_encoder(cfg, seed), build_semantic_decoder(cfg, seed), build_reconstruction_decoder(cfg, seed),
                  build_sensing_decoder(cfg, seed)};
}

void Adam::update(std::size_t group, Model& model, const std::map<ParamId, Tensor>& grads) {
    const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
    for (const auto& [id, g] : grads) {
        Tensor& p = model.parameter(id);
        auto [it, fresh] = state_.try_emplace({group, id});
        if (fresh) it->second = Moments{Tensor(g.shape()), Tensor(g.shape())};
        auto& [m, v] = it->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = params_.beta1 * m[i] + (1.0 - params_.beta1) * g[i];
            v[i] = params_.beta2 * v[i] + (1.0 - params_.beta2) * g[i] * g[i];
            p[i] -= params_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + params_.epsilon);
        }
    }
}

Trainer::Trainer(const TrainConfig& config, Models& models)
    : config_(config),
      models_(models),
      adam_(config.adam),
      dropout_rng_(derive_seed(config.seed, "dropout")),
      channel_rng_(derive_seed(config.seed, "channel")),
      sensing_rng_(derive_seed(config.seed, "sensing")) {
    config_.validate();
}

namespace {

void accumulate(std::optional<Tensor>& sum, const Tensor& g) {
    if (sum) {
        *sum += g;
    } else {
        sum = g;
    }
}

}  // namespace

LossBreakdown Trainer::step(const Tensor& images, std::span<const int> labels) {
    if (labels.empty() || images.rank() == 0 || images.dim(0) != labels.size()) {
        throw std::invalid_argument("training batch needs matching nonempty images and labels");
    }
    const auto& w = config_.weights;
    const auto mode = Tape::Mode::Training;

    Tape enc_tape(mode, &dropout_rng_);
    const Tensor z = models_.encoder.forward(images, enc_tape);
    Tape norm_tape(mode);
    const Tensor s = normalize_rows(z, norm_tape);

    LossBreakdown loss;
    std::optional<Tensor> grad_s;
    std::map<ParamId, Tensor> sem_grads, rec_grads, sens_grads;

    if (models_.semantic || models_.reconstruction) {
        ChannelParams params = config_.channel;
        if (config_.snr_mode == SnrMode::RandomizedRange) {
            params.snr_db = std::uniform_real_distribution<double>(config_.snr_min_db, config_.snr_max_db)(channel_rng_);
        }
        const auto draw = draw_channel(s.shape(), params, channel_rng_);
        Tape channel_tape(mode);
        const Tensor y = apply_channel(s, draw, params, channel_tape);
        std::optional<Tensor> grad_y;
        if (models_.semantic) {
            Tape tape(mode, &dropout_rng_);
            const Tensor ce = cross_entropy_loss(models_.semantic->forward(y, tape), labels, tape);
            loss.semantic_ce = ce[0];
            if (w.semantic > 0.0) {
                auto g = tape.backward(Tensor({1}, {w.semantic}));
                sem_grads = std::move(g.params);
                accumulate(grad_y, g.input);
            }
        }
        if (models_.reconstruction) {
            Tape tape(mode, &dropout_rng_);
            const Tensor mse = mse_loss(models_.reconstruction->forward(y, tape), images, tape);
            loss.reconstruction_mse = mse[0];
            if (w.reconstruction > 0.0) {
                auto g = tape.backward(Tensor({1}, {w.reconstruction}));
                rec_grads = std::move(g.params);
                accumulate(grad_y, g.input);
            }
        }
        if (grad_y) accumulate(grad_s, channel_tape.backward(*grad_y).input);
    }

    if (models_.sensing) {
        SensingScenario scenario = config_.sensing;
        if (config_.snr_mode == SnrMode::RandomizedRange) {
            scenario.snr_db = std::uniform_real_distribution<double>(config_.sensing_snr_min_db,
                                                                     config_.sensing_snr_max_db)(sensing_rng_);
        }
        const auto echo = draw_sensing(s.shape(), scenario, sensing_rng_);
        Tape tape(mode, &dropout_rng_);
        Tensor r = multiply_constant(s, echo.gain, tape);
        r = add_constant(r, echo.noise, tape);
        const Tensor ce = cross_entropy_loss(models_.sensing->forward(r, tape), echo.labels, tape);
        loss.sensing_ce = ce[0];
        if (w.sensing > 0.0) {
            auto g = tape.backward(Tensor({1}, {w.sensing}));
            sens_grads = std::move(g.params);
            accumulate(grad_s, g.input);
        }
    }

    loss.total = combine(w, loss.semantic_ce, loss.reconstruction_mse, loss.sensing_ce);
    if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite training loss after " << adam_.steps() << " steps: semantic_ce=" << loss.semantic_ce
            << " reconstruction_mse=" << loss.reconstruction_mse << " sensing_ce=" << loss.sensing_ce;
        throw TrainingError(msg.str());
    }

    adam_.begin_step();
    if (grad_s) {
        const auto grad_z = norm_tape.backward(*grad_s).input;
        adam_.update(0, models_.encoder, enc_tape.backward(grad_z).params);
    }
    if (!sem_grads.empty()) adam_.update(1, *models_.semantic, sem_grads);
    if (!rec_grads.empty()) adam_.update(2, *models_.reconstruction, rec_grads);
    if (!sens_grads.empty()) adam_.update(3, *models_.sensing, sens_grads);
    return loss;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
    return train(config, data, build_models(config.cfg, config.seed), on_epoch);
}

TrainResult train(const TrainConfig& config, const Dataset& data, Models models, const EpochCallback& on_epoch) {
    config.validate();
    if (data.size() == 0) throw std::invalid_argument("training set is empty");
    if (data.image_shape() != config.cfg.input_shape) {
        throw std::invalid_argument("training images " + shape_string(data.image_shape()) + " do not match model input " +
                                    shape_string(config.cfg.input_shape));
    }
    if (data.num_classes != config.cfg.num_classes) {
        throw std::invalid_argument("dataset has " + std::to_string(data.num_classes) + " classes, model expects " +
                                    std::to_string(config.cfg.num_classes));
    }
    data.validate();

    TrainResult result{std::move(models), {}};
    Trainer trainer(config, result.models);
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
    std::vector<std::size_t> order(data.size());
    std::vector<int> labels;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        LossBreakdown sum;
        std::size_t steps = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const std::span<const std::size_t> idx(order.data() + b, std::min(config.batch_size, order.size() - b));
            labels.clear();
            for (auto i : idx) labels.push_back(data.labels[i]);
            const auto loss = trainer.step(gather_rows(data.images, idx), labels);
            sum.semantic_ce += loss.semantic_ce;
            sum.reconstruction_mse += loss.reconstruction_mse;
            sum.sensing_ce += loss.sensing_ce;
            ++steps;
        }
        const double n = static_cast<double>(steps);
        LossBreakdown mean{sum.semantic_ce / n, sum.reconstruction_mse / n, sum.sensing_ce / n, 0.0};
        mean.total = combine(config.weights, mean.semantic_ce, mean.reconstruction_mse, mean.sensing_ce);
        result.history.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return result;
}

EvalDraws make_eval_draws(std::size_t samples, std::size_t n_c, const ChannelParams& channel,
                          const SensingScenario& sensing, std::uint64_t seed, const EvalOptions& options) {
    if (options.batch_size == 0) throw std::invalid_argument("evaluation batch size must be positive");
    Rng channel_rng(derive_seed(seed, "eval-channel"));
    Rng sensing_rng(derive_seed(seed, "eval-sensing"));
    EvalDraws draws;
    for (std::size_t b = 0; b < samples; b += options.batch_size) {
        const Shape shape{std::min(options.batch_size, samples - b), n_c};
        draws.channel.push_back(draw_channel(shape, channel, channel_rng));
        for (std::size_t d = 0; d < options.sensing_draws; ++d) draws.sensing.push_back(draw_sensing(shape, sensing, sensing_rng));
    }
    return draws;
}

namespace {

int argmax_row(const Tensor& t, std::size_t r) {
    const auto row = t.row(r);
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

MetricsRecord evaluate_images(const Models& models, const Tensor& images, const Dataset& data,
                              const ChannelParams& channel, const EvalDraws& draws, const EvalOptions& options) {
    if (data.size() == 0) throw std::invalid_argument("evaluation set is empty");
    if (images.rank() == 0 || images.dim(0) != data.size()) {
        throw std::invalid_argument("evaluation images " + shape_string(images.shape()) + " do not match " +
                                    std::to_string(data.size()) + " labels");
    }
    MetricsRecord rec;
    rec.channel = channel.kind;
    rec.snr_db = channel.snr_db;
    rec.n_c = models.encoder.output_shape().at(0);
    rec.sample_count = data.size();
    double squared_error = 0.0;

    std::size_t batch = 0;
    for (std::size_t b = 0; b < data.size(); b += options.batch_size, ++batch) {
        const auto e = std::min(b + options.batch_size, data.size());
        const Tensor x = slice_rows(images, b, e);
        const Tensor s = normalize_power(models.encoder.predict(x)).z;
        Tape passive(Tape::Mode::Inference, nullptr, false);
        const Tensor y = apply_channel(s, draws.channel.at(batch), channel, passive);
        if (models.semantic) {
            const Tensor probs = models.semantic->predict(y);
            for (std::size_t r = 0; r < e - b; ++r) {
                const int pred = argmax_row(probs, r);
                rec.predictions.push_back(pred);
                rec.task_correct += static_cast<std::size_t>(pred == data.labels[b + r]);
            }
        }
        if (models.reconstruction) {
            const Tensor xhat = models.reconstruction->predict(y);
            const Tensor clean = slice_rows(data.images, b, e);
            for (std::size_t i = 0; i < xhat.size(); ++i) squared_error += (xhat[i] - clean[i]) * (xhat[i] - clean[i]);
        }
        if (models.sensing) {
            for (std::size_t d = 0; d < options.sensing_draws; ++d) {
                const auto& echo = draws.sensing.at(batch * options.sensing_draws + d);
                const Tensor probs = models.sensing->predict(reflect(s, echo));
                for (std::size_t r = 0; r < e - b; ++r) {
                    rec.sensing_correct += static_cast<std::size_t>(argmax_row(probs, r) == echo.labels[r]);
                }
                rec.sensing_trials += e - b;
            }
        }
    }
    const double n = static_cast<double>(data.size());
    if (models.semantic) rec.task_accuracy = static_cast<double>(rec.task_correct) / n;
    if (models.reconstruction) rec.reconstruction_mse = squared_error / static_cast<double>(data.images.size());
    if (models.sensing && rec.sensing_trials > 0) {
        rec.sensing_accuracy = static_cast<double>(rec.sensing_correct) / static_cast<double>(rec.sensing_trials);
    }
    return rec;
}

MetricsRecord evaluate(const Models& models, const Dataset& data, const ChannelParams& channel,
                       const SensingScenario& sensing, std::uint64_t seed, const EvalOptions& options) {
    if (data.size() == 0) throw std::invalid_argument("evaluation set is empty");
    const auto draws = make_eval_draws(data.size(), models.encoder.output_shape().at(0), channel, sensing, seed, options);
    return evaluate_images(models, data.images, data, channel, draws, options);
}

}  // namespace semcom

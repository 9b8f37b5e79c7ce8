#include "semcom/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace semcom {

namespace {

void check_labels(const Tensor& probs, std::span<const int> labels) {
    if (probs.rank() != 2) throw ShapeError("cross-entropy expects (batch, classes), got " + shape_string(probs.shape()));
    if (labels.size() != probs.dim(0)) {
        throw ShapeError("cross-entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(probs.dim(0)));
    }
    const auto classes = static_cast<int>(probs.dim(1));
    for (int label : labels) {
        if (label < 0 || label >= classes) {
            throw std::out_of_range("label " + std::to_string(label) + " outside [0," + std::to_string(classes - 1) + "]");
        }
    }
}

}  // namespace

double cross_entropy(const Tensor& probs, std::span<const int> labels) {
    check_labels(probs, labels);
    if (labels.empty()) return 0.0;
    const auto classes = probs.dim(1);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total -= std::log(std::max(probs[i * classes + static_cast<std::size_t>(labels[i])], kProbabilityFloor));
    }
    return total / static_cast<double>(labels.size());
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mean squared error of " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    if (a.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total / static_cast<double>(a.size());
}

Tensor cross_entropy_loss(const Tensor& probs, std::span<const int> labels, Tape& tape) {
    check_labels(probs, labels);
    const auto batch = probs.dim(0), classes = probs.dim(1);
    const double inv_n = batch ? 1.0 / static_cast<double>(batch) : 0.0;
    const double cap = -std::log(kProbabilityFloor);
    const Tensor* logits = tape.recording() ? tape.trailing_softmax_logits() : nullptr;
    std::vector<int> y(labels.begin(), labels.end());

    if (logits != nullptr && logits->shape() == probs.shape()) {
        double total = 0.0;
        std::vector<std::uint8_t> clamped(batch, 0);
        for (std::size_t i = 0; i < batch; ++i) {
            auto z = logits->row(i);
            const double mx = *std::max_element(z.begin(), z.end());
            double s = 0.0;
            for (double v : z) s += std::exp(v - mx);
            double li = mx + std::log(s) - z[static_cast<std::size_t>(y[i])];
            if (li > cap) {
                li = cap;
                clamped[i] = 1;
            }
            total += li;
        }
        if (tape.tracks_branches()) {
            for (auto c : clamped) tape.note_branch(c);
        }
        tape.fuse_trailing_softmax();
        tape.record("SoftmaxCrossEntropy", {1},
                    [probs, y = std::move(y), clamped = std::move(clamped), inv_n, classes](const Tensor& g, Gradients&) {
                        Tensor dz(probs.shape());
                        for (std::size_t i = 0; i < y.size(); ++i) {
                            if (clamped[i]) continue;
                            for (std::size_t c = 0; c < classes; ++c) {
                                const double target = static_cast<int>(c) == y[i] ? 1.0 : 0.0;
                                dz[i * classes + c] = g[0] * inv_n * (probs[i * classes + c] - target);
                            }
                        }
                        return dz;
                    });
        return Tensor({1}, {total * inv_n});
    }

    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        total -= std::log(std::max(probs[i * classes + static_cast<std::size_t>(y[i])], kProbabilityFloor));
    }
    tape.record("CrossEntropy", {1}, [probs, y = std::move(y), inv_n, classes](const Tensor& g, Gradients&) {
        Tensor dp(probs.shape());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const auto idx = i * classes + static_cast<std::size_t>(y[i]);
            if (probs[idx] > kProbabilityFloor) dp[idx] = -g[0] * inv_n / probs[idx];
        }
        return dp;
    });
    return Tensor({1}, {total * inv_n});
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target, Tape& tape) {
    const double value = mean_squared_error(prediction, target);
    if (tape.recording()) {
        tape.record("MeanSquaredError", {1}, [prediction, target](const Tensor& g, Gradients&) {
            Tensor d(prediction.shape());
            const double k = 2.0 * g[0] / static_cast<double>(std::max<std::size_t>(prediction.size(), 1));
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = k * (prediction[i] - target[i]);
            return d;
        });
    }
    return Tensor({1}, {value});
}

Tensor probe_loss(const Tensor& output, const Tensor& coefficients, Tape& tape) {
    if (output.shape() != coefficients.shape()) {
        throw ShapeError("probe coefficients " + shape_string(coefficients.shape()) + " do not match output " +
                         shape_string(output.shape()));
    }
    double value = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) value += output[i] * coefficients[i];
    tape.record("Probe", {1}, [coefficients](const Tensor& g, Gradients&) {
        Tensor d = coefficients;
        d *= g[0];
        return d;
    });
    return Tensor({1}, {value});
}

Tensor scale_loss(const Tensor& loss, double weight, Tape& tape) {
    if (loss.size() != 1) throw ShapeError("scale_loss expects a scalar, got " + shape_string(loss.shape()));
    tape.record("Scale", {1}, [weight](const Tensor& g, Gradients&) { return Tensor({1}, {g[0] * weight}); });
    return Tensor({1}, {loss[0] * weight});
}

}  // namespace semcom

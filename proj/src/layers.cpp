#include "semcom/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>

namespace semcom {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
    return MutMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::string describe(const Layer& layer) {
    std::string out(to_string(layer.kind));
    switch (layer.kind) {
    case LayerKind::Conv2D:
        out += "(" + std::to_string(layer.units) + ", " + std::to_string(layer.size) + "x" +
               std::to_string(layer.size) + ")";
        break;
    case LayerKind::Dense:
        out += "(" + std::to_string(layer.units) + ")";
        break;
    case LayerKind::MaxPool2D:
        out += "(" + std::to_string(layer.size) + ")";
        break;
    case LayerKind::Reshape:
        out += shape_string(layer.target);
        break;
    default:
        break;
    }
    return out;
}

[[noreturn]] void mismatch(const Layer& layer, const std::string& expected, const Shape& got) {
    throw ShapeError(describe(layer) + ": expected input " + expected + " but got " + shape_string(got));
}

Shape batched(std::size_t batch, const Shape& sample) {
    Shape out{batch};
    out.insert(out.end(), sample.begin(), sample.end());
    return out;
}

Shape sample_shape(const Tensor& t) { return Shape(t.shape().begin() + 1, t.shape().end()); }

std::uint64_t hash_mask(const std::vector<std::uint8_t>& mask) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto b : mask) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

// Column layout: row (n, y, x); column (ky, kx, c).
void im2col(const Tensor& in, std::size_t k, RowMat& cols) {
    const auto n_batch = in.dim(0), height = in.dim(1), width = in.dim(2), chans = in.dim(3);
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    cols.setZero(static_cast<Eigen::Index>(n_batch * height * width), static_cast<Eigen::Index>(k * k * chans));
    const double* src = in.data();
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                double* dst = cols.data() + ((n * height + y) * width + x) * k * k * chans;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const auto sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const auto sx = static_cast<std::ptrdiff_t>(x + kx) - pad;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(width)) continue;
                        const double* p = src + ((n * height + sy) * width + sx) * chans;
                        std::copy(p, p + chans, dst + (ky * k + kx) * chans);
                    }
                }
            }
        }
    }
}

void col2im(const RowMat& cols, std::size_t k, Tensor& out) {
    const auto n_batch = out.dim(0), height = out.dim(1), width = out.dim(2), chans = out.dim(3);
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    double* dst = out.data();
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const double* src = cols.data() + ((n * height + y) * width + x) * k * k * chans;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const auto sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const auto sx = static_cast<std::ptrdiff_t>(x + kx) - pad;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(width)) continue;
                        double* p = dst + ((n * height + sy) * width + sx) * chans;
                        const double* s = src + (ky * k + kx) * chans;
                        for (std::size_t c = 0; c < chans; ++c) p[c] += s[c];
                    }
                }
            }
        }
    }
}

Tensor conv2d_forward(const Layer& layer, ParamId index, const Tensor& input, Tape& tape) {
    if (input.rank() != 4) mismatch(layer, "(H,W,C)", sample_shape(input));
    const auto k = layer.size;
    const auto chans = input.dim(3);
    if (layer.weight.shape() != Shape{k, k, chans, layer.units}) {
        mismatch(layer, "with " + std::to_string(layer.weight.empty() ? 0 : layer.weight.dim(2)) + " channels",
                 sample_shape(input));
    }
    const auto rows = input.dim(0) * input.dim(1) * input.dim(2);
    const auto patch = k * k * chans;
    auto cols = std::make_shared<RowMat>();
    im2col(input, k, *cols);

    Tensor out({input.dim(0), input.dim(1), input.dim(2), layer.units});
    auto out_m = as_matrix(out, rows, layer.units);
    out_m.noalias() = *cols * as_matrix(layer.weight, patch, layer.units);
    out_m.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), static_cast<Eigen::Index>(layer.units));

    const Shape in_shape = input.shape();
    tape.record("Conv2D", out.shape(), [&layer, index, cols, in_shape, rows, patch, k](const Tensor& g, Gradients& grads) {
        const auto units = layer.units;
        auto g_m = as_matrix(g, rows, units);
        Tensor dw({k, k, in_shape[3], units});
        as_matrix(dw, patch, units).noalias() = cols->transpose() * g_m;
        Tensor db({units});
        Eigen::Map<Eigen::RowVectorXd>(db.data(), static_cast<Eigen::Index>(units)) = g_m.colwise().sum();
        grads.accumulate({index.model, index.layer, 0}, dw);
        grads.accumulate({index.model, index.layer, 1}, db);
        RowMat dcols = g_m * as_matrix(layer.weight, patch, units).transpose();
        Tensor dx(in_shape);
        col2im(dcols, k, dx);
        return dx;
    });
    return apply_activation(layer.activation, out, tape);
}

Tensor dense_forward(const Layer& layer, ParamId index, const Tensor& input, Tape& tape) {
    if (input.rank() != 2 || layer.weight.rank() != 2 || input.dim(1) != layer.weight.dim(0)) {
        mismatch(layer, "(" + std::to_string(layer.weight.empty() ? 0 : layer.weight.dim(0)) + ")",
                 sample_shape(input));
    }
    const auto batch = input.dim(0), fan_in = input.dim(1), units = layer.units;
    Tensor out({batch, units});
    auto out_m = as_matrix(out, batch, units);
    out_m.noalias() = as_matrix(input, batch, fan_in) * as_matrix(layer.weight, fan_in, units);
    out_m.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), static_cast<Eigen::Index>(units));

    if (tape.recording()) {
        tape.record("Dense", out.shape(), [&layer, index, input, batch, fan_in, units](const Tensor& g, Gradients& grads) {
            auto g_m = as_matrix(g, batch, units);
            Tensor dw({fan_in, units});
            as_matrix(dw, fan_in, units).noalias() = as_matrix(input, batch, fan_in).transpose() * g_m;
            Tensor db({units});
            Eigen::Map<Eigen::RowVectorXd>(db.data(), static_cast<Eigen::Index>(units)) = g_m.colwise().sum();
            grads.accumulate({index.model, index.layer, 0}, dw);
            grads.accumulate({index.model, index.layer, 1}, db);
            Tensor dx({batch, fan_in});
            as_matrix(dx, batch, fan_in).noalias() = g_m * as_matrix(layer.weight, fan_in, units).transpose();
            return dx;
        });
    }
    return apply_activation(layer.activation, out, tape);
}

Tensor max_pool_forward(const Layer& layer, const Tensor& input, Tape& tape) {
    const auto s = layer.size;
    if (input.rank() != 4 || input.dim(1) < s || input.dim(2) < s) mismatch(layer, "(H>=pool,W>=pool,C)", sample_shape(input));
    const auto n_batch = input.dim(0), height = input.dim(1), width = input.dim(2), chans = input.dim(3);
    const auto oh = height / s, ow = width / s;
    Tensor out({n_batch, oh, ow, chans});
    std::vector<std::size_t> winner(out.size());
    for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                for (std::size_t c = 0; c < chans; ++c) {
                    std::size_t best = ((n * height + y * s) * width + x * s) * chans + c;
                    for (std::size_t dy = 0; dy < s; ++dy) {
                        for (std::size_t dx = 0; dx < s; ++dx) {
                            const auto idx = ((n * height + y * s + dy) * width + x * s + dx) * chans + c;
                            if (input[idx] > input[best]) best = idx;
                        }
                    }
                    const auto o = ((n * oh + y) * ow + x) * chans + c;
                    out[o] = input[best];
                    winner[o] = best;
                }
            }
        }
    }
    if (tape.tracks_branches()) {
        std::uint64_t h = 0;
        for (auto w : winner) h = h * 31 + w;
        tape.note_branch(h);
    }
    const Shape in_shape = input.shape();
    tape.record("MaxPool2D", out.shape(), [winner = std::move(winner), in_shape](const Tensor& g, Gradients&) {
        Tensor dx(in_shape);
        for (std::size_t o = 0; o < winner.size(); ++o) dx[winner[o]] += g[o];
        return dx;
    });
    return out;
}

Tensor dropout_forward(const Layer& layer, const Tensor& input, Tape& tape) {
    if (tape.mode() == Tape::Mode::Inference || layer.rate <= 0.0) {
        tape.record("Dropout", input.shape(), [](const Tensor& g, Gradients&) { return g; });
        return input;
    }
    const double keep = 1.0 - layer.rate;
    const double scale = 1.0 / keep;
    std::bernoulli_distribution survive(keep);
    auto& rng = tape.dropout_rng();
    Tensor mask(input.shape());
    for (auto& m : mask.values()) m = survive(rng) ? scale : 0.0;
    Tensor out = input;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    tape.record("Dropout", out.shape(), [mask = std::move(mask)](const Tensor& g, Gradients&) {
        Tensor dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
        return dx;
    });
    return out;
}

Tensor reshape_forward(const std::string& name, const Tensor& input, Shape target, Tape& tape) {
    Tensor out = input.reshaped(std::move(target));
    const Shape in_shape = input.shape();
    tape.record(name, out.shape(), [in_shape](const Tensor& g, Gradients&) { return g.reshaped(in_shape); });
    return out;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Reshape: return "Reshape";
    case LayerKind::Activation: return "Activation";
    }
    return "?";
}

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
    case ActivationKind::Linear: return "Linear";
    case ActivationKind::ReLU: return "ReLU";
    case ActivationKind::Softmax: return "Softmax";
    }
    return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
    for (auto k : {LayerKind::Conv2D, LayerKind::MaxPool2D, LayerKind::Dropout, LayerKind::Flatten, LayerKind::Dense,
                   LayerKind::Reshape, LayerKind::Activation}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown layer kind '" + std::string(name) + "'");
}

ActivationKind parse_activation(std::string_view name) {
    for (auto a : {ActivationKind::Linear, ActivationKind::ReLU, ActivationKind::Softmax}) {
        if (to_string(a) == name) return a;
    }
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

Layer Layer::conv2d(std::size_t filters, std::size_t kernel, ActivationKind act) {
    Layer l;
    l.kind = LayerKind::Conv2D;
    l.units = filters;
    l.size = kernel;
    l.activation = act;
    return l;
}

Layer Layer::max_pool(std::size_t pool) {
    Layer l;
    l.kind = LayerKind::MaxPool2D;
    l.size = pool;
    return l;
}

Layer Layer::dropout(double rate) {
    Layer l;
    l.kind = LayerKind::Dropout;
    l.rate = rate;
    return l;
}

Layer Layer::flatten() {
    Layer l;
    l.kind = LayerKind::Flatten;
    return l;
}

Layer Layer::dense(std::size_t units, ActivationKind act) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.units = units;
    l.activation = act;
    return l;
}

Layer Layer::reshape(Shape target) {
    Layer l;
    l.kind = LayerKind::Reshape;
    l.target = std::move(target);
    return l;
}

Layer Layer::activation_layer(ActivationKind act) {
    Layer l;
    l.kind = LayerKind::Activation;
    l.activation = act;
    return l;
}

Shape layer_output_shape(const Layer& layer, const Shape& input) {
    switch (layer.kind) {
    case LayerKind::Conv2D:
        if (input.size() != 3) mismatch(layer, "(H,W,C)", input);
        return {input[0], input[1], layer.units};
    case LayerKind::MaxPool2D:
        if (input.size() != 3 || input[0] < layer.size || input[1] < layer.size) {
            mismatch(layer, "(H>=pool,W>=pool,C)", input);
        }
        return {input[0] / layer.size, input[1] / layer.size, input[2]};
    case LayerKind::Flatten:
        return {shape_size(input)};
    case LayerKind::Dense:
        if (input.size() != 1) mismatch(layer, "a flat vector", input);
        return {layer.units};
    case LayerKind::Reshape:
        if (shape_size(layer.target) != shape_size(input)) mismatch(layer, std::to_string(shape_size(layer.target)) + " elements", input);
        return layer.target;
    case LayerKind::Dropout:
    case LayerKind::Activation:
        return input;
    }
    return input;
}

void initialize_layer(Layer& layer, const Shape& input, Rng& rng) {
    std::size_t fan_in = 0;
    if (layer.kind == LayerKind::Conv2D) {
        if (input.size() != 3) mismatch(layer, "(H,W,C)", input);
        layer.weight = Tensor({layer.size, layer.size, input[2], layer.units});
        fan_in = layer.size * layer.size * input[2];
    } else if (layer.kind == LayerKind::Dense) {
        if (input.size() != 1) mismatch(layer, "a flat vector", input);
        layer.weight = Tensor({input[0], layer.units});
        fan_in = input[0];
    } else {
        return;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : layer.weight.values()) w = dist(rng);
    layer.bias = Tensor({layer.units});
}

Tensor apply_activation(ActivationKind act, const Tensor& input, Tape& tape) {
    switch (act) {
    case ActivationKind::Linear:
        return input;
    case ActivationKind::ReLU: {
        Tensor out = input;
        std::vector<std::uint8_t> mask(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            mask[i] = out[i] > 0.0;
            if (!mask[i]) out[i] = 0.0;
        }
        if (tape.tracks_branches()) tape.note_branch(hash_mask(mask));
        tape.record("ReLU", out.shape(), [mask = std::move(mask)](const Tensor& g, Gradients&) {
            Tensor dx = g;
            for (std::size_t i = 0; i < dx.size(); ++i) {
                if (!mask[i]) dx[i] = 0.0;
            }
            return dx;
        });
        return out;
    }
    case ActivationKind::Softmax: {
        if (input.rank() < 1 || input.empty()) throw ShapeError("Softmax: empty input");
        Tensor out = input;
        const auto rows = input.dim(0);
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = out.row(r);
            const double mx = *std::max_element(row.begin(), row.end());
            double total = 0.0;
            for (auto& v : row) {
                v = std::exp(v - mx);
                total += v;
            }
            for (auto& v : row) v /= total;
        }
        if (tape.recording()) {
            tape.record_softmax(out.shape(), input, [out](const Tensor& g, Gradients&) {
                Tensor dx(g.shape());
                for (std::size_t r = 0; r < g.dim(0); ++r) {
                    auto p = out.row(r);
                    auto gr = g.row(r);
                    double dot = 0.0;
                    for (std::size_t i = 0; i < p.size(); ++i) dot += gr[i] * p[i];
                    auto d = dx.row(r);
                    for (std::size_t i = 0; i < p.size(); ++i) d[i] = p[i] * (gr[i] - dot);
                }
                return dx;
            });
        }
        return out;
    }
    }
    throw std::invalid_argument("unknown activation");
}

Tensor apply_layer(const Layer& layer, ParamId index, const Tensor& input, Tape& tape) {
    if (input.rank() == 0) throw ShapeError(describe(layer) + ": input has no batch axis");
    switch (layer.kind) {
    case LayerKind::Conv2D:
        return conv2d_forward(layer, index, input, tape);
    case LayerKind::Dense:
        return dense_forward(layer, index, input, tape);
    case LayerKind::MaxPool2D:
        return max_pool_forward(layer, input, tape);
    case LayerKind::Dropout:
        return dropout_forward(layer, input, tape);
    case LayerKind::Flatten:
        return reshape_forward("Flatten", input, {input.dim(0), input.row_size()}, tape);
    case LayerKind::Reshape:
        if (shape_size(layer.target) != input.row_size()) mismatch(layer, std::to_string(shape_size(layer.target)) + " elements", sample_shape(input));
        return reshape_forward("Reshape", input, batched(input.dim(0), layer.target), tape);
    case LayerKind::Activation:
        return apply_activation(layer.activation, input, tape);
    }
    throw LayerError("unhandled layer kind");
}

}  // namespace semcom

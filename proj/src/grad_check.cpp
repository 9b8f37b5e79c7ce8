#include "semcom/grad_check.hpp"

#include <cstdio>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semcom/losses.hpp"
#include "semcom/ops.hpp"

namespace semcom {

Tensor apply_loss(const LossSpec& loss, const Tensor& output, Tape& tape) {
    switch (loss.kind) {
    case LossKind::CrossEntropy:
        return cross_entropy_loss(output, loss.labels, tape);
    case LossKind::MeanSquared:
        return mse_loss(output, loss.target, tape);
    case LossKind::Probe:
        return probe_loss(output, loss.target, tape);
    }
    throw GradCheckError("unknown loss kind");
}

std::vector<const Model*> Chain::models() const {
    std::vector<const Model*> out;
    for (const auto& s : stages) {
        if (auto* m = std::get_if<ModelStage>(&s)) out.push_back(m->model);
    }
    return out;
}

Tensor run_chain(const Chain& chain, const Tensor& input, Tape& tape) {
    Tensor x = input;
    std::size_t slot = 0;
    for (const auto& stage : chain.stages) {
        if (auto* m = std::get_if<Chain::ModelStage>(&stage)) {
            x = m->model->forward(x, tape, slot++);
        } else if (std::holds_alternative<Chain::NormalizeStage>(stage)) {
            x = normalize_rows(x, tape);
        } else if (auto* a = std::get_if<Chain::AddStage>(&stage)) {
            x = add_constant(x, a->constant, tape);
        } else if (auto* g = std::get_if<Chain::MultiplyStage>(&stage)) {
            x = multiply_constant(x, g->gain, tape);
        } else if (auto* d = std::get_if<Chain::DivideStage>(&stage)) {
            x = divide_clamped(x, d->gain, d->floor, tape);
        }
    }
    if (chain.loss) x = apply_loss(*chain.loss, x, tape);
    return x;
}

namespace {

// Extended-precision forward evaluator used as the finite-difference side
// of the check. Written with plain loops so it shares nothing with the
// tape kernels beyond the layer definitions.
using Real = long double;

struct RefTensor {
    Shape shape;
    std::vector<Real> v;
};

struct RefOp {
    enum class Kind { Conv, Pool, Dropout, Reshape, Dense, Act, Normalize, Add, Mul, Div, Loss };
    Kind kind = Kind::Loss;

    RefOp() = default;
    explicit RefOp(Kind k) : kind(k) {}
    std::size_t slot = 0;
    std::size_t layer = 0;
    std::size_t size = 0;
    std::size_t units = 0;
    double rate = 0.0;
    ActivationKind act = ActivationKind::Linear;
    Shape target;  // per-sample, for Reshape (empty = flatten)
    std::vector<Real> w, b;
    std::vector<Real> constant;
    Real floor = 0;
    std::vector<Real> mask;  // dropout mask fixed by the base pass
};

struct Outcome {
    Real value = 0;
    std::vector<std::uint64_t> signature;  // one hash per op
};

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h * 1099511628211ULL;
}

std::vector<Real> widen(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

class Reference {
public:
    Reference(const Chain& chain, Tape::Mode mode, std::uint64_t dropout_seed)
        : chain_(chain), mode_(mode), dropout_rng_(dropout_seed) {
        std::size_t slot = 0;
        for (const auto& stage : chain.stages) {
            if (auto* m = std::get_if<Chain::ModelStage>(&stage)) {
                const auto& layers = m->model->layers();
                for (std::size_t i = 0; i < layers.size(); ++i) add_layer(layers[i], slot, i);
                ++slot;
            } else if (std::holds_alternative<Chain::NormalizeStage>(stage)) {
                ops_.emplace_back(RefOp::Kind::Normalize);
            } else if (auto* a = std::get_if<Chain::AddStage>(&stage)) {
                RefOp op{RefOp::Kind::Add};
                op.constant = widen(a->constant);
                ops_.push_back(std::move(op));
            } else if (auto* g = std::get_if<Chain::MultiplyStage>(&stage)) {
                RefOp op{RefOp::Kind::Mul};
                op.constant = widen(g->gain);
                ops_.push_back(std::move(op));
            } else if (auto* d = std::get_if<Chain::DivideStage>(&stage)) {
                RefOp op{RefOp::Kind::Div};
                op.constant = widen(d->gain);
                op.floor = d->floor;
                ops_.push_back(std::move(op));
            }
        }
        if (chain.loss) ops_.emplace_back(RefOp::Kind::Loss);
    }

    /// Full pass that fixes dropout masks and caches every op input.
    Outcome base(const Tensor& input) {
        RefTensor x{input.shape(), widen(input)};
        cache_.assign(ops_.size(), {});
        Outcome out;
        for (std::size_t k = 0; k < ops_.size(); ++k) {
            cache_[k] = x;
            if (ops_[k].kind == RefOp::Kind::Dropout) draw_mask(ops_[k], x.v.size());
            out.signature.push_back(run(ops_[k], x));
        }
        finish(x, out);
        return out;
    }

    Outcome from(std::size_t start, RefTensor x) {
        Outcome out;
        for (std::size_t k = start; k < ops_.size(); ++k) out.signature.push_back(run(ops_[k], x));
        finish(x, out);
        return out;
    }

    std::size_t op_index(std::size_t slot, std::size_t layer) const {
        for (std::size_t k = 0; k < ops_.size(); ++k) {
            if ((ops_[k].kind == RefOp::Kind::Conv || ops_[k].kind == RefOp::Kind::Dense) && ops_[k].slot == slot &&
                ops_[k].layer == layer) {
                return k;
            }
        }
        throw GradCheckError("parameter not found in chain");
    }

    RefOp& op(std::size_t k) { return ops_[k]; }
    const RefTensor& cached(std::size_t k) const { return cache_[k]; }

private:
    void add_layer(const Layer& layer, std::size_t slot, std::size_t index) {
        RefOp op{};
        op.slot = slot;
        op.layer = index;
        switch (layer.kind) {
        case LayerKind::Conv2D:
            op.kind = RefOp::Kind::Conv;
            op.size = layer.size;
            op.units = layer.units;
            op.w = widen(layer.weight);
            op.b = widen(layer.bias);
            break;
        case LayerKind::Dense:
            op.kind = RefOp::Kind::Dense;
            op.units = layer.units;
            op.w = widen(layer.weight);
            op.b = widen(layer.bias);
            break;
        case LayerKind::MaxPool2D:
            op.kind = RefOp::Kind::Pool;
            op.size = layer.size;
            break;
        case LayerKind::Dropout:
            op.kind = RefOp::Kind::Dropout;
            op.rate = layer.rate;
            break;
        case LayerKind::Flatten:
            op.kind = RefOp::Kind::Reshape;
            break;
        case LayerKind::Reshape:
            op.kind = RefOp::Kind::Reshape;
            op.target = layer.target;
            break;
        case LayerKind::Activation:
            op.kind = RefOp::Kind::Act;
            op.act = layer.activation;
            break;
        }
        ops_.push_back(op);
        if ((layer.kind == LayerKind::Conv2D || layer.kind == LayerKind::Dense) && layer.activation != ActivationKind::Linear) {
            RefOp a{RefOp::Kind::Act};
            a.act = layer.activation;
            ops_.push_back(a);
        }
    }

    void draw_mask(RefOp& op, std::size_t n) {
        op.mask.assign(n, 1.0L);
        if (mode_ != Tape::Mode::Training || op.rate <= 0.0) return;
        std::bernoulli_distribution survive(1.0 - op.rate);
        const Real scale = 1.0L / (1.0L - static_cast<Real>(op.rate));
        for (auto& m : op.mask) m = survive(dropout_rng_) ? scale : 0.0L;
    }

    std::uint64_t run(const RefOp& op, RefTensor& x) {
        using K = RefOp::Kind;
        std::uint64_t sig = 0;
        switch (op.kind) {
        case K::Conv: {
            const auto n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3];
            const auto k = op.size, f = op.units;
            const auto pad = static_cast<long>(k / 2);
            RefTensor y{{n, h, wd, f}, std::vector<Real>(n * h * wd * f)};
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < wd; ++j)
                        for (std::size_t o = 0; o < f; ++o) {
                            Real acc = op.b[o];
                            for (std::size_t ki = 0; ki < k; ++ki)
                                for (std::size_t kj = 0; kj < k; ++kj) {
                                    const long si = static_cast<long>(i + ki) - pad;
                                    const long sj = static_cast<long>(j + kj) - pad;
                                    if (si < 0 || sj < 0 || si >= static_cast<long>(h) || sj >= static_cast<long>(wd)) continue;
                                    for (std::size_t ci = 0; ci < c; ++ci) {
                                        acc += x.v[((b * h + si) * wd + sj) * c + ci] * op.w[((ki * k + kj) * c + ci) * f + o];
                                    }
                                }
                            y.v[((b * h + i) * wd + j) * f + o] = acc;
                        }
            x = std::move(y);
            break;
        }
        case K::Dense: {
            const auto n = x.shape[0], in = x.shape[1], f = op.units;
            RefTensor y{{n, f}, std::vector<Real>(n * f)};
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t o = 0; o < f; ++o) {
                    Real acc = op.b[o];
                    for (std::size_t i = 0; i < in; ++i) acc += x.v[b * in + i] * op.w[i * f + o];
                    y.v[b * f + o] = acc;
                }
            x = std::move(y);
            break;
        }
        case K::Pool: {
            const auto n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3], s = op.size;
            const auto oh = h / s, ow = wd / s;
            RefTensor y{{n, oh, ow, c}, std::vector<Real>(n * oh * ow * c)};
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j)
                        for (std::size_t ci = 0; ci < c; ++ci) {
                            std::size_t best = 0;
                            Real mx = 0;
                            for (std::size_t di = 0; di < s; ++di)
                                for (std::size_t dj = 0; dj < s; ++dj) {
                                    const Real v = x.v[((b * h + i * s + di) * wd + j * s + dj) * c + ci];
                                    if ((di == 0 && dj == 0) || v > mx) {
                                        mx = v;
                                        best = di * s + dj;
                                    }
                                }
                            y.v[((b * oh + i) * ow + j) * c + ci] = mx;
                            sig = mix(sig, best);
                        }
            x = std::move(y);
            break;
        }
        case K::Dropout:
            for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] *= op.mask[i];
            break;
        case K::Reshape: {
            Shape s{x.shape[0]};
            if (op.target.empty()) {
                s.push_back(x.v.size() / x.shape[0]);
            } else {
                s.insert(s.end(), op.target.begin(), op.target.end());
            }
            x.shape = std::move(s);
            break;
        }
        case K::Act:
            if (op.act == ActivationKind::ReLU) {
                for (auto& v : x.v) {
                    const bool on = v > 0;
                    sig = mix(sig, on);
                    if (!on) v = 0;
                }
            } else if (op.act == ActivationKind::Softmax) {
                const auto rows = x.shape[0], d = x.v.size() / rows;
                for (std::size_t r = 0; r < rows; ++r) {
                    Real* p = x.v.data() + r * d;
                    const Real mx = *std::max_element(p, p + d);
                    Real s = 0;
                    for (std::size_t i = 0; i < d; ++i) s += (p[i] = std::exp(p[i] - mx));
                    for (std::size_t i = 0; i < d; ++i) p[i] /= s;
                }
            }
            break;
        case K::Normalize: {
            const auto rows = x.shape[0], d = x.v.size() / rows;
            for (std::size_t r = 0; r < rows; ++r) {
                Real* p = x.v.data() + r * d;
                Real sq = 0;
                for (std::size_t i = 0; i < d; ++i) sq += p[i] * p[i];
                Real n = std::sqrt(sq);
                const bool degenerate = n < static_cast<Real>(kNormFloor);
                sig = mix(sig, degenerate);
                if (degenerate) n += static_cast<Real>(kNormFloor);
                const Real scale = std::sqrt(static_cast<Real>(d)) / n;
                for (std::size_t i = 0; i < d; ++i) p[i] *= scale;
            }
            break;
        }
        case K::Add:
            for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += op.constant[i];
            break;
        case K::Mul:
            for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] *= op.constant[i];
            break;
        case K::Div:
            for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] /= std::max(op.constant[i], op.floor);
            break;
        case K::Loss:
            sig = loss(x);
            break;
        }
        return sig;
    }

    std::uint64_t loss(RefTensor& x) {
        const auto& spec = *chain_.loss;
        Real value = 0;
        std::uint64_t sig = 0;
        switch (spec.kind) {
        case LossKind::CrossEntropy: {
            const auto rows = x.shape[0], d = x.v.size() / rows;
            for (std::size_t r = 0; r < rows; ++r) {
                const Real p = x.v[r * d + static_cast<std::size_t>(spec.labels[r])];
                const bool clamped = p <= static_cast<Real>(kProbabilityFloor);
                sig = mix(sig, clamped);
                value -= std::log(clamped ? static_cast<Real>(kProbabilityFloor) : p);
            }
            value /= static_cast<Real>(rows);
            break;
        }
        case LossKind::MeanSquared:
            for (std::size_t i = 0; i < x.v.size(); ++i) {
                const Real dlt = x.v[i] - spec.target[i];
                value += dlt * dlt;
            }
            value /= static_cast<Real>(x.v.size());
            break;
        case LossKind::Probe:
            for (std::size_t i = 0; i < x.v.size(); ++i) value += x.v[i] * spec.target[i];
            break;
        }
        x = {{1}, {value}};
        return sig;
    }

    void finish(const RefTensor& x, Outcome& out) const {
        if (x.v.size() != 1) throw GradCheckError("objective is not scalar: " + shape_string(x.shape));
        out.value = x.v[0];
    }

    const Chain& chain_;
    Tape::Mode mode_;
    Rng dropout_rng_;
    std::vector<RefOp> ops_;
    std::vector<RefTensor> cache_;
};

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t limit, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (limit == 0 || limit >= n) return idx;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    return idx;
}

bool same_tail(const std::vector<std::uint64_t>& base, std::size_t start, const std::vector<std::uint64_t>& tail) {
    return std::equal(tail.begin(), tail.end(), base.begin() + static_cast<std::ptrdiff_t>(start));
}

}  // namespace

GradCheckReport grad_check(const Chain& chain, const Tensor& input, const GradCheckOptions& options) {
    if (!(options.fd_step > 0.0)) throw GradCheckError("finite-difference step must be positive");
    if (options.stencil != 2 && options.stencil != 4) throw GradCheckError("stencil must have 2 or 4 points");

    Gradients analytic;
    {
        Rng dropout(options.dropout_seed);
        Tape tape(options.mode, &dropout);
        Tensor out = run_chain(chain, input, tape);
        if (out.size() != 1) throw GradCheckError("objective is not scalar: " + shape_string(out.shape()));
        analytic = tape.backward(Tensor(out.shape(), 1.0));
    }

    Reference ref(chain, options.mode, options.dropout_seed);
    const Outcome base = ref.base(input);

    GradCheckReport report;
    Rng sampler(options.sample_seed);
    const Real h = options.fd_step;

    // Central difference from evaluations at offsets of h (second order) or
    // h and 2h (fourth order). A probe that changes any branch is skipped.
    auto probe = [&](double expected, std::size_t start, const std::string& label, const auto& eval_at) {
        const std::vector<Real> offsets = options.stencil == 4 ? std::vector<Real>{h, -h, 2 * h, -2 * h}
                                                               : std::vector<Real>{h, -h};
        std::vector<Real> f;
        for (Real dx : offsets) {
            const Outcome o = eval_at(dx);
            if (!same_tail(base.signature, start, o.signature)) {
                ++report.kinks_skipped;
                return;
            }
            f.push_back(o.value);
        }
        const Real d = options.stencil == 4 ? (8 * (f[0] - f[1]) - (f[2] - f[3])) / (12 * h) : (f[0] - f[1]) / (2 * h);
        const auto numeric = static_cast<double>(d);
        const double err = std::abs(expected - numeric) / std::max({std::abs(expected), std::abs(numeric), 1e-12});
        ++report.checked;
        if (err > report.max_relative_error) {
            report.max_relative_error = err;
            char buf[96];
            std::snprintf(buf, sizeof buf, " analytic=%.9e numeric=%.9e", expected, numeric);
            report.worst = label + buf;
        }
    };

    const auto models = chain.models();
    for (std::size_t m = 0; m < models.size(); ++m) {
        for (auto id : models[m]->parameter_ids(m)) {
            const auto k = ref.op_index(m, id.layer);
            auto& values = id.slot == 0 ? ref.op(k).w : ref.op(k).b;
            auto it = analytic.params.find(id);
            for (auto i : pick_entries(values.size(), options.max_entries_per_tensor, sampler)) {
                const Real saved = values[i];
                const double expected = it == analytic.params.end() ? 0.0 : it->second[i];
                probe(expected, k,
                      "model " + std::to_string(m) + " layer " + std::to_string(id.layer) + " slot " +
                          std::to_string(id.slot) + " [" + std::to_string(i) + "]",
                      [&](Real dx) {
                          values[i] = saved + dx;
                          auto o = ref.from(k, ref.cached(k));
                          values[i] = saved;
                          return o;
                      });
            }
        }
    }
    if (options.check_input) {
        RefTensor x = ref.cached(0);
        for (auto i : pick_entries(x.v.size(), options.max_entries_per_tensor, sampler)) {
            const Real saved = x.v[i];
            probe(analytic.input[i], 0, "input [" + std::to_string(i) + "]", [&](Real dx) {
                x.v[i] = saved + dx;
                auto o = ref.from(0, x);
                x.v[i] = saved;
                return o;
            });
        }
    }
    return report;
}

GradCheckReport grad_check(const Model& model, const Tensor& input, const LossSpec& loss, double fd_step,
                           Tape::Mode mode) {
    Chain chain{{Chain::ModelStage{&model}}, loss};
    GradCheckOptions options;
    options.fd_step = fd_step;
    options.mode = mode;
    return grad_check(chain, input, options);
}

}  // namespace semcom

#include "semcom/ops.hpp"

#include <algorithm>
#include <cmath>

namespace semcom {

namespace {

void require_same(const Tensor& x, const Tensor& c, const char* op) {
    if (x.shape() != c.shape()) {
        throw ShapeError(std::string(op) + ": operand " + shape_string(c.shape()) + " does not match " +
                         shape_string(x.shape()));
    }
}

}  // namespace

Tensor normalize_rows(const Tensor& x, Tape& tape, std::vector<bool>* degenerate) {
    if (x.rank() < 2) throw ShapeError("normalize_rows expects a batch, got " + shape_string(x.shape()));
    const auto rows = x.dim(0);
    const auto d = x.row_size();
    const double root_d = std::sqrt(static_cast<double>(d));
    Tensor y(x.shape());
    std::vector<double> norms(rows);
    std::vector<std::uint8_t> flags(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (double v : x.row(r)) sq += v * v;
        double n = std::sqrt(sq);
        if (n < kNormFloor) {
            flags[r] = 1;
            n += kNormFloor;
        }
        norms[r] = n;
        auto src = x.row(r);
        auto dst = y.row(r);
        for (std::size_t i = 0; i < d; ++i) dst[i] = src[i] * root_d / n;
    }
    if (degenerate) degenerate->assign(flags.begin(), flags.end());
    if (tape.tracks_branches()) {
        for (auto f : flags) tape.note_branch(f);
    }
    if (tape.recording()) {
        tape.record("NormalizePower", y.shape(), [x, norms, flags, root_d](const Tensor& g, Gradients&) {
            Tensor dx(x.shape());
            for (std::size_t r = 0; r < norms.size(); ++r) {
                auto z = x.row(r);
                auto gr = g.row(r);
                auto out = dx.row(r);
                const double n = norms[r];
                if (flags[r]) {
                    for (std::size_t i = 0; i < z.size(); ++i) out[i] = gr[i] * root_d / n;
                    continue;
                }
                double dot = 0.0;
                for (std::size_t i = 0; i < z.size(); ++i) dot += z[i] * gr[i];
                for (std::size_t i = 0; i < z.size(); ++i) out[i] = root_d / n * (gr[i] - z[i] * dot / (n * n));
            }
            return dx;
        });
    }
    return y;
}

Tensor add_constant(const Tensor& x, const Tensor& c, Tape& tape) {
    require_same(x, c, "add_constant");
    Tensor y = x;
    y += c;
    tape.record("AddConstant", y.shape(), [](const Tensor& g, Gradients&) { return g; });
    return y;
}

Tensor multiply_constant(const Tensor& x, const Tensor& gain, Tape& tape) {
    require_same(x, gain, "multiply_constant");
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= gain[i];
    if (tape.recording()) {
        tape.record("MultiplyConstant", y.shape(), [gain](const Tensor& g, Gradients&) {
            Tensor dx = g;
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= gain[i];
            return dx;
        });
    }
    return y;
}

Tensor divide_clamped(const Tensor& x, const Tensor& gain, double floor, Tape& tape) {
    require_same(x, gain, "divide_clamped");
    Tensor divisor = gain;
    for (auto& v : divisor.values()) v = std::max(v, floor);
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= divisor[i];
    if (tape.recording()) {
        tape.record("DivideClamped", y.shape(), [divisor = std::move(divisor)](const Tensor& g, Gradients&) {
            Tensor dx = g;
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] /= divisor[i];
            return dx;
        });
    }
    return y;
}

}  // namespace semcom

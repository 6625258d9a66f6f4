#pragma once
// LSTM cell and bidirectional encoder with exact reverse-mode gradients.
//
// Gate weights are stacked row-wise in the order input, forget, output, cell
// candidate: rows [g*h, (g+1)*h) of w, u and b belong to gate g.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kaas/embedding.hpp"
#include "kaas/error.hpp"
#include "kaas/linalg.hpp"

namespace kaas {

enum class Gate : std::size_t { Input = 0, Forget = 1, Output = 2, Cell = 3 };

struct LstmParams {
    Matrix w;  // 4h × d
    Matrix u;  // 4h × h
    Vector b;  // 4h

    static LstmParams zeros(std::size_t hidden, std::size_t input) {
        return {Matrix(4 * hidden, input), Matrix(4 * hidden, hidden), Vector(4 * hidden, 0.0)};
    }

    // uniform(−1/√h, 1/√h), forget-gate bias 1.
    template <class Rng>
    static LstmParams random(std::size_t hidden, std::size_t input, Rng& rng) {
        LstmParams p = zeros(hidden, input);
        const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
        std::uniform_real_distribution<double> dist(-r, r);
        for (double& x : p.w.data()) x = dist(rng);
        for (double& x : p.u.data()) x = dist(rng);
        for (double& x : p.b) x = dist(rng);
        for (std::size_t j = 0; j < hidden; ++j) p.b[hidden + j] = 1.0;
        return p;
    }

    std::size_t hidden() const noexcept { return u.cols(); }
    std::size_t input() const noexcept { return w.cols(); }

    template <class F>
    void visit(F&& f) {
        f(w.data());
        f(u.data());
        f(std::span<double>(b));
    }
    template <class F>
    void visit(F&& f) const {
        f(w.data());
        f(u.data());
        f(std::span<const double>(b));
    }

    bool operator==(const LstmParams&) const = default;
};

// Activations of one step, kept for the backward pass.
struct LstmStepCache {
    Vector h_prev;
    Vector c_prev;
    Vector gates;  // 4h post-activation: i, f, o, candidate
    Vector c;
    Vector tanh_c;
};

struct LstmState {
    Vector h;
    Vector c;
};

namespace detail {
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace detail

inline LstmState lstm_step(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, const LstmParams& p,
                           LstmStepCache* cache = nullptr) {
    const std::size_t h = p.hidden();
    if (x.size() != p.input() || h_prev.size() != h || c_prev.size() != h)
        throw DimensionError("lstm_step: input or state dimension mismatch");
    Vector z(p.b);
    for (std::size_t r = 0; r < 4 * h; ++r) z[r] += dot(p.w.row(r), x) + dot(p.u.row(r), h_prev);
    for (std::size_t r = 0; r < 3 * h; ++r) z[r] = detail::logistic(z[r]);
    for (std::size_t r = 3 * h; r < 4 * h; ++r) z[r] = std::tanh(z[r]);

    LstmState s{Vector(h), Vector(h)};
    Vector tc(h);
    for (std::size_t j = 0; j < h; ++j) {
        s.c[j] = z[j] * z[3 * h + j] + z[h + j] * c_prev[j];
        tc[j] = std::tanh(s.c[j]);
        s.h[j] = z[2 * h + j] * tc[j];
    }
    if (cache) {
        cache->h_prev.assign(h_prev.begin(), h_prev.end());
        cache->c_prev.assign(c_prev.begin(), c_prev.end());
        cache->gates = std::move(z);
        cache->c = s.c;
        cache->tanh_c = std::move(tc);
    }
    return s;
}

struct EncodedSequence {
    Matrix hidden;           // max_len × 2h; forward state in [0, h), backward in [h, 2h)
    std::size_t length = 0;  // true positions; rows past it are zero

    std::vector<std::uint8_t> mask() const {
        std::vector<std::uint8_t> m(hidden.rows(), 0);
        for (std::size_t i = 0; i < length; ++i) m[i] = 1;
        return m;
    }
};

struct EncoderCache {
    std::vector<LstmStepCache> forward;   // processing order, position t
    std::vector<LstmStepCache> backward;  // processing order, position length-1-t
    Matrix inputs;                        // true rows of the embedded input
    bool ready = false;
};

// Forward direction runs left to right and the backward direction right to
// left, both over the true length only and both from a zero state.
inline EncodedSequence encode_bidirectional(const EmbeddedSequence& seq, const LstmParams& fwd,
                                            const LstmParams& bwd, EncoderCache* cache = nullptr) {
    const std::size_t h = fwd.hidden();
    if (bwd.hidden() != h || fwd.input() != seq.values.cols() || bwd.input() != seq.values.cols())
        throw DimensionError("encode_bidirectional: parameter shapes do not match input");
    const std::size_t L = seq.length;
    EncodedSequence out{Matrix(seq.values.rows(), 2 * h), L};
    if (cache) {
        cache->forward.assign(L, {});
        cache->backward.assign(L, {});
        cache->inputs = Matrix(L, seq.values.cols());
        for (std::size_t t = 0; t < L; ++t) {
            auto src = seq.values.row(t);
            std::copy(src.begin(), src.end(), cache->inputs.row(t).begin());
        }
    }

    LstmState state{Vector(h, 0.0), Vector(h, 0.0)};
    for (std::size_t t = 0; t < L; ++t) {
        state = lstm_step(seq.values.row(t), state.h, state.c, fwd, cache ? &cache->forward[t] : nullptr);
        std::copy(state.h.begin(), state.h.end(), out.hidden.row(t).begin());
    }
    state = {Vector(h, 0.0), Vector(h, 0.0)};
    for (std::size_t s = 0; s < L; ++s) {
        const std::size_t t = L - 1 - s;
        state = lstm_step(seq.values.row(t), state.h, state.c, bwd, cache ? &cache->backward[s] : nullptr);
        std::copy(state.h.begin(), state.h.end(), out.hidden.row(t).begin() + static_cast<std::ptrdiff_t>(h));
    }
    if (cache) cache->ready = true;
    return out;
}

namespace detail {

inline void lstm_direction_backward(const std::vector<LstmStepCache>& steps, const Matrix& inputs,
                                    const LstmParams& p, const Matrix& d_hidden,
                                    std::size_t col_offset, bool reversed, LstmParams& grad,
                                    Matrix* d_input) {
    const std::size_t h = p.hidden();
    const std::size_t L = steps.size();
    Vector dh_next(h, 0.0);
    Vector dc_next(h, 0.0);
    Vector dh(h);
    Matrix dz_all(L, 4 * h);  // row s: pre-activation gradient of step s
    for (std::size_t s = L; s-- > 0;) {
        const std::size_t t = reversed ? L - 1 - s : s;
        const LstmStepCache& c = steps[s];
        auto up = d_hidden.row(t);
        auto dz = dz_all.row(s);
        for (std::size_t j = 0; j < h; ++j) dh[j] = up[col_offset + j] + dh_next[j];
        for (std::size_t j = 0; j < h; ++j) {
            const double gi = c.gates[j];
            const double gf = c.gates[h + j];
            const double go = c.gates[2 * h + j];
            const double gc = c.gates[3 * h + j];
            const double tc = c.tanh_c[j];
            const double d_o = dh[j] * tc;
            const double dc = dh[j] * go * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * gc * gi * (1.0 - gi);
            dz[h + j] = dc * c.c_prev[j] * gf * (1.0 - gf);
            dz[2 * h + j] = d_o * go * (1.0 - go);
            dz[3 * h + j] = dc * gi * (1.0 - gc * gc);
            dc_next[j] = dc * gf;
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (std::size_t r = 0; r < 4 * h; ++r)
            if (dz[r] != 0.0) axpy(dz[r], p.u.row(r), dh_next);
    }
    // Weight gradients row by row so each gradient row stays in cache.
    for (std::size_t r = 0; r < 4 * h; ++r) {
        auto gw = grad.w.row(r);
        auto gu = grad.u.row(r);
        for (std::size_t s = L; s-- > 0;) {
            const double g = dz_all(s, r);
            if (g == 0.0) continue;
            const std::size_t t = reversed ? L - 1 - s : s;
            axpy(g, inputs.row(t), gw);
            axpy(g, steps[s].h_prev, gu);
            grad.b[r] += g;
        }
    }
    if (d_input)
        for (std::size_t s = 0; s < L; ++s) {
            const std::size_t t = reversed ? L - 1 - s : s;
            auto dx = d_input->row(t);
            for (std::size_t r = 0; r < 4 * h; ++r)
                if (dz_all(s, r) != 0.0) axpy(dz_all(s, r), p.w.row(r), dx);
        }
}

}  // namespace detail

// Accumulates (+=) parameter gradients for the upstream gradient `d_hidden`
// (max_len × 2h, rows past the true length ignored). Input gradients are
// accumulated into `d_input` (max_len × d) when given; padded rows stay zero.
inline void encoder_backward(const EncoderCache& cache, const LstmParams& fwd, const LstmParams& bwd,
                             const Matrix& d_hidden, LstmParams& grad_fwd, LstmParams& grad_bwd,
                             Matrix* d_input = nullptr) {
    if (!cache.ready) throw Error("encoder_backward: no cached forward pass");
    const std::size_t h = fwd.hidden();
    if (d_hidden.cols() != 2 * h || d_hidden.rows() < cache.forward.size())
        throw DimensionError("encoder_backward: upstream gradient shape mismatch");
    if (d_input && (d_input->cols() != fwd.input() || d_input->rows() < cache.forward.size()))
        throw DimensionError("encoder_backward: input gradient shape mismatch");
    detail::lstm_direction_backward(cache.forward, cache.inputs, fwd, d_hidden, 0, false, grad_fwd, d_input);
    detail::lstm_direction_backward(cache.backward, cache.inputs, bwd, d_hidden, h, true, grad_bwd, d_input);
}

}  // namespace kaas

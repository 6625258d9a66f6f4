#pragma once
// Question–answer interaction, max pooling, community-adjusted attention and
// bilinear similarity, with exact reverse-mode gradients.
//
//   G[i][j]  = σ(w1·[h_q(i); h_a(j)] + b1)
//   r_q(i)   = max_j G[i][j],   r_a(j) = max_i G[i][j]
//   y_a(j)   = tanh(w2·r_a(j) + w3·p_exp + w4·p_auth + w5·p_kg + b2)
//   α_a      = softmax(y_a),    α_q = softmax(r_q)       (true positions only)
//   r^q      = Σ α_q(i) h_q(i), r^a = Σ α_a(j) h_a(j)
//   score    = tanh(r^qᵀ U_r r^a)

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "kaas/community.hpp"
#include "kaas/encoder.hpp"
#include "kaas/error.hpp"
#include "kaas/linalg.hpp"

namespace kaas {

struct InteractionParams {
    Vector w1;  // 4h: question half then answer half
    double b1 = 0.0;
    double w2 = 0.0;
    Vector w3;  // k, expertise
    Vector w4;  // k, authority
    Vector w5;  // k, knowledge graph
    double b2 = 0.0;
    Matrix ur;  // 2h × 2h

    static InteractionParams zeros(std::size_t hidden, std::size_t rank) {
        return {Vector(4 * hidden, 0.0), 0.0, 0.0, Vector(rank, 0.0), Vector(rank, 0.0),
                Vector(rank, 0.0), 0.0, Matrix(2 * hidden, 2 * hidden)};
    }

    // uniform(−0.1, 0.1) everywhere except U_r = I / (2h).
    template <class Rng>
    static InteractionParams random(std::size_t hidden, std::size_t rank, Rng& rng) {
        InteractionParams p = zeros(hidden, rank);
        std::uniform_real_distribution<double> dist(-0.1, 0.1);
        for (double& x : p.w1) x = dist(rng);
        p.b1 = dist(rng);
        p.w2 = dist(rng);
        for (Vector* v : {&p.w3, &p.w4, &p.w5})
            for (double& x : *v) x = dist(rng);
        p.b2 = dist(rng);
        const double d = 1.0 / static_cast<double>(2 * hidden);
        for (std::size_t i = 0; i < 2 * hidden; ++i) p.ur(i, i) = d;
        return p;
    }

    std::size_t hidden() const noexcept { return ur.rows() / 2; }
    std::size_t rank() const noexcept { return w3.size(); }

    template <class F>
    void visit(F&& f) {
        f(std::span<double>(w1));
        f(std::span<double>(&b1, 1));
        f(std::span<double>(&w2, 1));
        f(std::span<double>(w3));
        f(std::span<double>(w4));
        f(std::span<double>(w5));
        f(std::span<double>(&b2, 1));
        f(ur.data());
    }
    template <class F>
    void visit(F&& f) const {
        f(std::span<const double>(w1));
        f(std::span<const double>(&b1, 1));
        f(std::span<const double>(&w2, 1));
        f(std::span<const double>(w3));
        f(std::span<const double>(w4));
        f(std::span<const double>(w5));
        f(std::span<const double>(&b2, 1));
        f(ur.data());
    }

    bool operator==(const InteractionParams&) const = default;
};

inline constexpr double kPadSentinel = -std::numeric_limits<double>::infinity();

// M × L matrix over padded shapes; entries outside the true ranges hold −∞.
inline Matrix interaction_matrix(const EncodedSequence& q, const EncodedSequence& a,
                                 const InteractionParams& p) {
    const std::size_t two_h = q.hidden.cols();
    if (a.hidden.cols() != two_h || p.w1.size() != 2 * two_h)
        throw DimensionError("interaction_matrix: hidden sizes disagree with w1");
    const std::span<const double> wq(p.w1.data(), two_h);
    const std::span<const double> wa(p.w1.data() + two_h, two_h);
    Vector pa(a.length);
    for (std::size_t j = 0; j < a.length; ++j) pa[j] = dot(wa, a.hidden.row(j));
    Matrix g(q.hidden.rows(), a.hidden.rows(), kPadSentinel);
    for (std::size_t i = 0; i < q.length; ++i) {
        const double pq = dot(wq, q.hidden.row(i)) + p.b1;
        for (std::size_t j = 0; j < a.length; ++j) g(i, j) = detail::logistic(pq + pa[j]);
    }
    return g;
}

struct PoolResult {
    Vector r_q;                      // M; 0 on padded rows
    Vector r_a;                      // L; 0 on padded columns
    std::vector<std::size_t> q_arg;  // column attaining r_q(i)
    std::vector<std::size_t> a_arg;  // row attaining r_a(j)
    std::size_t q_length = 0;
    std::size_t a_length = 0;
};

// Row- and column-wise max over the true block of G. True ranges are the
// prefix of rows/columns whose first entry is not the padding sentinel. Ties
// resolve to the lowest index.
inline PoolResult pool(const Matrix& g) {
    PoolResult r;
    while (r.q_length < g.rows() && g.cols() > 0 && g(r.q_length, 0) != kPadSentinel) ++r.q_length;
    while (r.a_length < g.cols() && g.rows() > 0 && g(0, r.a_length) != kPadSentinel) ++r.a_length;
    if (r.q_length == 0 || r.a_length == 0)
        throw ValidationError("pool: interaction matrix has no true rows or columns");
    r.r_q.assign(g.rows(), 0.0);
    r.r_a.assign(g.cols(), 0.0);
    r.q_arg.assign(r.q_length, 0);
    r.a_arg.assign(r.a_length, 0);
    for (std::size_t i = 0; i < r.q_length; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < r.a_length; ++j)
            if (g(i, j) > g(i, best)) best = j;
        r.q_arg[i] = best;
        r.r_q[i] = g(i, best);
    }
    for (std::size_t j = 0; j < r.a_length; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < r.q_length; ++i)
            if (g(i, j) > g(best, j)) best = i;
        r.a_arg[j] = best;
        r.r_a[j] = g(best, j);
    }
    return r;
}

// Softmax over the first `length` entries; the rest are exactly zero.
inline Vector masked_softmax(std::span<const double> x, std::size_t length) {
    Vector out(x.size(), 0.0);
    if (length == 0) return out;
    double mx = x[0];
    for (std::size_t i = 1; i < length; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < length; ++i) sum += out[i] = std::exp(x[i] - mx);
    for (std::size_t i = 0; i < length; ++i) out[i] /= sum;
    return out;
}

struct AnswerAttention {
    Vector y;      // unnormalized attention, L
    Vector alpha;  // L
};

inline AnswerAttention answer_attention(std::span<const double> r_a, std::size_t length,
                                        const CommunityProfiles& profiles, const InteractionParams& p) {
    if (profiles.rank() != p.rank()) throw DimensionError("answer_attention: profile rank mismatch");
    const double community = dot(p.w3, profiles.expertise) + dot(p.w4, profiles.authority) +
                             dot(p.w5, profiles.knowledge_graph) + p.b2;
    AnswerAttention att{Vector(r_a.size(), 0.0), {}};
    for (std::size_t j = 0; j < length; ++j) att.y[j] = std::tanh(p.w2 * r_a[j] + community);
    att.alpha = masked_softmax(att.y, length);
    return att;
}

inline Vector question_attention(std::span<const double> r_q, std::size_t length) {
    return masked_softmax(r_q, length);
}

struct Representation {
    Vector rep_q;  // 2h
    Vector rep_a;  // 2h
    double bilinear = 0.0;
    double score = 0.0;
};

inline Representation represent_and_score(const EncodedSequence& q, const EncodedSequence& a,
                                          std::span<const double> alpha_q, std::span<const double> alpha_a,
                                          const InteractionParams& p) {
    const std::size_t two_h = q.hidden.cols();
    if (p.ur.rows() != two_h || a.hidden.cols() != two_h)
        throw DimensionError("represent_and_score: U_r does not match hidden size");
    Representation r{Vector(two_h, 0.0), Vector(two_h, 0.0)};
    for (std::size_t i = 0; i < q.length; ++i) axpy(alpha_q[i], q.hidden.row(i), r.rep_q);
    for (std::size_t j = 0; j < a.length; ++j) axpy(alpha_a[j], a.hidden.row(j), r.rep_a);
    r.bilinear = dot(r.rep_q, matvec(p.ur, r.rep_a));
    r.score = std::tanh(r.bilinear);
    return r;
}

struct AttentionTrace {
    Matrix g;
    PoolResult pooled;
    Vector alpha_q;
    AnswerAttention answer;
    Representation repr;

    double score() const noexcept { return repr.score; }
};

inline AttentionTrace attention_forward(const EncodedSequence& q, const EncodedSequence& a,
                                        const CommunityProfiles& profiles, const InteractionParams& p) {
    AttentionTrace t;
    t.g = interaction_matrix(q, a, p);
    t.pooled = pool(t.g);
    t.alpha_q = question_attention(t.pooled.r_q, t.pooled.q_length);
    t.answer = answer_attention(t.pooled.r_a, t.pooled.a_length, profiles, p);
    t.repr = represent_and_score(q, a, t.alpha_q, t.answer.alpha, p);
    return t;
}

namespace detail {
inline Vector softmax_backward(std::span<const double> alpha, std::span<const double> d_alpha,
                               std::size_t length) {
    double s = 0.0;
    for (std::size_t i = 0; i < length; ++i) s += alpha[i] * d_alpha[i];
    Vector d(alpha.size(), 0.0);
    for (std::size_t i = 0; i < length; ++i) d[i] = alpha[i] * (d_alpha[i] - s);
    return d;
}
}  // namespace detail

// Accumulates (+=) gradients of `d_score`·score into `grad` and into the
// hidden-state gradients `d_q` / `d_a` (shaped like the encoded inputs).
inline void attention_backward(const AttentionTrace& t, const EncodedSequence& q,
                               const EncodedSequence& a, const CommunityProfiles& profiles,
                               const InteractionParams& p, double d_score, InteractionParams& grad,
                               Matrix& d_q, Matrix& d_a) {
    if (d_score == 0.0) return;
    const std::size_t two_h = q.hidden.cols();
    const std::size_t M = t.pooled.q_length;
    const std::size_t L = t.pooled.a_length;
    const auto& rp = t.repr;

    const double dz = d_score * (1.0 - rp.score * rp.score);
    for (std::size_t r = 0; r < two_h; ++r) axpy(dz * rp.rep_q[r], rp.rep_a, grad.ur.row(r));
    Vector d_rep_q = matvec(p.ur, rp.rep_a);
    Vector d_rep_a = matvec_transposed(p.ur, rp.rep_q);
    for (double& x : d_rep_q) x *= dz;
    for (double& x : d_rep_a) x *= dz;

    Vector d_alpha_q(q.hidden.rows(), 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        axpy(t.alpha_q[i], d_rep_q, d_q.row(i));
        d_alpha_q[i] = dot(q.hidden.row(i), d_rep_q);
    }
    Vector d_alpha_a(a.hidden.rows(), 0.0);
    for (std::size_t j = 0; j < L; ++j) {
        axpy(t.answer.alpha[j], d_rep_a, d_a.row(j));
        d_alpha_a[j] = dot(a.hidden.row(j), d_rep_a);
    }
    const Vector d_rq = detail::softmax_backward(t.alpha_q, d_alpha_q, M);
    const Vector d_y = detail::softmax_backward(t.answer.alpha, d_alpha_a, L);

    Vector d_ra(a.hidden.rows(), 0.0);
    double sum_du = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
        const double y = t.answer.y[j];
        const double du = d_y[j] * (1.0 - y * y);
        grad.w2 += du * t.pooled.r_a[j];
        d_ra[j] = du * p.w2;
        sum_du += du;
    }
    axpy(sum_du, profiles.expertise, grad.w3);
    axpy(sum_du, profiles.authority, grad.w4);
    axpy(sum_du, profiles.knowledge_graph, grad.w5);
    grad.b2 += sum_du;

    // Max pooling routes each pooled gradient to its argmax entry of G.
    Vector d_pq(M, 0.0);
    Vector d_pa(L, 0.0);
    auto route = [&](std::size_t i, std::size_t j, double d) {
        const double gij = t.g(i, j);
        const double dv = d * gij * (1.0 - gij);
        d_pq[i] += dv;
        d_pa[j] += dv;
        grad.b1 += dv;
    };
    for (std::size_t i = 0; i < M; ++i) route(i, t.pooled.q_arg[i], d_rq[i]);
    for (std::size_t j = 0; j < L; ++j) route(t.pooled.a_arg[j], j, d_ra[j]);

    const std::span<const double> wq(p.w1.data(), two_h);
    const std::span<const double> wa(p.w1.data() + two_h, two_h);
    const std::span<double> gq(grad.w1.data(), two_h);
    const std::span<double> ga(grad.w1.data() + two_h, two_h);
    for (std::size_t i = 0; i < M; ++i) {
        axpy(d_pq[i], q.hidden.row(i), gq);
        axpy(d_pq[i], wq, d_q.row(i));
    }
    for (std::size_t j = 0; j < L; ++j) {
        axpy(d_pa[j], a.hidden.row(j), ga);
        axpy(d_pa[j], wa, d_a.row(j));
    }
}

}  // namespace kaas

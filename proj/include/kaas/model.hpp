#pragma once
// The full answer-selection model: a shared biLSTM over question and answer
// text feeding the community-adjusted attentive interaction.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kaas/attention.hpp"
#include "kaas/community.hpp"
#include "kaas/embedding.hpp"
#include "kaas/encoder.hpp"
#include "kaas/linalg.hpp"

namespace kaas {

struct Hyperparameters {
    std::size_t hidden = 128;
    std::size_t embed_dim = 100;
    std::size_t rank = 8;
    std::size_t max_question = 40;
    std::size_t max_answer = 80;
    std::size_t batch = 256;
    double margin = 0.05;
    double learning_rate = 0.01;
    double clip_norm = 5.0;  // global-norm clipping; 0 disables
    std::size_t epochs = 20;
    std::size_t patience = 3;       // early stop after this many epochs ...
    double min_improvement = 1e-4;  // ... each improving mean loss by less than this
    std::size_t negatives_per_question = 19;  // capped by the number of worse candidates
    std::size_t pool = 20;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    AblationConfig ablation = AblationConfig::full();

    bool operator==(const Hyperparameters&) const = default;
};

// Trainable tensors. The embedding table is frozen and lives with the data.
struct ModelParams {
    Hyperparameters hyper;
    LstmParams forward;
    LstmParams backward;
    InteractionParams interaction;
    double score_threshold = 0.0;  // Good-vs-rest decision threshold, fitted after training

    static ModelParams initialize(const Hyperparameters& hp) {
        std::mt19937_64 rng(hp.seed);
        ModelParams m;
        m.hyper = hp;
        m.forward = LstmParams::random(hp.hidden, hp.embed_dim, rng);
        m.backward = LstmParams::random(hp.hidden, hp.embed_dim, rng);
        m.interaction = InteractionParams::random(hp.hidden, hp.rank, rng);
        return m;
    }

    static ModelParams zeros(const Hyperparameters& hp) {
        ModelParams m;
        m.hyper = hp;
        m.forward = LstmParams::zeros(hp.hidden, hp.embed_dim);
        m.backward = LstmParams::zeros(hp.hidden, hp.embed_dim);
        m.interaction = InteractionParams::zeros(hp.hidden, hp.rank);
        return m;
    }

    ModelParams zeros_like() const { return zeros(hyper); }

    template <class F>
    void visit(F&& f) {
        forward.visit(f);
        backward.visit(f);
        interaction.visit(f);
    }
    template <class F>
    void visit(F&& f) const {
        forward.visit(f);
        backward.visit(f);
        interaction.visit(f);
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        visit([&](std::span<const double> s) { n += s.size(); });
        return n;
    }

    Vector flatten() const {
        Vector v;
        v.reserve(parameter_count());
        visit([&](std::span<const double> s) { v.insert(v.end(), s.begin(), s.end()); });
        return v;
    }

    void assign(std::span<const double> flat) {
        if (flat.size() != parameter_count()) throw DimensionError("ModelParams::assign: size mismatch");
        std::size_t off = 0;
        visit([&](std::span<double> s) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                      flat.begin() + static_cast<std::ptrdiff_t>(off + s.size()), s.begin());
            off += s.size();
        });
    }

    // this += other
    void accumulate(const ModelParams& other) {
        Vector flat = other.flatten();
        std::size_t off = 0;
        visit([&](std::span<double> s) {
            for (double& x : s) x += flat[off++];
        });
    }

    bool operator==(const ModelParams&) const = default;
};

inline EncodedSequence encode(const ModelParams& m, const EmbeddedSequence& seq, EncoderCache* cache = nullptr) {
    return encode_bidirectional(seq, m.forward, m.backward, cache);
}

inline double score_encoded(const ModelParams& m, const EncodedSequence& q, const EncodedSequence& a,
                            const CommunityProfiles& profiles) {
    return attention_forward(q, a, profiles.masked(m.hyper.ablation), m.interaction).score();
}

inline double score_pair(const ModelParams& m, const EmbeddedSequence& q, const EmbeddedSequence& a,
                         const CommunityProfiles& profiles) {
    return score_encoded(m, encode(m, q), encode(m, a), profiles);
}

inline double hinge_loss(double s_plus, double s_minus, double margin) {
    return std::max(0.0, margin + s_minus - s_plus);
}

// Loss of one (q, a⁺, a⁻) triplet. When `grad` is given and the hinge is
// active, accumulates grad_scale · ∂loss/∂θ into it.
inline double triplet_loss(const ModelParams& m, const EmbeddedSequence& question,
                           const EmbeddedSequence& positive, const CommunityProfiles& positive_profiles,
                           const EmbeddedSequence& negative, const CommunityProfiles& negative_profiles,
                           double grad_scale = 1.0, ModelParams* grad = nullptr) {
    EncoderCache qc;
    EncoderCache pc;
    EncoderCache nc;
    const bool want = grad != nullptr;
    const EncodedSequence q = encode(m, question, want ? &qc : nullptr);
    const EncodedSequence ap = encode(m, positive, want ? &pc : nullptr);
    const EncodedSequence an = encode(m, negative, want ? &nc : nullptr);
    const CommunityProfiles pp = positive_profiles.masked(m.hyper.ablation);
    const CommunityProfiles np = negative_profiles.masked(m.hyper.ablation);
    const AttentionTrace tp = attention_forward(q, ap, pp, m.interaction);
    const AttentionTrace tn = attention_forward(q, an, np, m.interaction);
    const double loss = hinge_loss(tp.score(), tn.score(), m.hyper.margin);
    if (!want || loss <= 0.0) return loss;

    Matrix dq(q.hidden.rows(), q.hidden.cols());
    Matrix dp(ap.hidden.rows(), ap.hidden.cols());
    Matrix dn(an.hidden.rows(), an.hidden.cols());
    attention_backward(tp, q, ap, pp, m.interaction, -grad_scale, grad->interaction, dq, dp);
    attention_backward(tn, q, an, np, m.interaction, grad_scale, grad->interaction, dq, dn);
    encoder_backward(qc, m.forward, m.backward, dq, grad->forward, grad->backward);
    encoder_backward(pc, m.forward, m.backward, dp, grad->forward, grad->backward);
    encoder_backward(nc, m.forward, m.backward, dn, grad->forward, grad->backward);
    return loss;
}

}  // namespace kaas

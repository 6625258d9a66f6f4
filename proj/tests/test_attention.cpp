#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace kaas;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

EncodedSequence random_encoded(std::size_t rows, std::size_t len, std::size_t two_h, std::mt19937_64& rng) {
    EncodedSequence e{Matrix(rows, two_h), len};
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (std::size_t i = 0; i < len; ++i)
        for (double& x : e.hidden.row(i)) x = u(rng);
    return e;
}

InteractionParams random_interaction(std::size_t h, std::size_t k, std::mt19937_64& rng) {
    InteractionParams p = InteractionParams::random(h, k, rng);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (double& x : p.ur.data()) x += u(rng);
    p.w2 = 1.3;
    for (double& x : p.w1) x *= 10.0;
    return p;
}

}  // namespace

TEST(Interaction, ZeroWeightsGiveOneHalf) {
    std::mt19937_64 rng(1);
    const auto q = random_encoded(5, 3, 4, rng);
    const auto a = random_encoded(6, 4, 4, rng);
    const Matrix g = interaction_matrix(q, a, InteractionParams::zeros(2, 2));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            if (i < 3 && j < 4)
                EXPECT_EQ(g(i, j), 0.5);
            else
                EXPECT_EQ(g(i, j), kPadSentinel);
        }
}

TEST(Interaction, MatchesHandFormula) {
    // 2h = 2: G[i][j] = σ(w1·[hq_i ; ha_j] + b1).
    EncodedSequence q{Matrix{{0.2, -0.4}, {0.7, 0.1}}, 2};
    EncodedSequence a{Matrix{{-0.3, 0.5}, {0.9, -0.8}, {0.0, 0.0}}, 2};
    InteractionParams p = InteractionParams::zeros(1, 1);
    p.w1 = {1.5, -0.5, 0.25, 2.0};
    p.b1 = -0.1;
    const Matrix g = interaction_matrix(q, a, p);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double z = 1.5 * q.hidden(i, 0) - 0.5 * q.hidden(i, 1) + 0.25 * a.hidden(j, 0) +
                             2.0 * a.hidden(j, 1) - 0.1;
            EXPECT_NEAR(g(i, j), sigmoid(z), 1e-15);
        }
    EXPECT_EQ(g(0, 2), kPadSentinel);
}

TEST(Interaction, HiddenSizeMismatch) {
    EncodedSequence q{Matrix(2, 4), 2};
    EncodedSequence a{Matrix(2, 2), 2};
    EXPECT_THROW(interaction_matrix(q, a, InteractionParams::zeros(2, 1)), DimensionError);
}

TEST(Pool, RowAndColumnMaxOverTrueBlock) {
    const double P = kPadSentinel;
    const Matrix g{{0.1, 0.9, 0.3, P}, {0.8, 0.2, 0.4, P}, {P, P, P, P}};
    const PoolResult r = pool(g);
    EXPECT_EQ(r.q_length, 2u);
    EXPECT_EQ(r.a_length, 3u);
    EXPECT_EQ(r.r_q, (Vector{0.9, 0.8, 0.0}));
    EXPECT_EQ(r.r_a, (Vector{0.8, 0.9, 0.4, 0.0}));
    EXPECT_EQ(r.q_arg, (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(r.a_arg, (std::vector<std::size_t>{1, 0, 1}));
}

TEST(Pool, TiesGoToLowestIndex) {
    const Matrix g{{0.5, 0.5}, {0.5, 0.5}};
    const PoolResult r = pool(g);
    EXPECT_EQ(r.q_arg, (std::vector<std::size_t>{0, 0}));
    EXPECT_EQ(r.a_arg, (std::vector<std::size_t>{0, 0}));
}

TEST(Pool, AllPaddingRejected) {
    EXPECT_THROW(pool(Matrix(2, 2, kPadSentinel)), ValidationError);
}

TEST(MaskedSoftmax, Cases) {
    EXPECT_EQ(masked_softmax(Vector{3, 3, 3, 3}, 4), (Vector{0.25, 0.25, 0.25, 0.25}));
    const Vector s = masked_softmax(Vector{1, 2, 50}, 2);
    EXPECT_NEAR(s[0], 1.0 / (1.0 + std::exp(1.0)), 1e-15);
    EXPECT_EQ(s[2], 0.0);
    const Vector big = masked_softmax(Vector{1000, 1000}, 2);
    EXPECT_EQ(big, (Vector{0.5, 0.5}));
    EXPECT_EQ(masked_softmax(Vector{7.0}, 1), (Vector{1.0}));
}

TEST(AnswerAttention, CommunityTermsShiftEveryPosition) {
    InteractionParams p = InteractionParams::zeros(1, 2);
    p.w2 = 2.0;
    p.w3 = {0.5, -1.0};
    p.w4 = {1.0, 0.0};
    p.w5 = {0.0, 0.25};
    p.b2 = 0.1;
    CommunityProfiles prof = CommunityProfiles::zeros(2);
    prof.expertise = {1.0, 0.2};
    prof.authority = {-0.4, 3.0};
    prof.knowledge_graph = {9.0, 0.8};
    const double c = 0.5 - 0.2 - 0.4 + 0.2 + 0.1;
    const Vector ra{0.3, 0.6, 0.0};
    const AnswerAttention att = answer_attention(ra, 2, prof, p);
    EXPECT_NEAR(att.y[0], std::tanh(0.6 + c), 1e-15);
    EXPECT_NEAR(att.y[1], std::tanh(1.2 + c), 1e-15);
    EXPECT_EQ(att.y[2], 0.0);
    const double e0 = std::exp(att.y[0]), e1 = std::exp(att.y[1]);
    EXPECT_NEAR(att.alpha[0], e0 / (e0 + e1), 1e-15);
    EXPECT_EQ(att.alpha[2], 0.0);
    EXPECT_THROW(answer_attention(ra, 2, CommunityProfiles::zeros(3), p), DimensionError);
}

TEST(Score, ZeroBilinearGivesZero) {
    std::mt19937_64 rng(2);
    const auto q = random_encoded(4, 4, 6, rng);
    const auto a = random_encoded(5, 5, 6, rng);
    InteractionParams p = random_interaction(3, 2, rng);
    p.ur = Matrix(6, 6);
    EXPECT_EQ(attention_forward(q, a, test::random_profiles(2, rng), p).score(), 0.0);
}

TEST(Score, SinglePositionsUseTheirHiddenStates) {
    EncodedSequence q{Matrix{{0.3, -0.2}, {5.0, 5.0}}, 1};
    EncodedSequence a{Matrix{{0.6, 0.4}}, 1};
    InteractionParams p = InteractionParams::zeros(1, 1);
    p.ur = Matrix{{1.0, 2.0}, {-1.0, 0.5}};
    const auto t = attention_forward(q, a, CommunityProfiles::zeros(1), p);
    EXPECT_EQ(t.alpha_q[0], 1.0);
    EXPECT_EQ(t.answer.alpha[0], 1.0);
    // [0.3 -0.2] · U · [0.6 0.4]ᵀ = 0.3·(0.6+0.8) − 0.2·(−0.6+0.2)
    EXPECT_NEAR(t.score(), std::tanh(0.3 * 1.4 - 0.2 * -0.4), 1e-15);
}

TEST(Score, RepresentationsAreAttentionWeightedSums) {
    std::mt19937_64 rng(3);
    const auto q = random_encoded(6, 4, 4, rng);
    const auto a = random_encoded(7, 5, 4, rng);
    const auto p = random_interaction(2, 3, rng);
    const auto t = attention_forward(q, a, test::random_profiles(3, rng), p);
    double sq = 0.0, sa = 0.0;
    for (double x : t.alpha_q) sq += x;
    for (double x : t.answer.alpha) sa += x;
    EXPECT_NEAR(sq, 1.0, 1e-14);
    EXPECT_NEAR(sa, 1.0, 1e-14);
    for (std::size_t c = 0; c < 4; ++c) {
        double want = 0.0;
        for (std::size_t i = 0; i < 4; ++i) want += t.alpha_q[i] * q.hidden(i, c);
        EXPECT_NEAR(t.repr.rep_q[c], want, 1e-15);
    }
    EXPECT_GT(t.score(), -1.0);
    EXPECT_LT(t.score(), 1.0);
}

TEST(Score, PaddedRowsDoNotMatter) {
    std::mt19937_64 rng(4);
    const auto q = random_encoded(6, 3, 4, rng);
    auto a = random_encoded(8, 5, 4, rng);
    const auto p = random_interaction(2, 2, rng);
    const auto prof = test::random_profiles(2, rng);
    const double s = attention_forward(q, a, prof, p).score();
    for (std::size_t j = 5; j < 8; ++j)
        for (double& x : a.hidden.row(j)) x = 0.77;
    EXPECT_EQ(attention_forward(q, a, prof, p).score(), s);
}

TEST(AttentionBackward, FiniteDifference) {
    const std::size_t h = 2, k = 3;
    std::mt19937_64 rng(5);
    auto q = random_encoded(5, 4, 2 * h, rng);
    auto a = random_encoded(6, 5, 2 * h, rng);
    InteractionParams p = random_interaction(h, k, rng);
    const auto prof = test::random_profiles(k, rng);

    const auto t = attention_forward(q, a, prof, p);
    InteractionParams g = InteractionParams::zeros(h, k);
    Matrix dq(5, 2 * h), da(6, 2 * h);
    attention_backward(t, q, a, prof, p, 1.0, g, dq, da);

    Vector theta;
    p.visit([&](std::span<const double> s) { theta.insert(theta.end(), s.begin(), s.end()); });
    Vector grad;
    g.visit([&](std::span<const double> s) { grad.insert(grad.end(), s.begin(), s.end()); });
    const ScalarFunction f = [&](std::span<const double> x) {
        InteractionParams pp = p;
        std::size_t off = 0;
        pp.visit([&](std::span<double> s) {
            for (double& v : s) v = x[off++];
        });
        return attention_forward(q, a, prof, pp).score();
    };
    EXPECT_LT(grad_check(f, theta, grad, 1e-6), 1e-6);

    auto check_hidden = [&](EncodedSequence& e, const Matrix& d, std::size_t len) {
        Vector x0, g0;
        for (std::size_t i = 0; i < len; ++i) {
            x0.insert(x0.end(), e.hidden.row(i).begin(), e.hidden.row(i).end());
            g0.insert(g0.end(), d.row(i).begin(), d.row(i).end());
        }
        const Matrix saved = e.hidden;
        const ScalarFunction fh = [&](std::span<const double> x) {
            for (std::size_t i = 0; i < len; ++i)
                for (std::size_t c = 0; c < 2 * h; ++c) e.hidden(i, c) = x[i * 2 * h + c];
            const double s = attention_forward(q, a, prof, p).score();
            e.hidden = saved;
            return s;
        };
        return grad_check(fh, x0, g0, 1e-6);
    };
    EXPECT_LT(check_hidden(q, dq, 4), 1e-6);
    EXPECT_LT(check_hidden(a, da, 5), 1e-6);
}

TEST(AttentionBackward, DisabledCommunityGetsNoGradient) {
    std::mt19937_64 rng(6);
    const auto q = random_encoded(4, 4, 4, rng);
    const auto a = random_encoded(4, 4, 4, rng);
    const auto p = random_interaction(2, 2, rng);
    const auto prof = test::random_profiles(2, rng).masked({true, false, false});
    const auto t = attention_forward(q, a, prof, p);
    InteractionParams g = InteractionParams::zeros(2, 2);
    Matrix dq(4, 4), da(4, 4);
    attention_backward(t, q, a, prof, p, 1.0, g, dq, da);
    EXPECT_NE(g.w3, Vector(2, 0.0));
    EXPECT_EQ(g.w4, Vector(2, 0.0));
    EXPECT_EQ(g.w5, Vector(2, 0.0));
}

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "support.hpp"

using namespace kaas;

namespace {

// Pool whose candidates carry the given scores; candidate `best` is the best.
RankedPool scored_pool(const std::vector<double>& scores, std::size_t best) {
    RankedPool p{"q", {}};
    for (std::size_t i = 0; i < scores.size(); ++i)
        p.candidates.push_back({"a" + std::to_string(i), scores[i], i == best ? 2.0 : 0.0, std::nullopt, i == best,
                                false});
    return p;
}

RankedPool labelled_pool(const std::vector<double>& scores, const std::vector<QualityLabel>& labels) {
    RankedPool p{"q", {}};
    for (std::size_t i = 0; i < scores.size(); ++i)
        p.candidates.push_back({"a" + std::to_string(i), scores[i], 0.0, labels[i], false, false});
    return p;
}

struct Answers {
    Question question{"q1", "text", {}};
    std::vector<Answer> own;
    std::vector<Answer> all;
    std::vector<const Answer*> ptrs() const {
        std::vector<const Answer*> out;
        for (const auto& a : own) out.push_back(&a);
        return out;
    }
};

Answers with_answers(std::size_t n, std::size_t others) {
    Answers a;
    for (std::size_t i = 0; i < n; ++i)
        a.own.push_back({"a" + std::to_string(i), "q1", "u", "t", {}, static_cast<double>(i), {}});
    a.all = a.own;
    for (std::size_t i = 0; i < others; ++i) a.all.push_back({"o" + std::to_string(i), "q2", "u", "t", {}, 9.0, {}});
    return a;
}

}  // namespace

TEST(NormalizePool, KeepsTopTwentyOfTwentyFive) {
    const Answers a = with_answers(25, 0);
    const RankedPool p = normalize_pool(a.question, a.ptrs(), a.all, VoteMode::Count, 20, 1);
    ASSERT_EQ(p.candidates.size(), 20u);
    EXPECT_EQ(p.candidates.front().answer_id, "a24");
    EXPECT_TRUE(p.candidates.front().best);
    std::set<std::string> ids;
    for (const auto& c : p.candidates) ids.insert(c.answer_id);
    EXPECT_EQ(ids.count("a0"), 0u);
    EXPECT_EQ(ids.count("a5"), 1u);
}

TEST(NormalizePool, PadsThreeWithFillers) {
    const Answers a = with_answers(3, 30);
    const RankedPool p = normalize_pool(a.question, a.ptrs(), a.all, VoteMode::Count, 20, 1);
    ASSERT_EQ(p.candidates.size(), 20u);
    std::size_t fillers = 0;
    std::set<std::string> ids;
    for (const auto& c : p.candidates) {
        fillers += c.filler;
        ids.insert(c.answer_id);
        if (c.filler) {
            EXPECT_EQ(c.answer_id[0], 'o');
            EXPECT_FALSE(c.best);
            EXPECT_EQ(c.measure, 0.0);
        }
    }
    EXPECT_EQ(fillers, 17u);
    EXPECT_EQ(ids.size(), 20u);
    EXPECT_EQ(normalize_pool(a.question, a.ptrs(), a.all, VoteMode::Count, 20, 1).candidates[10].answer_id,
              p.candidates[10].answer_id);
}

TEST(NormalizePool, ExactTwentyUnchanged) {
    const Answers a = with_answers(20, 5);
    const RankedPool p = normalize_pool(a.question, a.ptrs(), a.all, VoteMode::Count, 20, 1);
    for (const auto& c : p.candidates) EXPECT_FALSE(c.filler);
}

TEST(NormalizePool, TiedTopHasNoBest) {
    Answers a = with_answers(3, 20);
    a.own[1].vote = 2.0;
    EXPECT_FALSE(normalize_pool(a.question, a.ptrs(), a.all, VoteMode::Count, 20, 1).best_index());
}

TEST(NormalizePool, Errors) {
    const Answers a = with_answers(3, 2);
    EXPECT_THROW(normalize_pool(a.question, a.ptrs(), a.all, VoteMode::Count, 20, 1), ValidationError);
    EXPECT_THROW(normalize_pool(a.question, {}, a.all, VoteMode::Count, 20, 1), ValidationError);
}

TEST(PrecisionAtK, HandCases) {
    const std::vector<RankedPool> pools{scored_pool({0.9, 0.1, 0.2}, 0), scored_pool({0.1, 0.9, 0.5}, 2),
                                        scored_pool({0.3, 0.2, 0.1}, 2)};
    EXPECT_NEAR(precision_at_k(pools, 1), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(precision_at_k(pools, 2), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(precision_at_k(pools, 3), 1.0);
    EXPECT_EQ(precision_at_k({}, 1), 0.0);
}

TEST(PrecisionAtK, ScoreTiesKeepCandidateOrder) {
    EXPECT_EQ(precision_at_k({scored_pool({0.5, 0.5}, 0)}, 1), 1.0);
    EXPECT_EQ(precision_at_k({scored_pool({0.5, 0.5}, 1)}, 1), 0.0);
}

TEST(PrecisionAtK, RandomScorerNearChance) {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RankedPool> pools;
    for (int q = 0; q < 2000; ++q) {
        std::vector<double> s(20);
        for (double& x : s) x = u(rng);
        pools.push_back(scored_pool(s, static_cast<std::size_t>(q % 20)));
    }
    EXPECT_NEAR(precision_at_k(pools, 1), 0.05, 0.015);
}

TEST(AveragePrecision, Cases) {
    using L = QualityLabel;
    EXPECT_EQ(*average_precision(labelled_pool({0.9, 0.1}, {L::Good, L::Bad})), 1.0);
    EXPECT_EQ(*average_precision(labelled_pool({0.1, 0.9}, {L::Good, L::Bad})), 0.5);
    // Good at ranks 1 and 3: (1/1 + 2/3) / 2.
    EXPECT_NEAR(*average_precision(labelled_pool({0.9, 0.5, 0.7}, {L::Good, L::Good, L::PotentiallyUseful})),
                (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
    EXPECT_FALSE(average_precision(labelled_pool({0.3}, {L::Bad})));
}

TEST(Classification, PerfectAndEmpty) {
    using L = QualityLabel;
    const std::vector<RankedPool> pools{labelled_pool({0.9, 0.1, 0.2}, {L::Good, L::Bad, L::PotentiallyUseful})};
    const auto c = classify(pools, 0.5);
    EXPECT_EQ(c.accuracy(), 1.0);
    EXPECT_EQ(c.f1(), 1.0);
    const auto none = classify({labelled_pool({0.1}, {L::Bad})}, 0.5);
    EXPECT_EQ(none.f1(), 0.0);
    EXPECT_EQ(none.accuracy(), 1.0);
    EXPECT_EQ(ClassificationCounts{}.accuracy(), 0.0);
}

TEST(Classification, HandCounts) {
    using L = QualityLabel;
    const auto c = classify({labelled_pool({0.9, 0.8, 0.1, 0.2}, {L::Good, L::Bad, L::Good, L::Bad})}, 0.5);
    EXPECT_EQ(c.tp, 1u);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.fn, 1u);
    EXPECT_EQ(c.tn, 1u);
    EXPECT_EQ(c.accuracy(), 0.5);
    EXPECT_EQ(c.f1(), 0.5);
}

TEST(FitThreshold, SeparatesWhenPossible) {
    using L = QualityLabel;
    const std::vector<RankedPool> pools{labelled_pool({0.9, 0.1, 0.2}, {L::Good, L::Bad, L::Bad}),
                                        labelled_pool({0.7, 0.5}, {L::Good, L::PotentiallyUseful})};
    const double t = fit_threshold(pools);
    EXPECT_GT(t, 0.5);
    EXPECT_LT(t, 0.7);
    EXPECT_EQ(classify(pools, t).f1(), 1.0);
}

TEST(LabelMetrics, RequireLabels) {
    EXPECT_THROW(map_accuracy_f1({scored_pool({0.1, 0.2}, 0)}, 0.0), ValidationError);
}

TEST(KFold, SizesDifferByAtMostOne) {
    for (std::size_t n : {10u, 11u, 23u}) {
        const auto f = kfold_split(n, 5, 3);
        std::vector<std::size_t> sizes(5, 0);
        for (std::size_t x : f) ++sizes[x];
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        EXPECT_LE(*hi - *lo, 1u);
    }
    EXPECT_THROW(kfold_split(3, 5, 1), ValidationError);
    EXPECT_THROW(kfold_split(3, 0, 1), ValidationError);
}

TEST(KFold, PartitionsIds) {
    std::vector<std::string> ids;
    for (int i = 0; i < 17; ++i) ids.push_back("q" + std::to_string(i));
    const auto parts = kfold_split(ids, 4, 9);
    std::multiset<std::string> all;
    for (const auto& p : parts) all.insert(p.begin(), p.end());
    EXPECT_EQ(all, std::multiset<std::string>(ids.begin(), ids.end()));
    EXPECT_EQ(kfold_split(ids, 4, 9), parts);
}

namespace {

struct SmallWorld {
    Corpus corpus;
    EmbeddingTable table;
    Hyperparameters hp;
};

SmallWorld small_world(std::size_t questions) {
    SmallWorld w;
    SynthConfig sc;
    sc.num_questions = questions;
    sc.candidates_per_question = 6;
    sc.num_answerers = 30;
    w.corpus = generate(sc).corpus;
    std::vector<std::string> texts;
    for (const auto& q : w.corpus.questions) texts.push_back(q.text);
    SkipGramOptions so;
    so.dim = 6;
    so.epochs = 1;
    w.table = train_skipgram(texts, so);
    w.hp.hidden = 2;
    w.hp.embed_dim = 6;
    w.hp.epochs = 1;
    w.hp.pool = 6;
    w.hp.negatives_per_question = 2;
    return w;
}

}  // namespace

TEST(Splits, FoldsCoverEveryQuestionOnce) {
    const SmallWorld w = small_world(12);
    const auto splits = make_splits(w.corpus, std::nullopt, w.table, PrepareOptions::from(w.hp), 3);
    ASSERT_EQ(splits.size(), 3u);
    std::multiset<std::string> test_ids;
    for (const auto& s : splits) {
        EXPECT_EQ(s.train.questions.size() + s.test.questions.size(), 12u);
        for (const auto& q : s.test.questions) test_ids.insert(q.id);
    }
    EXPECT_EQ(test_ids.size(), 12u);
    EXPECT_EQ(std::set<std::string>(test_ids.begin(), test_ids.end()).size(), 12u);
    EXPECT_EQ(make_splits(w.corpus, w.corpus, w.table, PrepareOptions::from(w.hp), 3).size(), 1u);
}

TEST(Ablation, EightConfigsPerFold) {
    const SmallWorld w = small_world(8);
    const auto splits = make_splits(w.corpus, std::nullopt, w.table, PrepareOptions::from(w.hp), 2);
    const auto rows = run_ablation(splits, w.hp);
    ASSERT_EQ(rows.size(), 16u);
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r.config);
    EXPECT_EQ(names.size(), 8u);
    EXPECT_EQ(with_means(rows).size(), 24u);
    std::ostringstream tsv;
    write_report_tsv(tsv, rows);
    const std::string text = tsv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 17);
}

TEST(Ablation, NoneIgnoresProfiles) {
    Hyperparameters hp;
    hp.hidden = 3;
    hp.embed_dim = 4;
    hp.rank = 2;
    hp.ablation = AblationConfig::none();
    const ModelParams m = test::perturbed_model(hp, 5);
    std::mt19937_64 rng(6);
    const auto q = test::random_sequence(5, 4, 4, rng);
    const auto a = test::random_sequence(6, 5, 4, rng);
    const double s0 = score_pair(m, q, a, CommunityProfiles::zeros(2));
    EXPECT_EQ(score_pair(m, q, a, test::random_profiles(2, rng)), s0);
    ModelParams full = m;
    full.hyper.ablation = AblationConfig::full();
    EXPECT_NE(score_pair(full, q, a, test::random_profiles(2, rng)), s0);
}

TEST(Metrics, LabelsOnlyForCategorical) {
    const std::vector<RankedPool> pools{labelled_pool({0.9, 0.1}, {QualityLabel::Good, QualityLabel::Bad})};
    EXPECT_FALSE(evaluate_pools(pools, VoteMode::Count, 0.0).labels);
    const Metrics m = evaluate_pools(pools, VoteMode::Categorical, 0.5);
    ASSERT_TRUE(m.labels);
    EXPECT_EQ(m.labels->map, 1.0);
    EXPECT_EQ(m.questions, 1u);
    EXPECT_EQ(m.ranked_questions, 0u);
}

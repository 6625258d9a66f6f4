#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support.hpp"

using namespace kaas;

namespace {

// Picks the candidate whose latent topic matches the question's, breaking
// ties (none or several matching) uniformly at random. Returns P@1.
double topic_oracle_p_at_1(const SynthCorpus& s, std::uint64_t seed) {
    const CorpusIndex idx(s.corpus);
    std::mt19937_64 rng(seed);
    std::size_t hits = 0;
    for (std::size_t qi = 0; qi < s.corpus.questions.size(); ++qi) {
        const auto& q = s.corpus.questions[qi];
        const auto& ids = idx.answers_of(qi);
        std::vector<std::size_t> matching;
        for (std::size_t ai : ids)
            if (s.answer_topic.at(s.corpus.answers[ai].id) == s.question_topic.at(q.id)) matching.push_back(ai);
        const auto& pool = matching.empty() ? ids : matching;
        const std::size_t pick = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        double top = -1.0;
        std::size_t best = 0;
        for (std::size_t ai : ids)
            if (s.corpus.answers[ai].vote > top) top = s.corpus.answers[ai].vote, best = ai;
        if (pick == best) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(s.corpus.questions.size());
}

}  // namespace

TEST(Synth, ZeroSignalOracleAtChance) {
    SynthConfig c;
    c.seed = 3;
    c.num_questions = 500;
    c.signal_strength = 0.0;
    const double p = topic_oracle_p_at_1(generate(c), 17);
    const double chance = 1.0 / static_cast<double>(c.candidates_per_question);
    const double sigma = std::sqrt(chance * (1 - chance) / 500.0);
    EXPECT_NEAR(p, chance, 3 * sigma);
}

TEST(Synth, FullSignalOracleIsPerfect) {
    SynthConfig c;
    c.num_questions = 100;
    c.signal_strength = 1.0;
    c.expertise_noise = 0.0;
    c.word_noise = 0.0;
    EXPECT_EQ(topic_oracle_p_at_1(generate(c), 1), 1.0);
}

TEST(Synth, SameSeedByteIdentical) {
    SynthConfig c;
    c.num_questions = 30;
    c.seed = 7;
    test::TempDir a("synth_a"), b("synth_b");
    save_corpus(generate(c).corpus, a.path());
    save_corpus(generate(c).corpus, b.path());
    for (const char* f : {kCorpusFile, kTaxonomyFile, kKnowledgeGraphFile})
        EXPECT_EQ(test::read_file(a.path() / f), test::read_file(b.path() / f)) << f;
    c.seed = 8;
    test::TempDir other("synth_c");
    save_corpus(generate(c).corpus, other.path());
    EXPECT_NE(test::read_file(a.path() / kCorpusFile), test::read_file(other.path() / kCorpusFile));
}

TEST(Synth, ExactlyOneBestWithVoteGap) {
    SynthConfig c;
    c.num_questions = 80;
    const Corpus corpus = generate(c).corpus;
    const CorpusIndex idx(corpus);
    for (std::size_t qi = 0; qi < corpus.questions.size(); ++qi) {
        const auto& ids = idx.answers_of(qi);
        ASSERT_EQ(ids.size(), c.candidates_per_question);
        std::vector<double> v;
        for (std::size_t ai : ids) v.push_back(corpus.answers[ai].vote);
        std::sort(v.begin(), v.end(), std::greater<>());
        EXPECT_GE(v[0] - v[1], 2.0);
    }
}

TEST(Synth, CategoricalStyleOneGood) {
    SynthConfig c;
    c.num_questions = 40;
    c.labels = LabelStyle::Categorical;
    const Corpus corpus = generate(c).corpus;
    EXPECT_EQ(corpus.vote_mode(), VoteMode::Categorical);
    const CorpusIndex idx(corpus);
    for (std::size_t qi = 0; qi < corpus.questions.size(); ++qi) {
        std::size_t good = 0;
        double best_vote = -1, good_vote = -1;
        for (std::size_t ai : idx.answers_of(qi)) {
            const auto& a = corpus.answers[ai];
            best_vote = std::max(best_vote, a.vote);
            if (a.quality_label == QualityLabel::Good) ++good, good_vote = a.vote;
        }
        EXPECT_EQ(good, 1u);
        EXPECT_EQ(good_vote, best_vote);
    }
}

TEST(Synth, TaxonomyHasTwoLevels) {
    const Corpus corpus = generate(SynthConfig{}).corpus;
    const auto& entries = corpus.taxonomy.entries();
    std::set<std::string> raw, higher;
    for (const auto& [r, h] : entries) raw.insert(r), higher.insert(h);
    EXPECT_GT(raw.size(), higher.size());
    for (const auto& r : raw) EXPECT_EQ(higher.count(r), 0u);
}

TEST(Synth, KnowledgeGraphCoversEveryDiseaseTag) {
    const Corpus corpus = generate(SynthConfig{}).corpus;
    ASSERT_TRUE(corpus.knowledge_graph);
    for (const auto& [raw, higher] : corpus.taxonomy.entries()) {
        bool linked = false;
        for (const auto& e : corpus.knowledge_graph->edges) linked |= e.disease_tag == raw && e.weight > 0.0;
        EXPECT_TRUE(linked) << raw;
    }
}

TEST(Synth, BestAnswererExpertiseTracksSignal) {
    // Fraction of best answers written by an expert in the question's topic.
    auto expert_rate = [](double signal) {
        SynthConfig c;
        c.num_questions = 300;
        c.signal_strength = signal;
        const SynthCorpus s = generate(c);
        const CorpusIndex idx(s.corpus);
        std::size_t hits = 0;
        for (std::size_t qi = 0; qi < s.corpus.questions.size(); ++qi) {
            const Answer* best = nullptr;
            for (std::size_t ai : idx.answers_of(qi))
                if (!best || s.corpus.answers[ai].vote > best->vote) best = &s.corpus.answers[ai];
            hits += s.answerer_topic.at(best->answerer_id) == s.question_topic.at(s.corpus.questions[qi].id);
        }
        return static_cast<double>(hits) / 300.0;
    };
    const double low = expert_rate(0.0), mid = expert_rate(0.5), high = expert_rate(1.0);
    EXPECT_LT(low, mid);
    EXPECT_LT(mid, high);
    EXPECT_EQ(high, 1.0);
}

TEST(Synth, InvalidConfig) {
    SynthConfig c;
    c.candidates_per_question = 1;
    EXPECT_THROW(generate(c), ValidationError);
    c = SynthConfig{};
    c.num_questions = 0;
    EXPECT_THROW(generate(c), ValidationError);
    c = SynthConfig{};
    c.signal_strength = 1.5;
    EXPECT_THROW(generate(c), ValidationError);
}

TEST(Synth, SplitSharesCommunity) {
    SynthConfig c;
    c.num_questions = 30;
    const auto [train, test] = split_corpus(generate(c).corpus, 20);
    EXPECT_EQ(train.questions.size(), 20u);
    EXPECT_EQ(test.questions.size(), 10u);
    EXPECT_EQ(train.answerers, test.answerers);
    EXPECT_EQ(test.answers.size(), 10 * c.candidates_per_question);
}

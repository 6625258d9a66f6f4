#pragma once
// Synthetic CQA community with planted ground truth.
//
// Every question has a latent topic. Each candidate answer has its own latent
// topic: the best answer takes the question's topic with probability
// `signal_strength`, distractors avoid it with the same probability, otherwise
// both draw uniformly. Answer words come from the answer's topic vocabulary
// (plus background filler), and the best answer's author is, with probability
// `signal_strength`, someone whose history and followers concentrate on the
// question's topic. At signal 0 all of this is independent of which answer is
// best.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "kaas/corpus.hpp"
#include "kaas/error.hpp"

namespace kaas {

enum class LabelStyle { Votes, Categorical };

struct SynthConfig {
    std::uint64_t seed = 1;
    std::size_t num_questions = 200;
    std::size_t candidates_per_question = 20;
    std::size_t num_answerers = 120;
    std::size_t num_tags = 8;  // higher-level tag groups
    std::size_t raw_tags_per_topic = 2;
    std::size_t vocab_size = 480;  // topic words, split evenly across topics
    std::size_t background_words = 24;
    std::size_t topic_count = 8;
    double signal_strength = 0.9;
    std::size_t min_followers = 3;
    std::size_t max_followers = 10;
    std::size_t min_history = 3;
    std::size_t max_history = 8;
    double expertise_noise = 0.1;  // chance a history/follower tag ignores the home topic
    double word_noise = 0.15;      // chance a content word comes from a random topic
    double background_rate = 0.3;
    std::size_t question_length_min = 8;
    std::size_t question_length_max = 12;
    std::size_t answer_length_min = 15;
    std::size_t answer_length_max = 25;
    std::size_t concepts_per_topic = 3;
    LabelStyle labels = LabelStyle::Votes;

    void validate() const {
        auto fail = [](const std::string& m) { throw ValidationError("synth: " + m); };
        if (num_questions < 1) fail("num_questions must be at least 1");
        if (candidates_per_question < 2) fail("candidates_per_question must be at least 2");
        if (num_answerers < topic_count) fail("need at least one answerer per topic");
        if (topic_count < 2) fail("topic_count must be at least 2");
        if (num_tags < 1 || num_tags > topic_count) fail("num_tags must be in [1, topic_count]");
        if (raw_tags_per_topic < 1) fail("raw_tags_per_topic must be at least 1");
        if (concepts_per_topic < 1) fail("concepts_per_topic must be at least 1");
        if (vocab_size < topic_count * concepts_per_topic)
            fail("vocab_size too small for topic_count");
        if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) fail("signal_strength must be in [0, 1]");
        for (double p : {expertise_noise, word_noise, background_rate})
            if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must be in [0, 1]");
        if (min_followers > max_followers || min_history > max_history) fail("empty count range");
        if (question_length_min < 1 || question_length_min > question_length_max) fail("bad question length");
        if (answer_length_min < 1 || answer_length_min > answer_length_max) fail("bad answer length");
    }
};

// Generated corpus plus the latent assignments it was drawn from.
struct SynthCorpus {
    Corpus corpus;
    std::unordered_map<std::string, std::size_t> question_topic;
    std::unordered_map<std::string, std::size_t> answer_topic;
    std::unordered_map<std::string, std::size_t> answerer_topic;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return std::mt19937_64(splitmix64(splitmix64(seed ^ (stream * 0xD1B54A32D192ED03ULL)) + index));
}

class SynthWorld {
public:
    explicit SynthWorld(const SynthConfig& c) : c_(c) {}

    std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) const {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    }
    bool chance(std::mt19937_64& rng, double p) const { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

    std::size_t other_topic(std::mt19937_64& rng, std::size_t avoid) const {
        std::size_t t = uniform(rng, 0, c_.topic_count - 2);
        return t >= avoid ? t + 1 : t;
    }

    std::size_t words_per_topic() const { return c_.vocab_size / c_.topic_count; }

    std::string topic_word(std::size_t topic, std::size_t i) const {
        return "w" + std::to_string(topic * words_per_topic() + i);
    }

    std::string raw_tag(std::size_t topic, std::size_t r) const {
        return "tag" + std::to_string(topic) + "_" + std::to_string(r);
    }

    std::string group(std::size_t topic) const { return "group" + std::to_string(topic % c_.num_tags); }

    std::string random_raw_tag(std::mt19937_64& rng, std::size_t topic) const {
        return raw_tag(topic, uniform(rng, 0, c_.raw_tags_per_topic - 1));
    }

    std::string text(std::mt19937_64& rng, std::size_t topic, std::size_t len_min, std::size_t len_max) const {
        const std::size_t n = uniform(rng, len_min, len_max);
        std::string out;
        for (std::size_t i = 0; i < n; ++i) {
            std::string w;
            if (c_.background_words > 0 && chance(rng, c_.background_rate)) {
                w = "c" + std::to_string(uniform(rng, 0, c_.background_words - 1));
            } else {
                std::size_t t = chance(rng, c_.word_noise) ? uniform(rng, 0, c_.topic_count - 1) : topic;
                w = topic_word(t, uniform(rng, 0, words_per_topic() - 1));
            }
            if (!out.empty()) out += ' ';
            out += w;
        }
        return out;
    }

    // Topic of a tag drawn for someone whose home topic is `home`.
    std::size_t noisy_topic(std::mt19937_64& rng, std::size_t home) const {
        return chance(rng, c_.expertise_noise) ? uniform(rng, 0, c_.topic_count - 1) : home;
    }

private:
    const SynthConfig& c_;
};

}  // namespace detail

inline SynthCorpus generate(const SynthConfig& config) {
    config.validate();
    const detail::SynthWorld world(config);
    const std::size_t K = config.topic_count;
    SynthCorpus out;
    Corpus& corpus = out.corpus;

    for (std::size_t t = 0; t < K; ++t)
        for (std::size_t r = 0; r < config.raw_tags_per_topic; ++r) corpus.taxonomy.add(world.raw_tag(t, r), world.group(t));

    KnowledgeGraph kg;
    {
        auto rng = detail::substream(config.seed, 1);
        for (std::size_t t = 0; t < K; ++t) {
            std::vector<std::size_t> words(world.words_per_topic());
            for (std::size_t i = 0; i < words.size(); ++i) words[i] = i;
            std::shuffle(words.begin(), words.end(), rng);
            for (std::size_t c = 0; c < config.concepts_per_topic; ++c)
                for (std::size_t r = 0; r < config.raw_tags_per_topic; ++r) {
                    const double w = 0.5 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
                    kg.add_edge(world.topic_word(t, words[c]), world.raw_tag(t, r), std::round(w * 1000) / 1000);
                }
        }
    }
    corpus.knowledge_graph = std::move(kg);

    // Answerers: home topic, history of previous answers, followers.
    std::vector<std::vector<std::size_t>> experts(K);
    {
        auto rng = detail::substream(config.seed, 2);
        for (std::size_t u = 0; u < config.num_answerers; ++u) {
            const std::size_t home = u < K ? u : world.uniform(rng, 0, K - 1);
            experts[home].push_back(u);
            AnswererRecord r;
            r.id = "u" + std::to_string(u);
            out.answerer_topic[r.id] = home;
            const std::size_t history = world.uniform(rng, config.min_history, config.max_history);
            for (std::size_t h = 0; h < history; ++h) {
                const std::size_t t = world.noisy_topic(rng, home);
                Answer a;
                a.id = r.id + "_h" + std::to_string(h);
                a.answerer_id = r.id;
                a.tags = {world.random_raw_tag(rng, t)};
                const std::size_t base = t == home ? 4 : 0;
                a.vote = static_cast<double>(base + world.uniform(rng, 0, 4));
                if (config.labels == LabelStyle::Categorical)
                    a.quality_label = t == home ? QualityLabel::Good
                                                : (world.chance(rng, 0.5) ? QualityLabel::PotentiallyUseful
                                                                          : QualityLabel::Bad);
                r.previous_answers.push_back(std::move(a));
            }
            const std::size_t followers = world.uniform(rng, config.min_followers, config.max_followers);
            for (std::size_t f = 0; f < followers; ++f) {
                FollowerProfile p;
                p.follower_id = "f" + std::to_string(u) + "_" + std::to_string(f);
                const std::size_t ntags = world.uniform(rng, 1, 3);
                for (std::size_t i = 0; i < ntags; ++i) {
                    std::string tag = world.random_raw_tag(rng, world.noisy_topic(rng, home));
                    if (std::find(p.tags.begin(), p.tags.end(), tag) == p.tags.end()) p.tags.push_back(tag);
                }
                r.followers.push_back(std::move(p));
            }
            corpus.answerers.push_back(std::move(r));
        }
    }

    const double s = config.signal_strength;
    const std::size_t P = config.candidates_per_question;
    for (std::size_t qi = 0; qi < config.num_questions; ++qi) {
        auto rng = detail::substream(config.seed, 3, qi);
        const std::size_t tq = world.uniform(rng, 0, K - 1);
        Question q;
        q.id = "q" + std::to_string(qi);
        q.text = world.text(rng, tq, config.question_length_min, config.question_length_max);
        q.tags = {world.random_raw_tag(rng, tq)};
        out.question_topic[q.id] = tq;

        const std::size_t best_slot = world.uniform(rng, 0, P - 1);
        std::vector<double> votes(P, 0.0);
        for (std::size_t j = 0; j < P; ++j) votes[j] = static_cast<double>(world.uniform(rng, 0, 5));
        double top = 0.0;
        for (std::size_t j = 0; j < P; ++j)
            if (j != best_slot) top = std::max(top, votes[j]);
        votes[best_slot] = top + 2.0 + static_cast<double>(world.uniform(rng, 0, 3));

        for (std::size_t j = 0; j < P; ++j) {
            const bool best = j == best_slot;
            std::size_t topic;
            if (best) topic = world.chance(rng, s) ? tq : world.uniform(rng, 0, K - 1);
            else topic = world.chance(rng, s) ? world.other_topic(rng, tq) : world.uniform(rng, 0, K - 1);

            std::size_t author;
            if (best && world.chance(rng, s)) {
                const auto& pool = experts[tq];
                author = pool[world.uniform(rng, 0, pool.size() - 1)];
            } else {
                author = world.uniform(rng, 0, config.num_answerers - 1);
            }

            Answer a;
            a.id = q.id + "_a" + std::to_string(j);
            a.question_id = q.id;
            a.answerer_id = "u" + std::to_string(author);
            a.text = world.text(rng, topic, config.answer_length_min, config.answer_length_max);
            a.tags = {world.random_raw_tag(rng, topic)};
            a.vote = votes[j];
            if (config.labels == LabelStyle::Categorical)
                a.quality_label = best ? QualityLabel::Good
                                       : (world.chance(rng, 0.5) ? QualityLabel::PotentiallyUseful : QualityLabel::Bad);
            out.answer_topic[a.id] = topic;
            corpus.answers.push_back(std::move(a));
        }
        corpus.questions.push_back(std::move(q));
    }
    return out;
}

// The first `train_questions` questions and the rest, sharing answerers,
// taxonomy and knowledge graph.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t train_questions) {
    if (train_questions > corpus.questions.size()) throw ValidationError("split_corpus: not enough questions");
    std::vector<std::string> head, tail;
    for (std::size_t i = 0; i < corpus.questions.size(); ++i)
        (i < train_questions ? head : tail).push_back(corpus.questions[i].id);
    return {select_questions(corpus, head), select_questions(corpus, tail)};
}

}  // namespace kaas

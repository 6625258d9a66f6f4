#pragma once
// Model-ready view of a corpus: embedded question/answer text, normalized
// candidate pools and per-candidate community profiles.

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kaas/community.hpp"
#include "kaas/corpus.hpp"
#include "kaas/embedding.hpp"
#include "kaas/metrics.hpp"
#include "kaas/model.hpp"

namespace kaas {

struct PreparedAnswer {
    PoolCandidate truth;
    EmbeddedSequence text;
    CommunityProfiles profiles;
};

struct PreparedQuestion {
    std::string id;
    EmbeddedSequence text;
    std::vector<PreparedAnswer> candidates;

    std::optional<std::size_t> best() const {
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (candidates[i].truth.best) return i;
        return std::nullopt;
    }
};

struct Dataset {
    std::vector<PreparedQuestion> questions;
    VoteMode mode = VoteMode::Count;
    std::size_t rank = 0;
};

struct PrepareOptions {
    std::size_t max_question = 40;
    std::size_t max_answer = 80;
    std::size_t rank = 8;  // clamped to the tag count
    std::size_t pool = 20;
    std::uint64_t seed = 1;

    static PrepareOptions from(const Hyperparameters& hp) {
        return {hp.max_question, hp.max_answer, hp.rank, hp.pool, hp.seed};
    }
};

// Rank actually used for profiles: min(requested, T).
inline std::size_t effective_rank(std::size_t requested, const TagTaxonomy& taxonomy) {
    return std::max<std::size_t>(1, std::min(requested, taxonomy.size()));
}

namespace detail {
// Empty texts become a single UNK token so every pair stays scoreable.
inline EmbeddedSequence embed_text(const std::string& text, const EmbeddingTable& table, std::size_t max_len) {
    TokenSequence tokens = tokenize(text);
    if (tokens.empty()) tokens.push_back(table.vocab.token(Vocabulary::kUnk));
    return embed(tokens, table, max_len);
}
}  // namespace detail

inline Dataset prepare_dataset(const Corpus& corpus, const EmbeddingTable& table, const PrepareOptions& opt) {
    const CorpusIndex index(corpus);
    const std::size_t k = effective_rank(opt.rank, corpus.taxonomy);
    const VoteMode mode = corpus.vote_mode();
    Dataset ds;
    ds.mode = mode;
    ds.rank = k;

    const std::size_t T = corpus.taxonomy.size();
    std::unordered_map<std::string, SharedFactorization> factors;
    auto factors_for = [&](const AnswererRecord& r) -> const SharedFactorization& {
        auto it = factors.find(r.id);
        if (it != factors.end()) return it->second;
        ExpertiseMatrix h = build_expertise(r, corpus.taxonomy, mode);
        AuthorityMatrix s = build_authority(r, corpus.taxonomy);
        return factors.emplace(r.id, factor_shared_basis(h, s, KgMatrix{Matrix(0, T)}, k)).first->second;
    };

    std::unordered_map<std::string, std::size_t> answer_pos;
    for (std::size_t i = 0; i < corpus.answers.size(); ++i) answer_pos.emplace(corpus.answers[i].id, i);

    auto profiles_for = [&](const Answer& a) {
        const AnswererRecord& r = index.answerer(a.answerer_id);
        const SharedFactorization& f = factors_for(r);
        CommunityProfiles p{detail::mean_rows(f.expertise, k), detail::mean_rows(f.authority, k),
                            Vector(k, 0.0), AblationConfig::full()};
        if (corpus.knowledge_graph && f.basis.cols() > 0) {
            KgMatrix kg = build_kg_matrix(a.text, *corpus.knowledge_graph, corpus.taxonomy);
            if (kg.values.rows() > 0)
                p.knowledge_graph = detail::mean_rows(project_onto_basis(kg.values, f.basis), k);
        }
        return p;
    };

    for (std::size_t qi = 0; qi < corpus.questions.size(); ++qi) {
        const Question& q = corpus.questions[qi];
        std::vector<const Answer*> answers;
        for (std::size_t ai : index.answers_of(qi)) answers.push_back(&corpus.answers[ai]);
        if (answers.empty()) continue;
        RankedPool pool = normalize_pool(q, answers, corpus.answers, mode, opt.pool, opt.seed);
        PreparedQuestion pq{q.id, detail::embed_text(q.text, table, opt.max_question), {}};
        for (auto& cand : pool.candidates) {
            const Answer& a = corpus.answers[answer_pos.at(cand.answer_id)];
            pq.candidates.push_back({cand, detail::embed_text(a.text, table, opt.max_answer), profiles_for(a)});
        }
        ds.questions.push_back(std::move(pq));
    }
    return ds;
}

// Candidate pools of `question` scored by the model.
inline RankedPool score_question(const ModelParams& m, const PreparedQuestion& question) {
    RankedPool pool{question.id, {}};
    const EncodedSequence q = encode(m, question.text);
    for (const auto& c : question.candidates) {
        PoolCandidate pc = c.truth;
        pc.score = score_encoded(m, q, encode(m, c.text), c.profiles);
        pool.candidates.push_back(std::move(pc));
    }
    return pool;
}

inline std::vector<RankedPool> score_dataset(const ModelParams& m, const Dataset& ds) {
    std::vector<RankedPool> pools;
    pools.reserve(ds.questions.size());
    for (const auto& q : ds.questions) pools.push_back(score_question(m, q));
    return pools;
}

}  // namespace kaas

#pragma once
// Candidate pools and ranking metrics: pool normalization to a fixed size,
// P@K, MAP / Accuracy / F1 for Good-vs-rest labels, and k-fold splitting.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kaas/corpus.hpp"
#include "kaas/error.hpp"

namespace kaas {

struct PoolCandidate {
    std::string answer_id;
    double score = 0.0;
    double measure = 0.0;  // ground-truth vote measure; 0 for fillers
    std::optional<QualityLabel> label;
    bool best = false;
    bool filler = false;  // borrowed from another question

    bool relevant() const noexcept { return label == QualityLabel::Good; }
};

struct RankedPool {
    std::string question_id;
    std::vector<PoolCandidate> candidates;

    // Candidate indices by descending score; equal scores keep candidate order.
    std::vector<std::size_t> ranking() const {
        std::vector<std::size_t> order(candidates.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return candidates[a].score > candidates[b].score;
        });
        return order;
    }

    std::optional<std::size_t> best_index() const {
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (candidates[i].best) return i;
        return std::nullopt;
    }
};

inline std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Exactly `pool_size` candidates: the top answers by ground-truth measure when
// there are too many, otherwise all of them plus seeded fillers drawn from
// other questions' answers. The unique top-measure genuine answer is marked
// best; a tie at the top leaves the pool without a designated best.
inline RankedPool normalize_pool(const Question& question, const std::vector<const Answer*>& answers,
                                 const std::vector<Answer>& answer_pool, VoteMode mode,
                                 std::size_t pool_size, std::uint64_t seed) {
    if (answers.empty())
        throw ValidationError("normalize_pool: question '" + question.id + "' has no answers");
    if (pool_size < 1) throw ValidationError("normalize_pool: pool size must be positive");

    std::vector<const Answer*> ranked = answers;
    std::stable_sort(ranked.begin(), ranked.end(), [mode](const Answer* a, const Answer* b) {
        return vote_measure(*a, mode) > vote_measure(*b, mode);
    });
    if (ranked.size() > pool_size) ranked.resize(pool_size);

    RankedPool pool{question.id, {}};
    for (const Answer* a : ranked)
        pool.candidates.push_back({a->id, 0.0, vote_measure(*a, mode), a->quality_label, false, false});
    const double top = pool.candidates.front().measure;
    const bool unique_top = pool.candidates.size() == 1 || pool.candidates[1].measure < top;
    if (unique_top) pool.candidates.front().best = true;

    if (pool.candidates.size() < pool_size) {
        std::vector<const Answer*> others;
        for (const auto& a : answer_pool)
            if (a.question_id != question.id) others.push_back(&a);
        const std::size_t need = pool_size - pool.candidates.size();
        if (others.size() < need)
            throw ValidationError("normalize_pool: not enough answers from other questions to fill '" +
                                  question.id + "'");
        std::mt19937_64 rng(seed ^ stable_hash(question.id));
        // Partial Fisher-Yates.
        for (std::size_t i = 0; i < need; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, others.size() - 1);
            std::swap(others[i], others[pick(rng)]);
            std::optional<QualityLabel> label;
            if (mode == VoteMode::Categorical) label = QualityLabel::Bad;
            pool.candidates.push_back({others[i]->id, 0.0, 0.0, label, false, true});
        }
    }
    return pool;
}

// Fraction of pools (with a designated best) whose best is ranked in the top k.
inline double precision_at_k(const std::vector<RankedPool>& pools, std::size_t k) {
    std::size_t counted = 0;
    std::size_t hits = 0;
    for (const auto& p : pools) {
        auto best = p.best_index();
        if (!best) continue;
        ++counted;
        auto order = p.ranking();
        auto it = std::find(order.begin(), order.end(), *best);
        if (static_cast<std::size_t>(it - order.begin()) < k) ++hits;
    }
    return counted == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(counted);
}

// Average precision with Good-labelled candidates relevant; nullopt if none are.
inline std::optional<double> average_precision(const RankedPool& pool) {
    auto order = pool.ranking();
    std::size_t relevant = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (!pool.candidates[order[r]].relevant()) continue;
        ++relevant;
        sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
    }
    if (relevant == 0) return std::nullopt;
    return sum / static_cast<double>(relevant);
}

struct ClassificationCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    double accuracy() const {
        const std::size_t n = tp + fp + tn + fn;
        return n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
    }
    // F1 of the Good class; 0 when there are neither positives nor predictions.
    double f1() const {
        const std::size_t d = 2 * tp + fp + fn;
        return d == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(d);
    }
};

// A candidate is predicted Good iff its score exceeds `threshold`.
inline ClassificationCounts classify(const std::vector<RankedPool>& pools, double threshold) {
    ClassificationCounts c;
    for (const auto& p : pools)
        for (const auto& cand : p.candidates) {
            const bool pred = cand.score > threshold;
            const bool truth = cand.relevant();
            if (pred && truth) ++c.tp;
            else if (pred) ++c.fp;
            else if (truth) ++c.fn;
            else ++c.tn;
        }
    return c;
}

// Threshold maximizing F1 on `pools`: midpoints between consecutive distinct
// scores, plus one below the minimum. Ties on F1 keep the lowest threshold.
inline double fit_threshold(const std::vector<RankedPool>& pools) {
    std::vector<double> scores;
    for (const auto& p : pools)
        for (const auto& c : p.candidates) scores.push_back(c.score);
    if (scores.empty()) return 0.0;
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> candidates{scores.front() - 1.0};
    for (std::size_t i = 0; i + 1 < scores.size(); ++i) candidates.push_back(0.5 * (scores[i] + scores[i + 1]));
    double best_t = candidates.front();
    double best_f1 = -1.0;
    for (double t : candidates) {
        const double f1 = classify(pools, t).f1();
        if (f1 > best_f1) {
            best_f1 = f1;
            best_t = t;
        }
    }
    return best_t;
}

struct LabelMetrics {
    double map = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    std::size_t map_questions = 0;
    std::size_t map_excluded = 0;  // pools without any Good candidate
};

inline LabelMetrics map_accuracy_f1(const std::vector<RankedPool>& pools, double threshold) {
    LabelMetrics m;
    double sum = 0.0;
    for (const auto& p : pools) {
        for (const auto& c : p.candidates)
            if (!c.label) throw ValidationError("map_accuracy_f1: candidate '" + c.answer_id + "' has no label");
        if (auto ap = average_precision(p)) {
            sum += *ap;
            ++m.map_questions;
        } else {
            ++m.map_excluded;
        }
    }
    m.map = m.map_questions == 0 ? 0.0 : sum / static_cast<double>(m.map_questions);
    const auto counts = classify(pools, threshold);
    m.accuracy = counts.accuracy();
    m.f1 = counts.f1();
    return m;
}

// Fold index per item: a seeded shuffle dealt round-robin, so fold sizes
// differ by at most one.
inline std::vector<std::size_t> kfold_split(std::size_t count, std::size_t folds, std::uint64_t seed) {
    if (folds < 1) throw ValidationError("kfold_split: need at least one fold");
    if (count < folds)
        throw ValidationError("kfold_split: " + std::to_string(count) + " questions cannot fill " +
                              std::to_string(folds) + " folds");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold(count);
    for (std::size_t r = 0; r < count; ++r) fold[order[r]] = r % folds;
    return fold;
}

inline std::vector<std::vector<std::string>> kfold_split(const std::vector<std::string>& question_ids,
                                                         std::size_t folds, std::uint64_t seed) {
    auto assign = kfold_split(question_ids.size(), folds, seed);
    std::vector<std::vector<std::string>> out(folds);
    for (std::size_t i = 0; i < question_ids.size(); ++i) out[assign[i]].push_back(question_ids[i]);
    return out;
}

}  // namespace kaas

#pragma once
// Train/evaluate protocols: single holdout or k-fold splits, the ablation
// lattice and the hidden-size sweep, with TSV and JSONL reporting.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kaas/corpus.hpp"
#include "kaas/dataset.hpp"
#include "kaas/embedding.hpp"
#include "kaas/metrics.hpp"
#include "kaas/training.hpp"

namespace kaas {

struct Metrics {
    double p_at_1 = 0.0;
    double p_at_2 = 0.0;
    std::size_t questions = 0;
    std::size_t ranked_questions = 0;  // pools with a designated best
    std::optional<LabelMetrics> labels;  // categorical corpora only
};

inline Metrics evaluate_pools(const std::vector<RankedPool>& pools, VoteMode mode, double threshold) {
    Metrics m;
    m.questions = pools.size();
    for (const auto& p : pools)
        if (p.best_index()) ++m.ranked_questions;
    m.p_at_1 = precision_at_k(pools, 1);
    m.p_at_2 = precision_at_k(pools, 2);
    if (mode == VoteMode::Categorical) m.labels = map_accuracy_f1(pools, threshold);
    return m;
}

inline Metrics evaluate(const ModelParams& model, const Dataset& ds) {
    return evaluate_pools(score_dataset(model, ds), ds.mode, model.score_threshold);
}

struct Split {
    std::string name;  // "holdout" or "fold<i>"
    Dataset train;
    Dataset test;
};

// One holdout split when a test corpus is given, otherwise `folds` splits of
// `corpus` by question.
inline std::vector<Split> make_splits(const Corpus& corpus, const std::optional<Corpus>& test_corpus,
                                      const EmbeddingTable& table, const PrepareOptions& opt, std::size_t folds) {
    std::vector<Split> out;
    if (test_corpus) {
        out.push_back({"holdout", prepare_dataset(corpus, table, opt), prepare_dataset(*test_corpus, table, opt)});
        return out;
    }
    std::vector<std::string> ids;
    for (const auto& q : corpus.questions) ids.push_back(q.id);
    const auto parts = kfold_split(ids, folds, opt.seed);
    for (std::size_t f = 0; f < parts.size(); ++f) {
        std::vector<std::string> train_ids;
        for (std::size_t g = 0; g < parts.size(); ++g)
            if (g != f) train_ids.insert(train_ids.end(), parts[g].begin(), parts[g].end());
        out.push_back({"fold" + std::to_string(f), prepare_dataset(select_questions(corpus, train_ids), table, opt),
                       prepare_dataset(select_questions(corpus, parts[f]), table, opt)});
    }
    return out;
}

struct FitResult {
    TrainResult training;
    Metrics train_metrics;
    Metrics test_metrics;
};

// Trains on split.train, fits the Good-vs-rest threshold on the training
// pools, then evaluates on split.test.
inline FitResult fit_and_evaluate(const Split& split, Hyperparameters hp, const EpochCallback& on_epoch = {}) {
    hp.rank = split.train.rank;
    FitResult r{train(split.train, hp, on_epoch), {}, {}};
    const auto train_pools = score_dataset(r.training.params, split.train);
    if (split.train.mode == VoteMode::Categorical) r.training.params.score_threshold = fit_threshold(train_pools);
    r.train_metrics = evaluate_pools(train_pools, split.train.mode, r.training.params.score_threshold);
    r.test_metrics = evaluate(r.training.params, split.test);
    return r;
}

struct ResultRow {
    std::string config;
    std::string fold;
    std::uint64_t seed = 0;
    std::size_t hidden = 0;
    Metrics metrics;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::size_t epochs = 0;
};

inline ResultRow make_row(std::string config, const Split& split, const Hyperparameters& hp, const FitResult& fit) {
    const auto& losses = fit.training.epoch_losses;
    return {std::move(config), split.name, hp.seed, hp.hidden, fit.test_metrics,
            losses.empty() ? 0.0 : losses.front(), losses.empty() ? 0.0 : losses.back(), fit.training.epochs_run};
}

using RowCallback = std::function<void(const ResultRow&)>;

// One model per ablation setting, all from the same seed and initialization.
inline std::vector<ResultRow> run_ablation(const std::vector<Split>& splits, const Hyperparameters& base,
                                           const RowCallback& on_row = {}) {
    std::vector<ResultRow> rows;
    for (const auto& cfg : AblationConfig::lattice()) {
        Hyperparameters hp = base;
        hp.ablation = cfg;
        for (const auto& s : splits) {
            rows.push_back(make_row(cfg.name(), s, hp, fit_and_evaluate(s, hp)));
            if (on_row) on_row(rows.back());
        }
    }
    return rows;
}

inline const std::vector<std::size_t>& default_hidden_sizes() {
    static const std::vector<std::size_t> sizes{32, 64, 128, 256, 512};
    return sizes;
}

inline std::vector<ResultRow> run_hidden_sweep(const std::vector<Split>& splits, const Hyperparameters& base,
                                               const std::vector<std::size_t>& sizes,
                                               const RowCallback& on_row = {}) {
    std::vector<ResultRow> rows;
    for (std::size_t h : sizes) {
        Hyperparameters hp = base;
        hp.hidden = h;
        for (const auto& s : splits) {
            rows.push_back(make_row("hidden=" + std::to_string(h), s, hp, fit_and_evaluate(s, hp)));
            if (on_row) on_row(rows.back());
        }
    }
    return rows;
}

// Per-config means over folds, appended with fold "mean" when a config has
// more than one fold.
inline std::vector<ResultRow> with_means(const std::vector<ResultRow>& rows) {
    std::vector<ResultRow> out = rows;
    std::vector<std::string> order;
    for (const auto& r : rows)
        if (std::find(order.begin(), order.end(), r.config) == order.end()) order.push_back(r.config);
    for (const auto& name : order) {
        std::vector<const ResultRow*> group;
        for (const auto& r : rows)
            if (r.config == name) group.push_back(&r);
        if (group.size() < 2) continue;
        ResultRow m = *group.front();
        m.fold = "mean";
        const double n = static_cast<double>(group.size());
        m.metrics = Metrics{};
        m.initial_loss = m.final_loss = 0.0;
        m.epochs = 0;
        bool labels = group.front()->metrics.labels.has_value();
        LabelMetrics lm;
        for (const auto* r : group) {
            m.metrics.p_at_1 += r->metrics.p_at_1 / n;
            m.metrics.p_at_2 += r->metrics.p_at_2 / n;
            m.metrics.questions += r->metrics.questions;
            m.metrics.ranked_questions += r->metrics.ranked_questions;
            m.initial_loss += r->initial_loss / n;
            m.final_loss += r->final_loss / n;
            m.epochs += r->epochs;
            if (labels && r->metrics.labels) {
                lm.map += r->metrics.labels->map / n;
                lm.accuracy += r->metrics.labels->accuracy / n;
                lm.f1 += r->metrics.labels->f1 / n;
                lm.map_questions += r->metrics.labels->map_questions;
                lm.map_excluded += r->metrics.labels->map_excluded;
            }
        }
        if (labels) m.metrics.labels = lm;
        out.push_back(std::move(m));
    }
    return out;
}

inline void write_report_tsv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << "config\tfold\tseed\thidden\tquestions\tp@1\tp@2\tmap\taccuracy\tf1\tinitial_loss\tfinal_loss\tepochs\n";
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        os << r.config << '\t' << r.fold << '\t' << r.seed << '\t' << r.hidden << '\t' << m.questions << '\t'
           << num(m.p_at_1) << '\t' << num(m.p_at_2) << '\t' << (m.labels ? num(m.labels->map) : "-") << '\t'
           << (m.labels ? num(m.labels->accuracy) : "-") << '\t' << (m.labels ? num(m.labels->f1) : "-") << '\t'
           << num(r.initial_loss) << '\t' << num(r.final_loss) << '\t' << r.epochs << '\n';
    }
}

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
    nlohmann::ordered_json o;
    o["questions"] = m.questions;
    o["ranked_questions"] = m.ranked_questions;
    o["p@1"] = m.p_at_1;
    o["p@2"] = m.p_at_2;
    if (m.labels) {
        o["map"] = m.labels->map;
        o["accuracy"] = m.labels->accuracy;
        o["f1"] = m.labels->f1;
        o["map_questions"] = m.labels->map_questions;
        o["map_excluded"] = m.labels->map_excluded;
    }
    return o;
}

// One JSON object per row; `run_config` is embedded in each for auditing.
inline void write_results_jsonl(std::ostream& os, const std::vector<ResultRow>& rows,
                                const nlohmann::ordered_json& run_config) {
    for (const auto& r : rows) {
        nlohmann::ordered_json o;
        o["config"] = r.config;
        o["fold"] = r.fold;
        o["seed"] = r.seed;
        o["hidden"] = r.hidden;
        o["metrics"] = metrics_json(r.metrics);
        o["initial_loss"] = r.initial_loss;
        o["final_loss"] = r.final_loss;
        o["epochs"] = r.epochs;
        o["run_config"] = run_config;
        os << o.dump() << '\n';
    }
}

}  // namespace kaas

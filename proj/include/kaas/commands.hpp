#pragma once
// Subcommands behind the `kaas` binary. Each takes a fully resolved RunConfig,
// writes its artifacts under `out` together with config.json, and prints a
// short summary.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "kaas/corpus.hpp"
#include "kaas/dataset.hpp"
#include "kaas/embedding.hpp"
#include "kaas/experiment.hpp"
#include "kaas/synth.hpp"
#include "kaas/training.hpp"

namespace kaas {

struct RunConfig {
    std::string command;
    std::filesystem::path corpus;
    std::filesystem::path test_corpus;  // optional holdout; k-fold otherwise
    std::filesystem::path embeddings;
    std::filesystem::path checkpoint;
    std::filesystem::path out = "out";
    Hyperparameters hyper;
    std::size_t folds = 5;
    std::vector<std::size_t> sizes = default_hidden_sizes();

    SynthConfig synth;
    std::size_t test_questions = 0;

    SkipGramOptions skipgram;
};

inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kEmbeddingFile = "embeddings.txt";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kLossFile = "loss.tsv";
inline constexpr const char* kEpochLossFile = "epoch_loss.tsv";
inline constexpr const char* kProfilesFile = "profiles.txt";

inline nlohmann::ordered_json to_json(const Hyperparameters& h) {
    nlohmann::ordered_json o;
    o["hidden"] = h.hidden;
    o["embed_dim"] = h.embed_dim;
    o["rank"] = h.rank;
    o["max_question"] = h.max_question;
    o["max_answer"] = h.max_answer;
    o["batch"] = h.batch;
    o["margin"] = h.margin;
    o["learning_rate"] = h.learning_rate;
    o["clip_norm"] = h.clip_norm;
    o["epochs"] = h.epochs;
    o["patience"] = h.patience;
    o["min_improvement"] = h.min_improvement;
    o["negatives_per_question"] = h.negatives_per_question;
    o["pool"] = h.pool;
    o["seed"] = h.seed;
    o["workers"] = h.workers;
    o["ablation"] = h.ablation.name();
    return o;
}

inline nlohmann::ordered_json to_json(const SynthConfig& s) {
    nlohmann::ordered_json o;
    o["seed"] = s.seed;
    o["num_questions"] = s.num_questions;
    o["candidates_per_question"] = s.candidates_per_question;
    o["num_answerers"] = s.num_answerers;
    o["num_tags"] = s.num_tags;
    o["raw_tags_per_topic"] = s.raw_tags_per_topic;
    o["vocab_size"] = s.vocab_size;
    o["background_words"] = s.background_words;
    o["topic_count"] = s.topic_count;
    o["signal_strength"] = s.signal_strength;
    o["follower_count_range"] = {s.min_followers, s.max_followers};
    o["history_count_range"] = {s.min_history, s.max_history};
    o["expertise_noise"] = s.expertise_noise;
    o["word_noise"] = s.word_noise;
    o["background_rate"] = s.background_rate;
    o["question_length_range"] = {s.question_length_min, s.question_length_max};
    o["answer_length_range"] = {s.answer_length_min, s.answer_length_max};
    o["concepts_per_topic"] = s.concepts_per_topic;
    o["labels"] = s.labels == LabelStyle::Votes ? "votes" : "categorical";
    return o;
}

inline nlohmann::ordered_json to_json(const SkipGramOptions& s) {
    nlohmann::ordered_json o;
    o["dim"] = s.dim;
    o["window"] = s.window;
    o["negatives"] = s.negatives;
    o["epochs"] = s.epochs;
    o["learning_rate"] = s.learning_rate;
    o["seed"] = s.seed;
    o["min_count"] = s.min_count;
    o["center"] = s.center;
    return o;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json o;
    o["command"] = c.command;
    o["corpus"] = c.corpus.string();
    o["test_corpus"] = c.test_corpus.string();
    o["embeddings"] = c.embeddings.string();
    o["checkpoint"] = c.checkpoint.string();
    o["out"] = c.out.string();
    o["hyperparameters"] = to_json(c.hyper);
    o["folds"] = c.folds;
    o["sizes"] = c.sizes;
    o["synth"] = to_json(c.synth);
    o["test_questions"] = c.test_questions;
    o["skipgram"] = to_json(c.skipgram);
    return o;
}

namespace detail {

inline void write_config(const RunConfig& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto out = open_output(dir / kConfigFile);
    out << to_json(c).dump(2) << '\n';
}

inline std::string exact(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void require_path(const std::filesystem::path& p, const char* flag) {
    if (p.empty()) throw ValidationError(std::string("missing required option ") + flag);
}

inline EmbeddingTable load_table(const RunConfig& c) {
    require_path(c.embeddings, "--embeddings");
    EmbeddingTable t = load_embeddings(c.embeddings);
    if (t.vectors.cols() != c.hyper.embed_dim)
        throw ValidationError("embedding file has dimension " + std::to_string(t.vectors.cols()) +
                              " but --embed-dim is " + std::to_string(c.hyper.embed_dim));
    return t;
}

inline std::vector<std::string> corpus_texts(const Corpus& corpus) {
    std::vector<std::string> texts;
    for (const auto& q : corpus.questions) texts.push_back(q.text);
    for (const auto& a : corpus.answers) texts.push_back(a.text);
    return texts;
}

inline std::vector<std::pair<std::string, CommunityProfiles>> dataset_profiles(const Dataset& ds) {
    std::vector<std::pair<std::string, CommunityProfiles>> rows;
    std::unordered_set<std::string> seen;
    for (const auto& q : ds.questions)
        for (const auto& c : q.candidates)
            if (seen.insert(c.truth.answer_id).second) rows.emplace_back(c.truth.answer_id, c.profiles);
    return rows;
}

inline void print_metrics(std::ostream& os, const Metrics& m) {
    os << "questions " << m.questions << " (ranked " << m.ranked_questions << ")\n";
    os << "P@1 " << m.p_at_1 << "\nP@2 " << m.p_at_2 << '\n';
    if (m.labels)
        os << "MAP " << m.labels->map << " (" << m.labels->map_excluded << " excluded)\nAccuracy "
           << m.labels->accuracy << "\nF1 " << m.labels->f1 << '\n';
}

inline std::vector<Split> splits_for(const RunConfig& c, const EmbeddingTable& table) {
    require_path(c.corpus, "--corpus");
    Corpus corpus = load_corpus(c.corpus);
    std::optional<Corpus> test;
    if (!c.test_corpus.empty()) test = load_corpus(c.test_corpus);
    return make_splits(corpus, test, table, PrepareOptions::from(c.hyper), c.folds);
}

inline void write_rows(const RunConfig& c, const std::string& stem, const std::vector<ResultRow>& rows,
                       std::ostream& log) {
    const auto all = with_means(rows);
    {
        auto out = open_output(c.out / (stem + ".tsv"));
        write_report_tsv(out, all);
    }
    {
        auto out = open_output(c.out / (stem + ".jsonl"));
        write_results_jsonl(out, all, to_json(c));
    }
    write_report_tsv(log, all);
}

}  // namespace detail

inline void cmd_generate(const RunConfig& c, std::ostream& log) {
    if (c.synth.num_questions < 1) throw ValidationError("--questions must be at least 1");
    SynthConfig sc = c.synth;
    sc.num_questions = c.synth.num_questions + c.test_questions;
    SynthCorpus s = generate(sc);
    auto [train_part, test_part] = split_corpus(s.corpus, c.synth.num_questions);
    save_corpus(train_part, c.out);
    detail::write_config(c, c.out);
    log << "questions " << train_part.questions.size() << "\nanswers " << train_part.answers.size()
        << "\nanswerers " << train_part.answerers.size() << "\ntag groups " << train_part.taxonomy.size()
        << "\nkg edges " << train_part.knowledge_graph->edges.size() << '\n';
    if (c.test_questions > 0) {
        save_corpus(test_part, c.out / "test");
        detail::write_config(c, c.out / "test");
        log << "test questions " << test_part.questions.size() << '\n';
    }
}

inline void cmd_embed(const RunConfig& c, std::ostream& log) {
    detail::require_path(c.corpus, "--corpus");
    const Corpus corpus = load_corpus(c.corpus);
    SkipGramOptions opt = c.skipgram;
    opt.dim = c.hyper.embed_dim;
    const EmbeddingTable table = train_skipgram(detail::corpus_texts(corpus), opt);
    std::filesystem::create_directories(c.out);
    save_embeddings(table, c.out / kEmbeddingFile);
    detail::write_config(c, c.out);
    log << "vocabulary " << table.vocab.size() << "\ndimension " << table.vectors.cols() << '\n';
}

inline TrainResult cmd_train(const RunConfig& c, std::ostream& log) {
    detail::require_path(c.corpus, "--corpus");
    const EmbeddingTable table = detail::load_table(c);
    const Corpus corpus = load_corpus(c.corpus);
    const Dataset ds = prepare_dataset(corpus, table, PrepareOptions::from(c.hyper));
    Hyperparameters hp = c.hyper;
    hp.rank = ds.rank;
    TrainResult r = train(ds, hp, [&](std::size_t epoch, double loss, const ModelParams&) {
        log << "epoch " << epoch + 1 << " loss " << loss << '\n';
    });
    const auto pools = score_dataset(r.params, ds);
    if (ds.mode == VoteMode::Categorical) r.params.score_threshold = fit_threshold(pools);

    std::filesystem::create_directories(c.out);
    save_checkpoint(r.params, c.out / kCheckpointFile);
    {
        auto out = detail::open_output(c.out / kLossFile);
        out << "batch\tloss\n";
        for (std::size_t i = 0; i < r.batch_losses.size(); ++i) out << i << '\t' << detail::exact(r.batch_losses[i]) << '\n';
    }
    {
        auto out = detail::open_output(c.out / kEpochLossFile);
        out << "epoch\tloss\n";
        for (std::size_t i = 0; i < r.epoch_losses.size(); ++i) out << i << '\t' << detail::exact(r.epoch_losses[i]) << '\n';
    }
    {
        auto out = detail::open_output(c.out / kProfilesFile);
        write_profiles(out, detail::dataset_profiles(ds));
    }
    detail::write_config(c, c.out);
    log << "trained " << r.epochs_run << " epochs, " << r.batch_losses.size() << " batches, skipped "
        << r.skipped_questions << " questions\n";
    return r;
}

inline Metrics cmd_eval(const RunConfig& c, std::ostream& log) {
    detail::require_path(c.checkpoint, "--checkpoint");
    detail::require_path(c.corpus, "--corpus");
    const ModelParams model = load_checkpoint(c.checkpoint);
    RunConfig resolved = c;
    resolved.hyper.embed_dim = model.hyper.embed_dim;
    const EmbeddingTable table = detail::load_table(resolved);
    const Corpus corpus = load_corpus(c.corpus);
    PrepareOptions opt = PrepareOptions::from(model.hyper);
    const Dataset ds = prepare_dataset(corpus, table, opt);
    if (ds.rank != model.hyper.rank)
        throw CheckpointError("checkpoint profile rank " + std::to_string(model.hyper.rank) +
                              " does not match corpus rank " + std::to_string(ds.rank));
    const Metrics m = evaluate(model, ds);
    std::filesystem::create_directories(c.out);
    {
        auto out = detail::open_output(c.out / "metrics.json");
        nlohmann::ordered_json o = metrics_json(m);
        o["run_config"] = to_json(c);
        o["model"] = to_json(model.hyper);
        out << o.dump(2) << '\n';
    }
    {
        ResultRow row{"eval", "all", model.hyper.seed, model.hyper.hidden, m, 0.0, 0.0, 0};
        auto out = detail::open_output(c.out / "metrics.tsv");
        write_report_tsv(out, {row});
    }
    detail::write_config(c, c.out);
    detail::print_metrics(log, m);
    return m;
}

inline std::vector<ResultRow> cmd_sweep(const RunConfig& c, std::ostream& log) {
    if (c.sizes.empty()) throw ValidationError("--sizes must list at least one hidden size");
    const EmbeddingTable table = detail::load_table(c);
    const auto splits = detail::splits_for(c, table);
    std::filesystem::create_directories(c.out);
    detail::write_config(c, c.out);
    auto rows = run_hidden_sweep(splits, c.hyper, c.sizes, [&](const ResultRow& r) {
        log << r.config << ' ' << r.fold << " P@1 " << r.metrics.p_at_1 << '\n';
    });
    detail::write_rows(c, "sweep", rows, log);
    return rows;
}

inline std::vector<ResultRow> cmd_ablate(const RunConfig& c, std::ostream& log) {
    const EmbeddingTable table = detail::load_table(c);
    const auto splits = detail::splits_for(c, table);
    std::filesystem::create_directories(c.out);
    detail::write_config(c, c.out);
    auto rows = run_ablation(splits, c.hyper, [&](const ResultRow& r) {
        log << r.config << ' ' << r.fold << " P@1 " << r.metrics.p_at_1 << '\n';
    });
    detail::write_rows(c, "ablation", rows, log);
    return rows;
}

}  // namespace kaas

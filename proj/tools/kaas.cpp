// kaas: generate | embed | train | eval | sweep | ablate

#include <algorithm>
#include <cctype>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kaas/kaas.hpp"

namespace {

std::string env_name(const std::string& flag) {
    std::string s = "KAAS_";
    for (char c : flag) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

template <class T>
CLI::Option* opt(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
    return app->add_option("--" + flag, value, help)->envname(env_name(flag))->capture_default_str();
}

kaas::AblationConfig parse_ablation(const std::string& s) {
    for (const auto& cfg : kaas::AblationConfig::lattice())
        if (cfg.name() == s) return cfg;
    throw kaas::ValidationError("unknown --ablation '" + s +
                                "' (expected none, full or a '+'-joined subset of expertise, authority, "
                                "knowledge_graph in lattice order)");
}

void add_paths(CLI::App* app, kaas::RunConfig& c) {
    opt(app, "corpus", c.corpus, "corpus directory");
    opt(app, "test-corpus", c.test_corpus, "held-out corpus directory (k-fold when absent)");
    opt(app, "embeddings", c.embeddings, "embedding file");
    opt(app, "checkpoint", c.checkpoint, "model checkpoint");
    opt(app, "out", c.out, "output directory");
}

void add_model(CLI::App* app, kaas::RunConfig& c, std::string& ablation) {
    auto& h = c.hyper;
    opt(app, "seed", h.seed, "random seed");
    opt(app, "hidden", h.hidden, "biLSTM hidden size per direction");
    opt(app, "embed-dim", h.embed_dim, "word vector dimension");
    opt(app, "rank", h.rank, "community profile rank k");
    opt(app, "max-question", h.max_question, "question length cap");
    opt(app, "max-answer", h.max_answer, "answer length cap");
    opt(app, "batch", h.batch, "triplets per SGD batch");
    opt(app, "margin", h.margin, "hinge margin");
    opt(app, "lr", h.learning_rate, "SGD learning rate");
    opt(app, "clip-norm", h.clip_norm, "global gradient norm cap (0 disables)");
    opt(app, "epochs", h.epochs, "maximum epochs");
    opt(app, "patience", h.patience, "early-stop patience in epochs (0 disables)");
    opt(app, "min-improvement", h.min_improvement, "early-stop loss improvement threshold");
    opt(app, "negatives", h.negatives_per_question, "triplets sampled per question per epoch");
    opt(app, "pool", h.pool, "candidates per question after normalization");
    opt(app, "workers", h.workers, "gradient workers per batch");
    opt(app, "folds", c.folds, "cross-validation folds when no test corpus is given");
    opt(app, "ablation", ablation, "active community profiles");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-aware answer selection: data, embeddings, training and evaluation"};
    app.require_subcommand(1);
    kaas::RunConfig c;
    std::string ablation = "full";
    std::string labels = "votes";

    auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
    auto& s = c.synth;
    opt(gen, "out", c.out, "output directory");
    opt(gen, "seed", s.seed, "random seed");
    opt(gen, "questions", s.num_questions, "training questions");
    opt(gen, "test-questions", c.test_questions, "extra questions written to <out>/test");
    opt(gen, "candidates", s.candidates_per_question, "answers per question");
    opt(gen, "answerers", s.num_answerers, "answerers");
    opt(gen, "tags", s.num_tags, "higher-level tag groups");
    opt(gen, "raw-tags-per-topic", s.raw_tags_per_topic, "raw tags under each topic");
    opt(gen, "topics", s.topic_count, "latent topics");
    opt(gen, "vocab", s.vocab_size, "topic vocabulary size");
    opt(gen, "signal", s.signal_strength, "signal strength in [0, 1]");
    opt(gen, "min-followers", s.min_followers, "fewest followers per answerer");
    opt(gen, "max-followers", s.max_followers, "most followers per answerer");
    opt(gen, "expertise-noise", s.expertise_noise, "off-topic rate of history and follower tags");
    opt(gen, "word-noise", s.word_noise, "off-topic word rate");
    opt(gen, "labels", labels, "votes or categorical")->check(CLI::IsMember({"votes", "categorical"}));

    auto* emb = app.add_subcommand("embed", "train skip-gram word vectors on a corpus");
    auto& g = c.skipgram;
    opt(emb, "corpus", c.corpus, "corpus directory");
    opt(emb, "out", c.out, "output directory");
    opt(emb, "embed-dim", c.hyper.embed_dim, "word vector dimension");
    opt(emb, "window", g.window, "context window");
    opt(emb, "sg-negatives", g.negatives, "negative samples per context");
    opt(emb, "sg-epochs", g.epochs, "passes over the corpus");
    opt(emb, "sg-lr", g.learning_rate, "initial learning rate");
    opt(emb, "seed", g.seed, "random seed");
    opt(emb, "min-count", g.min_count, "minimum token count");
    opt(emb, "sg-center", g.center, "subtract the mean vector after training");

    auto* trn = app.add_subcommand("train", "train a model");
    add_paths(trn, c);
    add_model(trn, c, ablation);

    auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    add_paths(evl, c);

    auto* swp = app.add_subcommand("sweep", "hidden-size sweep");
    add_paths(swp, c);
    add_model(swp, c, ablation);
    opt(swp, "sizes", c.sizes, "hidden sizes")->delimiter(',');

    auto* abl = app.add_subcommand("ablate", "train every community-profile ablation");
    add_paths(abl, c);
    add_model(abl, c, ablation);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        c.command = app.get_subcommands().front()->get_name();
        c.hyper.ablation = parse_ablation(ablation);
        c.synth.labels = labels == "categorical" ? kaas::LabelStyle::Categorical : kaas::LabelStyle::Votes;
        if (c.command == "generate") kaas::cmd_generate(c, std::cout);
        else if (c.command == "embed") kaas::cmd_embed(c, std::cout);
        else if (c.command == "train") kaas::cmd_train(c, std::cout);
        else if (c.command == "eval") kaas::cmd_eval(c, std::cout);
        else if (c.command == "sweep") kaas::cmd_sweep(c, std::cout);
        else if (c.command == "ablate") kaas::cmd_ablate(c, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "kaas " << c.command << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#pragma once
// Tokenization, vocabulary, skip-gram word vectors with negative sampling, and
// the text embedding file format ("V d" header, then "token f1 ... fd").

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kaas/error.hpp"
#include "kaas/linalg.hpp"

namespace kaas {

using TokenSequence = std::vector<std::string>;

// Lowercases ASCII and splits on anything that is not alphanumeric. Bytes of
// multi-byte UTF-8 sequences are kept inside tokens.
inline TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

class Vocabulary {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;

    Vocabulary() : tokens_{"<pad>", "<unk>"} {}

    // Tokens ordered by descending frequency, ties lexicographic.
    static Vocabulary build(const std::vector<TokenSequence>& sentences, std::size_t min_count = 1) {
        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& s : sentences)
            for (const auto& t : s) ++counts[t];
        std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        Vocabulary v;
        for (const auto& [tok, n] : items)
            if (n >= min_count) v.add(tok);
        return v;
    }

    std::size_t add(std::string_view token) {
        auto [it, inserted] = index_.try_emplace(std::string(token), tokens_.size());
        if (inserted) tokens_.emplace_back(token);
        return it->second;
    }

    std::size_t index(std::string_view token) const {
        auto it = index_.find(std::string(token));
        return it == index_.end() ? kUnk : it->second;
    }

    bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    std::size_t size() const noexcept { return tokens_.size(); }

    bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingTable {
    Vocabulary vocab;
    Matrix vectors;  // vocab.size() × dim; row kPad is zero

    std::size_t dim() const noexcept { return vectors.cols(); }
    bool operator==(const EmbeddingTable&) const = default;
};

struct EmbeddedSequence {
    Matrix values;           // max_len × d
    std::size_t length = 0;  // number of true (unpadded) rows

    std::size_t max_len() const noexcept { return values.rows(); }
    std::vector<std::uint8_t> mask() const {
        std::vector<std::uint8_t> m(values.rows(), 0);
        std::fill(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(length), 1);
        return m;
    }
};

inline EmbeddedSequence embed(const TokenSequence& tokens, const EmbeddingTable& table,
                              std::size_t max_len) {
    if (max_len < 1) throw ValidationError("embed: max_len must be at least 1");
    EmbeddedSequence seq{Matrix(max_len, table.dim()), std::min(tokens.size(), max_len)};
    for (std::size_t t = 0; t < seq.length; ++t) {
        auto src = table.vectors.row(table.vocab.index(tokens[t]));
        std::copy(src.begin(), src.end(), seq.values.row(t).begin());
    }
    return seq;
}

struct SkipGramOptions {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
    std::size_t min_count = 1;
    // Subtract the mean word vector afterwards. Skip-gram vectors share a large
    // common direction that otherwise dominates every encoded state.
    bool center = true;
};

namespace detail {
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace detail

// Skip-gram with negative sampling over the whitespace/punctuation tokens of
// `texts`. The learning rate decays linearly to 1e-4 of its initial value.
inline EmbeddingTable train_skipgram(const std::vector<std::string>& texts,
                                     const SkipGramOptions& opt = {}) {
    std::vector<TokenSequence> sentences;
    sentences.reserve(texts.size());
    for (const auto& t : texts) sentences.push_back(tokenize(t));

    EmbeddingTable table{Vocabulary::build(sentences, opt.min_count), {}};
    const std::size_t V = table.vocab.size();
    const std::size_t d = opt.dim;
    if (V <= 2) throw ValidationError("train_skipgram: corpus has no tokens");
    if (d == 0) throw ValidationError("train_skipgram: dimension must be positive");

    std::vector<std::vector<std::size_t>> ids;
    std::vector<double> counts(V, 0.0);
    std::size_t total = 0;
    for (const auto& s : sentences) {
        std::vector<std::size_t> row;
        for (const auto& t : s) {
            std::size_t i = table.vocab.index(t);
            if (i == Vocabulary::kUnk) continue;
            row.push_back(i);
            counts[i] += 1.0;
        }
        total += row.size();
        ids.push_back(std::move(row));
    }

    // Cumulative unigram^0.75 distribution for negatives.
    std::vector<double> cdf(V, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < V; ++i) {
        acc += std::pow(counts[i], 0.75);
        cdf[i] = acc;
    }
    auto draw_negative = [&](std::mt19937_64& rng) {
        const double u = detail::uniform01(rng) * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), V - 1);
    };

    std::mt19937_64 rng(opt.seed);
    Matrix in(V, d);
    Matrix out(V, d);
    for (std::size_t i = 2; i < V; ++i)
        for (double& x : in.row(i)) x = (detail::uniform01(rng) - 0.5) / static_cast<double>(d);
    for (double& x : in.row(Vocabulary::kUnk)) x = (detail::uniform01(rng) - 0.5) / static_cast<double>(d);

    const double planned = static_cast<double>(std::max<std::size_t>(1, opt.epochs * total));
    double processed = 0.0;
    Vector grad(d);
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        for (const auto& s : ids) {
            for (std::size_t pos = 0; pos < s.size(); ++pos, processed += 1.0) {
                const double lr = opt.learning_rate * std::max(1e-4, 1.0 - processed / planned);
                const std::size_t shrink = opt.window > 0 ? rng() % opt.window : 0;
                const std::size_t span = opt.window - shrink;
                const std::size_t lo = pos >= span ? pos - span : 0;
                const std::size_t hi = std::min(s.size(), pos + span + 1);
                for (std::size_t c = lo; c < hi; ++c) {
                    if (c == pos) continue;
                    auto center = in.row(s[c]);
                    std::fill(grad.begin(), grad.end(), 0.0);
                    for (std::size_t n = 0; n <= opt.negatives; ++n) {
                        std::size_t target = s[pos];
                        double label = 1.0;
                        if (n > 0) {
                            target = draw_negative(rng);
                            if (target == s[pos]) continue;
                            label = 0.0;
                        }
                        auto ctx = out.row(target);
                        const double g = (label - detail::sigmoid(dot(center, ctx))) * lr;
                        axpy(g, ctx, grad);
                        axpy(g, center, ctx);
                    }
                    axpy(1.0, grad, center);
                }
            }
        }
    }
    if (opt.center) {
        Vector mean(d, 0.0);
        for (std::size_t i = 2; i < V; ++i) axpy(1.0 / static_cast<double>(V - 2), in.row(i), mean);
        for (std::size_t i = 2; i < V; ++i) axpy(-1.0, mean, in.row(i));
    }
    table.vectors = std::move(in);
    return table;
}

inline void write_embeddings(std::ostream& os, const EmbeddingTable& table) {
    os << table.vectors.rows() << ' ' << table.vectors.cols() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < table.vectors.rows(); ++i) {
        os << table.vocab.token(i);
        for (double x : table.vectors.row(i)) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
            os << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        os << '\n';
    }
}

// The first two rows must be the PAD and UNK tokens; the PAD row is forced to zero.
inline EmbeddingTable read_embeddings(std::istream& is, const std::string& source = "embeddings") {
    std::string line;
    std::size_t n = 1;
    if (!std::getline(is, line)) throw ParseError(source, n, "missing header");
    std::istringstream header(line);
    std::size_t V = 0;
    std::size_t d = 0;
    if (!(header >> V >> d) || V < 2 || d == 0) throw ParseError(source, n, "bad header, expected 'V d'");
    EmbeddingTable table{Vocabulary(), Matrix(V, d)};
    for (std::size_t i = 0; i < V; ++i) {
        ++n;
        if (!std::getline(is, line)) throw ParseError(source, n, "unexpected end of file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0) throw ParseError(source, n, "missing token");
        const std::string token = line.substr(0, sp);
        if (i < 2) {
            if (token != table.vocab.token(i)) throw ParseError(source, n, "expected special token " + table.vocab.token(i));
        } else if (table.vocab.contains(token) || table.vocab.add(token) != i) {
            throw ParseError(source, n, "duplicate token '" + token + "'");
        }
        const char* p = line.data() + sp;
        const char* end = line.data() + line.size();
        for (std::size_t j = 0; j < d; ++j) {
            while (p < end && *p == ' ') ++p;
            double x = 0.0;
            auto [ptr, ec] = std::from_chars(p, end, x);
            if (ec != std::errc() || !std::isfinite(x)) throw ParseError(source, n, "bad value");
            table.vectors(i, j) = x;
            p = ptr;
        }
        while (p < end && *p == ' ') ++p;
        if (p != end) throw ParseError(source, n, "too many values");
    }
    for (double& x : table.vectors.row(Vocabulary::kPad)) x = 0.0;
    return table;
}

inline void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + path.string());
    write_embeddings(os, table);
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    return read_embeddings(is, path.string());
}

}  // namespace kaas

#pragma once
// Community knowledge: expertise (answer × tag, vote weighted), authority
// (follower × tag) and knowledge-graph (symptom concept × tag) matrices,
// factorized under one shared tag basis and reduced to fixed-length profiles.

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kaas/corpus.hpp"
#include "kaas/embedding.hpp"
#include "kaas/linalg.hpp"

namespace kaas {

struct ExpertiseMatrix {
    Matrix values;  // A × T
};
struct AuthorityMatrix {
    Matrix values;  // F × T
};
struct KgMatrix {
    Matrix values;  // SC × T
};

// Which community components feed the attention. All eight combinations are
// the ablation lattice.
struct AblationConfig {
    bool expertise = true;
    bool authority = true;
    bool knowledge_graph = true;

    static AblationConfig full() { return {true, true, true}; }
    static AblationConfig none() { return {false, false, false}; }

    std::string name() const {
        if (!expertise && !authority && !knowledge_graph) return "none";
        if (expertise && authority && knowledge_graph) return "full";
        std::string s;
        auto add = [&](bool on, const char* n) {
            if (!on) return;
            if (!s.empty()) s += '+';
            s += n;
        };
        add(expertise, "expertise");
        add(authority, "authority");
        add(knowledge_graph, "knowledge_graph");
        return s;
    }

    // Lattice order: none, E, A, KG, E+A, A+KG, KG+E, full.
    static std::vector<AblationConfig> lattice() {
        return {{false, false, false}, {true, false, false}, {false, true, false},
                {false, false, true},  {true, true, false},  {false, true, true},
                {true, false, true},   {true, true, true}};
    }

    bool operator==(const AblationConfig&) const = default;
};

struct CommunityProfiles {
    Vector expertise;
    Vector authority;
    Vector knowledge_graph;
    AblationConfig active;

    static CommunityProfiles zeros(std::size_t k, AblationConfig active = AblationConfig::full()) {
        return {Vector(k, 0.0), Vector(k, 0.0), Vector(k, 0.0), active};
    }

    std::size_t rank() const noexcept { return expertise.size(); }

    // Zeroes the components switched off in `cfg`.
    CommunityProfiles masked(AblationConfig cfg) const {
        CommunityProfiles p = *this;
        p.active = {active.expertise && cfg.expertise, active.authority && cfg.authority,
                    active.knowledge_graph && cfg.knowledge_graph};
        if (!p.active.expertise) std::fill(p.expertise.begin(), p.expertise.end(), 0.0);
        if (!p.active.authority) std::fill(p.authority.begin(), p.authority.end(), 0.0);
        if (!p.active.knowledge_graph) std::fill(p.knowledge_graph.begin(), p.knowledge_graph.end(), 0.0);
        return p;
    }

    bool operator==(const CommunityProfiles&) const = default;
};

// H[i][j] = grouped frequency of tag j in previous answer i × vote measure of i.
inline ExpertiseMatrix build_expertise(const AnswererRecord& answerer, const TagTaxonomy& taxonomy,
                                       VoteMode mode) {
    const std::size_t T = taxonomy.size();
    ExpertiseMatrix h{Matrix(answerer.previous_answers.size(), T)};
    for (std::size_t i = 0; i < answerer.previous_answers.size(); ++i) {
        const Answer& a = answerer.previous_answers[i];
        const double v = vote_measure(a, mode);
        Vector f = group_tags(a.tags, taxonomy);
        for (std::size_t j = 0; j < T; ++j) h.values(i, j) = f[j] * v;
    }
    return h;
}

// S[i][j] = number of follower i's (deduplicated) raw tags grouped under j.
inline AuthorityMatrix build_authority(const AnswererRecord& answerer, const TagTaxonomy& taxonomy) {
    const std::size_t T = taxonomy.size();
    AuthorityMatrix s{Matrix(answerer.followers.size(), T)};
    for (std::size_t i = 0; i < answerer.followers.size(); ++i) {
        std::vector<std::string> unique;
        for (const auto& t : answerer.followers[i].tags) {
            std::string n = normalize_tag(t);
            if (std::find(unique.begin(), unique.end(), n) == unique.end()) unique.push_back(std::move(n));
        }
        Vector f = group_tags(unique, taxonomy);
        std::copy(f.begin(), f.end(), s.values.row(i).begin());
    }
    return s;
}

// Lexicon concepts mentioned in `text`, in first-mention order. Matching is
// longest-first over the token stream, so "blurred vision" beats "vision".
inline std::vector<std::string> find_concept_mentions(std::string_view text, const KnowledgeGraph& kg) {
    std::vector<TokenSequence> lexicon;
    lexicon.reserve(kg.concepts.size());
    for (const auto& c : kg.concepts) lexicon.push_back(tokenize(c));
    const TokenSequence tokens = tokenize(text);
    std::vector<std::string> found;
    std::size_t pos = 0;
    while (pos < tokens.size()) {
        std::size_t best = kg.concepts.size();
        std::size_t best_len = 0;
        for (std::size_t c = 0; c < lexicon.size(); ++c) {
            const auto& lt = lexicon[c];
            if (lt.empty() || lt.size() <= best_len || pos + lt.size() > tokens.size()) continue;
            if (std::equal(lt.begin(), lt.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) {
                best = c;
                best_len = lt.size();
            }
        }
        if (best_len == 0) {
            ++pos;
            continue;
        }
        if (std::find(found.begin(), found.end(), kg.concepts[best]) == found.end())
            found.push_back(kg.concepts[best]);
        pos += best_len;
    }
    return found;
}

// KG[i][j] = summed weights of edges from mentioned concept i to diseases grouped under j.
inline KgMatrix build_kg_matrix(std::string_view answer_text, const KnowledgeGraph& kg,
                                const TagTaxonomy& taxonomy) {
    const auto mentions = find_concept_mentions(answer_text, kg);
    KgMatrix m{Matrix(mentions.size(), taxonomy.size())};
    for (std::size_t i = 0; i < mentions.size(); ++i)
        for (const auto& e : kg.edges)
            if (e.concept_name == mentions[i]) m.values(i, taxonomy.group_of(e.disease_tag)) += e.weight;
    return m;
}

// The expertise matrix's tag factor V_a and all three matrices projected onto it.
struct SharedFactorization {
    Matrix basis;  // T × k', k' = min(k, rank(H)); empty when H has rank 0
    Matrix expertise;
    Matrix authority;
    Matrix knowledge_graph;
};

inline SharedFactorization factor_shared_basis(const ExpertiseMatrix& h, const AuthorityMatrix& s,
                                               const KgMatrix& kg, std::size_t k) {
    const std::size_t T = h.values.cols();
    if (s.values.cols() != T || kg.values.cols() != T)
        throw DimensionError("factorize_shared: matrices disagree on tag count");
    if (k < 1) throw ValidationError("factorize_shared: rank must be at least 1");
    SharedFactorization f;
    if (h.values.rows() == 0 || T == 0) return f;
    SvdResult full = svd(h.values, std::min(h.values.rows(), T));
    const std::size_t kk = std::min(k, numerical_rank(full.sigma));
    if (kk == 0) return f;
    f.basis = Matrix(T, kk);
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = 0; j < kk; ++j) f.basis(i, j) = full.v(i, j);
    f.expertise = project_onto_basis(h.values, f.basis);
    if (s.values.rows() > 0) f.authority = project_onto_basis(s.values, f.basis);
    if (kg.values.rows() > 0) f.knowledge_graph = project_onto_basis(kg.values, f.basis);
    return f;
}

namespace detail {
// Column-wise mean over rows, zero-padded to length k.
inline Vector mean_rows(const Matrix& m, std::size_t k) {
    Vector out(k, 0.0);
    if (m.rows() == 0) return out;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols() && j < k; ++j) out[j] += m(i, j);
    for (double& x : out) x /= static_cast<double>(m.rows());
    return out;
}
}  // namespace detail

inline CommunityProfiles factorize_shared(const ExpertiseMatrix& h, const AuthorityMatrix& s,
                                          const KgMatrix& kg, std::size_t k,
                                          AblationConfig active = AblationConfig::full()) {
    SharedFactorization f = factor_shared_basis(h, s, kg, k);
    CommunityProfiles p{detail::mean_rows(f.expertise, k), detail::mean_rows(f.authority, k),
                        detail::mean_rows(f.knowledge_graph, k), AblationConfig::full()};
    return p.masked(active);
}

// Profile of one candidate answer: expertise and authority of its answerer,
// knowledge-graph mentions of its text.
inline CommunityProfiles answer_profiles(const Answer& answer, const AnswererRecord& answerer,
                                         const Corpus& corpus, std::size_t k,
                                         AblationConfig active = AblationConfig::full()) {
    const auto& tax = corpus.taxonomy;
    ExpertiseMatrix h = build_expertise(answerer, tax, corpus.vote_mode());
    AuthorityMatrix s = build_authority(answerer, tax);
    KgMatrix kg = corpus.knowledge_graph ? build_kg_matrix(answer.text, *corpus.knowledge_graph, tax)
                                         : KgMatrix{Matrix(0, tax.size())};
    return factorize_shared(h, s, kg, k, active);
}

// Sidecar cache: one line per id, "id" then the 3k profile values.
inline void write_profiles(std::ostream& os,
                           const std::vector<std::pair<std::string, CommunityProfiles>>& rows) {
    char buf[64];
    for (const auto& [id, p] : rows) {
        os << id;
        for (const Vector* v : {&p.expertise, &p.authority, &p.knowledge_graph})
            for (double x : *v) {
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
                os << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
            }
        os << '\n';
    }
}

inline std::vector<std::pair<std::string, CommunityProfiles>> read_profiles(std::istream& is, std::size_t k,
                                                                            const std::string& source = "profiles") {
    std::vector<std::pair<std::string, CommunityProfiles>> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string id;
        ls >> id;
        CommunityProfiles p = CommunityProfiles::zeros(k);
        for (Vector* v : {&p.expertise, &p.authority, &p.knowledge_graph})
            for (double& x : *v) {
                std::string tok;
                if (!(ls >> tok)) throw ParseError(source, n, "expected " + std::to_string(3 * k) + " values");
                auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
                if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ParseError(source, n, "bad value");
            }
        std::string extra;
        if (ls >> extra) throw ParseError(source, n, "too many values");
        rows.emplace_back(std::move(id), std::move(p));
    }
    return rows;
}

}  // namespace kaas

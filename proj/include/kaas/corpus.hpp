#pragma once
// Community QA data model: questions, candidate answers, answerers with their
// answer history and followers, the tag taxonomy and an optional
// symptom/disease knowledge graph. File formats:
//
//   corpus.jsonl   one JSON object per line with "kind" in
//                  {question, answer, answerer, follower}
//   taxonomy.tsv   raw_tag <TAB> higher_level_tag
//   kg.tsv         symptom_concept <TAB> raw_disease_tag <TAB> weight

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "kaas/error.hpp"
#include "kaas/linalg.hpp"

namespace kaas {

enum class QualityLabel { Bad, PotentiallyUseful, Good };
enum class VoteMode { Count, Categorical };

inline std::string_view to_string(QualityLabel label) {
    switch (label) {
        case QualityLabel::Good: return "Good";
        case QualityLabel::PotentiallyUseful: return "PotentiallyUseful";
        case QualityLabel::Bad: return "Bad";
    }
    return "Bad";
}

inline std::optional<QualityLabel> parse_quality_label(std::string_view s) {
    if (s == "Good") return QualityLabel::Good;
    if (s == "PotentiallyUseful") return QualityLabel::PotentiallyUseful;
    if (s == "Bad") return QualityLabel::Bad;
    return std::nullopt;
}

// Trimmed, ASCII-lowercased form used for every tag and concept comparison.
inline std::string normalize_tag(std::string_view raw) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && is_space(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string out(raw.substr(b, e - b));
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

struct Question {
    std::string id;
    std::string text;
    std::vector<std::string> tags;

    bool operator==(const Question&) const = default;
};

struct Answer {
    std::string id;
    std::string question_id;
    std::string answerer_id;
    std::string text;
    std::vector<std::string> tags;
    double vote = 0.0;
    std::optional<QualityLabel> quality_label;

    bool operator==(const Answer&) const = default;
};

struct FollowerProfile {
    std::string follower_id;
    std::vector<std::string> tags;

    bool operator==(const FollowerProfile&) const = default;
};

struct AnswererRecord {
    std::string id;
    std::vector<Answer> previous_answers;  // may be empty (cold start)
    std::vector<FollowerProfile> followers;

    bool operator==(const AnswererRecord&) const = default;
};

// Raw tag -> higher-level tag. Column order of every tag matrix is the first
// occurrence order of higher-level tags, followed by the reserved "other"
// group unless the mapping already names it.
class TagTaxonomy {
public:
    static constexpr std::string_view kOther = "other";

    // Returns false if `raw` was already mapped to a different group.
    bool add(std::string_view raw, std::string_view higher) {
        std::string r = normalize_tag(raw);
        std::string h = normalize_tag(higher);
        auto [gi, inserted_group] = group_index_.try_emplace(h, groups_.size());
        if (inserted_group) groups_.push_back(h);
        auto [it, inserted] = raw_to_group_.try_emplace(r, gi->second);
        if (inserted) {
            entries_.emplace_back(r, h);
            return true;
        }
        return it->second == gi->second;
    }

    std::size_t size() const noexcept { return groups_.size() + (defines_other() ? 0 : 1); }

    std::size_t other_index() const {
        auto it = group_index_.find(std::string(kOther));
        return it == group_index_.end() ? groups_.size() : it->second;
    }

    std::size_t group_of(std::string_view raw) const {
        auto it = raw_to_group_.find(normalize_tag(raw));
        return it == raw_to_group_.end() ? other_index() : it->second;
    }

    std::vector<std::string> group_names() const {
        std::vector<std::string> names = groups_;
        if (!defines_other()) names.emplace_back(kOther);
        return names;
    }

    std::size_t group_index(std::string_view higher) const {
        auto it = group_index_.find(normalize_tag(higher));
        return it == group_index_.end() ? other_index() : it->second;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
        return entries_;
    }

    bool operator==(const TagTaxonomy& o) const { return entries_ == o.entries_; }

private:
    bool defines_other() const { return group_index_.count(std::string(kOther)) != 0; }

    std::vector<std::string> groups_;
    std::unordered_map<std::string, std::size_t> group_index_;
    std::unordered_map<std::string, std::size_t> raw_to_group_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct KgEdge {
    std::string concept_name;  // lowercase symptom concept
    std::string disease_tag;   // raw (lower-level) tag
    double weight = 0.0;

    bool operator==(const KgEdge&) const = default;
};

struct KnowledgeGraph {
    std::vector<KgEdge> edges;
    std::vector<std::string> concepts;  // lexicon, first-occurrence order

    void add_edge(std::string_view concept_name, std::string_view disease, double weight) {
        if (!(weight >= 0.0) || !std::isfinite(weight))
            throw ValidationError("knowledge graph weight must be finite and non-negative");
        std::string c = normalize_tag(concept_name);
        if (std::find(concepts.begin(), concepts.end(), c) == concepts.end()) concepts.push_back(c);
        edges.push_back({std::move(c), normalize_tag(disease), weight});
    }

    bool operator==(const KnowledgeGraph&) const = default;
};

// Numeric answer quality: the raw vote count, or Good=2 / PotentiallyUseful=1 / Bad=0.
inline double vote_measure(const Answer& answer, VoteMode mode) {
    if (mode == VoteMode::Count) {
        if (!(answer.vote >= 0.0)) throw ValidationError("answer '" + answer.id + "' has no valid vote");
        return answer.vote;
    }
    if (!answer.quality_label)
        throw ValidationError("answer '" + answer.id + "' has no quality label");
    switch (*answer.quality_label) {
        case QualityLabel::Good: return 2.0;
        case QualityLabel::PotentiallyUseful: return 1.0;
        case QualityLabel::Bad: return 0.0;
    }
    return 0.0;
}

// Entry j counts the raw tags that map to higher-level tag j.
inline Vector group_tags(const std::vector<std::string>& raw_tags, const TagTaxonomy& taxonomy) {
    Vector freq(taxonomy.size(), 0.0);
    for (const auto& t : raw_tags) freq[taxonomy.group_of(t)] += 1.0;
    return freq;
}

struct Corpus {
    std::vector<Question> questions;
    std::vector<Answer> answers;
    std::vector<AnswererRecord> answerers;
    TagTaxonomy taxonomy;
    std::optional<KnowledgeGraph> knowledge_graph;

    VoteMode vote_mode() const {
        return !answers.empty() && answers.front().quality_label ? VoteMode::Categorical
                                                              : VoteMode::Count;
    }

    bool operator==(const Corpus&) const = default;
};

// Id lookups over a corpus. Construction verifies that every answer resolves
// its question and answerer.
class CorpusIndex {
public:
    explicit CorpusIndex(const Corpus& corpus) : corpus_(&corpus) {
        for (std::size_t i = 0; i < corpus.questions.size(); ++i)
            question_.emplace(corpus.questions[i].id, i);
        for (std::size_t i = 0; i < corpus.answerers.size(); ++i)
            answerer_.emplace(corpus.answerers[i].id, i);
        answers_of_.resize(corpus.questions.size());
        for (std::size_t i = 0; i < corpus.answers.size(); ++i) {
            const Answer& a = corpus.answers[i];
            auto q = question_.find(a.question_id);
            if (q == question_.end())
                throw ReferenceError("answer '" + a.id + "' references unknown question", a.question_id);
            if (!answerer_.count(a.answerer_id))
                throw ReferenceError("answer '" + a.id + "' references unknown answerer", a.answerer_id);
            answers_of_[q->second].push_back(i);
        }
    }

    const Corpus& corpus() const noexcept { return *corpus_; }

    std::size_t question_index(const std::string& id) const {
        auto it = question_.find(id);
        if (it == question_.end()) throw ReferenceError("unknown question", id);
        return it->second;
    }

    const AnswererRecord& answerer(const std::string& id) const {
        auto it = answerer_.find(id);
        if (it == answerer_.end()) throw ReferenceError("unknown answerer", id);
        return corpus_->answerers[it->second];
    }

    // Indices into corpus().answers, in file order.
    const std::vector<std::size_t>& answers_of(std::size_t question_index) const {
        return answers_of_.at(question_index);
    }

private:
    const Corpus* corpus_;
    std::unordered_map<std::string, std::size_t> question_;
    std::unordered_map<std::string, std::size_t> answerer_;
    std::vector<std::vector<std::size_t>> answers_of_;
};

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

using json = nlohmann::ordered_json;

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::string require_string(const json& obj, const char* key, const std::string& src,
                                  std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw ParseError(src, line, std::string("missing string field '") + key + "'");
    return it->get<std::string>();
}

inline std::vector<std::string> read_tags(const json& obj, const std::string& src, std::size_t line) {
    std::vector<std::string> tags;
    auto it = obj.find("tags");
    if (it == obj.end()) return tags;
    if (!it->is_array()) throw ParseError(src, line, "'tags' must be an array");
    for (const auto& t : *it) {
        if (!t.is_string()) throw ParseError(src, line, "tags must be strings");
        tags.push_back(t.get<std::string>());
    }
    return tags;
}

inline Answer read_answer(const json& obj, const std::string& src, std::size_t line,
                          bool embedded) {
    Answer a;
    a.id = require_string(obj, "id", src, line);
    if (embedded) {
        if (auto it = obj.find("question_id"); it != obj.end() && it->is_string())
            a.question_id = it->get<std::string>();
        if (auto it = obj.find("text"); it != obj.end() && it->is_string()) a.text = it->get<std::string>();
    } else {
        a.question_id = require_string(obj, "question_id", src, line);
        a.answerer_id = require_string(obj, "answerer_id", src, line);
        a.text = require_string(obj, "text", src, line);
    }
    a.tags = read_tags(obj, src, line);
    if (auto it = obj.find("vote"); it != obj.end()) {
        if (!it->is_number()) throw ParseError(src, line, "'vote' must be a number");
        a.vote = it->get<double>();
        if (!(a.vote >= 0.0) || !std::isfinite(a.vote))
            throw ParseError(src, line, "'vote' must be finite and non-negative");
    }
    if (auto it = obj.find("quality_label"); it != obj.end() && !it->is_null()) {
        auto label = it->is_string() ? parse_quality_label(it->get<std::string>()) : std::nullopt;
        if (!label) throw ParseError(src, line, "unknown quality_label");
        a.quality_label = label;
    }
    return a;
}

inline json answer_json(const Answer& a, bool embedded) {
    json o;
    if (!embedded) o["kind"] = "answer";
    o["id"] = a.id;
    if (!embedded || !a.question_id.empty()) o["question_id"] = a.question_id;
    if (!embedded) o["answerer_id"] = a.answerer_id;
    if (!embedded || !a.text.empty()) o["text"] = a.text;
    o["tags"] = a.tags;
    o["vote"] = a.vote;
    if (a.quality_label) o["quality_label"] = std::string(to_string(*a.quality_label));
    return o;
}

inline std::vector<std::string> dedup_tags(const std::vector<std::string>& tags) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& t : tags)
        if (seen.insert(normalize_tag(t)).second) out.push_back(t);
    return out;
}

}  // namespace detail

inline TagTaxonomy read_taxonomy(std::istream& in, const std::string& source = "taxonomy") {
    TagTaxonomy tax;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto cols = detail::split_tabs(line);
        if (cols.size() != 2) throw ParseError(source, n, "expected 2 tab-separated columns");
        if (normalize_tag(cols[0]).empty() || normalize_tag(cols[1]).empty())
            throw ParseError(source, n, "empty tag");
        if (!tax.add(cols[0], cols[1]))
            throw ParseError(source, n, "raw tag '" + cols[0] + "' mapped to two groups");
    }
    return tax;
}

inline void write_taxonomy(std::ostream& out, const TagTaxonomy& tax) {
    for (const auto& [raw, higher] : tax.entries()) out << raw << '\t' << higher << '\n';
}

inline KnowledgeGraph read_knowledge_graph(std::istream& in, const std::string& source = "kg") {
    KnowledgeGraph kg;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto cols = detail::split_tabs(line);
        if (cols.size() != 3) throw ParseError(source, n, "expected 3 tab-separated columns");
        double w = 0.0;
        const std::string& ws = cols[2];
        auto [ptr, ec] = std::from_chars(ws.data(), ws.data() + ws.size(), w);
        if (ec != std::errc() || ptr != ws.data() + ws.size())
            throw ParseError(source, n, "bad weight '" + ws + "'");
        if (!(w >= 0.0) || !std::isfinite(w)) throw ParseError(source, n, "negative weight");
        if (normalize_tag(cols[0]).empty()) throw ParseError(source, n, "empty concept");
        kg.add_edge(cols[0], cols[1], w);
    }
    return kg;
}

inline void write_knowledge_graph(std::ostream& out, const KnowledgeGraph& kg) {
    char buf[64];
    for (const auto& e : kg.edges) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.weight);
        out << e.concept_name << '\t' << e.disease_tag << '\t' << std::string_view(buf, ptr - buf)
            << '\n';
    }
}

// Reads the record stream into `corpus` (questions, answers, answerers,
// followers); taxonomy and knowledge graph are left untouched. References are
// validated afterwards.
inline void read_corpus_records(std::istream& in, Corpus& corpus,
                                const std::string& source = "corpus") {
    using detail::json;
    std::unordered_set<std::string> question_ids;
    std::unordered_set<std::string> answer_ids;
    std::unordered_map<std::string, std::size_t> answerer_pos;
    struct PendingFollower {
        std::string answerer_id;
        FollowerProfile profile;
    };
    std::vector<PendingFollower> followers;

    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        detail::strip_cr(line);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source, n, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(source, n, "record must be a JSON object");
        const std::string kind = detail::require_string(obj, "kind", source, n);
        if (kind == "question") {
            Question q;
            q.id = detail::require_string(obj, "id", source, n);
            q.text = detail::require_string(obj, "text", source, n);
            q.tags = detail::read_tags(obj, source, n);
            if (q.text.empty()) throw ParseError(source, n, "question text is empty");
            if (!question_ids.insert(q.id).second)
                throw ParseError(source, n, "duplicate question id '" + q.id + "'");
            corpus.questions.push_back(std::move(q));
        } else if (kind == "answer") {
            Answer a = detail::read_answer(obj, source, n, false);
            if (!answer_ids.insert(a.id).second)
                throw ParseError(source, n, "duplicate answer id '" + a.id + "'");
            corpus.answers.push_back(std::move(a));
        } else if (kind == "answerer") {
            AnswererRecord r;
            r.id = detail::require_string(obj, "id", source, n);
            if (auto it = obj.find("previous_answers"); it != obj.end()) {
                if (!it->is_array()) throw ParseError(source, n, "'previous_answers' must be an array");
                for (const auto& pa : *it) {
                    if (!pa.is_object()) throw ParseError(source, n, "previous answer must be an object");
                    Answer a = detail::read_answer(pa, source, n, true);
                    a.answerer_id = r.id;
                    r.previous_answers.push_back(std::move(a));
                }
            }
            if (!answerer_pos.emplace(r.id, corpus.answerers.size()).second)
                throw ParseError(source, n, "duplicate answerer id '" + r.id + "'");
            corpus.answerers.push_back(std::move(r));
        } else if (kind == "follower") {
            PendingFollower f;
            f.answerer_id = detail::require_string(obj, "answerer_id", source, n);
            f.profile.follower_id = detail::require_string(obj, "follower_id", source, n);
            f.profile.tags = detail::dedup_tags(detail::read_tags(obj, source, n));
            followers.push_back(std::move(f));
        } else {
            throw ParseError(source, n, "unknown kind '" + kind + "'");
        }
    }
    for (auto& f : followers) {
        auto it = answerer_pos.find(f.answerer_id);
        if (it == answerer_pos.end())
            throw ReferenceError("follower '" + f.profile.follower_id + "' references unknown answerer",
                                 f.answerer_id);
        corpus.answerers[it->second].followers.push_back(std::move(f.profile));
    }
    const bool labeled = !corpus.answers.empty() && corpus.answers.front().quality_label.has_value();
    for (const auto& a : corpus.answers)
        if (a.quality_label.has_value() != labeled)
            throw ValidationError("answer '" + a.id +
                                  "': quality labels must be present on all answers or none");
    CorpusIndex check(corpus);
}

inline void write_corpus_records(std::ostream& out, const Corpus& corpus) {
    using detail::json;
    for (const auto& q : corpus.questions) {
        json o;
        o["kind"] = "question";
        o["id"] = q.id;
        o["text"] = q.text;
        o["tags"] = q.tags;
        out << o.dump() << '\n';
    }
    for (const auto& a : corpus.answers) out << detail::answer_json(a, false).dump() << '\n';
    for (const auto& r : corpus.answerers) {
        json o;
        o["kind"] = "answerer";
        o["id"] = r.id;
        o["previous_answers"] = json::array();
        for (const auto& a : r.previous_answers) o["previous_answers"].push_back(detail::answer_json(a, true));
        out << o.dump() << '\n';
    }
    for (const auto& r : corpus.answerers) {
        for (const auto& f : r.followers) {
            json o;
            o["kind"] = "follower";
            o["answerer_id"] = r.id;
            o["follower_id"] = f.follower_id;
            o["tags"] = f.tags;
            out << o.dump() << '\n';
        }
    }
}

inline constexpr const char* kCorpusFile = "corpus.jsonl";
inline constexpr const char* kTaxonomyFile = "taxonomy.tsv";
inline constexpr const char* kKnowledgeGraphFile = "kg.tsv";

namespace detail {
inline std::ifstream open_input(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    return in;
}
inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}
}  // namespace detail

// Loads <dir>/corpus.jsonl, <dir>/taxonomy.tsv and, when present, <dir>/kg.tsv.
inline Corpus load_corpus(const std::filesystem::path& dir) {
    Corpus corpus;
    {
        auto in = detail::open_input(dir / kTaxonomyFile);
        corpus.taxonomy = read_taxonomy(in, (dir / kTaxonomyFile).string());
    }
    if (std::filesystem::exists(dir / kKnowledgeGraphFile)) {
        auto in = detail::open_input(dir / kKnowledgeGraphFile);
        corpus.knowledge_graph = read_knowledge_graph(in, (dir / kKnowledgeGraphFile).string());
    }
    auto in = detail::open_input(dir / kCorpusFile);
    read_corpus_records(in, corpus, (dir / kCorpusFile).string());
    return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = detail::open_output(dir / kCorpusFile);
        write_corpus_records(out, corpus);
    }
    {
        auto out = detail::open_output(dir / kTaxonomyFile);
        write_taxonomy(out, corpus.taxonomy);
    }
    if (corpus.knowledge_graph) {
        auto out = detail::open_output(dir / kKnowledgeGraphFile);
        write_knowledge_graph(out, *corpus.knowledge_graph);
    }
}

// Sub-corpus holding the given questions and their answers; answerers,
// taxonomy and knowledge graph are shared.
inline Corpus select_questions(const Corpus& corpus, const std::vector<std::string>& question_ids) {
    Corpus out;
    out.taxonomy = corpus.taxonomy;
    out.knowledge_graph = corpus.knowledge_graph;
    out.answerers = corpus.answerers;
    std::unordered_set<std::string> keep(question_ids.begin(), question_ids.end());
    for (const auto& q : corpus.questions)
        if (keep.count(q.id)) out.questions.push_back(q);
    for (const auto& a : corpus.answers)
        if (keep.count(a.question_id)) out.answers.push_back(a);
    return out;
}

}  // namespace kaas

#pragma once
// Shared fixtures: random matrices, an eigen-decomposition oracle for singular
// values, tiny corpora and model instances.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "kaas/kaas.hpp"

namespace kaas::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (double& x : m.data()) x = u(rng);
    return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (double& x : v) x = u(rng);
    return v;
}

// Singular values as square roots of the eigenvalues of aᵀa (or aaᵀ for wide
// matrices), descending.
inline Vector singular_values_oracle(const Matrix& a) {
    Eigen::MatrixXd m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
    const Eigen::MatrixXd gram = a.rows() >= a.cols() ? Eigen::MatrixXd(m.transpose() * m)
                                                      : Eigen::MatrixXd(m * m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Vector s;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) s.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i))));
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

inline EmbeddedSequence random_sequence(std::size_t max_len, std::size_t len, std::size_t d, std::mt19937_64& rng,
                                        double scale = 0.5) {
    EmbeddedSequence s{Matrix(max_len, d), len};
    std::uniform_real_distribution<double> u(-scale, scale);
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < d; ++j) s.values(i, j) = u(rng);
    return s;
}

inline CommunityProfiles random_profiles(std::size_t k, std::mt19937_64& rng) {
    CommunityProfiles p = CommunityProfiles::zeros(k);
    for (Vector* v : {&p.expertise, &p.authority, &p.knowledge_graph}) *v = random_vector(k, rng);
    return p;
}

// A parameter set with every tensor perturbed so no block is structurally special.
inline ModelParams perturbed_model(const Hyperparameters& hp, std::uint64_t seed, double amount = 0.3) {
    ModelParams m = ModelParams::initialize(hp);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amount, amount);
    m.visit([&](std::span<double> s) {
        for (double& x : s) x += u(rng);
    });
    return m;
}

// Small health-forum taxonomy used across corpus and community tests.
inline TagTaxonomy health_taxonomy() {
    TagTaxonomy t;
    t.add("depression", "psychiatry");
    t.add("anxiety", "psychiatry");
    t.add("pink eye", "ophthalmic");
    t.add("cataracts", "ophthalmic");
    t.add("working", "work-related");
    t.add("salary", "work-related");
    return t;
}

// One question with two answers by one answerer.
inline Corpus minimal_corpus() {
    Corpus c;
    c.taxonomy = health_taxonomy();
    c.questions.push_back({"q1", "my eyes hurt and I feel sad", {"pink eye"}});
    c.answers.push_back({"a1", "q1", "u1", "pain in the eye is common with pink eye", {"pink eye"}, 5.0, {}});
    c.answers.push_back({"a2", "q1", "u1", "try to rest", {"depression"}, 1.0, {}});
    AnswererRecord r{"u1", {}, {}};
    r.previous_answers.push_back({"p1", "", "u1", "", {"depression", "anxiety"}, 3.0, {}});
    r.previous_answers.push_back({"p2", "", "u1", "", {"cataracts"}, 2.0, {}});
    r.followers.push_back({"f1", {"depression", "anxiety"}});
    r.followers.push_back({"f2", {"working"}});
    c.answerers.push_back(r);
    return c;
}

class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() /
                ("kaas_" + name + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace kaas::test

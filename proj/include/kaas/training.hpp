#pragma once
// Pairwise hinge training with plain mini-batch SGD, triplet sampling and the
// binary checkpoint format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kaas/dataset.hpp"
#include "kaas/error.hpp"
#include "kaas/model.hpp"

namespace kaas {

// Indices into a Dataset: question, best candidate, strictly worse candidate.
struct TrainTriplet {
    std::size_t question = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;

    bool operator==(const TrainTriplet&) const = default;
};

struct TripletSample {
    std::vector<TrainTriplet> triplets;
    std::size_t skipped = 0;  // questions without a best answer or a worse sibling
};

// For every question, `per_question` triplets with a⁺ the designated best and
// a⁻ uniform over the genuine candidates with strictly lower measure. The
// result is shuffled; identical seeds give identical samples.
inline TripletSample sample_triplets(const Dataset& ds, std::size_t per_question, std::uint64_t seed) {
    TripletSample out;
    std::mt19937_64 rng(seed);
    for (std::size_t qi = 0; qi < ds.questions.size(); ++qi) {
        const auto& q = ds.questions[qi];
        auto best = q.best();
        std::vector<std::size_t> worse;
        if (best) {
            const double top = q.candidates[*best].truth.measure;
            for (std::size_t c = 0; c < q.candidates.size(); ++c)
                if (!q.candidates[c].truth.filler && q.candidates[c].truth.measure < top) worse.push_back(c);
        }
        if (worse.empty()) {
            ++out.skipped;
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick(0, worse.size() - 1);
        for (std::size_t n = 0; n < per_question; ++n) out.triplets.push_back({qi, *best, worse[pick(rng)]});
    }
    std::shuffle(out.triplets.begin(), out.triplets.end(), rng);
    return out;
}

inline std::vector<std::vector<TrainTriplet>> make_batches(const std::vector<TrainTriplet>& triplets,
                                                           std::size_t batch) {
    if (batch < 1) throw ValidationError("batch size must be positive");
    std::vector<std::vector<TrainTriplet>> out;
    for (std::size_t i = 0; i < triplets.size(); i += batch)
        out.emplace_back(triplets.begin() + static_cast<std::ptrdiff_t>(i),
                         triplets.begin() + static_cast<std::ptrdiff_t>(std::min(triplets.size(), i + batch)));
    return out;
}

inline double triplet_loss(const ModelParams& m, const Dataset& ds, const TrainTriplet& t,
                           double grad_scale = 1.0, ModelParams* grad = nullptr) {
    const auto& q = ds.questions.at(t.question);
    const auto& pos = q.candidates.at(t.positive);
    const auto& neg = q.candidates.at(t.negative);
    return triplet_loss(m, q.text, pos.text, pos.profiles, neg.text, neg.profiles, grad_scale, grad);
}

struct BatchResult {
    double mean_loss = 0.0;
    std::size_t active = 0;  // triplets with positive hinge
    ModelParams gradient;    // of the mean loss
};

// Mean hinge loss of a batch and its gradient. With several workers each one
// handles a contiguous slice into its own buffer; buffers are summed in slice
// order.
inline BatchResult batch_gradient(const ModelParams& m, const Dataset& ds, const std::vector<TrainTriplet>& batch,
                                  std::size_t workers = 1) {
    const std::size_t n = batch.size();
    const double scale = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
    workers = std::max<std::size_t>(1, std::min(workers, n));
    struct Slice {
        ModelParams grad;
        double loss = 0.0;
        std::size_t active = 0;
    };
    std::vector<Slice> slices(workers);
    auto run = [&](std::size_t w) {
        Slice& s = slices[w];
        s.grad = m.zeros_like();
        const std::size_t lo = n * w / workers;
        const std::size_t hi = n * (w + 1) / workers;
        for (std::size_t i = lo; i < hi; ++i) {
            const double l = triplet_loss(m, ds, batch[i], scale, &s.grad);
            s.loss += l;
            if (l > 0.0) ++s.active;
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    BatchResult r{0.0, 0, std::move(slices[0].grad)};
    double total = slices[0].loss;
    r.active = slices[0].active;
    for (std::size_t w = 1; w < workers; ++w) {
        r.gradient.accumulate(slices[w].grad);
        total += slices[w].loss;
        r.active += slices[w].active;
    }
    r.mean_loss = total * scale;
    return r;
}

inline double global_norm(const ModelParams& g) {
    double s = 0.0;
    g.visit([&](std::span<const double> v) { s += dot(v, v); });
    return std::sqrt(s);
}

// θ ← θ − lr·g, after rescaling g to `clip_norm` when its global norm exceeds it.
inline void sgd_update(ModelParams& m, ModelParams& g, double lr, double clip_norm) {
    if (clip_norm > 0.0) {
        const double norm = global_norm(g);
        if (norm > clip_norm) {
            const double c = clip_norm / norm;
            g.visit([&](std::span<double> v) {
                for (double& x : v) x *= c;
            });
        }
    }
    Vector flat = g.flatten();
    std::size_t off = 0;
    m.visit([&](std::span<double> v) {
        for (double& x : v) x -= lr * flat[off++];
    });
}

struct TrainResult {
    ModelParams params;
    std::vector<double> batch_losses;
    std::vector<double> epoch_losses;
    std::size_t skipped_questions = 0;
    std::size_t epochs_run = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss, const ModelParams& params)>;

inline TrainResult train(const Dataset& ds, ModelParams init, const EpochCallback& on_epoch = {}) {
    const Hyperparameters hp = init.hyper;
    if (ds.rank != hp.rank) throw DimensionError("train: dataset profile rank differs from model rank");
    TrainResult r{std::move(init), {}, {}, 0, 0};
    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        TripletSample sample = sample_triplets(ds, hp.negatives_per_question, hp.seed + 0x9E3779B97F4A7C15ULL * (epoch + 1));
        r.skipped_questions = sample.skipped;
        if (sample.triplets.empty()) throw TrainingError("train: no trainable (best, worse) pairs");
        double epoch_total = 0.0;
        for (const auto& batch : make_batches(sample.triplets, hp.batch)) {
            BatchResult b = batch_gradient(r.params, ds, batch, hp.workers);
            if (!std::isfinite(b.mean_loss))
                throw TrainingError("train: non-finite loss in epoch " + std::to_string(epoch) + " batch " +
                                    std::to_string(r.batch_losses.size()));
            r.batch_losses.push_back(b.mean_loss);
            epoch_total += b.mean_loss * static_cast<double>(batch.size());
            if (b.active > 0) sgd_update(r.params, b.gradient, hp.learning_rate, hp.clip_norm);
        }
        const double mean = epoch_total / static_cast<double>(sample.triplets.size());
        if (!r.epoch_losses.empty() && r.epoch_losses.back() - mean < hp.min_improvement) ++stale;
        else stale = 0;
        r.epoch_losses.push_back(mean);
        r.epochs_run = epoch + 1;
        if (on_epoch) on_epoch(epoch, mean, r.params);
        if (hp.patience > 0 && stale >= hp.patience) break;
    }
    return r;
}

inline TrainResult train(const Dataset& ds, const Hyperparameters& hp, const EpochCallback& on_epoch = {}) {
    return train(ds, ModelParams::initialize(hp), on_epoch);
}

// ---------------------------------------------------------------------------
// Checkpoints: "KAASCKPT", u32 version, hyperparameter block, u64 tensor count,
// then per tensor u64 length + little-endian f64 values, trailing u64 FNV-1a
// checksum over everything before it.

inline constexpr char kCheckpointMagic[8] = {'K', 'A', 'A', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double d) {
        std::uint64_t v;
        std::memcpy(&v, &d, sizeof v);
        u64(v);
    }
    std::vector<unsigned char>& buffer() { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& buf, std::size_t end) : buf_(buf), end_(end) {}
    void need(std::size_t n) const {
        if (pos_ + n > end_) throw CheckpointError("checkpoint truncated or corrupt");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t v = u64();
        double d;
        std::memcpy(&d, &v, sizeof d);
        return d;
    }
    bool done() const { return pos_ == end_; }

private:
    const std::vector<unsigned char>& buf_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

inline std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

inline std::vector<unsigned char> serialize_checkpoint(const ModelParams& m) {
    detail::ByteWriter w;
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.u32(kCheckpointVersion);
    const Hyperparameters& h = m.hyper;
    for (std::size_t v : {h.hidden, h.embed_dim, h.rank, h.max_question, h.max_answer, h.batch, h.epochs,
                          h.patience, h.negatives_per_question, h.pool, h.workers})
        w.u64(v);
    w.u64(h.seed);
    for (double v : {h.margin, h.learning_rate, h.clip_norm, h.min_improvement, m.score_threshold}) w.f64(v);
    w.u32((h.ablation.expertise ? 1u : 0u) | (h.ablation.authority ? 2u : 0u) | (h.ablation.knowledge_graph ? 4u : 0u));
    std::vector<std::span<const double>> tensors;
    m.visit([&](std::span<const double> s) { tensors.push_back(s); });
    w.u64(tensors.size());
    for (auto t : tensors) {
        w.u64(t.size());
        for (double x : t) w.f64(x);
    }
    auto& buf = w.buffer();
    const std::uint64_t sum = detail::fnv1a(buf.data(), buf.size());
    w.u64(sum);
    return std::move(w.buffer());
}

inline ModelParams deserialize_checkpoint(const std::vector<unsigned char>& buf) {
    if (buf.size() < sizeof kCheckpointMagic + 4 + 8 ||
        std::memcmp(buf.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw CheckpointError("not a checkpoint file (bad magic)");
    const std::size_t body = buf.size() - 8;
    detail::ByteReader tail(buf, buf.size());
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf[body + i]) << (8 * i);
    if (stored != detail::fnv1a(buf.data(), body)) throw CheckpointError("checkpoint checksum mismatch (corrupt file)");

    detail::ByteReader r(buf, body);
    for (std::size_t i = 0; i < sizeof kCheckpointMagic; i += 4) r.u32();
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Hyperparameters h;
    for (std::size_t* v : {&h.hidden, &h.embed_dim, &h.rank, &h.max_question, &h.max_answer, &h.batch, &h.epochs,
                           &h.patience, &h.negatives_per_question, &h.pool, &h.workers})
        *v = static_cast<std::size_t>(r.u64());
    h.seed = r.u64();
    double threshold = 0.0;
    for (double* v : {&h.margin, &h.learning_rate, &h.clip_norm, &h.min_improvement, &threshold}) *v = r.f64();
    const std::uint32_t flags = r.u32();
    h.ablation = {(flags & 1u) != 0, (flags & 2u) != 0, (flags & 4u) != 0};

    ModelParams m = ModelParams::zeros(h);
    m.score_threshold = threshold;
    std::vector<std::span<double>> tensors;
    m.visit([&](std::span<double> s) { tensors.push_back(s); });
    if (r.u64() != tensors.size()) throw CheckpointError("checkpoint tensor count does not match its hyperparameters");
    for (auto t : tensors) {
        if (r.u64() != t.size()) throw CheckpointError("checkpoint tensor shape does not match its hyperparameters");
        for (double& x : t) x = r.f64();
    }
    if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
    return m;
}

inline void save_checkpoint(const ModelParams& m, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

// Throws unless the checkpoint's tensor shapes match `expected`.
inline ModelParams load_checkpoint(const std::filesystem::path& path, const Hyperparameters& expected) {
    ModelParams m = load_checkpoint(path);
    const auto& h = m.hyper;
    if (h.hidden != expected.hidden || h.embed_dim != expected.embed_dim || h.rank != expected.rank)
        throw CheckpointError("checkpoint shape (hidden " + std::to_string(h.hidden) + ", dim " +
                              std::to_string(h.embed_dim) + ", rank " + std::to_string(h.rank) +
                              ") does not match run (hidden " + std::to_string(expected.hidden) + ", dim " +
                              std::to_string(expected.embed_dim) + ", rank " + std::to_string(expected.rank) + ")");
    return m;
}

}  // namespace kaas

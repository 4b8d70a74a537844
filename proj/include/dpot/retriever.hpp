#pragma once

// Goal-similarity retrieval for reference-augmented planning.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dpot/history.hpp"
#include "dpot/prompting.hpp"
#include "json.hpp"

namespace dpot {

struct GoalVector {
    std::vector<double> dims;
    double norm = 0.0;

    static GoalVector from(std::vector<double> dims) {
        GoalVector v{std::move(dims), 0.0};
        double sq = 0.0;
        for (double d : v.dims) sq += d * d;
        v.norm = std::sqrt(sq);
        return v;
    }

    GoalVector scaled(double factor) const {
        std::vector<double> d = dims;
        for (double& x : d) x *= factor;
        return from(std::move(d));
    }
};

inline double cosine(const GoalVector& a, const GoalVector& b) {
    if (a.norm == 0.0 || b.norm == 0.0 || a.dims.size() != b.dims.size()) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dims.size(); ++i) dot += a.dims[i] * b.dims[i];
    return std::clamp(dot / (a.norm * b.norm), -1.0, 1.0);
}

class GoalEmbedder {
public:
    virtual ~GoalEmbedder() = default;
    virtual std::string id() const = 0;
    virtual GoalVector embed(std::string_view text) const = 0;
};

/// Hashed character-trigram counts over the lowercased text, L2-normalized.
/// Texts shorter than three bytes count as a single gram.
class TrigramEmbedder final : public GoalEmbedder {
public:
    explicit TrigramEmbedder(std::size_t dims = 512) : dims_(dims) {}

    std::string id() const override { return "trigram" + std::to_string(dims_); }

    static std::vector<std::string> trigrams(std::string_view text) {
        const std::string lower = util::to_lower(text);
        std::vector<std::string> grams;
        if (lower.empty()) return grams;
        if (lower.size() < 3) return {lower};
        for (std::size_t i = 0; i + 3 <= lower.size(); ++i) grams.push_back(lower.substr(i, 3));
        return grams;
    }

    std::size_t bucket(std::string_view gram) const { return util::fnv1a64(gram) % dims_; }

    GoalVector embed(std::string_view text) const override {
        std::vector<double> counts(dims_, 0.0);
        for (const auto& g : trigrams(text)) counts[bucket(g)] += 1.0;
        GoalVector v = GoalVector::from(std::move(counts));
        if (v.norm > 0.0) {
            for (double& d : v.dims) d /= v.norm;
            v = GoalVector::from(std::move(v.dims));
        }
        return v;
    }

private:
    std::size_t dims_;
};

/// Memoizing wrapper persisted as line-delimited {"backend", "goal_hash", "dims"} records.
class CachedEmbedder final : public GoalEmbedder {
public:
    explicit CachedEmbedder(std::shared_ptr<const GoalEmbedder> inner) : inner_(std::move(inner)) {}

    std::string id() const override { return inner_->id(); }

    static std::string goal_hash(std::string_view text) { return util::hex64(util::fnv1a64(text)); }

    GoalVector embed(std::string_view text) const override {
        const std::string key = goal_hash(text);
        {
            std::lock_guard lock(mu_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        GoalVector v = inner_->embed(text);
        std::lock_guard lock(mu_);
        cache_.emplace(key, v);
        return v;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return cache_.size();
    }

    /// Loads entries recorded for this backend; other backends' entries are ignored.
    void load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) return;
        std::string line;
        std::lock_guard lock(mu_);
        while (std::getline(in, line)) {
            if (util::trim(line).empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || j.value("backend", "") != inner_->id()) continue;
            cache_[j.at("goal_hash").get<std::string>()] = GoalVector::from(j.at("dims").get<std::vector<double>>());
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw Error("cannot write embedding cache " + path.string());
        std::lock_guard lock(mu_);
        for (const auto& [hash, v] : cache_)
            out << nlohmann::json{{"backend", inner_->id()}, {"goal_hash", hash}, {"dims", v.dims}}.dump() << '\n';
    }

private:
    std::shared_ptr<const GoalEmbedder> inner_;
    mutable std::mutex mu_;
    mutable std::map<std::string, GoalVector> cache_;
};

inline GoalVector embed_goal(std::string_view text) {
    static const TrigramEmbedder embedder;
    return embedder.embed(text);
}

struct RankedCandidate {
    std::string id;
    double similarity = 0.0;
};

/// Orders candidates by descending cosine similarity to `query`, ties by id.
inline std::vector<RankedCandidate> rank_by_similarity(const GoalVector& query,
                                                       const std::vector<std::pair<std::string, GoalVector>>& candidates) {
    std::vector<RankedCandidate> out;
    out.reserve(candidates.size());
    for (const auto& [id, v] : candidates) out.push_back({id, cosine(query, v)});
    // Rounded keys so float noise between equal cosines still ties.
    auto key = [](double s) { return std::llround(s * 1e12); };
    std::sort(out.begin(), out.end(), [&](const RankedCandidate& a, const RankedCandidate& b) {
        if (key(a.similarity) != key(b.similarity)) return key(a.similarity) > key(b.similarity);
        return a.id < b.id;
    });
    return out;
}

enum class RetrievalPool { SameSubset, AllSubsets };

/// Goal vectors for a corpus, computed once and then shared read-only.
class RetrievalIndex {
public:
    RetrievalIndex(const std::vector<Episode>& corpus, std::shared_ptr<const GoalEmbedder> embedder = nullptr)
        : corpus_(&corpus), embedder_(embedder ? std::move(embedder) : std::make_shared<TrigramEmbedder>()) {
        vectors_.reserve(corpus.size());
        for (const auto& e : corpus) vectors_.push_back(embedder_->embed(e.goal));
    }

    const GoalEmbedder& embedder() const { return *embedder_; }

    /// The k most similar episodes to `query`, excluding the query itself.
    std::vector<const Episode*> top_k(const Episode& query, std::size_t k,
                                      RetrievalPool pool = RetrievalPool::SameSubset) const {
        if (k == 0) throw Error("top_k: k must be positive");
        const GoalVector q = embedder_->embed(query.goal);
        std::vector<std::pair<std::string, GoalVector>> candidates;
        std::map<std::string, const Episode*> by_id;
        for (std::size_t i = 0; i < corpus_->size(); ++i) {
            const Episode& e = (*corpus_)[i];
            if (e.id == query.id) continue;
            if (pool == RetrievalPool::SameSubset && e.subset != query.subset) continue;
            candidates.emplace_back(e.id, vectors_[i]);
            by_id[e.id] = &e;
        }
        if (candidates.size() < k)
            throw Error("top_k: corpus has " + std::to_string(candidates.size()) + " candidates for episode " +
                        query.id + ", need " + std::to_string(k));
        const auto ranked = rank_by_similarity(q, candidates);
        std::vector<const Episode*> out;
        for (std::size_t i = 0; i < k; ++i) out.push_back(by_id.at(ranked[i].id));
        return out;
    }

private:
    const std::vector<Episode>* corpus_;
    std::shared_ptr<const GoalEmbedder> embedder_;
    std::vector<GoalVector> vectors_;
};

inline std::vector<const Episode*> top_k_similar(const Episode& query, const Dataset& corpus, std::size_t k = 2,
                                                 RetrievalPool pool = RetrievalPool::SameSubset) {
    return RetrievalIndex(corpus.episodes).top_k(query, k, pool);
}

enum class ReferenceSource { Gold, Predicted };

/// Per-episode action descriptions from an earlier run, keyed by episode id.
using PredictedDescriptions = std::map<std::string, std::vector<std::string>>;

inline std::vector<std::string> gold_descriptions(const Episode& e) {
    std::vector<std::string> out;
    for (const auto& step : e.steps) out.push_back(describe_action(step.action, &step.screen));
    return out;
}

inline ReferenceBlock build_reference_block(const std::vector<const Episode*>& refs, ReferenceSource source,
                                            const PredictedDescriptions* predicted = nullptr) {
    ReferenceBlock block;
    for (const Episode* e : refs) {
        std::vector<std::string> descriptions;
        if (source == ReferenceSource::Gold) {
            descriptions = gold_descriptions(*e);
        } else {
            const auto it = predicted ? predicted->find(e->id) : PredictedDescriptions::const_iterator{};
            if (!predicted || it == predicted->end())
                throw Error("no predicted trace for reference episode " + e->id);
            descriptions = it->second;
        }
        ReferenceEntry entry;
        entry.goal = e->goal;
        entry.initial_caption = e->steps.empty() ? "" : e->steps.front().screen.caption.value_or("");
        for (std::size_t i = 0; i < descriptions.size(); ++i)
            entry.action_descriptions.push_back(render_history_entry({static_cast<int>(i), descriptions[i]}));
        block.entries.push_back(std::move(entry));
    }
    return block;
}

}  // namespace dpot

#include <gtest/gtest.h>

#include <cmath>

#include "dpot/retriever.hpp"
#include "dpot/synthetic.hpp"
#include "helpers.hpp"

using namespace dpot;
using testing_support::make_episode;

namespace {

// Exact trigram-multiset cosine, no hashing.
double exact_cosine(const std::string& a, const std::string& b) {
    auto counts = [](const std::string& s) {
        std::map<std::string, double> m;
        for (const auto& g : TrigramEmbedder::trigrams(s)) m[g] += 1;
        return m;
    };
    const auto ca = counts(a), cb = counts(b);
    double dot = 0, na = 0, nb = 0;
    for (const auto& [g, n] : ca) {
        na += n * n;
        if (auto it = cb.find(g); it != cb.end()) dot += n * it->second;
    }
    for (const auto& [g, n] : cb) nb += n * n;
    return na == 0 || nb == 0 ? 0 : dot / std::sqrt(na * nb);
}

Episode goal_episode(std::string id, std::string goal, std::string subset = "General") {
    auto e = make_episode(std::move(id), {Action{Click{0}}, Action{StatusComplete{}}}, 2, std::move(subset), std::move(goal));
    return e;
}

std::vector<Episode> ten_goals() {
    // Chosen so that no two distinct trigrams share a hash bucket.
    const std::vector<std::string> goals = {"turn on wifi", "turn off wifi", "open the calendar", "open gmail",
                                            "install uber", "open chrome",  "check gmail",       "open camera",
                                            "turn off gps", "open calendar"};
    std::vector<Episode> out;
    for (std::size_t i = 0; i < goals.size(); ++i) out.push_back(goal_episode("e" + std::to_string(i), goals[i]));
    return out;
}

}  // namespace

TEST(Embed, Deterministic) {
    EXPECT_EQ(embed_goal("abc").dims, embed_goal("abc").dims);
}

TEST(Embed, NormCachedAndUnit) {
    for (const auto* g : {"abc", "turn on wifi", "a"}) {
        const auto v = embed_goal(g);
        double sq = 0;
        for (double d : v.dims) sq += d * d;
        EXPECT_NEAR(v.norm, std::sqrt(sq), 1e-9);
        EXPECT_NEAR(v.norm, 1.0, 1e-9);
    }
    EXPECT_EQ(embed_goal("").norm, 0.0);
    EXPECT_EQ(embed_goal("").dims.size(), 512u);
}

TEST(Embed, SelfSimilarityIsOne) {
    for (const auto* g : {"abc", "open the calendar", "Check The Weather"}) EXPECT_NEAR(cosine(embed_goal(g), embed_goal(g)), 1.0, 1e-12);
}

TEST(Embed, DisjointTrigramsHaveZeroCosine) { EXPECT_EQ(cosine(embed_goal("xyz"), embed_goal("qqq")), 0.0); }

TEST(Embed, HandComputedCosines) {
    // {abc, bcd} vs {bcd, cde}: one shared gram of two each
    EXPECT_NEAR(cosine(embed_goal("abcd"), embed_goal("bcde")), 0.5, 1e-12);
    // {abc, bcd, cde} vs {abc}: 1 / sqrt(3)
    EXPECT_NEAR(cosine(embed_goal("abcde"), embed_goal("abc")), 1 / std::sqrt(3.0), 1e-12);
    // case-insensitive
    EXPECT_NEAR(cosine(embed_goal("ABCD"), embed_goal("abcd")), 1.0, 1e-12);
}

TEST(Embed, SymmetricAndBounded) {
    const auto eps = ten_goals();
    for (const auto& a : eps)
        for (const auto& b : eps) {
            const double ab = cosine(embed_goal(a.goal), embed_goal(b.goal));
            EXPECT_DOUBLE_EQ(ab, cosine(embed_goal(b.goal), embed_goal(a.goal)));
            EXPECT_GE(ab, 0.0);
            EXPECT_LE(ab, 1.0);
        }
}

TEST(TopK, IdenticalGoalRankedFirstAndSelfExcluded) {
    std::vector<Episode> corpus = ten_goals();
    corpus.push_back(goal_episode("twin", "open camera"));
    const RetrievalIndex index(corpus);
    const auto r = index.top_k(corpus[7], 2);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0]->id, "twin");
    for (const auto* e : r) EXPECT_NE(e->id, corpus[7].id);
}

TEST(TopK, MatchesBruteForceOnTenEpisodes) {
    const auto corpus = ten_goals();
    const RetrievalIndex index(corpus);
    for (const auto& q : corpus) {
        std::vector<std::pair<double, std::string>> brute;
        for (const auto& c : corpus)
            if (c.id != q.id) brute.emplace_back(exact_cosine(q.goal, c.goal), c.id);
        std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
            if (std::abs(a.first - b.first) > 1e-12) return a.first > b.first;
            return a.second < b.second;
        });
        const auto got = index.top_k(q, 9);
        for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(got[i]->id, brute[i].second) << q.goal << " rank " << i;
    }
}

TEST(TopK, ThreeEpisodeOrder) {
    std::vector<Episode> corpus = {goal_episode("q", "abcdefgh"), goal_episode("low", "abcxyz"),
                                   goal_episode("high", "abcdefgx")};
    const double high = exact_cosine("abcdefgh", "abcdefgx"), low = exact_cosine("abcdefgh", "abcxyz");
    ASSERT_GT(high, low);
    const auto r = RetrievalIndex(corpus).top_k(corpus[0], 2);
    EXPECT_EQ(r[0]->id, "high");
    EXPECT_EQ(r[1]->id, "low");
}

TEST(TopK, TiesBrokenById) {
    std::vector<Episode> corpus = {goal_episode("q", "open maps"), goal_episode("b", "zzz"), goal_episode("a", "yyy")};
    const auto r = RetrievalIndex(corpus).top_k(corpus[0], 2);
    EXPECT_EQ(r[0]->id, "a");
    EXPECT_EQ(r[1]->id, "b");
}

TEST(TopK, ScalingInvariance) {
    const auto corpus = ten_goals();
    std::vector<std::pair<std::string, GoalVector>> plain, scaled;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> factor(0.01, 100);
    for (const auto& e : corpus) {
        plain.emplace_back(e.id, embed_goal(e.goal));
        scaled.emplace_back(e.id, embed_goal(e.goal).scaled(factor(rng)));
    }
    for (const auto& q : corpus) {
        const auto a = rank_by_similarity(embed_goal(q.goal), plain);
        const auto b = rank_by_similarity(embed_goal(q.goal).scaled(factor(rng)), scaled);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].id, b[i].id);
            EXPECT_NEAR(a[i].similarity, b[i].similarity, 1e-9);
        }
    }
}

TEST(TopK, PoolAndSizeChecks) {
    std::vector<Episode> corpus = {goal_episode("q", "turn on wifi"), goal_episode("same", "wifi on", "General"),
                                   goal_episode("other", "turn on wifi", "Install")};
    const RetrievalIndex index(corpus);
    EXPECT_THROW(index.top_k(corpus[0], 2), Error);
    EXPECT_EQ(index.top_k(corpus[0], 1)[0]->id, "same");
    EXPECT_EQ(index.top_k(corpus[0], 1, RetrievalPool::AllSubsets)[0]->id, "other");
    EXPECT_THROW(index.top_k(corpus[0], 0), Error);
}

TEST(ReferenceBlock, GoldEntries) {
    auto e = make_episode("r", {Click{1}, Click{1}, Click{2}, TypeText{"x"}, PressEnter{}, Click{0},
                                Scroll{ScrollDirection::Up}, Click{3}, StatusComplete{}});
    e.steps[0].screen.caption = "Home screen with apps";
    const auto block = build_reference_block({&e}, ReferenceSource::Gold);
    ASSERT_EQ(block.entries.size(), 1u);
    const auto& entry = block.entries[0];
    EXPECT_EQ(entry.initial_caption, "Home screen with apps");
    ASSERT_EQ(entry.action_descriptions.size(), 9u);
    EXPECT_EQ(entry.action_descriptions.back(), R"({"step_idx": 8, "action_description": "status_complete"})");
    EXPECT_EQ(entry.action_descriptions[0], R"({"step_idx": 0, "action_description": "click [item 1]"})");
}

TEST(ReferenceBlock, NoCaptionFallback) {
    const auto e = goal_episode("n", "x");
    const auto block = build_reference_block({&e}, ReferenceSource::Gold);
    EXPECT_EQ(block.entries[0].initial_caption, "");
    EXPECT_NE(render_reference_entry(block.entries[0]).find("Caption: (no caption)"), std::string::npos);
}

TEST(ReferenceBlock, OrderFollowsTopK) {
    const auto corpus = ten_goals();
    const auto refs = RetrievalIndex(corpus).top_k(corpus[0], 2);
    const auto block = build_reference_block(refs, ReferenceSource::Gold);
    ASSERT_EQ(block.entries.size(), 2u);
    EXPECT_EQ(block.entries[0].goal, refs[0]->goal);
    EXPECT_EQ(block.entries[1].goal, refs[1]->goal);
}

TEST(ReferenceBlock, PredictedSource) {
    const auto e = goal_episode("p", "x");
    EXPECT_THROW(build_reference_block({&e}, ReferenceSource::Predicted), Error);
    PredictedDescriptions pd{{"p", {"click [3]", "status_complete"}}};
    const auto block = build_reference_block({&e}, ReferenceSource::Predicted, &pd);
    EXPECT_EQ(block.entries[0].action_descriptions[0], R"({"step_idx": 0, "action_description": "click [3]"})");
    PredictedDescriptions other{{"q", {}}};
    EXPECT_THROW(build_reference_block({&e}, ReferenceSource::Predicted, &other), Error);
}

TEST(Cache, RoundTripsThroughFile) {
    const auto dir = testing_support::temp_dir("cache");
    auto inner = std::make_shared<TrigramEmbedder>();
    CachedEmbedder a(inner);
    const auto v = a.embed("turn on wifi");
    a.embed("open maps");
    a.save(dir / "cache.jsonl");
    CachedEmbedder b(inner);
    b.load(dir / "cache.jsonl");
    EXPECT_EQ(b.size(), 2u);
    EXPECT_EQ(b.embed("turn on wifi").dims, v.dims);
    CachedEmbedder c(std::make_shared<TrigramEmbedder>(64));
    c.load(dir / "cache.jsonl");
    EXPECT_EQ(c.size(), 0u);
    std::filesystem::remove_all(dir);
}

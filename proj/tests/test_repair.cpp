#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "lcm/corpus.hpp"
#include "lcm/repair.hpp"

using namespace lcm;
using repair::FencePoint;

namespace {

// Smallest hitting set by enumerating subsets in increasing size, then
// lexicographic order.
std::vector<FencePoint> brute_hitting_set(const std::vector<std::vector<FencePoint>>& sets) {
    std::set<FencePoint> u;
    for (const auto& s : sets) u.insert(s.begin(), s.end());
    std::vector<FencePoint> pts(u.begin(), u.end());
    std::optional<std::vector<FencePoint>> best;
    for (std::uint32_t mask = 0; mask < (1u << pts.size()); ++mask) {
        std::vector<FencePoint> sub;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (mask & (1u << i)) sub.push_back(pts[i]);
        bool ok = std::all_of(sets.begin(), sets.end(), [&](const auto& s) {
            return std::any_of(s.begin(), s.end(), [&](const auto& p) { return std::count(sub.begin(), sub.end(), p); });
        });
        if (ok && (!best || sub.size() < best->size() || (sub.size() == best->size() && sub < *best))) best = sub;
    }
    return best.value_or(std::vector<FencePoint>{});
}

repair::RepairConfig sidecar_config(const std::string& rel) {
    auto side = fixtures::corpus_path(rel);
    side.replace(side.size() - 4, 4, ".expect");
    repair::RepairConfig rc;
    rc.leak = corpus::parse_expectation(corpus::read_file(side)).config;
    return rc;
}

}  // namespace

TEST(HittingSet, MatchesBruteForceOnRandomInstances) {
    std::mt19937 rng(7);
    for (int round = 0; round < 300; ++round) {
        std::uniform_int_distribution<int> nsets(1, 6), npts(1, 4), pick(0, 7);
        std::vector<std::vector<FencePoint>> sets(static_cast<std::size_t>(nsets(rng)));
        for (auto& s : sets) {
            int n = npts(rng);
            for (int i = 0; i < n; ++i) s.push_back({"f", static_cast<std::size_t>(pick(rng))});
        }
        EXPECT_EQ(repair::min_hitting_set(sets), brute_hitting_set(sets)) << "round " << round;
    }
}

TEST(HittingSet, EmptyInputNeedsNothingAndEmptySetIsAnError) {
    EXPECT_TRUE(repair::min_hitting_set({}).empty());
    EXPECT_THROW(repair::min_hitting_set({{}}), Error);
}

TEST(InsertFences, MovesLabelsOntoTheFence) {
    auto p = ir::parse(fixtures::kSpectreV1);
    auto fenced = repair::insert_fences(p, {{"victim", 4}});
    const auto& body = fenced.functions[0].body;
    ASSERT_EQ(body.size(), 9u);
    EXPECT_EQ(body[4].op, ir::Op::fence);
    EXPECT_EQ(body[4].fence, ir::FenceKind::lfence);
    EXPECT_EQ(body[4].labels, std::vector<std::string>{"e5"});
    EXPECT_TRUE(body[5].labels.empty());
    EXPECT_EQ(fenced.functions[0].resolve("e5"), 4u);
    EXPECT_EQ(fenced.functions[0].resolve("e8"), 8u);
    EXPECT_EQ(ir::print(ir::parse(ir::print(fenced))), ir::print(fenced));
    EXPECT_THROW(repair::insert_fences(p, {{"victim", 99}}), Error);
    EXPECT_THROW(repair::insert_fences(p, {{"nobody", 0}}), Error);
}

TEST(InsertFences, PointMapReturnsOriginalIndices) {
    auto p = ir::parse(fixtures::kSpectreV1);
    auto m = repair::detail::PointMap::after(p, {{"victim", 2}, {"victim", 5}});
    EXPECT_EQ(m.back({"victim", 0}).index, 0u);
    EXPECT_EQ(m.back({"victim", 2}).index, 2u);
    EXPECT_EQ(m.back({"victim", 3}).index, 2u);
    EXPECT_EQ(m.back({"victim", 6}).index, 5u);
    EXPECT_EQ(m.back({"victim", 9}).index, 7u);
}

TEST(Repair, SpeculativeExamplesNeedOneMinimalFence) {
    for (const char* rel : {"figures/fig4a_spectre_v4.lcm", "figures/fig4b_spectre_psf.lcm"}) {
        auto p = fixtures::corpus_program(rel);
        auto rc = sidecar_config(rel);
        auto plan = repair::repair(p, rc);
        EXPECT_TRUE(plan.clean) << rel;
        EXPECT_EQ(plan.points.size(), 1u) << rel;
        EXPECT_EQ(repair::verify_minimality(p, plan, rc), std::optional<bool>(true)) << rel;
        EXPECT_TRUE(leakage::analyze(plan.program, rc.leak).findings.empty()) << rel;
    }
    auto p = ir::parse(fixtures::kSpectreV1);
    repair::RepairConfig rc;
    rc.leak = leakage::engine_config("v1");
    auto plan = repair::repair(p, rc);
    EXPECT_TRUE(plan.clean);
    ASSERT_EQ(plan.points.size(), 1u);
    EXPECT_EQ(repair::verify_minimality(p, plan, rc), std::optional<bool>(true));
}

TEST(Repair, LeakFreeProgramNeedsNothing) {
    repair::RepairConfig rc;
    rc.leak = leakage::engine_config("all");
    auto plan = repair::repair(ir::parse("func f():\n  r1 = load x\n  store y, r1\n"), rc);
    EXPECT_TRUE(plan.clean);
    EXPECT_TRUE(plan.points.empty());
    EXPECT_EQ(plan.iterations, 1);
}

TEST(Repair, SilentStoreLeakIsUnrepairable) {
    auto p = fixtures::corpus_program("figures/fig5a_silent_stores.lcm");
    auto plan = repair::repair(p, sidecar_config("figures/fig5a_silent_stores.lcm"));
    EXPECT_FALSE(plan.clean);
    EXPECT_TRUE(plan.points.empty());
    EXPECT_EQ(plan.residual, 1u);
    ASSERT_EQ(plan.unrepairable.size(), 1u);
    EXPECT_NE(plan.unrepairable[0].find("e2"), std::string::npos);
    EXPECT_FALSE(repair::verify_minimality(p, plan, sidecar_config("figures/fig5a_silent_stores.lcm")));
}

TEST(Repair, FencedCorpusIsCleanAndMinimal) {
    for (const auto& path : corpus::cases(LCM_CORPUS_DIR)) {
        auto ex = corpus::parse_expectation(corpus::read_file(std::filesystem::path(path).replace_extension(".expect")));
        if (!ex.fences) continue;
        auto p = ir::parse(corpus::read_file(path));
        repair::RepairConfig rc;
        rc.leak = ex.config;
        auto plan = repair::repair(p, rc);
        EXPECT_TRUE(plan.clean) << path;
        EXPECT_EQ(plan.points.size(), *ex.fences) << path;
        auto minimal = repair::verify_minimality(p, plan, rc);
        EXPECT_EQ(minimal, std::optional<bool>(true)) << path;
    }
}

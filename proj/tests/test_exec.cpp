#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lcm/acfg.hpp"
#include "lcm/axiom.hpp"
#include "lcm/exec.hpp"

using namespace lcm;

namespace {

struct Run {
    ir::Program prog;
    std::vector<axiom::EventStructure> structures;
    std::vector<std::vector<exec::Candidate>> candidates;
};

Run run(const std::string& src, axiom::SpecConfig sc, bool silent = false) {
    Run r;
    r.prog = ir::parse(src);
    r.structures = axiom::enumerate_event_structures(acfg::build(r.prog), sc, &r.prog);
    exec::ExecConfig ec;
    ec.silent_stores = silent;
    for (std::size_t i = 0; i < r.structures.size(); ++i)
        r.candidates.push_back(exec::enumerate_candidates(r.structures[i], ec, &r.prog, i));
    return r;
}

int ev(const axiom::EventStructure& s, const std::string& name) {
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.events[i].name() == name) return static_cast<int>(i);
    ADD_FAILURE() << "no event " << name;
    return -1;
}

bool has(const std::vector<axiom::Pair>& rel, int a, int b) {
    return std::find(rel.begin(), rel.end(), axiom::Pair{a, b}) != rel.end();
}

// Outcome of a litmus candidate: for each read in thread order, the name of
// the write it reads from ("T" for the initial value).
std::vector<std::string> outcome(const exec::Candidate& c) {
    std::vector<std::string> out;
    const auto& s = *c.s;
    for (const auto& t : s.tfo)
        for (int e : t)
            if (s.events[e].kind == axiom::EventKind::read) out.push_back(s.events[c.rf[e]].name());
    return out;
}

std::set<std::vector<std::string>> outcomes(const std::string& rel) {
    auto r = run(fixtures::corpus_text(rel), axiom::SpecConfig{0});
    std::set<std::vector<std::string>> out;
    for (const auto& c : r.candidates.at(0)) out.insert(outcome(c));
    return out;
}

}  // namespace

TEST(Candidates, SingleLoadHasExactlyOne) {
    auto r = run("func f():\n  r1 = load x\n", axiom::SpecConfig{0});
    ASSERT_EQ(r.candidates.size(), 1u);
    ASSERT_EQ(r.candidates[0].size(), 1u);
    const auto& c = r.candidates[0][0];
    const auto& s = *c.s;
    int ld = ev(s, "f:0");
    EXPECT_EQ(c.rf[ld], s.top());
    EXPECT_EQ(c.rfx[ld], s.top());
    EXPECT_EQ(c.bottom_rfx.at("x"), ld);
}

TEST(Candidates, StoreBufferingAllowsEveryOutcome) {
    std::set<std::vector<std::string>> all;
    for (const char* a : {"T", "T0:0"})
        for (const char* b : {"T", "T1:0"}) all.insert({b, a});
    EXPECT_EQ(outcomes("litmus/sb.lcm"), all);
}

TEST(Candidates, FencedStoreBufferingForbidsBothStale) {
    auto got = outcomes("litmus/sb_fenced.lcm");
    EXPECT_EQ(got.size(), 3u);
    EXPECT_FALSE(got.count({"T", "T"}));
}

TEST(Candidates, MessagePassingForbidsFlagWithoutData) {
    auto got = outcomes("litmus/mp.lcm");
    EXPECT_EQ(got.size(), 3u);
    EXPECT_FALSE(got.count({"T0:1", "T"}));
    EXPECT_TRUE(got.count({"T0:1", "T0:0"}));
}

TEST(Consistency, ReadingAroundAnOwnStoreIsIncoherent) {
    auto r = run("func f():\n  store x, 1\n  r1 = load x\n", axiom::SpecConfig{0});
    ASSERT_EQ(r.candidates[0].size(), 1u);
    auto c = r.candidates[0][0];
    const auto& s = *c.s;
    int w = ev(s, "f:0"), rd = ev(s, "f:1");
    EXPECT_EQ(c.rf[rd], w);
    EXPECT_TRUE(exec::check_consistency(c));
    c.rf[rd] = s.top();
    EXPECT_FALSE(exec::sc_per_loc(c));
    EXPECT_FALSE(exec::check_consistency(c));
}

TEST(Consistency, ArchitecturalWitnessesOfMessagePassing) {
    auto prog = ir::parse(fixtures::corpus_text("litmus/mp.lcm"));
    auto ss = axiom::enumerate_event_structures(acfg::build(prog), axiom::SpecConfig{0}, &prog);
    auto arch = exec::architectural_witnesses(std::make_shared<axiom::EventStructure>(ss[0]));
    EXPECT_EQ(arch.size(), 3u);
    for (const auto& c : arch) EXPECT_TRUE(exec::sc_per_loc(c) && exec::causality(c));
}

TEST(Candidates, BypassedStoreWitness) {
    axiom::SpecConfig sf;
    sf.store_forward = true;
    auto r = run(fixtures::corpus_text("figures/fig4a_spectre_v4.lcm"), sf);
    ASSERT_EQ(r.structures.size(), 2u);

    // Without the forwarding window, the load sees the store through the xstate.
    ASSERT_EQ(r.candidates[0].size(), 1u);
    {
        const auto& c = r.candidates[0][0];
        const auto& s = *c.s;
        EXPECT_EQ(c.rfx[ev(s, "e4")], ev(s, "e3"));
        EXPECT_EQ(c.rf[ev(s, "e4")], ev(s, "e3"));
    }

    bool stale = false;
    for (const auto& c : r.candidates[1]) {
        const auto& s = *c.s;
        int e2 = ev(s, "e2"), e3 = ev(s, "e3"), e4 = ev(s, "e4_S");
        EXPECT_FALSE(has(c.rfx_pairs(), e3, e4)) << "forwarding variant must bypass the store";
        if (has(c.rfx_pairs(), e2, e4) && has(c.frx_pairs(), e4, e3)) stale = true;
        EXPECT_EQ(c.xstate[e4], c.xstate[e3]);
    }
    EXPECT_TRUE(stale);
}

TEST(Candidates, AliasPredictedLoadForwardsFromTheOtherAddress) {
    axiom::SpecConfig ap;
    ap.alias_pred = true;
    auto r = run(fixtures::corpus_text("figures/fig4b_spectre_psf.lcm"), ap);
    bool found = false;
    for (std::size_t i = 0; i < r.structures.size(); ++i) {
        const auto& s = r.structures[i];
        if (s.variant < 0 || s.events[s.variant].name() != "e3_S") continue;
        for (const auto& c : r.candidates[i]) {
            int e2 = ev(*c.s, "e2"), e3 = ev(*c.s, "e3_S");
            if (c.rfx[e3] == e2 && c.s->events[e2].location != c.s->events[e3].location) found = true;
        }
    }
    EXPECT_TRUE(found);
}

TEST(Candidates, SilentStoresPossibleAndDefinite) {
    auto definite = run(fixtures::corpus_text("figures/fig5a_silent_stores.lcm"), axiom::SpecConfig{0}, true);
    ASSERT_EQ(definite.candidates[0].size(), 2u);
    std::size_t silent = 0;
    for (const auto& c : definite.candidates[0]) {
        int e2 = ev(*c.s, "e2");
        if (c.silent.count(e2)) {
            ++silent;
            EXPECT_TRUE(c.silent_definite.count(e2));
            EXPECT_EQ(c.bottom_rfx.at("x"), ev(*c.s, "e1"));
        }
    }
    EXPECT_EQ(silent, 1u);

    auto possible = run("func f(r0):\n  store x, r0\n  store x, 1\n", axiom::SpecConfig{0}, true);
    ASSERT_EQ(possible.candidates[0].size(), 2u);
    for (const auto& c : possible.candidates[0]) EXPECT_TRUE(c.silent_definite.empty());

    auto off = run(fixtures::corpus_text("figures/fig5a_silent_stores.lcm"), axiom::SpecConfig{0}, false);
    ASSERT_EQ(off.candidates[0].size(), 1u);
    EXPECT_TRUE(off.candidates[0][0].silent.empty());
}

TEST(Candidates, FromReadsPointPastTheirSource) {
    axiom::SpecConfig sf;
    sf.store_forward = true;
    auto r = run(fixtures::corpus_text("figures/fig4a_spectre_v4.lcm"), sf);
    for (const auto& cs : r.candidates)
        for (const auto& c : cs) {
            const auto& s = *c.s;
            auto cox = c.cox_pairs();
            for (auto [a, b] : c.frx_pairs()) {
                int src = a == s.bottom() ? c.bottom_rfx.at(c.xstate[b]) : c.rfx[a];
                EXPECT_TRUE(src == s.top() || has(cox, src, b)) << s.events[a].name() << "->" << s.events[b].name();
            }
            auto co = c.co_pairs();
            for (auto [a, b] : c.fr_pairs()) EXPECT_TRUE(c.rf[a] == s.top() || has(co, c.rf[a], b));
        }
}

TEST(Candidates, OnlyTsoIsSupported) {
    auto prog = ir::parse("func f():\n  r1 = load x\n");
    auto ss = axiom::enumerate_event_structures(acfg::build(prog), axiom::SpecConfig{0}, &prog);
    exec::ExecConfig ec;
    ec.mcm = "sc";
    EXPECT_THROW(exec::enumerate_candidates(ss[0], ec, &prog), UnsupportedError);
}

#include <gtest/gtest.h>

#include <functional>

#include "fixtures.hpp"
#include "lcm/acfg.hpp"

using namespace lcm;

namespace {

acfg::ACfg single(const char* src) {
    auto p = ir::parse(src);
    auto gs = acfg::build(p);
    EXPECT_EQ(gs.size(), 1u);
    return gs.at(0);
}

// Paths through a loop-free, call-free function, counted on the source
// instruction list rather than on the built graph.
std::size_t source_paths(const ir::Function& f) {
    std::function<std::size_t(std::size_t)> walk = [&](std::size_t i) -> std::size_t {
        if (i >= f.body.size()) return 1;
        std::size_t n = 0;
        for (std::size_t s : ir::successors(f, i)) n += walk(s);
        return n;
    };
    return walk(0);
}

std::size_t count_with(const acfg::ACfg& g, const std::string& function, std::size_t index) {
    std::size_t n = 0;
    for (const auto& node : g.nodes)
        if (node.prov.function == function && node.prov.index == index) ++n;
    return n;
}

}  // namespace

TEST(ACfg, StraightLineHasOnePath) {
    auto g = single(fixtures::kSpectreV1);
    EXPECT_TRUE(g.acyclic());
    EXPECT_EQ(g.nodes.size(), 8u);
    EXPECT_EQ(g.path_count(), 2u);
    EXPECT_EQ(g.topological().size(), g.nodes.size());
}

TEST(ACfg, DiamondJoinsAndPostdominates) {
    auto g = single(R"(
func f(r0):
  beqz r0, else
  r1 = load a
  jmp join
else:
  r1 = load b
join:
  store c, r1
)");
    EXPECT_EQ(g.path_count(), 2u);
    int branch = g.entry;
    ASSERT_TRUE(g.nodes[branch].is_branch());
    auto pd = g.postdominators();
    int join = -1;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].instr.op == ir::Op::store) join = static_cast<int>(i);
    ASSERT_GE(join, 0);
    EXPECT_TRUE(pd[branch].count(join));
    auto region = g.control_region(branch);
    EXPECT_FALSE(region.count(join));
    std::size_t loads = 0;
    for (int v : region)
        if (g.nodes[v].instr.op == ir::Op::load) ++loads;
    EXPECT_EQ(loads, 2u);
}

TEST(ACfg, TwoSequentialBranchesGiveFourPaths) {
    const char* src = R"(
func f(r0, r1):
  beqz r0, a
  skip
a:
  beqz r1, b
  skip
b:
  skip
)";
    auto p = ir::parse(src);
    EXPECT_EQ(source_paths(p.functions[0]), 4u);
    EXPECT_EQ(single(src).path_count(), 4u);
}

TEST(ACfg, PathCountMatchesSourceWalkOnBranchyPrograms) {
    const char* srcs[] = {
        "func f(r0,r1,r2):\n beqz r0, x\n skip\nx:\n beqz r1, y\n beqz r2, y\n skip\ny:\n skip\n",
        "func f(r0):\n beqz r0, end\n beqz r0, end\n beqz r0, end\nend:\n skip\n",
        "func f(r0):\n beqz r0, b\n jmp c\nb:\n skip\nc:\n beqz r0, d\nd:\n skip\n",
    };
    for (const char* s : srcs) {
        auto p = ir::parse(s);
        EXPECT_EQ(single(s).path_count(), source_paths(p.functions[0])) << s;
    }
}

TEST(ACfg, LoopBodyIsUnrolledTwice) {
    auto g = single(R"(
func f():
loop:
  r1 = load x
  r2 = add r1, 1
  beqz r2, loop
)");
    EXPECT_TRUE(g.acyclic());
    EXPECT_EQ(g.nodes.size(), 6u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(count_with(g, "f", i), 2u);
    std::set<int> copies;
    for (const auto& n : g.nodes) copies.insert(n.prov.copy());
    EXPECT_EQ(copies, (std::set<int>{1, 2}));
}

TEST(ACfg, NestedLoopBodyGetsFourCopies) {
    auto g = single(R"(
func f():
outer:
  r1 = load x
inner:
  r2 = load y
  beqz r2, inner
  beqz r1, outer
)");
    EXPECT_TRUE(g.acyclic());
    EXPECT_EQ(count_with(g, "f", 0), 2u);
    EXPECT_EQ(count_with(g, "f", 1), 4u);
    EXPECT_EQ(count_with(g, "f", 2), 4u);
    EXPECT_EQ(count_with(g, "f", 3), 2u);
}

TEST(ACfg, CallsAreInlinedWithRenamedRegisters) {
    auto g = single(R"(
func g(r0):
  r1 = load A[r0]
func main():
  r0 = load y
  call g(r0)
)");
    ASSERT_EQ(g.nodes.size(), 3u);
    const auto& callee_load = g.nodes.back();
    EXPECT_EQ(callee_load.prov.function, "g");
    EXPECT_EQ(callee_load.prov.context, std::vector<std::string>{"main:1"});
    EXPECT_EQ(g.nodes[1].kind, acfg::NodeKind::binding);
    EXPECT_NE(callee_load.instr.addr.reg.id, 0);
    EXPECT_EQ(callee_load.instr.addr.reg, g.nodes[1].instr.dst);
}

TEST(ACfg, RecursionIsCutToAnAbstractOperation) {
    auto g = single(R"(
func f(r0):
  r1 = load x
  beqz r1, done
  call f(r1)
done:
  skip
)");
    EXPECT_TRUE(g.acyclic());
    std::size_t abstract = 0, loads = 0;
    for (const auto& n : g.nodes) {
        if (n.kind == acfg::NodeKind::abstract_memory) {
            ++abstract;
            EXPECT_EQ(n.callee, "f");
        }
        if (n.kind == acfg::NodeKind::instr && n.instr.op == ir::Op::load) ++loads;
    }
    EXPECT_EQ(abstract, 1u);
    EXPECT_EQ(loads, 2u);
}

TEST(ACfg, ExternCallBecomesAbstractMemoryOperation) {
    auto g = single("extern memcmp/2\nfunc f():\n  call memcmp(a, b)\n");
    ASSERT_EQ(g.nodes.size(), 1u);
    EXPECT_EQ(g.nodes[0].kind, acfg::NodeKind::abstract_memory);
    ASSERT_EQ(g.nodes[0].operands.size(), 2u);
    EXPECT_EQ(g.nodes[0].operands[0].location, "a");
    EXPECT_EQ(g.nodes[0].operands[1].location, "b");
}

TEST(ACfg, OneGraphPerThread) {
    auto gs = acfg::build(ir::parse("thread T0:\n store x, 1\nthread T1:\n r0 = load x\n"));
    ASSERT_EQ(gs.size(), 2u);
    EXPECT_EQ(gs[0].thread, "T0");
    EXPECT_EQ(gs[1].thread, "T1");
}

TEST(ACfg, DotOutputNamesEveryNode) {
    auto g = single(fixtures::kSpectreV1);
    auto dot = g.to_dot();
    EXPECT_EQ(dot.rfind("digraph acfg {", 0), 0u);
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        EXPECT_NE(dot.find("n" + std::to_string(i)), std::string::npos);
    EXPECT_NE(dot.find("exit"), std::string::npos);
}

#pragma once

// Abstract CFG construction: natural loops are unrolled twice, calls are
// inlined (recursive cycles twice), extern calls become abstract memory
// operations. The result is an acyclic graph per thread entry.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcm/error.hpp"
#include "lcm/ir.hpp"

namespace lcm::acfg {

inline constexpr int kExit = -1;

struct Provenance {
    std::string function;
    std::size_t index = 0;
    /// One entry per enclosing loop that was unrolled (innermost last).
    std::vector<int> unroll;
    /// Call sites through which this node was inlined, outermost first,
    /// written "fn:index".
    std::vector<std::string> context;

    int copy() const { return unroll.empty() ? 1 : unroll.back(); }
    auto operator<=>(const Provenance&) const = default;
};

enum class NodeKind { instr, binding, abstract_memory };

struct Node {
    NodeKind kind = NodeKind::instr;
    ir::Instruction instr;                      // registers already renamed
    std::vector<ir::AddressExpr> operands;      // abstract_memory pointer operands
    std::string callee;                         // abstract_memory origin
    Provenance prov;
    int next = kExit;                           // fallthrough / only successor
    int taken = kExit;                          // beqz target

    bool is_branch() const { return kind == NodeKind::instr && instr.op == ir::Op::beqz; }
    std::vector<int> successors() const {
        if (is_branch() && taken != next) return {taken, next};
        return {next};
    }
};

/// A single-entry control-flow graph over Nodes.
struct Graph {
    std::string name;
    std::vector<ir::Reg> params;
    std::vector<Node> nodes;
    int entry = kExit;
};

// ---------------------------------------------------------------------------
// Graph utilities

namespace detail {

inline std::vector<int> reachable_order(const Graph& g) {
    std::vector<int> order;
    if (g.entry == kExit) return order;
    std::vector<char> seen(g.nodes.size(), 0);
    std::vector<int> stack{g.entry};
    seen[g.entry] = 1;
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (int s : g.nodes[n].successors())
            if (s != kExit && !seen[s]) {
                seen[s] = 1;
                stack.push_back(s);
            }
    }
    std::sort(order.begin(), order.end());
    return order;
}

/// Iterative dominator sets; dom[n] contains n and all its dominators.
inline std::vector<std::set<int>> dominators(const Graph& g) {
    const int n = static_cast<int>(g.nodes.size());
    auto reach = reachable_order(g);
    std::set<int> all(reach.begin(), reach.end());
    std::vector<std::set<int>> dom(n);
    std::vector<std::vector<int>> preds(n);
    for (int v : reach)
        for (int s : g.nodes[v].successors())
            if (s != kExit) preds[s].push_back(v);
    for (int v : reach) dom[v] = all;
    if (g.entry != kExit) dom[g.entry] = {g.entry};
    bool changed = true;
    while (changed) {
        changed = false;
        for (int v : reach) {
            if (v == g.entry) continue;
            std::set<int> next;
            bool first = true;
            for (int p : preds[v]) {
                if (first) {
                    next = dom[p];
                    first = false;
                } else {
                    std::set<int> tmp;
                    std::set_intersection(next.begin(), next.end(), dom[p].begin(), dom[p].end(),
                                          std::inserter(tmp, tmp.begin()));
                    next.swap(tmp);
                }
            }
            next.insert(v);
            if (next != dom[v]) {
                dom[v] = std::move(next);
                changed = true;
            }
        }
    }
    return dom;
}

struct Loop {
    int header = kExit;
    std::set<int> body;
    std::vector<std::pair<int, int>> back_edges;  // (tail, header)
};

inline std::string describe(const Node& n) {
    std::string where = n.prov.function + ":" + std::to_string(n.prov.index);
    if (!n.instr.labels.empty()) where += " (" + n.instr.labels.front() + ")";
    return where;
}

/// Natural loops keyed by header. Throws on irreducible control flow.
inline std::vector<Loop> natural_loops(const Graph& g) {
    auto dom = dominators(g);
    auto reach = reachable_order(g);
    std::vector<std::vector<int>> preds(g.nodes.size());
    for (int v : reach)
        for (int s : g.nodes[v].successors())
            if (s != kExit) preds[s].push_back(v);

    // DFS to find retreating edges.
    std::vector<int> state(g.nodes.size(), 0);  // 0 new, 1 on stack, 2 done
    std::vector<std::pair<int, int>> retreating;
    if (g.entry != kExit) {
        std::vector<std::pair<int, std::size_t>> stack{{g.entry, 0}};
        state[g.entry] = 1;
        while (!stack.empty()) {
            auto& [v, i] = stack.back();
            auto succ = g.nodes[v].successors();
            if (i < succ.size()) {
                int s = succ[i++];
                if (s == kExit) continue;
                if (state[s] == 1) retreating.emplace_back(v, s);
                else if (state[s] == 0) {
                    state[s] = 1;
                    stack.emplace_back(s, 0);
                }
            } else {
                state[v] = 2;
                stack.pop_back();
            }
        }
    }
    std::map<int, Loop> loops;
    for (auto [t, h] : retreating) {
        if (!dom[t].count(h))
            throw Error("irreducible control flow in '" + g.name + "': edge from " + describe(g.nodes[t]) +
                        " to " + describe(g.nodes[h]) + " enters a loop without passing its header");
        Loop& l = loops[h];
        l.header = h;
        l.back_edges.emplace_back(t, h);
        l.body.insert(h);
        std::vector<int> work{t};
        while (!work.empty()) {
            int v = work.back();
            work.pop_back();
            if (!l.body.insert(v).second) continue;
            for (int p : preds[v]) work.push_back(p);
        }
    }
    std::vector<Loop> out;
    for (auto& [h, l] : loops) out.push_back(std::move(l));
    return out;
}

inline void unroll(Graph& g, const Loop& loop) {
    std::map<int, int> copy_of;
    const std::vector<int> body(loop.body.begin(), loop.body.end());
    for (int v : body) {
        copy_of[v] = static_cast<int>(g.nodes.size());
        Node c = g.nodes[v];
        c.prov.unroll.push_back(2);
        g.nodes.push_back(std::move(c));
    }
    for (int v : body) g.nodes[v].prov.unroll.push_back(1);
    auto is_back = [&](int t, int s) {
        return std::find(loop.back_edges.begin(), loop.back_edges.end(), std::make_pair(t, s)) != loop.back_edges.end();
    };
    for (int v : body) {
        Node& c = g.nodes[copy_of[v]];
        auto remap = [&](int& target) {
            if (target == kExit) return;
            if (is_back(v, target)) target = kExit;       // copy 2: back edge deleted
            else if (loop.body.count(target)) target = copy_of[target];
        };
        remap(c.next);
        remap(c.taken);
        Node& o = g.nodes[v];
        if (o.next != kExit && is_back(v, o.next)) o.next = copy_of[loop.header];
        if (o.taken != kExit && is_back(v, o.taken)) o.taken = copy_of[loop.header];
    }
}

/// Drops unreachable nodes and renumbers the rest in a stable order.
inline void compact(Graph& g) {
    auto reach = reachable_order(g);
    std::map<int, int> renumber;
    std::vector<Node> nodes;
    for (int v : reach) {
        renumber[v] = static_cast<int>(nodes.size());
        nodes.push_back(g.nodes[v]);
    }
    for (auto& n : nodes) {
        if (n.next != kExit) n.next = renumber.at(n.next);
        if (n.taken != kExit) n.taken = renumber.at(n.taken);
    }
    g.entry = g.entry == kExit ? kExit : renumber.at(g.entry);
    g.nodes = std::move(nodes);
}

}  // namespace detail

/// Direct translation of a function body into a graph (jmp/beqz resolved).
inline Graph function_graph(const ir::Function& f) {
    Graph g;
    g.name = f.name;
    g.params = f.params;
    const std::size_t n = f.body.size();
    auto idx = [&](std::size_t i) { return i >= n ? kExit : static_cast<int>(i); };
    for (std::size_t i = 0; i < n; ++i) {
        Node node;
        node.instr = f.body[i];
        node.prov.function = f.name;
        node.prov.index = i;
        const auto& in = f.body[i];
        if (in.op == ir::Op::jmp) {
            node.next = idx(f.resolve(in.target));
        } else {
            node.next = idx(i + 1);
            if (in.op == ir::Op::beqz) node.taken = idx(f.resolve(in.target));
        }
        g.nodes.push_back(std::move(node));
    }
    g.entry = n == 0 ? kExit : 0;
    return g;
}

/// Program' : one graph per function, loop-free after summarize_loops.
struct FlatProgram {
    std::vector<Graph> functions;
    const ir::Program* source = nullptr;

    const Graph* find(std::string_view name) const {
        for (const auto& g : functions)
            if (g.name == name) return &g;
        return nullptr;
    }
};

/// Unrolls every natural loop twice, innermost loops first.
inline Graph summarize_loops(Graph g) {
    detail::compact(g);
    for (;;) {
        auto loops = detail::natural_loops(g);
        if (loops.empty()) break;
        // innermost: a loop whose body contains no other loop header
        const detail::Loop* inner = nullptr;
        for (const auto& l : loops) {
            bool contains_other = false;
            for (const auto& o : loops)
                if (o.header != l.header && l.body.count(o.header)) contains_other = true;
            if (!contains_other) {
                inner = &l;
                break;
            }
        }
        detail::unroll(g, *inner);
        detail::compact(g);
    }
    return g;
}

inline FlatProgram summarize_loops(const ir::Program& p) {
    FlatProgram out;
    out.source = &p;
    for (const auto& f : p.functions) out.functions.push_back(summarize_loops(function_graph(f)));
    return out;
}

namespace detail {

inline int max_register(const ir::Program& p) {
    int m = -1;
    for (const auto& f : p.functions) {
        for (ir::Reg r : f.params) m = std::max(m, r.id);
        for (const auto& in : f.body) {
            if (auto w = ir::writes(in)) m = std::max(m, w->id);
            for (ir::Reg r : ir::reads(in)) m = std::max(m, r.id);
        }
    }
    return m;
}

inline ir::Reg rename(ir::Reg r, int offset) { return r.valid() ? ir::Reg{r.id + offset} : r; }

inline void rename_address(ir::AddressExpr& a, int offset, bool relocate_indirect) {
    if (a.mode == ir::AddrMode::direct) return;
    a.reg = rename(a.reg, offset);
    if (relocate_indirect && a.mode == ir::AddrMode::indirect && !a.hinted) a.location = "*" + ir::to_string(a.reg);
}

inline void rename_node(Node& n, int offset) {
    if (offset == 0) return;
    auto& in = n.instr;
    in.dst = rename(in.dst, offset);
    in.cond = rename(in.cond, offset);
    for (auto& o : in.operands)
        if (o.is_reg()) o.value = rename(o.reg(), offset);
    // Indirect location names stay tied to the source register so that
    // every inlined instance of a function agrees on its symbolic location.
    rename_address(in.addr, offset, false);
    for (auto& a : in.args) {
        if (auto* o = std::get_if<ir::Operand>(&a)) {
            if (o->is_reg()) o->value = rename(o->reg(), offset);
        } else {
            rename_address(std::get<ir::AddressExpr>(a), offset, false);
        }
    }
    for (auto& a : n.operands) rename_address(a, offset, false);
}

inline Node abstract_node(const Node& call, std::vector<ir::AddressExpr> operands) {
    Node n;
    n.kind = NodeKind::abstract_memory;
    n.instr = call.instr;
    n.callee = call.instr.target;
    n.operands = std::move(operands);
    n.prov = call.prov;
    n.next = call.next;
    return n;
}

struct Inliner {
    const FlatProgram& flat;
    const ir::Program& prog;
    int next_register;
    std::map<std::string, int> active;  // function -> number of instances on the inline stack

    /// Appends an instance of `callee` to `out`; returns entry index. Exits of
    /// the instance go to `continuation`.
    int instantiate(const Graph& callee, int offset, const std::vector<std::string>& context, int continuation,
                    Graph& out) {
        const int base = static_cast<int>(out.nodes.size());
        if (callee.entry == kExit) return continuation;
        for (const auto& n : callee.nodes) {
            Node c = n;
            rename_node(c, offset);
            c.prov.context.insert(c.prov.context.begin(), context.begin(), context.end());
            c.next = n.next == kExit ? continuation : n.next + base;
            c.taken = n.taken == kExit ? (c.is_branch() ? continuation : kExit) : n.taken + base;
            if (!c.is_branch()) c.taken = kExit;
            out.nodes.push_back(std::move(c));
        }
        ++active[callee.name];
        for (int i = base; i < base + static_cast<int>(callee.nodes.size()); ++i) expand_call(i, out);
        --active[callee.name];
        return callee.entry + base;
    }

    void expand_call(int i, Graph& out) {
        if (out.nodes[i].kind != NodeKind::instr || out.nodes[i].instr.op != ir::Op::call) return;
        Node call = out.nodes[i];
        const std::string& name = call.instr.target;
        if (prog.externs.count(name)) {
            std::vector<ir::AddressExpr> ops;
            for (const auto& a : call.instr.args) ops.push_back(std::get<ir::AddressExpr>(a));
            out.nodes[i] = abstract_node(call, std::move(ops));
            return;
        }
        const Graph* callee = flat.find(name);
        if (active[name] >= 2) {
            std::vector<ir::AddressExpr> ops;
            for (const auto& a : call.instr.args) {
                const auto& o = std::get<ir::Operand>(a);
                if (!o.is_reg()) continue;
                ir::AddressExpr e;
                e.mode = ir::AddrMode::indirect;
                e.reg = o.reg();
                e.location = "*" + ir::to_string(e.reg);
                ops.push_back(e);
            }
            out.nodes[i] = abstract_node(call, std::move(ops));
            return;
        }
        const int offset = next_register;
        int max_reg = -1;
        for (ir::Reg r : callee->params) max_reg = std::max(max_reg, r.id);
        for (const auto& n : callee->nodes) {
            if (auto w = ir::writes(n.instr)) max_reg = std::max(max_reg, w->id);
            for (ir::Reg r : ir::reads(n.instr)) max_reg = std::max(max_reg, r.id);
        }
        next_register += max_reg + 1;

        std::vector<std::string> context = call.prov.context;
        context.push_back(call.prov.function + ":" + std::to_string(call.prov.index));
        // parameter bindings: param_k' = arg_k
        std::vector<Node> bindings;
        for (std::size_t k = 0; k < callee->params.size(); ++k) {
            Node b;
            b.kind = NodeKind::binding;
            b.instr.op = ir::Op::alu;
            b.instr.alu_op = "mov";
            b.instr.dst = rename(callee->params[k], offset);
            b.instr.operands.push_back(std::get<ir::Operand>(call.instr.args[k]));
            b.instr.pos = call.instr.pos;
            b.prov = call.prov;
            bindings.push_back(std::move(b));
        }
        int body_entry = instantiate(*callee, offset, context, call.next, out);
        if (bindings.empty()) {
            // the call node becomes a skip that falls into the body
            Node& n = out.nodes[i];
            n.kind = NodeKind::binding;
            n.instr = ir::Instruction{};
            n.instr.op = ir::Op::skip;
            n.instr.labels = call.instr.labels;
            n.next = body_entry;
            return;
        }
        int first = static_cast<int>(out.nodes.size());
        for (std::size_t k = 0; k < bindings.size(); ++k) {
            bindings[k].next = k + 1 < bindings.size() ? first + static_cast<int>(k) + 1 : body_entry;
            out.nodes.push_back(std::move(bindings[k]));
        }
        Node& n = out.nodes[i];
        n = out.nodes[first];
        n.instr.labels = call.instr.labels;
        // node i takes the role of the first binding
        if (bindings.size() == 1) n.next = body_entry;
        else n.next = first + 1;
    }
};

}  // namespace detail

/// Inlines every call reachable from `entry` into a single graph.
inline Graph inline_calls(const FlatProgram& flat, std::string_view entry) {
    const ir::Program& prog = *flat.source;
    const Graph* root = flat.find(entry);
    if (!root) throw Error("unknown entry '" + std::string(entry) + "'");
    detail::Inliner inl{flat, prog, detail::max_register(prog) + 1, {}};
    Graph out;
    out.name = root->name;
    out.params = root->params;
    out.entry = inl.instantiate(*root, 0, {}, kExit, out);
    detail::compact(out);
    return out;
}

// ---------------------------------------------------------------------------
// ACfg

struct ACfg {
    std::string thread;
    std::vector<ir::Reg> params;
    std::vector<Node> nodes;
    int entry = kExit;

    bool acyclic() const {
        std::vector<int> state(nodes.size(), 0);
        std::function<bool(int)> visit = [&](int v) {
            if (v == kExit) return true;
            if (state[v] == 1) return false;
            if (state[v] == 2) return true;
            state[v] = 1;
            for (int s : nodes[v].successors())
                if (!visit(s)) return false;
            state[v] = 2;
            return true;
        };
        return visit(entry);
    }

    /// Number of entry-to-exit paths.
    std::size_t path_count() const {
        std::vector<std::size_t> memo(nodes.size(), 0);
        std::vector<char> done(nodes.size(), 0);
        std::function<std::size_t(int)> count = [&](int v) -> std::size_t {
            if (v == kExit) return 1;
            if (done[v]) return memo[v];
            std::size_t c = 0;
            for (int s : nodes[v].successors()) c += count(s);
            done[v] = 1;
            return memo[v] = c;
        };
        return count(entry);
    }

    /// Topological order (entry first).
    std::vector<int> topological() const {
        std::vector<int> order;
        std::vector<char> seen(nodes.size(), 0);
        std::function<void(int)> visit = [&](int v) {
            if (v == kExit || seen[v]) return;
            seen[v] = 1;
            for (int s : nodes[v].successors()) visit(s);
            order.push_back(v);
        };
        visit(entry);
        std::reverse(order.begin(), order.end());
        return order;
    }

    /// postdom[v] = nodes that post-dominate v (including v); kExit is implicit.
    std::vector<std::set<int>> postdominators() const {
        std::vector<std::set<int>> pd(nodes.size());
        auto order = topological();
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            int v = *it;
            std::set<int> acc;
            bool first = true;
            for (int s : nodes[v].successors()) {
                std::set<int> ps = s == kExit ? std::set<int>{} : pd[s];
                if (first) {
                    acc = ps;
                    first = false;
                } else {
                    std::set<int> tmp;
                    std::set_intersection(acc.begin(), acc.end(), ps.begin(), ps.end(), std::inserter(tmp, tmp.begin()));
                    acc.swap(tmp);
                }
            }
            acc.insert(v);
            pd[v] = std::move(acc);
        }
        return pd;
    }

    /// Nodes control-dependent on branch `b`: reachable from b and not
    /// post-dominating it.
    std::set<int> control_region(int b) const {
        auto pd = postdominators();
        return control_region(b, pd);
    }
    std::set<int> control_region(int b, const std::vector<std::set<int>>& pd) const {
        std::set<int> out;
        std::vector<int> work;
        for (int s : nodes[b].successors())
            if (s != kExit) work.push_back(s);
        while (!work.empty()) {
            int v = work.back();
            work.pop_back();
            if (out.count(v)) continue;
            if (pd[b].count(v)) continue;
            out.insert(v);
            for (int s : nodes[v].successors())
                if (s != kExit) work.push_back(s);
        }
        return out;
    }

    std::string to_dot() const;
};

inline std::string node_text(const Node& n) {
    switch (n.kind) {
        case NodeKind::abstract_memory: {
            std::string s = "abstract " + n.callee + "{";
            for (std::size_t i = 0; i < n.operands.size(); ++i) s += (i ? ", " : "") + ir::to_string(n.operands[i]);
            return s + "}";
        }
        default: return ir::to_string(n.instr);
    }
}

inline std::string provenance_text(const Provenance& p) {
    std::string s;
    for (const auto& c : p.context) s += c + "/";
    s += p.function + ":" + std::to_string(p.index);
    if (!p.unroll.empty()) {
        s += "#";
        for (std::size_t i = 0; i < p.unroll.size(); ++i) s += (i ? "." : "") + std::to_string(p.unroll[i]);
    }
    return s;
}

inline std::string ACfg::to_dot() const {
    std::ostringstream os;
    os << "digraph acfg {\n  node [shape=box, fontname=\"monospace\"];\n";
    os << "  entry [shape=point];\n  exit [shape=doublecircle, label=\"exit\"];\n";
    auto name = [](int v) { return v == kExit ? std::string("exit") : "n" + std::to_string(v); };
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        std::string label = provenance_text(nodes[i].prov) + "\\n" + node_text(nodes[i]);
        std::string esc;
        for (char c : label) esc += c == '"' ? std::string("\\\"") : std::string(1, c);
        os << "  n" << i << " [label=\"" << esc << "\"];\n";
    }
    os << "  entry -> " << name(entry) << ";\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (n.is_branch()) {
            os << "  n" << i << " -> " << name(n.taken) << " [label=\"taken\"];\n";
            os << "  n" << i << " -> " << name(n.next) << " [label=\"fallthrough\"];\n";
        } else {
            os << "  n" << i << " -> " << name(n.next) << ";\n";
        }
    }
    os << "}\n";
    return os.str();
}

inline ACfg build_acfg(const Graph& g, std::string thread = {}) {
    ACfg a;
    a.thread = thread.empty() ? g.name : std::move(thread);
    a.params = g.params;
    a.nodes = g.nodes;
    a.entry = g.entry;
    for (const auto& n : a.nodes)
        if (n.kind == NodeKind::instr && n.instr.op == ir::Op::call)
            throw Error("internal error: unexpanded call in A-CFG");
    if (!a.acyclic()) throw Error("internal error: A-CFG for '" + a.thread + "' contains a cycle");
    return a;
}

/// Full pipeline: one ACfg per program entry (thread).
inline std::vector<ACfg> build(const ir::Program& p) {
    FlatProgram flat = summarize_loops(p);
    std::vector<ACfg> out;
    for (const auto& e : p.entries) out.push_back(build_acfg(inline_calls(flat, e), e));
    return out;
}

}  // namespace lcm::acfg

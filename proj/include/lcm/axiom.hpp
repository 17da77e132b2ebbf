#pragma once

// Event structures over the A-CFG: committed paths, transient windows for
// the three speculation primitives, and syntactic dependencies computed over
// fetch order by register taint tracking.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lcm/acfg.hpp"
#include "lcm/error.hpp"
#include "lcm/ir.hpp"

namespace lcm::axiom {

enum class EventKind { read, write, branch, fence, amo, top, bottom, spec_bottom };
enum class Primitive { branch, store_forward, alias_pred };

inline const char* to_string(Primitive p) {
    switch (p) {
        case Primitive::branch: return "branch";
        case Primitive::store_forward: return "store_forward";
        case Primitive::alias_pred: return "alias_pred";
    }
    return "?";
}

struct SpecConfig {
    int d_spec = 250;
    bool branch = false;
    bool store_forward = false;
    bool alias_pred = false;

    bool any() const { return branch || store_forward || alias_pred; }
};

using Pair = std::pair<int, int>;

struct Event {
    int id = 0;
    EventKind kind = EventKind::read;
    int thread = -1;                 // -1 for top/bottom
    int node = -1;                   // A-CFG node
    acfg::Provenance prov;
    std::string label;               // source label, or "function:index"
    std::string location;
    std::optional<ir::AddressExpr> address;
    ir::FenceKind fence = ir::FenceKind::full;
    bool transient = false;
    int window = -1;                 // index into EventStructure::windows
    std::optional<ir::Operand> value;  // stored operand (writes)
    // abstract memory operations: one entry per pointer operand
    std::vector<ir::AddressExpr> operands;
    std::vector<std::vector<int>> operand_taint;
    std::vector<bool> operand_gep;

    bool is_memory() const { return kind == EventKind::read || kind == EventKind::write || kind == EventKind::amo; }
    bool is_endpoint() const { return kind == EventKind::top || kind == EventKind::bottom; }
    bool is_program() const {
        return kind != EventKind::top && kind != EventKind::bottom && kind != EventKind::spec_bottom;
    }
    /// Display name: label plus "_S" for transient events.
    std::string name() const {
        switch (kind) {
            case EventKind::top: return "T";
            case EventKind::bottom: return "B";
            case EventKind::spec_bottom: return "B_S";
            default: return transient ? label + "_S" : label;
        }
    }
};

struct TraceEntry {
    int thread = 0;
    int node = -1;
    int event = -1;      // -1 for instructions that produce no event
    bool transient = false;
    int window = -1;
};

struct Window {
    Primitive primitive = Primitive::branch;
    int source = -1;                 // branch event, or primitive read
    std::vector<int> events;         // transient events of the window in fetch order
    std::size_t trace_begin = 0;     // [begin, end) range in EventStructure::trace
    std::size_t trace_end = 0;
    bool reaches_exit = false;
    bool truncated_at_branch = false;
};

struct EventStructure {
    std::vector<Event> events;                    // 0 = top, back() = bottom
    std::vector<std::vector<int>> tfo;            // per thread, program events in fetch order
    std::vector<TraceEntry> trace;                // fetched instructions incl. non-events
    std::vector<int> tfo_pos;                     // position within its thread's tfo
    std::vector<int> po_pos;                      // position among committed events, -1 if transient
    std::vector<Pair> addr, addr_gep, data, ctrl;
    std::vector<Window> windows;
    int variant = -1;                             // primitive read of a store_forward/alias_pred variant
    Primitive variant_kind = Primitive::branch;
    std::vector<std::string> threads;
    std::string path;                             // branch outcomes, e.g. "T.F"
    std::vector<std::string> diagnostics;

    int top() const { return 0; }
    int bottom() const { return static_cast<int>(events.size()) - 1; }
    std::size_t size() const { return events.size(); }
    const Event& operator[](int i) const { return events[static_cast<std::size_t>(i)]; }

    bool same_thread(int a, int b) const { return events[a].thread == events[b].thread && events[a].thread >= 0; }

    /// Fetch order (per thread; top first, bottom last).
    bool tfo_before(int a, int b) const {
        if (a == b) return false;
        if (a == top()) return true;
        if (b == top()) return false;
        if (b == bottom()) return true;
        if (a == bottom()) return false;
        return same_thread(a, b) && tfo_pos[a] < tfo_pos[b];
    }
    bool po_before(int a, int b) const {
        if (a == b) return false;
        if (events[a].transient || events[b].transient) return false;
        if (a == top()) return true;
        if (b == top()) return false;
        if (b == bottom()) return true;
        if (a == bottom()) return false;
        return same_thread(a, b) && po_pos[a] < po_pos[b];
    }

    std::vector<int> committed(int thread) const {
        std::vector<int> out;
        for (int e : tfo.at(thread))
            if (!events[e].transient) out.push_back(e);
        return out;
    }
    bool has(const std::vector<Pair>& rel, int a, int b) const {
        return std::binary_search(rel.begin(), rel.end(), Pair{a, b});
    }
};

// ---------------------------------------------------------------------------

namespace detail {

struct Taint {
    std::map<int, std::vector<int>> regs;   // register id -> source reads (sorted)

    const std::vector<int>& of(ir::Reg r) const {
        static const std::vector<int> none;
        auto it = regs.find(r.id);
        return it == regs.end() ? none : it->second;
    }
    std::vector<int> of_operands(const std::vector<ir::Operand>& ops) const {
        std::vector<int> out;
        for (const auto& o : ops)
            if (o.is_reg()) {
                const auto& t = of(o.reg());
                out.insert(out.end(), t.begin(), t.end());
            }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

inline std::string event_label(const acfg::Node& n) {
    if (!n.instr.labels.empty() && n.prov.context.empty()) return n.instr.labels.front();
    if (!n.instr.labels.empty()) return n.instr.labels.front();
    return n.prov.function + ":" + std::to_string(n.prov.index);
}

struct ThreadInfo {
    const acfg::ACfg* g = nullptr;
    std::vector<std::set<int>> regions;   // per node (branches only)
};

class Builder {
public:
    Builder(const std::vector<ThreadInfo>& threads, const SpecConfig& cfg, const ir::Program* prog)
        : threads_(threads), cfg_(cfg), prog_(prog) {
        Event top;
        top.kind = EventKind::top;
        s_.events.push_back(top);
        s_.tfo.resize(threads.size());
        for (const auto& t : threads) s_.threads.push_back(t.g->thread);
    }

    struct Branch {
        int event;
        int node;
        std::vector<int> taint;
    };

    /// Fetches one A-CFG node. Returns the event id or -1.
    int fetch(int thread, int node, bool transient, int window, Taint& taint, const std::vector<Branch>& branches) {
        const acfg::Node& n = threads_[thread].g->nodes[node];
        TraceEntry te{thread, node, -1, transient, window};
        int id = -1;
        auto make = [&](EventKind k) {
            Event e;
            e.id = static_cast<int>(s_.events.size());
            e.kind = k;
            e.thread = thread;
            e.node = node;
            e.prov = n.prov;
            e.label = event_label(n);
            e.transient = transient;
            e.window = window;
            s_.events.push_back(std::move(e));
            s_.tfo[thread].push_back(static_cast<int>(s_.events.size()) - 1);
            return static_cast<int>(s_.events.size()) - 1;
        };
        auto address_deps = [&](int ev, const ir::AddressExpr& a) {
            if (a.mode == ir::AddrMode::direct) return;
            for (int src : taint.of(a.reg)) {
                s_.addr.emplace_back(src, ev);
                if (a.mode == ir::AddrMode::indexed) s_.addr_gep.emplace_back(src, ev);
            }
        };
        if (n.kind == acfg::NodeKind::abstract_memory && !n.operands.empty()) {
            id = make(EventKind::amo);
            Event& e = s_.events[id];
            e.operands = n.operands;
            for (const auto& a : n.operands) {
                e.operand_taint.push_back(a.mode == ir::AddrMode::direct ? std::vector<int>{} : taint.of(a.reg));
                e.operand_gep.push_back(a.mode == ir::AddrMode::indexed);
            }
        } else if (n.kind != acfg::NodeKind::abstract_memory) {
            const ir::Instruction& in = n.instr;
            switch (in.op) {
                case ir::Op::load: {
                    id = make(EventKind::read);
                    s_.events[id].location = in.addr.location;
                    s_.events[id].address = in.addr;
                    address_deps(id, in.addr);
                    taint.regs[in.dst.id] = {id};
                    break;
                }
                case ir::Op::store: {
                    id = make(EventKind::write);
                    s_.events[id].location = in.addr.location;
                    s_.events[id].address = in.addr;
                    s_.events[id].value = in.operands.at(0);
                    address_deps(id, in.addr);
                    for (int src : taint.of_operands(in.operands)) s_.data.emplace_back(src, id);
                    break;
                }
                case ir::Op::alu: taint.regs[in.dst.id] = taint.of_operands(in.operands); break;
                case ir::Op::beqz: id = make(EventKind::branch); break;
                case ir::Op::fence:
                    id = make(EventKind::fence);
                    s_.events[id].fence = in.fence;
                    break;
                case ir::Op::protect:
                    if (transient) taint.regs[in.cond.id].clear();
                    break;
                default: break;
            }
        }
        if (id >= 0) {
            for (const auto& b : branches)
                if (threads_[thread].regions[b.node].count(node))
                    for (int src : b.taint) s_.ctrl.emplace_back(src, id);
        }
        te.event = id;
        s_.trace.push_back(te);
        return id;
    }

    void window_branch(int thread, int branch_event, int start, Taint taint, std::vector<Branch> branches) {
        Window w;
        w.primitive = Primitive::branch;
        w.source = branch_event;
        w.trace_begin = s_.trace.size();
        const int widx = static_cast<int>(s_.windows.size());
        s_.windows.push_back(w);
        int count = 0;
        int node = start;
        const auto& g = *threads_[thread].g;
        while (node != acfg::kExit) {
            const acfg::Node& n = g.nodes[node];
            if (n.is_branch()) {
                s_.windows[widx].truncated_at_branch = true;
                break;
            }
            if (n.kind == acfg::NodeKind::instr && n.instr.op == ir::Op::fence) break;
            bool memory = n.kind == acfg::NodeKind::abstract_memory || n.instr.is_memory();
            if (memory && count >= cfg_.d_spec) break;
            int ev = fetch(thread, node, true, widx, taint, branches);
            if (ev >= 0) s_.windows[widx].events.push_back(ev);
            if (memory) ++count;
            node = n.next;
        }
        if (node == acfg::kExit) {
            Event e;
            e.id = static_cast<int>(s_.events.size());
            e.kind = EventKind::spec_bottom;
            e.thread = thread;
            e.transient = true;
            e.window = widx;
            e.label = "B_S";
            s_.events.push_back(e);
            s_.tfo[thread].push_back(e.id);
            s_.windows[widx].events.push_back(e.id);
            s_.windows[widx].reaches_exit = true;
        }
        s_.windows[widx].trace_end = s_.trace.size();
    }

    /// Walks a committed path, optionally opening branch windows and
    /// optionally turning everything from `transient_from` on into a
    /// transient suffix bounded by d_spec.
    void walk(int thread, const std::vector<int>& path, bool branch_windows, int transient_from = -1,
              Primitive suffix_kind = Primitive::store_forward) {
        Taint taint;
        std::vector<Branch> branches;
        const auto& g = *threads_[thread].g;
        int suffix_window = -1;
        int count = 0;
        for (std::size_t i = 0; i < path.size(); ++i) {
            int node = path[i];
            const acfg::Node& n = g.nodes[node];
            bool transient = transient_from >= 0 && static_cast<int>(i) >= transient_from;
            if (transient && suffix_window < 0) {
                Window w;
                w.primitive = suffix_kind;
                w.trace_begin = s_.trace.size();
                suffix_window = static_cast<int>(s_.windows.size());
                s_.windows.push_back(w);
            }
            if (transient) {
                bool memory = n.kind == acfg::NodeKind::abstract_memory || n.instr.is_memory();
                if (n.kind == acfg::NodeKind::instr && n.instr.op == ir::Op::fence) break;
                if (memory && count >= cfg_.d_spec) break;
                if (memory) ++count;
            }
            int ev = fetch(thread, node, transient, transient ? suffix_window : -1, taint, branches);
            if (transient && ev >= 0) {
                s_.windows[suffix_window].events.push_back(ev);
                if (s_.windows[suffix_window].source < 0) s_.windows[suffix_window].source = ev;
            }
            if (n.is_branch()) {
                int chosen = i + 1 < path.size() ? path[i + 1] : acfg::kExit;
                int other = n.taken == chosen ? n.next : n.taken;
                s_.path += std::string(s_.path.empty() ? "" : ".") + (chosen == n.taken ? "T" : "F");
                branches.push_back(Branch{ev, node, taint.of(n.instr.cond)});
                if (branch_windows && !transient && cfg_.d_spec > 0 && other != chosen)
                    window_branch(thread, ev, other, taint, branches);
            }
        }
        if (suffix_window >= 0) s_.windows[suffix_window].trace_end = s_.trace.size();
    }

    EventStructure finish() {
        Event bot;
        bot.kind = EventKind::bottom;
        bot.id = static_cast<int>(s_.events.size());
        s_.events.push_back(bot);
        for (std::size_t i = 0; i < s_.events.size(); ++i) s_.events[i].id = static_cast<int>(i);
        s_.tfo_pos.assign(s_.events.size(), -1);
        s_.po_pos.assign(s_.events.size(), -1);
        s_.po_pos[0] = -1;
        for (const auto& seq : s_.tfo) {
            int p = 0;
            for (std::size_t k = 0; k < seq.size(); ++k) {
                s_.tfo_pos[seq[k]] = static_cast<int>(k);
                if (!s_.events[seq[k]].transient) s_.po_pos[seq[k]] = p++;
            }
        }
        for (auto* rel : {&s_.addr, &s_.addr_gep, &s_.data, &s_.ctrl}) {
            std::sort(rel->begin(), rel->end());
            rel->erase(std::unique(rel->begin(), rel->end()), rel->end());
        }
        return std::move(s_);
    }

    EventStructure& current() { return s_; }

private:
    const std::vector<ThreadInfo>& threads_;
    SpecConfig cfg_;
    const ir::Program* prog_;
    EventStructure s_;
};

inline void enumerate_paths(const acfg::ACfg& g, int node, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (node == acfg::kExit) {
        out.push_back(cur);
        return;
    }
    cur.push_back(node);
    for (int s : g.nodes[node].successors()) enumerate_paths(g, s, cur, out);
    cur.pop_back();
}

inline bool may_alias(const ir::Program* p, const std::string& a, const std::string& b) {
    if (a == b) return true;
    if (!p) return false;
    return p->aliases.count({std::min(a, b), std::max(a, b)}) > 0;
}

}  // namespace detail

inline std::vector<std::vector<int>> committed_paths(const acfg::ACfg& g) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    if (g.entry == acfg::kExit) return {{}};
    detail::enumerate_paths(g, g.entry, cur, out);
    return out;
}

/// One structure per combination of committed paths (one per thread); with
/// `branch` each structure also carries a window per branch. With
/// store_forward / alias_pred, additional variant structures are produced
/// per primitive read site, built from the plain committed path.
inline std::vector<EventStructure> enumerate_event_structures(const std::vector<acfg::ACfg>& gs, const SpecConfig& cfg,
                                                              const ir::Program* prog = nullptr) {
    if (gs.size() > 1 && cfg.any() && cfg.d_spec > 0)
        throw UnsupportedError("speculation primitives require a single-thread program");
    std::vector<detail::ThreadInfo> threads;
    for (const auto& g : gs) {
        detail::ThreadInfo t;
        t.g = &g;
        t.regions.resize(g.nodes.size());
        auto pd = g.postdominators();
        for (std::size_t v = 0; v < g.nodes.size(); ++v)
            if (g.nodes[v].is_branch()) t.regions[v] = g.control_region(static_cast<int>(v), pd);
        threads.push_back(std::move(t));
    }
    std::vector<std::vector<std::vector<int>>> per_thread;
    for (const auto& g : gs) per_thread.push_back(committed_paths(g));

    std::vector<EventStructure> out;
    std::vector<std::size_t> choice(gs.size(), 0);
    for (;;) {
        detail::Builder b(threads, cfg, prog);
        for (std::size_t t = 0; t < gs.size(); ++t) {
            if (!b.current().path.empty()) b.current().path += "|";
            b.walk(static_cast<int>(t), per_thread[t][choice[t]], cfg.branch);
        }
        out.push_back(b.finish());

        if (gs.size() == 1 && (cfg.store_forward || cfg.alias_pred) && cfg.d_spec > 0) {
            const auto& path = per_thread[0][choice[0]];
            const auto& g = gs[0];
            std::vector<std::pair<std::string, int>> stores;  // location, path index
            for (std::size_t i = 0; i < path.size(); ++i) {
                const auto& n = g.nodes[path[i]];
                if (n.kind != acfg::NodeKind::instr) continue;
                if (n.instr.op == ir::Op::store) {
                    stores.emplace_back(n.instr.addr.location, static_cast<int>(i));
                    continue;
                }
                if (n.instr.op != ir::Op::load) continue;
                const std::string& loc = n.instr.addr.location;
                bool sf = false, psf = !stores.empty();
                for (const auto& [sl, si] : stores)
                    if (detail::may_alias(prog, sl, loc)) sf = true;
                auto variant = [&](Primitive kind) {
                    detail::Builder vb(threads, cfg, prog);
                    vb.walk(0, path, false, static_cast<int>(i), kind);
                    EventStructure s = vb.finish();
                    s.variant_kind = kind;
                    s.variant = s.windows.empty() ? -1 : s.windows.front().source;
                    s.path = s.path + "/" + to_string(kind) + "@" + std::to_string(i);
                    if (s.variant >= 0) out.push_back(std::move(s));
                };
                if (sf && cfg.store_forward) variant(Primitive::store_forward);
                if (psf && cfg.alias_pred) variant(Primitive::alias_pred);
            }
        }

        std::size_t t = 0;
        while (t < gs.size()) {
            if (++choice[t] < per_thread[t].size()) break;
            choice[t] = 0;
            ++t;
        }
        if (t == gs.size()) break;
    }
    return out;
}

/// Recomputes dependencies for a structure (they are produced during
/// construction; this exposes them as one bundle).
struct Dependencies {
    std::vector<Pair> addr, addr_gep, data, ctrl;
};

inline Dependencies compute_deps(const EventStructure& s) { return {s.addr, s.addr_gep, s.data, s.ctrl}; }

}  // namespace lcm::axiom

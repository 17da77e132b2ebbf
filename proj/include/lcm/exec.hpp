#pragma once

// Candidate executions: architectural witnesses (rf, co, fr) checked against
// TSO, and microarchitectural witnesses (rfx, cox, frx) over xstate checked
// against the confidentiality predicate.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "lcm/axiom.hpp"
#include "lcm/error.hpp"

namespace lcm::exec {

using axiom::EventKind;
using axiom::EventStructure;
using axiom::Pair;

enum class Mode { none, R, RW };

inline const char* to_string(Mode m) { return m == Mode::R ? "R" : m == Mode::RW ? "RW" : "-"; }

struct ExecConfig {
    bool silent_stores = false;
    std::string mcm = "tso";
};

struct Candidate {
    std::shared_ptr<const EventStructure> s;       // resolved structure
    std::size_t structure_index = 0;               // index in the enumerated structure list
    std::string choices;                           // abstract-op / alias-world resolution
    // architectural witness
    std::vector<int> rf;                           // source of each committed read, -1 otherwise
    std::map<std::string, std::vector<int>> co;    // location -> committed writes in coherence order
    // microarchitectural witness
    std::vector<std::string> xstate;               // accessed xstate per event ("" if none)
    std::vector<int> rfx;                          // xstate source per access, -1 if none
    std::vector<Mode> mode;
    std::map<std::string, std::vector<int>> cox;   // xstate -> writers in order (top implicit first)
    std::map<std::string, int> bottom_rfx;         // xstate -> source observed by bottom
    std::set<int> silent;                          // writes performed silently
    std::set<int> silent_definite;                 // silent writes whose operand provably matches

    const EventStructure& structure() const { return *s; }

    std::vector<Pair> rf_pairs() const {
        std::vector<Pair> out;
        for (std::size_t e = 0; e < rf.size(); ++e)
            if (rf[e] >= 0) out.emplace_back(rf[e], static_cast<int>(e));
        return out;
    }
    std::vector<Pair> co_pairs() const {
        std::vector<Pair> out;
        for (const auto& [loc, ws] : co)
            for (std::size_t i = 0; i < ws.size(); ++i) {
                out.emplace_back(s->top(), ws[i]);
                for (std::size_t j = i + 1; j < ws.size(); ++j) out.emplace_back(ws[i], ws[j]);
            }
        std::sort(out.begin(), out.end());
        return out;
    }
    std::vector<Pair> co_immediate() const {
        std::vector<Pair> out;
        for (const auto& [loc, ws] : co)
            for (std::size_t i = 0; i < ws.size(); ++i) out.emplace_back(i == 0 ? s->top() : ws[i - 1], ws[i]);
        return out;
    }
    std::vector<Pair> fr_pairs() const {
        std::vector<Pair> out;
        for (std::size_t r = 0; r < rf.size(); ++r) {
            if (rf[r] < 0) continue;
            const auto& ws = co.at(s->events[r].location);
            bool after = rf[r] == s->top();
            for (int w : ws) {
                if (after) out.emplace_back(static_cast<int>(r), w);
                if (w == rf[r]) after = true;
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    std::vector<Pair> rfx_pairs() const {
        std::vector<Pair> out;
        for (std::size_t e = 0; e < rfx.size(); ++e)
            if (rfx[e] >= 0) out.emplace_back(rfx[e], static_cast<int>(e));
        for (const auto& [xs, src] : bottom_rfx) out.emplace_back(src, s->bottom());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
    std::vector<Pair> cox_pairs() const {
        std::vector<Pair> out;
        for (const auto& [xs, ws] : cox)
            for (std::size_t i = 0; i < ws.size(); ++i) {
                out.emplace_back(s->top(), ws[i]);
                for (std::size_t j = i + 1; j < ws.size(); ++j) out.emplace_back(ws[i], ws[j]);
            }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
    /// frx = rfx^-1 ; cox (bottom included as a reader of every xstate).
    std::vector<Pair> frx_pairs() const {
        std::vector<Pair> out;
        auto add = [&](int reader, int src, const std::string& xs) {
            auto it = cox.find(xs);
            if (it == cox.end()) return;
            bool after = src == s->top();
            for (int w : it->second) {
                if (after && w != reader) out.emplace_back(reader, w);
                if (w == src) after = true;
            }
        };
        for (std::size_t e = 0; e < rfx.size(); ++e)
            if (rfx[e] >= 0) add(static_cast<int>(e), rfx[e], xstate[e]);
        for (const auto& [xs, src] : bottom_rfx) add(s->bottom(), src, xs);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
    bool is_writer(int e) const { return mode[e] == Mode::RW; }
};

// ---------------------------------------------------------------------------
// Resolution of abstract memory operations and alias declarations

namespace detail {

struct UnionFind {
    std::map<std::string, std::string> parent;
    std::string find(const std::string& x) {
        auto it = parent.find(x);
        if (it == parent.end() || it->second == x) return x;
        return it->second = find(it->second);
    }
    void unite(const std::string& a, const std::string& b) {
        std::string ra = find(a), rb = find(b);
        if (ra == rb) return;
        if (rb < ra) std::swap(ra, rb);
        parent[rb] = ra;
        parent.emplace(ra, ra);
    }
};

inline void insert_sorted(std::vector<Pair>& rel, Pair p) {
    auto it = std::lower_bound(rel.begin(), rel.end(), p);
    if (it == rel.end() || *it != p) rel.insert(it, p);
}

}  // namespace detail

struct Resolution {
    std::vector<int> amo_choice;     // per abstract op in event order: 2*operand + (store ? 1 : 0)
    std::vector<bool> merged;        // per alias declaration
};

inline std::vector<Resolution> resolutions(const EventStructure& s, const ir::Program* prog) {
    std::vector<int> arity;
    for (const auto& e : s.events)
        if (e.kind == EventKind::amo) arity.push_back(static_cast<int>(e.operands.size()) * 2);
    std::size_t aliases = prog ? prog->aliases.size() : 0;
    std::vector<Resolution> out;
    Resolution r;
    r.amo_choice.assign(arity.size(), 0);
    r.merged.assign(aliases, false);
    for (;;) {
        out.push_back(r);
        std::size_t i = 0;
        for (; i < arity.size(); ++i) {
            if (++r.amo_choice[i] < arity[i]) break;
            r.amo_choice[i] = 0;
        }
        if (i < arity.size()) continue;
        std::size_t k = 0;
        for (; k < aliases; ++k) {
            if (!r.merged[k]) {
                r.merged[k] = true;
                break;
            }
            r.merged[k] = false;
        }
        if (k == aliases) break;
    }
    return out;
}

inline std::string describe(const Resolution& r, const EventStructure& s, const ir::Program* prog) {
    std::string out;
    std::size_t k = 0;
    for (const auto& e : s.events) {
        if (e.kind != EventKind::amo) continue;
        int c = r.amo_choice[k++];
        out += (out.empty() ? "" : " ") + e.label + "=" + (c % 2 ? "store " : "load ") +
               ir::to_string(e.operands[c / 2]);
    }
    if (prog) {
        std::size_t i = 0;
        for (const auto& [a, b] : prog->aliases) {
            out += (out.empty() ? "" : " ") + a + (r.merged[i] ? "==" : "!=") + b;
            ++i;
        }
    }
    return out;
}

inline std::shared_ptr<EventStructure> resolve(const EventStructure& base, const Resolution& r,
                                               const ir::Program* prog) {
    auto s = std::make_shared<EventStructure>(base);
    detail::UnionFind uf;
    if (prog) {
        std::size_t i = 0;
        for (const auto& [a, b] : prog->aliases) {
            if (r.merged[i]) uf.unite(a, b);
            ++i;
        }
    }
    std::size_t k = 0;
    for (auto& e : s->events) {
        if (e.kind == EventKind::amo) {
            int c = r.amo_choice[k++];
            std::size_t op = static_cast<std::size_t>(c / 2);
            e.kind = c % 2 ? EventKind::write : EventKind::read;
            e.address = e.operands[op];
            e.location = e.operands[op].location;
            for (int src : e.operand_taint[op]) {
                detail::insert_sorted(s->addr, {src, e.id});
                if (e.operand_gep[op]) detail::insert_sorted(s->addr_gep, {src, e.id});
            }
        }
        if (e.is_memory()) e.location = uf.find(e.location);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Acyclicity helper

class Digraph {
public:
    explicit Digraph(std::size_t n) : adj_(n) {}
    std::size_t add_node() {
        adj_.emplace_back();
        return adj_.size() - 1;
    }
    void edge(int a, int b) { adj_[a].push_back(b); }
    bool acyclic() const {
        std::vector<int> indeg(adj_.size(), 0);
        for (const auto& v : adj_)
            for (int w : v) ++indeg[w];
        std::vector<int> work;
        for (std::size_t i = 0; i < adj_.size(); ++i)
            if (!indeg[i]) work.push_back(static_cast<int>(i));
        std::size_t seen = 0;
        while (!work.empty()) {
            int v = work.back();
            work.pop_back();
            ++seen;
            for (int w : adj_[v])
                if (--indeg[w] == 0) work.push_back(w);
        }
        return seen == adj_.size();
    }

private:
    std::vector<std::vector<int>> adj_;
};

// ---------------------------------------------------------------------------
// Consistency (TSO)

inline bool is_committed_memory(const EventStructure& s, int e) {
    return s.events[e].is_memory() && !s.events[e].transient;
}

/// sc_per_loc: acyclic(rf + co + fr + po_loc).
inline bool sc_per_loc(const Candidate& c) {
    const auto& s = *c.s;
    Digraph g(s.size());
    for (auto [a, b] : c.rf_pairs()) g.edge(a, b);
    for (auto [a, b] : c.co_immediate()) g.edge(a, b);
    for (std::size_t r = 0; r < c.rf.size(); ++r) {
        if (c.rf[r] < 0) continue;
        const auto& ws = c.co.at(s.events[r].location);
        if (c.rf[r] == s.top()) {
            if (!ws.empty()) g.edge(static_cast<int>(r), ws.front());
        } else {
            auto it = std::find(ws.begin(), ws.end(), c.rf[r]);
            if (it != ws.end() && it + 1 != ws.end()) g.edge(static_cast<int>(r), *(it + 1));
        }
    }
    for (std::size_t t = 0; t < s.tfo.size(); ++t) {
        std::map<std::string, int> last;
        for (int e : s.tfo[t]) {
            if (!is_committed_memory(s, e)) continue;
            auto it = last.find(s.events[e].location);
            if (it != last.end()) g.edge(it->second, e);
            last[s.events[e].location] = e;
        }
    }
    return g.acyclic();
}

/// causality: acyclic(rfe + co + fr + ppo + fence), with TSO ppo = W->W and
/// R->M in program order.
inline bool causality(const Candidate& c) {
    const auto& s = *c.s;
    Digraph g(s.size());
    for (auto [a, b] : c.rf_pairs())
        if (a == s.top() || !s.same_thread(a, b)) g.edge(a, b);
    for (auto [a, b] : c.co_immediate()) g.edge(a, b);
    for (auto [a, b] : c.fr_pairs()) g.edge(a, b);
    for (std::size_t t = 0; t < s.tfo.size(); ++t) {
        std::vector<int> seq;
        for (int e : s.tfo[t])
            if (!s.events[e].transient && (s.events[e].is_memory() || s.events[e].kind == EventKind::fence))
                seq.push_back(e);
        // ppo
        for (std::size_t i = 0; i < seq.size(); ++i) {
            const auto& a = s.events[seq[i]];
            if (!a.is_memory()) continue;
            bool want_read = a.kind == EventKind::read;
            bool got_write = false, got_read = !want_read;
            for (std::size_t j = i + 1; j < seq.size() && !(got_write && got_read); ++j) {
                const auto& b = s.events[seq[j]];
                if (b.kind == EventKind::write && !got_write) {
                    g.edge(a.id, b.id);
                    got_write = true;
                } else if (b.kind == EventKind::read && !got_read) {
                    g.edge(a.id, b.id);
                    got_read = true;
                }
            }
        }
        // fences
        for (std::size_t i = 0; i < seq.size(); ++i) {
            const auto& f = s.events[seq[i]];
            if (f.kind != EventKind::fence) continue;
            int v = static_cast<int>(g.add_node());
            for (std::size_t j = 0; j < i; ++j) {
                const auto& a = s.events[seq[j]];
                if (!a.is_memory()) continue;
                if (f.fence == ir::FenceKind::lfence && a.kind != EventKind::read) continue;
                g.edge(a.id, v);
            }
            for (std::size_t j = i + 1; j < seq.size(); ++j)
                if (s.events[seq[j]].is_memory()) g.edge(v, seq[j]);
        }
    }
    return g.acyclic();
}

inline bool check_consistency(const Candidate& c) { return sc_per_loc(c) && causality(c); }

// ---------------------------------------------------------------------------
// Architectural witnesses

inline std::vector<Candidate> architectural_witnesses(std::shared_ptr<const EventStructure> sp) {
    const auto& s = *sp;
    std::vector<int> reads;
    std::map<std::string, std::vector<std::vector<int>>> writes_by_thread;  // loc -> per thread po-ordered
    std::set<std::string> locs;
    for (std::size_t t = 0; t < s.tfo.size(); ++t)
        for (int e : s.tfo[t]) {
            if (!is_committed_memory(s, e)) continue;
            const auto& ev = s.events[e];
            locs.insert(ev.location);
            if (ev.kind == EventKind::read) reads.push_back(e);
            else {
                auto& v = writes_by_thread[ev.location];
                v.resize(s.tfo.size());
                v[t].push_back(e);
            }
        }
    // rf candidates per read (pruned by sc_per_loc necessary conditions)
    std::vector<std::vector<int>> options;
    for (int r : reads) {
        const auto& ev = s.events[r];
        std::vector<int> opt;
        int last_own = -1;
        for (int e : s.tfo[ev.thread]) {
            if (e == r) break;
            if (is_committed_memory(s, e) && s.events[e].kind == EventKind::write && s.events[e].location == ev.location)
                last_own = e;
        }
        if (last_own < 0) opt.push_back(s.top());
        else opt.push_back(last_own);
        auto it = writes_by_thread.find(ev.location);
        if (it != writes_by_thread.end())
            for (std::size_t t = 0; t < it->second.size(); ++t)
                if (static_cast<int>(t) != ev.thread)
                    for (int w : it->second[t]) opt.push_back(w);
        options.push_back(std::move(opt));
    }
    // co candidates per location: interleavings of per-thread write sequences
    std::vector<std::string> wlocs;
    std::vector<std::vector<std::vector<int>>> co_options;
    for (const auto& [loc, per] : writes_by_thread) {
        std::vector<std::vector<int>> orders;
        std::vector<std::size_t> idx(per.size(), 0);
        std::vector<int> cur;
        std::size_t total = 0;
        for (const auto& v : per) total += v.size();
        std::function<void()> rec = [&]() {
            if (cur.size() == total) {
                orders.push_back(cur);
                return;
            }
            for (std::size_t t = 0; t < per.size(); ++t) {
                if (idx[t] >= per[t].size()) continue;
                cur.push_back(per[t][idx[t]++]);
                rec();
                --idx[t];
                cur.pop_back();
            }
        };
        rec();
        wlocs.push_back(loc);
        co_options.push_back(std::move(orders));
    }

    std::vector<Candidate> out;
    std::vector<std::size_t> rsel(reads.size(), 0), csel(wlocs.size(), 0);
    for (;;) {
        Candidate c;
        c.s = sp;
        c.rf.assign(s.size(), -1);
        for (std::size_t i = 0; i < reads.size(); ++i) c.rf[reads[i]] = options[i][rsel[i]];
        for (const auto& l : locs) c.co[l];
        for (std::size_t i = 0; i < wlocs.size(); ++i) c.co[wlocs[i]] = co_options[i][csel[i]];
        if (check_consistency(c)) out.push_back(std::move(c));
        std::size_t i = 0;
        for (; i < reads.size(); ++i) {
            if (++rsel[i] < options[i].size()) break;
            rsel[i] = 0;
        }
        if (i < reads.size()) continue;
        std::size_t j = 0;
        for (; j < wlocs.size(); ++j) {
            if (++csel[j] < co_options[j].size()) break;
            csel[j] = 0;
        }
        if (j == wlocs.size()) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Microarchitectural witnesses

inline std::string xstate_name(const EventStructure& s, int thread, const std::string& loc) {
    return s.tfo.size() > 1 ? s.threads[thread] + ":" + loc : loc;
}

inline bool fence_between(const EventStructure& s, int a, int b) {
    // any fence tfo-strictly between a (or top) and b in b's thread
    const auto& seq = s.tfo[s.events[b].thread];
    int from = a == s.top() ? -1 : s.tfo_pos[a];
    for (int k = from + 1; k < s.tfo_pos[b]; ++k)
        if (s.events[seq[k]].kind == EventKind::fence) return true;
    return false;
}

struct MicroChoice {
    int primitive_source = -1;          // rfx source forced on the primitive read
    std::string primitive_xstate;       // xstate read by the primitive read
    std::set<int> silent;
};

/// Deterministic tfo scan producing comx for given choices.
inline void scan_comx(Candidate& c, const MicroChoice& m) {
    const auto& s = *c.s;
    c.xstate.assign(s.size(), "");
    c.rfx.assign(s.size(), -1);
    c.mode.assign(s.size(), Mode::none);
    c.cox.clear();
    c.bottom_rfx.clear();
    c.silent = m.silent;
    std::map<std::string, int> latest;
    for (std::size_t t = 0; t < s.tfo.size(); ++t) {
        for (int e : s.tfo[t]) {
            const auto& ev = s.events[e];
            if (!ev.is_memory()) continue;
            std::string xs = xstate_name(s, static_cast<int>(t), ev.location);
            if (e == s.variant && !m.primitive_xstate.empty()) xs = m.primitive_xstate;
            c.xstate[e] = xs;
            c.cox[xs];
            auto it = latest.find(xs);
            int cur = it == latest.end() ? s.top() : it->second;
            if (ev.kind == EventKind::write) {
                c.rfx[e] = cur;
                if (m.silent.count(e)) {
                    c.mode[e] = Mode::R;
                } else {
                    c.mode[e] = Mode::RW;
                    latest[xs] = e;
                    c.cox[xs].push_back(e);
                }
            } else {
                int src = (e == s.variant && m.primitive_source >= 0) ? m.primitive_source : cur;
                c.rfx[e] = src;
                c.mode[e] = src == s.top() ? Mode::RW : Mode::R;
                if (c.mode[e] == Mode::RW) {
                    latest[xs] = e;
                    c.cox[xs].push_back(e);
                }
            }
        }
    }
    for (const auto& [xs, ws] : c.cox) {
        auto it = latest.find(xs);
        c.bottom_rfx[xs] = it == latest.end() ? s.top() : it->second;
    }
}

/// True iff the candidate's comx satisfies the structural rules (one rfx
/// source per access among same-xstate writers, access modes, cox total with
/// top first) and the confidentiality predicate: acyclic(rfx + cox +
/// tfo_loc), with every frx edge against tfo_loc justified by the
/// structure's speculation primitive on its source read.
inline bool check_confidentiality(const Candidate& c) {
    const auto& s = *c.s;
    // structural checks
    std::map<std::string, std::map<int, std::size_t>> cox_pos;
    for (const auto& [xs, ws] : c.cox) {
        auto& pos = cox_pos[xs];
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (c.mode[ws[i]] != Mode::RW || c.xstate[ws[i]] != xs) return false;
            pos[ws[i]] = i + 1;
        }
    }
    auto writer_of = [&](int w, const std::string& xs) {
        if (w == s.top()) return true;
        return w >= 0 && c.xstate[w] == xs && c.mode[w] == Mode::RW;
    };
    for (std::size_t e = 0; e < s.size(); ++e) {
        const auto& ev = s.events[e];
        if (!ev.is_memory()) continue;
        if (c.rfx[e] < 0 || !writer_of(c.rfx[e], c.xstate[e])) return false;
        if (ev.kind == EventKind::write) {
            if (c.mode[e] != (c.silent.count(static_cast<int>(e)) ? Mode::R : Mode::RW)) return false;
        } else if (c.mode[e] != (c.rfx[e] == s.top() ? Mode::RW : Mode::R)) {
            return false;
        }
        if (c.mode[e] == Mode::RW && !cox_pos[c.xstate[e]].count(static_cast<int>(e))) return false;
        // xstate must be the event's own unless it is an alias-predicted primitive read
        std::string own = xstate_name(s, ev.thread, ev.location);
        if (c.xstate[e] != own && !(static_cast<int>(e) == s.variant && s.variant_kind == axiom::Primitive::alias_pred))
            return false;
    }
    for (const auto& [xs, src] : c.bottom_rfx)
        if (!writer_of(src, xs)) return false;

    // acyclic(rfx + cox + tfo_loc)
    Digraph g(s.size());
    for (auto [a, b] : c.rfx_pairs()) g.edge(a, b);
    for (const auto& [xs, ws] : c.cox) {
        int prev = s.top();
        for (int w : ws) {
            g.edge(prev, w);
            prev = w;
        }
    }
    for (std::size_t t = 0; t < s.tfo.size(); ++t) {
        std::map<std::string, int> last;
        for (int e : s.tfo[t]) {
            if (!s.events[e].is_memory()) continue;
            const auto& xs = c.xstate[e];
            auto it = last.find(xs);
            g.edge(it == last.end() ? s.top() : it->second, e);
            last[xs] = e;
        }
        for (const auto& [xs, e] : last) g.edge(e, s.bottom());
    }
    if (!g.acyclic()) return false;

    // frx back-edges against tfo_loc
    for (auto [a, w] : c.frx_pairs()) {
        if (!s.tfo_before(w, a) || a == s.bottom()) {
            if (a == s.bottom() && w != s.top()) {
                // bottom must observe the last writer: any frx from bottom is a back edge
                return false;
            }
            continue;
        }
        if (a != s.variant) return false;
        if (fence_between(s, w, a)) return false;
    }
    return true;
}

/// Whether the structure's primitive actually fired in this candidate
/// (variant structures model misprediction only).
inline bool primitive_fired(const Candidate& c) {
    const auto& s = *c.s;
    if (s.variant < 0) return true;
    int p = s.variant;
    if (s.variant_kind == axiom::Primitive::alias_pred)
        return c.xstate[p] != xstate_name(s, s.events[p].thread, s.events[p].location);
    // store forwarding: p skips at least one store
    for (auto [a, w] : c.frx_pairs())
        if (a == p && s.tfo_before(w, p) && s.events[w].kind == EventKind::write) return true;
    return false;
}

inline std::vector<MicroChoice> primitive_choices(const Candidate& base) {
    const auto& s = *base.s;
    std::vector<MicroChoice> out;
    if (s.variant < 0) return {MicroChoice{}};
    int p = s.variant;
    const auto& pe = s.events[p];
    if (s.variant_kind == axiom::Primitive::store_forward) {
        // writers of p's xstate before p in the default scan
        Candidate probe = base;
        scan_comx(probe, {});
        const auto& ws = probe.cox[probe.xstate[p]];
        std::vector<int> before{s.top()};
        for (int w : ws)
            if (s.tfo_before(w, p)) before.push_back(w);
        for (std::size_t j = 0; j + 1 < before.size(); ++j) {
            bool skips_store = false;
            for (std::size_t k = j + 1; k < before.size(); ++k)
                if (s.events[before[k]].kind == EventKind::write) skips_store = true;
            if (!skips_store || fence_between(s, before[j + 1], p)) continue;
            MicroChoice m;
            m.primitive_source = before[j];
            out.push_back(m);
        }
    } else {
        std::string own = xstate_name(s, pe.thread, pe.location);
        for (int w : s.tfo[pe.thread]) {
            if (w == p) break;
            const auto& we = s.events[w];
            if (we.kind != EventKind::write || we.transient) continue;
            std::string xs = xstate_name(s, we.thread, we.location);
            if (xs == own || fence_between(s, w, p)) continue;
            MicroChoice m;
            m.primitive_source = w;
            m.primitive_xstate = xs;
            out.push_back(m);
        }
    }
    return out;
}

/// Writes that may execute silently: committed writes whose coherence
/// predecessor is a program write.
inline std::vector<int> silent_candidates(const Candidate& c) {
    std::vector<int> out;
    for (const auto& [loc, ws] : c.co)
        for (std::size_t i = 1; i < ws.size(); ++i) out.push_back(ws[i]);
    std::sort(out.begin(), out.end());
    return out;
}

inline bool definitely_equal(const axiom::Event& a, const axiom::Event& b) {
    if (!a.value || !b.value) return false;
    return !a.value->is_reg() && *a.value == *b.value;
}

/// All consistent and confidential candidates of one structure.
inline std::vector<Candidate> enumerate_candidates(const EventStructure& base, const ExecConfig& cfg,
                                                   const ir::Program* prog = nullptr, std::size_t index = 0,
                                                   const std::function<void()>& tick = {}) {
    if (cfg.mcm != "tso") throw UnsupportedError("unsupported memory model '" + cfg.mcm + "'");
    std::vector<Candidate> out;
    for (const auto& r : resolutions(base, prog)) {
        std::shared_ptr<const EventStructure> s = resolve(base, r, prog);
        std::string desc = describe(r, base, prog);
        for (auto& arch : architectural_witnesses(s)) {
            arch.structure_index = index;
            arch.choices = desc;
            std::vector<std::set<int>> silent_sets{{}};
            if (cfg.silent_stores) {
                auto cands = silent_candidates(arch);
                for (int w : cands) {
                    std::size_t n = silent_sets.size();
                    for (std::size_t i = 0; i < n; ++i) {
                        auto set = silent_sets[i];
                        set.insert(w);
                        silent_sets.push_back(std::move(set));
                    }
                }
            }
            for (const auto& silent : silent_sets) {
                for (auto m : primitive_choices(arch)) {
                    if (tick) tick();
                    m.silent = silent;
                    Candidate c = arch;
                    scan_comx(c, m);
                    for (int w : silent) {
                        const auto& ws = c.co.at(s->events[w].location);
                        auto it = std::find(ws.begin(), ws.end(), w);
                        if (it != ws.begin() && definitely_equal(s->events[*(it - 1)], s->events[w]))
                            c.silent_definite.insert(w);
                    }
                    if (check_confidentiality(c) && primitive_fired(c)) out.push_back(std::move(c));
                }
            }
        }
    }
    return out;
}

}  // namespace lcm::exec

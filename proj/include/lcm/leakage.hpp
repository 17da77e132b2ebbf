#pragma once

// Leak detection: an architecturally implied microarchitectural relation
// that is missing from a consistent candidate marks a culprit edge; its
// receiver's rfx ancestry are the transmitters, classified by dependency
// chains into the five transmitter classes.

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lcm/acfg.hpp"
#include "lcm/axiom.hpp"
#include "lcm/error.hpp"
#include "lcm/exec.hpp"
#include "lcm/ir.hpp"

namespace lcm::leakage {

using axiom::EventKind;
using axiom::EventStructure;
using axiom::Pair;
using exec::Candidate;

// ---------------------------------------------------------------------------
// Vocabulary

enum class CulpritKind { rf_without_rfx, co_without_cox_frx, co_imm_without_rfx, fr_without_frx, observer };

inline const char* to_string(CulpritKind k) {
    switch (k) {
        case CulpritKind::rf_without_rfx: return "rf_without_rfx";
        case CulpritKind::co_without_cox_frx: return "co_without_cox_frx";
        case CulpritKind::co_imm_without_rfx: return "co_imm_without_rfx";
        case CulpritKind::fr_without_frx: return "fr_without_frx";
        case CulpritKind::observer: return "observer";
    }
    return "?";
}

/// Ordered by severity (lowest first).
enum class TClass { address, control, data, universal_control, universal_data };

inline const char* to_string(TClass c) {
    switch (c) {
        case TClass::address: return "address";
        case TClass::control: return "control";
        case TClass::data: return "data";
        case TClass::universal_control: return "universal_control";
        case TClass::universal_data: return "universal_data";
    }
    return "?";
}

inline const char* short_name(TClass c) {
    switch (c) {
        case TClass::address: return "A";
        case TClass::control: return "C";
        case TClass::data: return "D";
        case TClass::universal_control: return "U_C";
        case TClass::universal_data: return "U_D";
    }
    return "?";
}

inline std::optional<TClass> parse_class(std::string_view s) {
    for (TClass c : {TClass::address, TClass::control, TClass::data, TClass::universal_control, TClass::universal_data})
        if (s == to_string(c) || s == short_name(c)) return c;
    if (s == "xstate") return TClass::address;
    return std::nullopt;
}

inline std::set<TClass> all_classes() {
    return {TClass::address, TClass::control, TClass::data, TClass::universal_control, TClass::universal_data};
}

struct CulpritEdge {
    CulpritKind kind = CulpritKind::observer;
    int from = 0;
    int to = 0;
    auto operator<=>(const CulpritEdge&) const = default;
};

struct ChainEdge {
    std::string relation;   // addr, addr_gep, data, ctrl, rf, rfx
    int from = 0;
    int to = 0;
};

struct Transmitter {
    int event = 0;
    TClass cls = TClass::address;
    bool transient = false;
    std::optional<int> access;
    std::optional<int> upstream;
    std::vector<ChainEdge> chain;
    bool gep = false;        // final link into the access is addr_gep
    bool data_field = false; // silent-store transmitter of the xstate data field
};

struct LeakWitness {
    std::shared_ptr<const Candidate> candidate;
    CulpritEdge culprit;
    int receiver = 0;
    std::vector<int> transmitter_events;
    std::vector<Transmitter> transmitters;   // filled by classify_transmitters
};

class Deadline {
public:
    Deadline() = default;
    explicit Deadline(double seconds)
        : end_(std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                      std::chrono::duration<double>(seconds))),
          armed_(seconds > 0) {}
    void check() const {
        if (armed_ && std::chrono::steady_clock::now() > end_) throw TimeoutError();
    }

private:
    std::chrono::steady_clock::time_point end_{};
    bool armed_ = false;
};

// ---------------------------------------------------------------------------
// Implied comx: the committed-only replay of the candidate

struct Implied {
    std::vector<int> rfx;                    // per committed access
    std::map<std::string, int> bottom_rfx;
};

inline Implied implied_comx(const Candidate& c) {
    const auto& s = *c.s;
    Implied out;
    out.rfx.assign(s.size(), -1);
    std::map<std::string, int> latest;
    for (std::size_t t = 0; t < s.tfo.size(); ++t)
        for (int e : s.tfo[t]) {
            const auto& ev = s.events[e];
            if (!ev.is_memory() || ev.transient) continue;
            std::string xs = exec::xstate_name(s, static_cast<int>(t), ev.location);
            auto it = latest.find(xs);
            int cur = it == latest.end() ? s.top() : it->second;
            out.rfx[e] = cur;
            if (ev.kind == EventKind::write || cur == s.top()) latest[xs] = e;
        }
    for (const auto& [xs, ws] : c.cox) {
        auto it = latest.find(xs);
        out.bottom_rfx[xs] = it == latest.end() ? s.top() : it->second;
    }
    return out;
}

/// Culprit edges of one candidate (the literal mapping rules).
inline std::vector<CulpritEdge> culprits(const Candidate& c, bool observer = true) {
    const auto& s = *c.s;
    Implied imp = implied_comx(c);
    std::vector<CulpritEdge> out;
    // rf => rfx
    for (auto [w, r] : c.rf_pairs())
        if (c.rfx[r] != imp.rfx[r]) out.push_back({CulpritKind::rf_without_rfx, w, r});
    // co => cox and frx ; co-immediate => rfx
    auto cox = c.cox_pairs();
    auto frx = c.frx_pairs();
    auto has = [](const std::vector<Pair>& rel, int a, int b) { return std::binary_search(rel.begin(), rel.end(), Pair{a, b}); };
    for (auto [w0, w1] : c.co_pairs()) {
        if (w0 == s.top()) continue;
        if (!has(cox, w0, w1) || !has(frx, w0, w1)) out.push_back({CulpritKind::co_without_cox_frx, w0, w1});
    }
    for (auto [w0, w1] : c.co_immediate())
        if (c.rfx[w1] != imp.rfx[w1]) out.push_back({CulpritKind::co_imm_without_rfx, w0, w1});
    // fr => frx
    for (auto [r, w] : c.fr_pairs())
        if (!has(frx, r, w)) out.push_back({CulpritKind::fr_without_frx, r, w});
    if (observer) {
        for (const auto& [xs, src] : c.bottom_rfx)
            if (src != s.top()) {
                out.push_back({CulpritKind::observer, s.top(), s.bottom()});
                break;
            }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Program events in the rfx ancestry of `e` (its source, that source's
/// source, and so on).
inline std::vector<int> rfx_ancestry(const Candidate& c, int e) {
    std::vector<int> out;
    int cur = c.rfx[e];
    while (cur > 0 && cur != c.s->bottom()) {
        out.push_back(cur);
        cur = c.rfx[cur];
    }
    return out;
}

inline std::vector<LeakWitness> detect_leaks(std::shared_ptr<const Candidate> cp, bool observer = true) {
    const Candidate& c = *cp;
    const auto& s = *c.s;
    std::vector<LeakWitness> out;
    for (const auto& cu : culprits(c, observer)) {
        LeakWitness w;
        w.candidate = cp;
        w.culprit = cu;
        std::set<int> tx;
        switch (cu.kind) {
            case CulpritKind::rf_without_rfx:
                w.receiver = cu.to;
                for (int a : rfx_ancestry(c, cu.to)) tx.insert(a);
                break;
            case CulpritKind::co_imm_without_rfx:
                w.receiver = cu.to;
                for (int a : rfx_ancestry(c, cu.to)) tx.insert(a);
                break;
            case CulpritKind::co_without_cox_frx:
            case CulpritKind::fr_without_frx: {
                int silent = -1;
                for (int e : {cu.to, cu.from})
                    if (silent < 0 && c.silent.count(e)) silent = e;
                if (silent >= 0) {
                    w.receiver = s.bottom();
                    tx.insert(silent);
                } else {
                    w.receiver = cu.to;
                    for (int a : rfx_ancestry(c, cu.to)) tx.insert(a);
                }
                break;
            }
            case CulpritKind::observer:
                w.receiver = s.bottom();
                for (const auto& [xs, src] : c.bottom_rfx) {
                    if (src == s.top()) continue;
                    tx.insert(src);
                    for (int a : rfx_ancestry(c, src)) tx.insert(a);
                }
                break;
        }
        w.transmitter_events.assign(tx.begin(), tx.end());
        if (!w.transmitter_events.empty()) out.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification

struct ClassifyConfig {
    std::optional<int> window;   // sliding window W (tfo-predecessor events)
    bool require_gep = false;
};

/// Per-structure predecessor index for dependency relations.
struct DepIndex {
    std::vector<std::vector<int>> addr, data, ctrl;
    std::set<Pair> gep;

    explicit DepIndex(const EventStructure& s) : addr(s.size()), data(s.size()), ctrl(s.size()) {
        for (auto [a, b] : s.addr) addr[b].push_back(a);
        for (auto [a, b] : s.data) data[b].push_back(a);
        for (auto [a, b] : s.ctrl) ctrl[b].push_back(a);
        gep.insert(s.addr_gep.begin(), s.addr_gep.end());
    }
};

namespace detail {

inline int value_source(const Candidate& c, int read) {
    const auto& s = *c.s;
    int src = s.events[read].transient ? c.rfx[read] : c.rf[read];
    if (src <= 0 || src >= static_cast<int>(s.size())) return -1;
    if (s.events[src].kind != EventKind::write || c.silent.count(src)) return -1;
    return src;
}

struct Closure {
    std::map<int, std::vector<ChainEdge>> path;  // read -> edges from that read to the transmitter
};

/// Reads whose value flows into `t` through `seed` edges extended by
/// (data ; rf)* steps, each with a witnessing chain.
inline Closure back_closure(const Candidate& c, const DepIndex& idx, int t, const std::vector<int>& seeds,
                            const char* seed_rel, const std::function<bool(int)>& in_window) {
    Closure out;
    std::vector<int> work;
    for (int x : seeds) {
        if (!in_window(x) || out.path.count(x)) continue;
        out.path[x] = {ChainEdge{seed_rel, x, t}};
        work.push_back(x);
    }
    std::sort(work.begin(), work.end());
    while (!work.empty()) {
        int x = work.front();
        work.erase(work.begin());
        int w = value_source(c, x);
        if (w < 0 || !in_window(w)) continue;
        const char* vf = c.s->events[x].transient ? "rfx" : "rf";
        for (int y : idx.data[w]) {
            if (!in_window(y) || out.path.count(y)) continue;
            std::vector<ChainEdge> p{ChainEdge{"data", y, w}, ChainEdge{vf, w, x}};
            const auto& rest = out.path[x];
            p.insert(p.end(), rest.begin(), rest.end());
            out.path[y] = std::move(p);
            work.push_back(y);
        }
    }
    return out;
}

}  // namespace detail

inline Transmitter classify(const Candidate& c, const DepIndex& idx, int t, const ClassifyConfig& cfg) {
    const auto& s = *c.s;
    Transmitter tr;
    tr.event = t;
    tr.transient = s.events[t].transient;
    auto in_window = [&](int x) {
        if (x <= 0 || x >= static_cast<int>(s.size()) - 1) return false;
        if (!s.tfo_before(x, t)) return false;
        if (!cfg.window) return true;
        return s.tfo_pos[t] - s.tfo_pos[x] <= *cfg.window;
    };
    struct Best {
        TClass cls = TClass::address;
        int access = -1, upstream = -1;
        bool gep = false;
        std::vector<ChainEdge> chain;
    } best;
    auto consider = [&](const detail::Closure& cl, TClass plain, TClass universal) {
        for (const auto& [a, path] : cl.path) {
            TClass cls = plain;
            int up = -1;
            bool gep = false;
            for (int r : idx.addr[a]) {
                if (!in_window(r)) continue;
                bool g = idx.gep.count({r, a}) > 0;
                if (cfg.require_gep && !g) continue;
                if (up < 0 || s.tfo_pos[r] > s.tfo_pos[up] || (g && !gep)) {
                    up = r;
                    gep = g;
                }
            }
            if (up >= 0) cls = universal;
            bool better = cls > best.cls || (cls == best.cls && best.access >= 0 && s.tfo_pos[a] > s.tfo_pos[best.access]) ||
                          (cls == best.cls && best.access < 0);
            if (!better) continue;
            best.cls = cls;
            best.access = a;
            best.upstream = up;
            best.gep = gep;
            best.chain.clear();
            if (up >= 0) best.chain.push_back(ChainEdge{gep ? "addr_gep" : "addr", up, a});
            best.chain.insert(best.chain.end(), path.begin(), path.end());
        }
    };
    auto addr_cl = detail::back_closure(c, idx, t, idx.addr[t], "addr", in_window);
    auto ctrl_cl = detail::back_closure(c, idx, t, idx.ctrl[t], "ctrl", in_window);
    // a chain whose final hop into t is addr_gep keeps that label
    for (auto& [a, path] : addr_cl.path)
        if (!path.empty() && idx.gep.count({path.back().from, t})) path.back().relation = "addr_gep";
    consider(ctrl_cl, TClass::control, TClass::universal_control);
    consider(addr_cl, TClass::data, TClass::universal_data);
    tr.cls = best.cls;
    if (best.access >= 0) tr.access = best.access;
    if (best.upstream >= 0) tr.upstream = best.upstream;
    tr.chain = std::move(best.chain);
    tr.gep = best.gep;
    return tr;
}

inline std::vector<Transmitter> classify_transmitters(const LeakWitness& w, const ClassifyConfig& cfg = {}) {
    DepIndex idx(*w.candidate->s);
    std::vector<Transmitter> out;
    for (int t : w.transmitter_events) {
        Transmitter tr = classify(*w.candidate, idx, t, cfg);
        tr.data_field = w.candidate->silent.count(t) > 0;
        out.push_back(std::move(tr));
    }
    return out;
}

/// Whether every edge of the transmitter's chain is present in the witness
/// candidate (machine-checkable certificate).
inline bool replay_chain(const Candidate& c, const Transmitter& t) {
    const auto& s = *c.s;
    for (const auto& e : t.chain) {
        bool ok = false;
        if (e.relation == "addr") ok = s.has(s.addr, e.from, e.to);
        else if (e.relation == "addr_gep") ok = s.has(s.addr_gep, e.from, e.to);
        else if (e.relation == "data") ok = s.has(s.data, e.from, e.to);
        else if (e.relation == "ctrl") ok = s.has(s.ctrl, e.from, e.to);
        else if (e.relation == "rf") ok = e.to < static_cast<int>(c.rf.size()) && c.rf[e.to] == e.from;
        else if (e.relation == "rfx") ok = e.to < static_cast<int>(c.rfx.size()) && c.rfx[e.to] == e.from;
        if (!ok) return false;
    }
    if (t.cls != TClass::address && t.chain.empty()) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Engines

struct FencePoint {
    std::string function;
    std::size_t index = 0;
    auto operator<=>(const FencePoint&) const = default;
};

inline std::string to_string(const FencePoint& p) { return p.function + ":" + std::to_string(p.index); }

struct LeakConfig {
    axiom::SpecConfig spec;
    std::optional<int> window;
    std::set<TClass> classes{TClass::universal_data};
    bool transient_only = true;
    bool require_gep = false;
    bool silent_stores = false;
    bool observer = true;
    bool collect_repair = false;
    double timeout_seconds = 0;
};

inline axiom::SpecConfig engine_primitives(std::string_view engine, int d_spec) {
    axiom::SpecConfig s;
    s.d_spec = d_spec;
    if (engine == "v1") s.branch = true;
    else if (engine == "v4") s.store_forward = true;
    else if (engine == "psf") s.alias_pred = true;
    else if (engine == "all") s.branch = s.store_forward = s.alias_pred = true;
    else if (engine == "none") {
    } else throw Error("unknown engine '" + std::string(engine) + "' (expected v1, v4, psf or all)");
    return s;
}

struct Finding {
    std::string label;           // transmitter source label
    bool transient = false;
    TClass cls = TClass::address;
    std::string access;          // display name of the access instruction ("" if none)
    std::string upstream;
    CulpritEdge culprit;
    std::string culprit_text;    // e.g. "rf(T,B)"
    std::string receiver;
    std::string transmitter;     // display name (with _S)
    std::string primitive;       // branch / store_forward / alias_pred / none
    std::vector<std::string> chain;
    bool gep = false;
    bool data_field = false;
    std::size_t structure = 0;
    LeakWitness witness;
    Transmitter detail;

    auto key() const { return std::make_tuple(label, transient, cls); }
};

struct Report {
    std::vector<Finding> findings;               // sorted by (label, transient, class)
    std::size_t structures = 0;
    std::size_t candidates = 0;
    std::size_t witnesses = 0;
    std::vector<std::vector<FencePoint>> requirements;   // one per transient finding instance
    std::vector<std::string> unrepairable;
    std::vector<std::string> diagnostics;

    std::set<TClass> classes() const {
        std::set<TClass> out;
        for (const auto& f : findings) out.insert(f.cls);
        return out;
    }
};

namespace detail {

inline std::string chain_text(const EventStructure& s, const std::vector<ChainEdge>& chain) {
    std::string out;
    for (const auto& e : chain) {
        if (!out.empty()) out += " ";
        out += s.events[e.from].name() + " -" + e.relation + "-> " + s.events[e.to].name();
    }
    return out;
}

/// Source program points fetched after `from_trace` (exclusive) up to and
/// including the trace entry of event `t`.
inline std::vector<FencePoint> fence_points(const EventStructure& s, const std::vector<acfg::ACfg>& gs, long from_trace,
                                            int t) {
    std::set<FencePoint> pts;
    for (std::size_t i = static_cast<std::size_t>(from_trace + 1); i < s.trace.size(); ++i) {
        const auto& te = s.trace[i];
        if (te.node >= 0) {
            const auto& prov = gs[te.thread].nodes[te.node].prov;
            pts.insert({prov.function, prov.index});
        }
        if (te.event == t) break;
    }
    return {pts.begin(), pts.end()};
}

inline long trace_index_of(const EventStructure& s, int e) {
    for (std::size_t i = 0; i < s.trace.size(); ++i)
        if (s.trace[i].event == e) return static_cast<long>(i);
    return -1;
}

/// Where the speculation that fetched transient event t begins, as a trace
/// index after which a fence would prevent it.
inline long speculation_start(const Candidate& c, int t) {
    const auto& s = *c.s;
    const auto& ev = s.events[t];
    if (ev.window < 0) return -1;
    const auto& w = s.windows[ev.window];
    if (w.primitive == axiom::Primitive::branch) return static_cast<long>(w.trace_begin) - 1;
    int p = s.variant;
    if (w.primitive == axiom::Primitive::alias_pred) return trace_index_of(s, c.rfx[p]);
    // earliest writer skipped by the stale read
    int src = c.rfx[p];
    const auto& ws = c.cox.at(c.xstate[p]);
    bool after = src == s.top();
    for (int x : ws) {
        if (after && s.tfo_before(x, p)) return trace_index_of(s, x);
        if (x == src) after = true;
    }
    return trace_index_of(s, p) - 1;
}

}  // namespace detail

inline void reject_multithread(const ir::Program& p) {
    if (p.multi_threaded()) throw UnsupportedError("leak detection supports single-thread programs only");
}

inline Report analyze(const ir::Program& prog, const LeakConfig& cfg) {
    reject_multithread(prog);
    Deadline deadline(cfg.timeout_seconds);
    auto gs = acfg::build(prog);
    auto structures = axiom::enumerate_event_structures(gs, cfg.spec, &prog);
    Report rep;
    rep.structures = structures.size();
    exec::ExecConfig ec;
    ec.silent_stores = cfg.silent_stores;
    ClassifyConfig cc{cfg.window, cfg.require_gep};
    std::map<std::tuple<std::string, bool, TClass>, Finding> found;
    std::set<std::vector<FencePoint>> reqs;
    std::set<std::string> unrepairable;
    auto tick = [&] { deadline.check(); };
    for (std::size_t si = 0; si < structures.size(); ++si) {
        deadline.check();
        auto cands = exec::enumerate_candidates(structures[si], ec, &prog, si, tick);
        rep.candidates += cands.size();
        std::shared_ptr<const EventStructure> last;
        std::unique_ptr<DepIndex> idx;
        for (auto& cand : cands) {
            auto cp = std::make_shared<const Candidate>(std::move(cand));
            if (cp->s != last) {
                idx = std::make_unique<DepIndex>(*cp->s);
                last = cp->s;
            }
            const auto& s = *cp->s;
            for (auto& w : detect_leaks(cp, cfg.observer)) {
                ++rep.witnesses;
                for (int t : w.transmitter_events) {
                    const auto& ev = s.events[t];
                    if (cfg.transient_only && !ev.transient) continue;
                    Transmitter tr = classify(*cp, *idx, t, cc);
                    tr.data_field = cp->silent.count(t) > 0;
                    if (!cfg.classes.count(tr.cls)) continue;
                    if (cfg.require_gep) {
                        Transmitter plain = classify(*cp, *idx, t, ClassifyConfig{cfg.window, false});
                        bool universal = plain.cls == TClass::universal_data || plain.cls == TClass::universal_control;
                        if (universal && tr.cls != plain.cls) continue;  // dropped, not demoted
                    }
                    if (cfg.collect_repair) {
                        if (ev.transient) {
                            long start = detail::speculation_start(*cp, t);
                            reqs.insert(detail::fence_points(s, gs, start, t));
                        } else {
                            unrepairable.insert(ev.name() + " (" + to_string(tr.cls) + ", " + to_string(w.culprit.kind) +
                                                "): not fence-repairable, no transient window");
                        }
                    }
                    auto key = std::make_tuple(ev.label, ev.transient, tr.cls);
                    if (found.count(key)) continue;
                    Finding f;
                    f.label = ev.label;
                    f.transient = ev.transient;
                    f.cls = tr.cls;
                    f.transmitter = ev.name();
                    if (tr.access) f.access = s.events[*tr.access].name();
                    if (tr.upstream) f.upstream = s.events[*tr.upstream].name();
                    f.culprit = w.culprit;
                    f.culprit_text = std::string(to_string(w.culprit.kind)) + "(" + s.events[w.culprit.from].name() + "," +
                                     s.events[w.culprit.to].name() + ")";
                    f.receiver = s.events[w.receiver].name();
                    f.primitive = ev.window >= 0 ? axiom::to_string(s.windows[ev.window].primitive) : "none";
                    for (const auto& e : tr.chain)
                        f.chain.push_back(s.events[e.from].name() + " -" + e.relation + "-> " + s.events[e.to].name());
                    f.gep = tr.gep;
                    f.data_field = tr.data_field;
                    f.structure = si;
                    f.witness = w;
                    f.witness.transmitters = {tr};
                    f.detail = tr;
                    found.emplace(key, std::move(f));
                }
            }
        }
    }
    for (auto& [k, f] : found) rep.findings.push_back(std::move(f));
    rep.requirements.assign(reqs.begin(), reqs.end());
    rep.unrepairable.assign(unrepairable.begin(), unrepairable.end());
    return rep;
}

inline LeakConfig engine_config(std::string_view engine, int d_spec = 250) {
    LeakConfig c;
    c.spec = engine_primitives(engine, d_spec);
    return c;
}

inline Report engine_v1(const ir::Program& p, LeakConfig cfg) {
    cfg.spec = engine_primitives("v1", cfg.spec.d_spec);
    return analyze(p, cfg);
}
inline Report engine_v4(const ir::Program& p, LeakConfig cfg) {
    cfg.spec = engine_primitives("v4", cfg.spec.d_spec);
    return analyze(p, cfg);
}
inline Report engine_psf(const ir::Program& p, LeakConfig cfg) {
    cfg.spec = engine_primitives("psf", cfg.spec.d_spec);
    return analyze(p, cfg);
}

}  // namespace lcm::leakage

#pragma once

// Graphviz rendering of leakage witnesses: events grouped by thread in tfo
// order, architectural and microarchitectural relations as colored edges, and
// culprit edges dashed red.

#include <sstream>
#include <string>

#include "lcm/exec.hpp"
#include "lcm/leakage.hpp"

namespace lcm::dot {

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

namespace detail {

inline std::string render(const exec::Candidate& c, const leakage::LeakWitness* wp, const leakage::Transmitter* tr) {
    static const leakage::LeakWitness none{};
    const auto& s = *c.s;
    const auto& w = wp ? *wp : none;
    std::ostringstream os;
    os << "digraph witness {\n  rankdir=TB;\n  node [shape=box, fontname=\"monospace\"];\n";
    auto label = [&](int e) {
        const auto& ev = s.events[e];
        std::string text = ev.name();
        if (ev.is_memory()) {
            text += std::string("\\n") + (ev.kind == axiom::EventKind::read ? "R " : "W ") + escape(ev.location);
            if (e < static_cast<int>(c.mode.size()) && c.mode[e] != exec::Mode::none)
                text += c.mode[e] == exec::Mode::RW ? " [RW]" : " [R]";
        }
        return text;
    };
    auto node = [&](int e) {
        const auto& ev = s.events[e];
        os << "  e" << e << " [label=\"" << label(e) << "\"";
        if (ev.transient) os << ", style=dashed";
        if (wp && e == w.receiver) os << ", color=blue, penwidth=2";
        for (int t : w.transmitter_events)
            if (t == e) os << ", color=red, penwidth=2";
        os << "];\n";
    };
    node(s.top());
    for (std::size_t t = 0; t < s.tfo.size(); ++t) {
        os << "  subgraph cluster_t" << t << " {\n  label=\"thread " << t << "\";\n";
        for (int e : s.tfo[t]) node(e);
        os << "  }\n";
        for (std::size_t i = 1; i < s.tfo[t].size(); ++i)
            os << "  e" << s.tfo[t][i - 1] << " -> e" << s.tfo[t][i] << " [label=tfo, color=gray];\n";
    }
    node(s.bottom());
    auto edges = [&](const std::vector<axiom::Pair>& rel, const char* name, const char* color) {
        for (auto [a, b] : rel)
            os << "  e" << a << " -> e" << b << " [label=" << name << ", color=" << color << ", fontcolor=" << color
               << "];\n";
    };
    edges(c.rf_pairs(), "rf", "darkgreen");
    edges(c.co_pairs(), "co", "darkgreen");
    edges(c.fr_pairs(), "fr", "darkgreen");
    edges(c.rfx_pairs(), "rfx", "purple");
    edges(c.cox_pairs(), "cox", "purple");
    edges(c.frx_pairs(), "frx", "purple");
    edges(s.addr, "addr", "orange");
    edges(s.data, "data", "orange");
    edges(s.ctrl, "ctrl", "orange");
    if (wp)
        os << "  e" << w.culprit.from << " -> e" << w.culprit.to << " [label=\"" << leakage::to_string(w.culprit.kind)
           << "\", color=red, fontcolor=red, style=dashed, penwidth=2];\n";
    if (tr)
        for (const auto& e : tr->chain)
            os << "  e" << e.from << " -> e" << e.to << " [label=\"" << e.relation
               << "\", color=red, style=bold, constraint=false];\n";
    os << "}\n";
    return os.str();
}

}  // namespace detail

inline std::string witness(const leakage::LeakWitness& w, const leakage::Transmitter* tr = nullptr) {
    return detail::render(*w.candidate, &w, tr);
}

inline std::string candidate(const exec::Candidate& c) { return detail::render(c, nullptr, nullptr); }

}  // namespace lcm::dot

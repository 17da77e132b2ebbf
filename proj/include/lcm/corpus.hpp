#pragma once

// Litmus corpus: each `NAME.lcm` has a sidecar `NAME.expect` of `key: value`
// lines describing the analysis configuration and the expected outcome.
//
//   engine: v4
//   classes: data universal_data
//   transient-only: yes
//   spec-depth: 250
//   window: 2
//   silent-stores: no
//   observer: yes
//   finding: universal_data transient e6 access=e5_S
//   detected: D U_D
//   fences: 1
//   note: index masking hides the bound from the model
//   structures: 1                  (event-structure count, no leak analysis needed)
//   candidates: 4                  (consistent candidate executions)

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcm/acfg.hpp"
#include "lcm/axiom.hpp"
#include "lcm/error.hpp"
#include "lcm/exec.hpp"
#include "lcm/ir.hpp"
#include "lcm/leakage.hpp"
#include "lcm/repair.hpp"

namespace lcm::corpus {

struct ExpectedFinding {
    leakage::TClass cls = leakage::TClass::address;
    bool transient = true;
    std::string label;
    std::optional<std::string> access;
};

struct Expectation {
    std::string engine = "none";
    leakage::LeakConfig config;
    std::optional<std::vector<ExpectedFinding>> findings;
    std::optional<std::set<leakage::TClass>> detected;
    std::optional<std::size_t> fences;
    std::optional<std::size_t> structures;
    std::optional<std::size_t> candidates;
    std::vector<std::string> notes;

    bool wants_leakage() const { return findings || detected || fences; }
};

inline bool parse_bool(const std::string& v, int line) {
    if (v == "yes" || v == "true" || v == "on") return true;
    if (v == "no" || v == "false" || v == "off") return false;
    throw ParseError({line, 1}, "bad boolean '" + v + "'", {"yes", "no"});
}

inline std::vector<std::string> words(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

inline leakage::TClass parse_class_or_throw(const std::string& w, int line) {
    auto c = leakage::parse_class(w);
    if (!c) throw ParseError({line, 1}, "unknown transmitter class '" + w + "'");
    return *c;
}

inline Expectation parse_expectation(const std::string& text) {
    Expectation e;
    e.config.classes = leakage::all_classes();
    int spec_depth = 250;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        auto colon = raw.find(':');
        auto ws = words(raw);
        if (ws.empty()) continue;
        if (colon == std::string::npos) throw ParseError({line, 1}, "expected 'key: value'");
        std::string key = words(raw.substr(0, colon)).at(0);
        std::string value = raw.substr(colon + 1);
        auto vs = words(value);
        auto one = [&] {
            if (vs.size() != 1) throw ParseError({line, static_cast<int>(colon) + 2}, "expected one value for '" + key + "'");
            return vs[0];
        };
        if (key == "engine") e.engine = one();
        else if (key == "classes") {
            e.config.classes.clear();
            for (const auto& w : vs) {
                if (w == "all") {
                    auto a = leakage::all_classes();
                    e.config.classes.insert(a.begin(), a.end());
                } else {
                    e.config.classes.insert(parse_class_or_throw(w, line));
                }
            }
        } else if (key == "transient-only") e.config.transient_only = parse_bool(one(), line);
        else if (key == "spec-depth") spec_depth = std::stoi(one());
        else if (key == "window") e.config.window = std::stoi(one());
        else if (key == "silent-stores") e.config.silent_stores = parse_bool(one(), line);
        else if (key == "observer") e.config.observer = parse_bool(one(), line);
        else if (key == "require-gep") e.config.require_gep = parse_bool(one(), line);
        else if (key == "finding") {
            if (vs.size() < 3 || vs.size() > 4) throw ParseError({line, 1}, "finding needs <class> <transient|committed> <label> [access=L]");
            ExpectedFinding f;
            f.cls = parse_class_or_throw(vs[0], line);
            if (vs[1] != "transient" && vs[1] != "committed")
                throw ParseError({line, 1}, "bad finding kind '" + vs[1] + "'", {"transient", "committed"});
            f.transient = vs[1] == "transient";
            f.label = vs[2];
            if (vs.size() == 4) {
                if (vs[3].rfind("access=", 0) != 0) throw ParseError({line, 1}, "expected access=<label>");
                f.access = vs[3].substr(7);
            }
            if (!e.findings) e.findings.emplace();
            e.findings->push_back(f);
        } else if (key == "detected") {
            e.detected.emplace();
            for (const auto& w : vs) e.detected->insert(parse_class_or_throw(w, line));
        } else if (key == "fences") e.fences = std::stoul(one());
        else if (key == "structures") e.structures = std::stoul(one());
        else if (key == "candidates") e.candidates = std::stoul(one());
        else if (key == "note") {
            auto start = value.find_first_not_of(" \t");
            e.notes.push_back(start == std::string::npos ? "" : value.substr(start));
        } else throw ParseError({line, 1}, "unknown key '" + key + "'");
    }
    e.config.spec = leakage::engine_primitives(e.engine, spec_depth);
    return e;
}

struct CaseResult {
    std::string name;
    Expectation expect;
    leakage::Report report;
    std::optional<repair::RepairPlan> plan;
    std::vector<std::string> mismatches;
    std::optional<std::size_t> structures;
    std::optional<std::size_t> candidates;
    double seconds = 0;

    bool pass() const { return mismatches.empty(); }
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string describe(const leakage::Finding& f) {
    std::string s = std::string(leakage::to_string(f.cls)) + " " + (f.transient ? "transient " : "committed ") + f.label;
    if (!f.access.empty()) s += " access=" + f.access;
    return s;
}

inline std::string describe(const ExpectedFinding& f) {
    std::string s = std::string(leakage::to_string(f.cls)) + " " + (f.transient ? "transient " : "committed ") + f.label;
    if (f.access) s += " access=" + *f.access;
    return s;
}

inline CaseResult run_case(const std::string& name, const std::string& source, const Expectation& ex,
                           bool with_repair = true) {
    CaseResult r;
    r.name = name;
    r.expect = ex;
    auto t0 = std::chrono::steady_clock::now();
    auto prog = ir::parse(source);
    if (ex.structures || ex.candidates) {
        auto structures = axiom::enumerate_event_structures(acfg::build(prog), ex.config.spec, &prog);
        exec::ExecConfig ec;
        ec.silent_stores = ex.config.silent_stores;
        std::size_t total = 0;
        for (std::size_t i = 0; i < structures.size(); ++i)
            total += exec::enumerate_candidates(structures[i], ec, &prog, i).size();
        r.structures = structures.size();
        r.candidates = total;
        if (ex.structures && *ex.structures != structures.size())
            r.mismatches.push_back(std::to_string(structures.size()) + " event structures, expected " +
                                   std::to_string(*ex.structures));
        if (ex.candidates && *ex.candidates != total)
            r.mismatches.push_back(std::to_string(total) + " candidate executions, expected " +
                                   std::to_string(*ex.candidates));
    }
    if (ex.wants_leakage()) r.report = leakage::analyze(prog, ex.config);
    if (ex.findings) {
        std::set<std::string> want, got;
        for (const auto& f : *ex.findings) want.insert(describe(f));
        for (const auto& f : r.report.findings) {
            bool has_access = false;
            for (const auto& w : *ex.findings)
                if (w.label == f.label && w.transient == f.transient && w.cls == f.cls && w.access) has_access = true;
            leakage::Finding g = f;
            if (!has_access) g.access.clear();
            got.insert(describe(g));
        }
        for (const auto& w : want)
            if (!got.count(w)) r.mismatches.push_back("missing finding: " + w);
        for (const auto& g : got)
            if (!want.count(g)) r.mismatches.push_back("unexpected finding: " + g);
    }
    if (ex.detected && r.report.classes() != *ex.detected) {
        std::string got, want;
        for (auto c : r.report.classes()) got += std::string(" ") + leakage::short_name(c);
        for (auto c : *ex.detected) want += std::string(" ") + leakage::short_name(c);
        r.mismatches.push_back("detected classes {" + got + " } but expected {" + want + " }");
    }
    if (with_repair && ex.fences) {
        repair::RepairConfig rc;
        rc.leak = ex.config;
        r.plan = repair::repair(prog, rc);
        if (!r.plan->clean) r.mismatches.push_back("repair left " + std::to_string(r.plan->residual) + " findings");
        if (r.plan->points.size() != *ex.fences)
            r.mismatches.push_back("repair used " + std::to_string(r.plan->points.size()) + " fences, expected " +
                                   std::to_string(*ex.fences));
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

/// All `.lcm` files under `dir` (sorted) that have a sidecar.
inline std::vector<std::filesystem::path> cases(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".lcm") {
            auto side = e.path();
            side.replace_extension(".expect");
            if (std::filesystem::exists(side)) out.push_back(e.path());
        }
    std::sort(out.begin(), out.end());
    return out;
}

inline CaseResult run_file(const std::filesystem::path& lcm, bool with_repair = true) {
    auto side = lcm;
    side.replace_extension(".expect");
    return run_case(lcm.stem().string(), read_file(lcm), parse_expectation(read_file(side)), with_repair);
}

/// One detection-table row: name, engine, detected classes, fences, verdict.
inline std::string table_row(const CaseResult& r, bool timing) {
    std::ostringstream os;
    std::string classes;
    for (auto c : r.report.classes()) classes += (classes.empty() ? "" : ",") + std::string(leakage::short_name(c));
    if (classes.empty()) classes = "-";
    if (!r.expect.wants_leakage() && r.candidates)
        classes = std::to_string(*r.structures) + "s/" + std::to_string(*r.candidates) + "c";
    os << r.name << ' ';
    for (std::size_t i = r.name.size(); i < 24; ++i) os << ' ';
    os << r.expect.engine;
    for (std::size_t i = r.expect.engine.size(); i < 6; ++i) os << ' ';
    os << classes;
    for (std::size_t i = classes.size(); i < 14; ++i) os << ' ';
    os << (r.plan ? std::to_string(r.plan->points.size()) : std::string("-")) << "  ";
    if (timing) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%8.3fs  ", r.seconds);
        os << buf;
    }
    os << (r.pass() ? "ok" : "FAIL");
    if (!r.expect.notes.empty()) {
        os << "  [";
        for (std::size_t i = 0; i < r.expect.notes.size(); ++i) os << (i ? "; " : "") << r.expect.notes[i];
        os << "]";
    }
    return os.str();
}

}  // namespace lcm::corpus

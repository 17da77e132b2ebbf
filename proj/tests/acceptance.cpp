// Acceptance driver: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "lcm/lcm.hpp"
#include "oracle/brute_force.hpp"
#include "random_program.hpp"

using namespace lcm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const fs::path kCorpus = LCM_CORPUS_DIR;

struct Line {
    bool ok = true;
    std::ostringstream detail;
    void fail(const std::string& why) {
        if (!ok) detail << "; ";
        else detail.str("");
        ok = false;
        detail << why;
    }
};

void report(int number, const std::string& title, const Line& l) {
    std::cout << (l.ok ? "PASS" : "FAIL") << "  " << number << ". " << title;
    auto d = l.detail.str();
    if (!d.empty()) std::cout << " (" << d << ")";
    std::cout << std::endl;
}

std::vector<fs::path> in_dir(const std::string& sub) { return corpus::cases(kCorpus / sub); }

std::string render(const leakage::Report& r) {
    std::ostringstream os;
    for (const auto& f : r.findings) {
        os << f.label << ' ' << f.transient << ' ' << leakage::to_string(f.cls) << ' ' << f.access << ' ' << f.upstream
           << ' ' << f.culprit_text << ' ' << f.receiver << ' ' << f.transmitter << ' ' << f.primitive << ' '
           << f.structure;
        for (const auto& c : f.chain) os << " [" << c << ']';
        os << '\n';
    }
    return os.str();
}

using Key = std::tuple<std::string, bool, leakage::TClass>;

std::set<Key> keys(const leakage::Report& r) {
    std::set<Key> out;
    for (const auto& f : r.findings) out.insert(f.key());
    return out;
}

Line figures() {
    Line l;
    int n = 0;
    for (const char* name : {"fig2_spectre_v1_spec", "fig3_nonspec_access", "fig4a_spectre_v4", "fig4b_spectre_psf",
                             "fig5a_silent_stores"}) {
        auto r = corpus::run_file(kCorpus / "figures" / (std::string(name) + ".lcm"), false);
        ++n;
        if (!r.pass()) l.fail(std::string(name) + ": " + r.mismatches.front());
        if (r.seconds >= 1.0) l.fail(std::string(name) + " took " + std::to_string(r.seconds) + " s");
    }
    if (l.ok) l.detail << n << " worked examples, exact transmitter sets";
    return l;
}

Line benchmark_table() {
    Line l;
    std::size_t pht = 0, stl = 0;
    double total = 0;
    for (const char* dir : {"pht", "stl"})
        for (const auto& p : in_dir(dir)) {
            auto r = corpus::run_file(p, false);
            (std::string(dir) == "pht" ? pht : stl)++;
            total += r.seconds;
            if (!r.pass()) l.fail(r.name + ": " + r.mismatches.front());
        }
    if (pht != 15) l.fail(std::to_string(pht) + " PHT programs, expected 15");
    if (stl != 14) l.fail(std::to_string(stl) + " STL programs, expected 14");
    double avg = total / static_cast<double>(std::max<std::size_t>(1, pht + stl));
    if (avg >= 0.5) l.fail("average " + std::to_string(avg) + " s per program");
    if (l.ok) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%zu PHT + %zu STL, average %.4f s", pht, stl, avg);
        l.detail << buf;
    }
    return l;
}

Line repair_all() {
    Line l;
    std::size_t repaired = 0;
    for (const char* dir : {"pht", "stl"})
        for (const auto& p : in_dir(dir)) {
            auto side = p;
            side.replace_extension(".expect");
            auto ex = corpus::parse_expectation(corpus::read_file(side));
            auto prog = ir::parse(corpus::read_file(p));
            repair::RepairConfig rc;
            rc.leak = ex.config;
            auto plan = repair::repair(prog, rc);
            std::string name = p.stem().string();
            if (plan.points.size() != 1) l.fail(name + " used " + std::to_string(plan.points.size()) + " fences");
            if (!plan.clean || !leakage::analyze(plan.program, rc.leak).findings.empty())
                l.fail(name + " still leaks after repair");
            auto minimal = repair::verify_minimality(prog, plan, rc);
            if (!minimal) l.fail(name + ": minimality not checked");
            else if (!*minimal) l.fail(name + ": a smaller fence set exists");
            ++repaired;
        }
    if (l.ok) l.detail << repaired << " programs, 1 fence each, minimal";
    return l;
}

Line oracle_equivalence() {
    Line l;
    random_program::Generator g(500);
    std::size_t programs = 0, candidates = 0;
    exec::ExecConfig silent;
    silent.silent_stores = true;
    for (int i = 0; i < 500; ++i) {
        bool two = i % 5 == 4;
        auto src = two ? g.two_threads() : g.single_thread();
        auto p = ir::parse(src);
        ++programs;
        for (const auto& s : axiom::enumerate_event_structures(acfg::build(p), axiom::SpecConfig{0}, &p)) {
            std::set<oracle::Outcome> got;
            for (const auto& c : exec::enumerate_candidates(s, {}, &p)) got.insert(oracle::outcome_of(c));
            if (got != oracle::consistent_outcomes(s)) {
                l.fail("consistency mismatch on program " + std::to_string(i));
                break;
            }
        }
        if (two) continue;
        for (const auto& s : axiom::enumerate_event_structures(acfg::build(p), leakage::engine_primitives("all", 4), &p))
            for (auto& c : exec::enumerate_candidates(s, silent, &p)) {
                ++candidates;
                auto cp = std::make_shared<const exec::Candidate>(std::move(c));
                if (leakage::culprits(*cp, true) != oracle::literal_culprits(*cp, true)) {
                    l.fail("culprit mismatch on program " + std::to_string(i));
                    continue;
                }
                for (const auto& w : leakage::detect_leaks(cp, true))
                    if (std::set<int>(w.transmitter_events.begin(), w.transmitter_events.end()) !=
                        oracle::literal_transmitters(*cp, w.culprit))
                        l.fail("transmitter mismatch on program " + std::to_string(i));
            }
    }
    if (l.ok) l.detail << programs << " programs, " << candidates << " speculative candidates, 0 mismatches";
    return l;
}

Line mcm_sanity() {
    Line l;
    auto outcomes = [&](const std::string& name) {
        auto p = ir::parse(corpus::read_file(kCorpus / "litmus" / name));
        auto ss = axiom::enumerate_event_structures(acfg::build(p), axiom::SpecConfig{0}, &p);
        std::set<std::vector<std::string>> out;
        for (const auto& c : exec::enumerate_candidates(ss.at(0), {}, &p)) {
            std::vector<std::string> o;
            for (const auto& t : c.s->tfo)
                for (int e : t)
                    if (c.s->events[e].kind == axiom::EventKind::read) o.push_back(c.s->events[c.rf[e]].name());
            out.insert(o);
        }
        if (std::set<oracle::Outcome>{} == oracle::consistent_outcomes(ss[0])) l.fail(name + ": oracle found nothing");
        return out;
    };
    std::vector<std::string> stale{"T", "T"};
    if (!outcomes("sb.lcm").count(stale)) l.fail("SB forbids both-stale");
    if (outcomes("sb_fenced.lcm").count(stale)) l.fail("fenced SB permits both-stale");
    auto mp = outcomes("mp.lcm");
    if (mp.count({"T0:1", "T"})) l.fail("MP permits flag without data");
    if (mp.size() != 3) l.fail("MP has " + std::to_string(mp.size()) + " outcomes");
    if (l.ok) l.detail << "SB allows stale/stale, fenced SB and MP forbid it";
    return l;
}

Line properties() {
    Line l;
    std::size_t files = 0;
    for (const auto& p : corpus::cases(kCorpus)) {
        auto side = p;
        side.replace_extension(".expect");
        auto ex = corpus::parse_expectation(corpus::read_file(side));
        if (!ex.wants_leakage()) continue;
        ++files;
        auto prog = ir::parse(corpus::read_file(p));
        std::string name = p.stem().string();
        auto base = leakage::analyze(prog, ex.config);
        if (render(base) != render(leakage::analyze(prog, ex.config))) l.fail(name + ": reports differ across runs");
        auto gep_cfg = ex.config;
        gep_cfg.require_gep = true;
        auto all = keys(base), gep = keys(leakage::analyze(prog, gep_cfg));
        if (!std::includes(all.begin(), all.end(), gep.begin(), gep.end())) l.fail(name + ": require-gep adds findings");
        if (!ex.config.spec.any()) continue;
        std::set<Key> prev;
        for (int d : {0, 1, 2, 4, 8, 16, 32, 250}) {
            auto cfg = ex.config;
            cfg.spec.d_spec = d;
            auto cur = keys(leakage::analyze(prog, cfg));
            if (!std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()))
                l.fail(name + ": findings shrink at d_spec=" + std::to_string(d));
            prev = std::move(cur);
        }
    }
    if (l.ok) l.detail << files << " corpus programs, 0 violations";
    return l;
}

// 500 instructions of forwarding sites feeding two-level index chains.
std::string stress_program() {
    std::ostringstream os;
    os << "func stress(r0):\n";
    int instrs = 0, reg = 1, prev = 0;
    for (int block = 0; instrs + 6 <= 500; ++block) {
        std::string loc = "s" + std::to_string(block % 24);
        int v = reg++, idx = reg++, mid = reg++, out = reg++;
        os << "  r" << v << " = load " << loc << "\n";
        os << "  store " << loc << ", r" << prev << "\n";
        os << "  r" << idx << " = load " << loc << "\n";
        os << "  r" << mid << " = load A" << block << "[r" << idx << "]\n";
        os << "  r" << out << " = load B" << block << "[r" << mid << "]\n";
        os << "  store t" << block % 8 << ", r" << out << "\n";
        prev = v;
        instrs += 6;
    }
    while (instrs++ < 500) os << "  skip\n";
    return os.str();
}

Line stress() {
    Line l;
    auto src = stress_program();
    auto prog = ir::parse(src);
    if (prog.functions[0].body.size() != 500) l.fail("program has " + std::to_string(prog.functions[0].body.size()) + " instructions");
    auto cfg = leakage::engine_config("v4", 25);
    cfg.window = 50;
    cfg.timeout_seconds = 60;
    auto t0 = Clock::now();
    try {
        auto r = leakage::analyze(prog, cfg);
        double secs = since(t0);
        if (secs >= 60) l.fail("took " + std::to_string(secs) + " s");
        if (l.ok) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%zu structures, %zu candidates, %zu findings in %.2f s", r.structures,
                          r.candidates, r.findings.size(), secs);
            l.detail << buf;
        }
    } catch (const TimeoutError&) {
        l.fail("timed out after 60 s");
    }
    return l;
}

}  // namespace

int main() {
    bool all = true;
    auto run = [&](int n, const std::string& title, Line (*fn)()) {
        Line l;
        try {
            l = fn();
        } catch (const std::exception& e) {
            l.fail(std::string("error: ") + e.what());
        }
        report(n, title, l);
        all = all && l.ok;
    };
    run(1, "worked-example transmitter sets", figures);
    run(2, "PHT/STL detection table", benchmark_table);
    run(3, "one-fence minimal repair", repair_all);
    run(4, "brute-force oracle equivalence", oracle_equivalence);
    run(5, "TSO litmus sanity", mcm_sanity);
    run(6, "monotonicity, determinism, require-gep subset", properties);
    run(7, "500-instruction stress (v4, W=50, d_spec=25)", stress);
    return all ? 0 : 1;
}

// lcm: command-line front end for the leakage analyzer.
//
//   lcm parse FILE [--dump-acfg PATH]
//   lcm enumerate FILE [--primitives LIST] [--list] [--dot DIR]
//   lcm check FILE... [--engine E] [--classes LIST] [--format text|jsonl] [--dot DIR]
//   lcm repair FILE [-o OUT] [--plan PATH]
//   lcm corpus DIR [--jobs N]
//
// Exit status: 0 = no leaks (or corpus matches), 1 = leaks found (or corpus
// mismatch, or repair incomplete), 2 = error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lcm/lcm.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lcm;

namespace {

struct Options {
    std::vector<std::string> files;
    std::string engine = "all";
    std::string primitives;
    std::string classes = "universal_data";
    int spec_depth = 250;
    int window = 0;
    bool require_gep = false;
    bool silent_stores = false;
    bool include_committed = false;
    bool no_observer = false;
    std::string format = "text";
    std::string dot_dir;
    std::string dump_acfg;
    std::string mcm = "tso";
    bool no_timing = false;
    unsigned jobs = 1;
    double timeout = 60;
    bool list = false;
    std::string output;
    std::string plan_path;
    bool no_repair = false;
    bool no_minimality = false;
};

std::set<leakage::TClass> parse_classes(const std::string& text) {
    std::set<leakage::TClass> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        if (item == "all") {
            auto a = leakage::all_classes();
            out.insert(a.begin(), a.end());
            continue;
        }
        auto c = leakage::parse_class(item);
        if (!c) throw Error("unknown transmitter class '" + item + "'");
        out.insert(*c);
    }
    if (out.empty()) throw Error("--classes needs at least one class");
    return out;
}

axiom::SpecConfig parse_primitives(const std::string& text, int d_spec) {
    axiom::SpecConfig s;
    s.d_spec = d_spec;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) {
        if (item == "branch" || item == "pht") s.branch = true;
        else if (item == "stl" || item == "store_forward") s.store_forward = true;
        else if (item == "psf" || item == "alias_pred") s.alias_pred = true;
        else if (item == "none" || item.empty()) {
        } else throw Error("unknown primitive '" + item + "' (expected branch, stl or psf)");
    }
    return s;
}

leakage::LeakConfig leak_config(const Options& o) {
    leakage::LeakConfig c;
    c.spec = o.primitives.empty() ? leakage::engine_primitives(o.engine, o.spec_depth)
                                  : parse_primitives(o.primitives, o.spec_depth);
    if (o.window > 0) c.window = o.window;
    c.classes = parse_classes(o.classes);
    c.transient_only = !o.include_committed;
    c.require_gep = o.require_gep;
    c.silent_stores = o.silent_stores;
    c.observer = !o.no_observer;
    c.timeout_seconds = o.timeout;
    if (o.mcm != "tso") throw UnsupportedError("unsupported memory model '" + o.mcm + "'");
    return c;
}

std::string read_source(const std::string& path) { return corpus::read_file(path); }

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

std::string timing_footer(std::chrono::steady_clock::time_point t0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "; analyzed in %.3f s\n",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return buf;
}

json finding_record(const std::string& file, const leakage::Finding& f) {
    const auto& s = *f.witness.candidate->s;
    const auto& ev = s.events[f.detail.event];
    json j;
    j["file"] = file;
    j["label"] = f.label;
    j["transmitter"] = f.transmitter;
    j["point"] = ev.prov.function + ":" + std::to_string(ev.prov.index);
    j["class"] = leakage::to_string(f.cls);
    j["transient"] = f.transient;
    j["access"] = f.access.empty() ? json(nullptr) : json(f.access);
    j["access_transient"] = !f.access.empty() && f.access.ends_with("_S");
    j["upstream"] = f.upstream.empty() ? json(nullptr) : json(f.upstream);
    j["chain"] = f.chain;
    j["culprit"] = {{"kind", leakage::to_string(f.culprit.kind)},
                    {"from", s.events[f.culprit.from].name()},
                    {"to", s.events[f.culprit.to].name()}};
    j["receiver"] = f.receiver;
    j["primitive"] = f.primitive;
    j["gep"] = f.gep;
    if (f.data_field) j["xstate_field"] = "data";
    j["structure"] = f.structure;
    j["path"] = s.path;
    return j;
}

std::string finding_text(const std::string& file, const leakage::Finding& f) {
    std::ostringstream os;
    os << file << ": " << f.transmitter << " " << leakage::to_string(f.cls);
    if (!f.access.empty()) os << " access=" << f.access;
    os << " culprit=" << f.culprit_text << " receiver=" << f.receiver << " primitive=" << f.primitive;
    if (f.data_field) os << " field=data";
    os << "\n";
    if (!f.chain.empty()) {
        os << "    chain:";
        for (const auto& c : f.chain) os << " [" << c << "]";
        os << "\n";
    }
    return os.str();
}

int cmd_parse(const Options& o) {
    auto prog = ir::parse(read_source(o.files.at(0)));
    std::cout << ir::print(prog);
    if (!o.dump_acfg.empty()) {
        std::string text;
        for (const auto& g : acfg::build(prog)) text += g.to_dot();
        write_file(o.dump_acfg, text);
    }
    return 0;
}

int cmd_enumerate(const Options& o) {
    auto prog = ir::parse(read_source(o.files.at(0)));
    auto spec = parse_primitives(o.primitives, o.spec_depth);
    auto gs = acfg::build(prog);
    if (!o.dump_acfg.empty()) {
        std::string text;
        for (const auto& g : gs) text += g.to_dot();
        write_file(o.dump_acfg, text);
    }
    auto structures = axiom::enumerate_event_structures(gs, spec, &prog);
    exec::ExecConfig ec;
    ec.silent_stores = o.silent_stores;
    ec.mcm = o.mcm;
    leakage::Deadline deadline(o.timeout);
    std::size_t total = 0;
    std::ostringstream detail;
    for (std::size_t i = 0; i < structures.size(); ++i) {
        auto cands = exec::enumerate_candidates(structures[i], ec, &prog, i, [&] { deadline.check(); });
        total += cands.size();
        if (o.list) {
            detail << "structure " << i << " (" << structures[i].path << "): " << cands.size() << " candidates\n";
            for (std::size_t k = 0; k < cands.size(); ++k) {
                const auto& c = cands[k];
                const auto& s = *c.s;
                detail << "  candidate " << k << ":";
                auto rel = [&](const char* name, const std::vector<axiom::Pair>& ps) {
                    for (auto [a, b] : ps) detail << " " << name << "(" << s.events[a].name() << "," << s.events[b].name() << ")";
                };
                rel("rf", c.rf_pairs());
                rel("co", c.co_pairs());
                rel("rfx", c.rfx_pairs());
                rel("cox", c.cox_pairs());
                detail << "\n";
            }
        }
        if (!o.dot_dir.empty())
            for (std::size_t k = 0; k < cands.size(); ++k) {
                auto text = dot::candidate(cands[k]);
                write_file(fs::path(o.dot_dir) / ("candidate_" + std::to_string(i) + "_" + std::to_string(k) + ".dot"), text);
            }
    }
    std::cout << structures.size() << " event structures, " << total << " consistent candidate executions\n";
    std::cout << detail.str();
    return 0;
}

int cmd_check(const Options& o) {
    auto cfg = leak_config(o);
    bool any = false;
    for (const auto& file : o.files) {
        auto t0 = std::chrono::steady_clock::now();
        auto prog = ir::parse(read_source(file));
        if (!o.dump_acfg.empty()) {
            std::string text;
            for (const auto& g : acfg::build(prog)) text += g.to_dot();
            write_file(o.dump_acfg, text);
        }
        auto rep = leakage::analyze(prog, cfg);
        any = any || !rep.findings.empty();
        std::string stem = fs::path(file).stem().string();
        for (std::size_t i = 0; i < rep.findings.size(); ++i) {
            const auto& f = rep.findings[i];
            if (o.format == "jsonl") std::cout << finding_record(file, f).dump() << "\n";
            else std::cout << finding_text(file, f);
            if (!o.dot_dir.empty())
                write_file(fs::path(o.dot_dir) / (stem + "_" + std::to_string(i) + "_" + f.transmitter + ".dot"),
                           dot::witness(f.witness, &f.detail));
        }
        if (o.format == "text") {
            std::cout << file << ": " << rep.findings.size() << " finding" << (rep.findings.size() == 1 ? "" : "s") << " ("
                      << rep.structures << " event structures, " << rep.candidates << " candidate executions)\n";
            if (!o.no_timing) std::cout << timing_footer(t0);
        }
    }
    return any ? 1 : 0;
}

int cmd_repair(const Options& o) {
    auto prog = ir::parse(read_source(o.files.at(0)));
    repair::RepairConfig rc;
    rc.leak = leak_config(o);
    auto plan = repair::repair(prog, rc);
    if (!o.no_minimality) plan.minimal = repair::verify_minimality(prog, plan, rc);
    std::ostringstream text;
    text << "; " << plan.points.size() << " fence" << (plan.points.size() == 1 ? "" : "s") << ", "
         << (plan.clean ? "no findings remain" : std::to_string(plan.residual) + " findings remain") << "\n";
    for (const auto& p : plan.points) text << "; lfence before " << leakage::to_string(p) << "\n";
    for (const auto& u : plan.unrepairable) text << "; unrepairable: " << u << "\n";
    text << ir::print(plan.program);
    if (o.output.empty()) std::cout << text.str();
    else write_file(o.output, text.str());
    std::ostringstream records;
    for (const auto& p : plan.points)
        records << json{{"fence", "lfence"}, {"function", p.function}, {"before", p.index}}.dump() << "\n";
    json summary{{"fences", plan.points.size()}, {"clean", plan.clean}, {"iterations", plan.iterations},
                 {"residual", plan.residual}, {"unrepairable", plan.unrepairable}};
    summary["minimal"] = plan.minimal ? json(*plan.minimal) : json(nullptr);
    records << summary.dump() << "\n";
    if (!o.plan_path.empty()) write_file(o.plan_path, records.str());
    else if (!o.output.empty()) std::cout << records.str();
    return plan.clean ? 0 : 1;
}

int cmd_corpus(const Options& o) {
    std::vector<fs::path> files;
    for (const auto& d : o.files) {
        if (fs::is_directory(d)) {
            auto c = corpus::cases(d);
            files.insert(files.end(), c.begin(), c.end());
        } else files.emplace_back(d);
    }
    std::sort(files.begin(), files.end());
    std::vector<std::optional<corpus::CaseResult>> results(files.size());
    std::vector<std::string> errors(files.size());
    auto work = [&](std::size_t i) {
        try {
            auto side = files[i];
            side.replace_extension(".expect");
            auto ex = corpus::parse_expectation(corpus::read_file(side));
            ex.config.timeout_seconds = o.timeout;
            results[i] = corpus::run_case(files[i].stem().string(), corpus::read_file(files[i]), ex, !o.no_repair);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    unsigned jobs = std::max(1u, o.jobs);
    for (std::size_t start = 0; start < files.size(); start += jobs) {
        std::vector<std::future<void>> fs;
        for (std::size_t i = start; i < std::min(files.size(), start + jobs); ++i)
            fs.push_back(std::async(std::launch::async, work, i));
        for (auto& f : fs) f.get();
    }
    std::size_t pass = 0;
    double total = 0;
    std::cout << "program                   engine detected      fences  " << (o.no_timing ? "" : "    time  ") << "verdict\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!results[i]) {
            std::cout << files[i].stem().string() << "  ERROR " << errors[i] << "\n";
            continue;
        }
        const auto& r = *results[i];
        total += r.seconds;
        std::cout << corpus::table_row(r, !o.no_timing) << "\n";
        for (const auto& m : r.mismatches) std::cout << "    " << m << "\n";
        if (r.pass()) ++pass;
    }
    std::cout << pass << "/" << files.size() << " programs match their expectations\n";
    if (!o.no_timing && !files.empty()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "; average %.3f s per program\n", total / static_cast<double>(files.size()));
        std::cout << buf;
    }
    return pass == files.size() ? 0 : 1;
}

void add_analysis_flags(CLI::App* c, Options& o) {
    c->add_option("--engine", o.engine, "v1, v4, psf or all")->check(CLI::IsMember({"v1", "v4", "psf", "all", "none"}));
    c->add_option("--primitives", o.primitives, "comma list of branch, stl, psf (overrides --engine)");
    c->add_option("--classes", o.classes, "comma list of transmitter classes, or 'all'");
    c->add_option("--spec-depth", o.spec_depth, "speculation depth d_spec")->check(CLI::NonNegativeNumber);
    c->add_option("--window", o.window, "sliding window W for dependency chains (0 = unbounded)")
        ->check(CLI::NonNegativeNumber);
    c->add_flag("--require-gep", o.require_gep, "universal chains must start with a pointer-arithmetic addr link");
    c->add_flag("--silent-stores", o.silent_stores, "allow writes that leave the xstate unchanged");
    c->add_flag("--include-committed", o.include_committed, "also report non-transient transmitters");
    c->add_flag("--no-observer", o.no_observer, "do not treat the final state as observable");
    c->add_option("--mcm", o.mcm, "memory consistency model")->check(CLI::IsMember({"tso"}));
    c->add_option("--timeout", o.timeout, "per-file timeout in seconds (0 = none)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leakage containment model analyzer"};
    app.require_subcommand(1);
    Options o;

    auto* parse = app.add_subcommand("parse", "validate and pretty-print a litmus file");
    parse->add_option("file", o.files, "litmus file")->required()->expected(1);
    parse->add_option("--dump-acfg", o.dump_acfg, "write the abstract CFG in DOT format");

    auto* en = app.add_subcommand("enumerate", "count event structures and consistent candidate executions");
    en->add_option("file", o.files, "litmus file")->required()->expected(1);
    en->add_option("--primitives", o.primitives, "comma list of branch, stl, psf");
    en->add_option("--spec-depth", o.spec_depth, "speculation depth d_spec")->check(CLI::NonNegativeNumber);
    en->add_flag("--silent-stores", o.silent_stores, "allow silent writes");
    en->add_option("--mcm", o.mcm, "memory consistency model")->check(CLI::IsMember({"tso"}));
    en->add_flag("--list", o.list, "list each candidate's relations");
    en->add_option("--dot", o.dot_dir, "write one DOT graph per candidate");
    en->add_option("--dump-acfg", o.dump_acfg, "write the abstract CFG in DOT format");
    en->add_option("--timeout", o.timeout, "timeout in seconds (0 = none)");

    auto* check = app.add_subcommand("check", "detect leakage");
    check->add_option("files", o.files, "litmus files")->required();
    add_analysis_flags(check, o);
    check->add_option("--format", o.format, "text or jsonl")->check(CLI::IsMember({"text", "jsonl"}));
    check->add_option("--dot", o.dot_dir, "write one witness graph per finding");
    check->add_option("--dump-acfg", o.dump_acfg, "write the abstract CFG in DOT format");
    check->add_flag("--no-timing", o.no_timing, "omit the timing footer");

    auto* rep = app.add_subcommand("repair", "insert a minimum set of lfences");
    rep->add_option("file", o.files, "litmus file")->required()->expected(1);
    add_analysis_flags(rep, o);
    rep->add_option("-o,--output", o.output, "write the fenced program here instead of stdout");
    rep->add_option("--plan", o.plan_path, "write the plan as JSON lines");
    rep->add_flag("--no-minimality", o.no_minimality, "skip the brute-force minimality check");

    auto* cor = app.add_subcommand("corpus", "run litmus files against their .expect sidecars");
    cor->add_option("dirs", o.files, "directories or files")->required();
    cor->add_option("--jobs", o.jobs, "files analyzed concurrently")->check(CLI::PositiveNumber);
    cor->add_option("--timeout", o.timeout, "per-file timeout in seconds (0 = none)");
    cor->add_flag("--no-timing", o.no_timing, "omit timing columns");
    cor->add_flag("--no-repair", o.no_repair, "skip fence-count checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    try {
        if (*parse) return cmd_parse(o);
        if (*en) return cmd_enumerate(o);
        if (*check) return cmd_check(o);
        if (*rep) return cmd_repair(o);
        if (*cor) return cmd_corpus(o);
    } catch (const ParseError& e) {
        std::cerr << (o.files.empty() ? std::string("input") : o.files.front()) << ":" << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

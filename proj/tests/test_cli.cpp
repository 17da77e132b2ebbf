#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fixtures.hpp"

namespace {

struct Result {
    int status = -1;
    std::string out;
};

Result lcm_cli(const std::string& args) {
    std::string cmd = std::string(LCM_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* f = popen(cmd.c_str(), "r");
    if (!f) return r;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, f)) > 0;) r.out.append(buf, n);
    int st = pclose(f);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string corpus(const std::string& rel) { return fixtures::corpus_path(rel); }

std::string temp_file(const std::string& name, const std::string& text) {
    auto p = std::filesystem::temp_directory_path() / ("lcm_cli_test_" + name);
    std::ofstream(p) << text;
    return p.string();
}

}  // namespace

TEST(Cli, ParseReportsSyntaxErrorsWithExitTwo) {
    auto ok = lcm_cli("parse " + corpus("figures/fig1_spectre_v1.lcm"));
    EXPECT_EQ(ok.status, 0) << ok.out;
    auto bad = lcm_cli("parse " + temp_file("bad.lcm", "func f():\n  r1 = load [r0]\n"));
    EXPECT_EQ(bad.status, 2);
    EXPECT_NE(bad.out.find(":2:"), std::string::npos) << bad.out;
}

TEST(Cli, EnumerateCountsSpectreV1) {
    auto r = lcm_cli("enumerate " + corpus("figures/fig1_spectre_v1.lcm"));
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("2 event structures, 2 consistent candidate executions"), std::string::npos) << r.out;
    auto sb = lcm_cli("enumerate " + corpus("litmus/sb.lcm"));
    EXPECT_NE(sb.out.find("1 event structures, 4 consistent candidate executions"), std::string::npos) << sb.out;
}

TEST(Cli, CheckExitCodes) {
    auto leaky = lcm_cli("check --engine v1 --no-timing " + corpus("figures/fig1_spectre_v1.lcm"));
    EXPECT_EQ(leaky.status, 1) << leaky.out;
    EXPECT_NE(leaky.out.find("e6_S"), std::string::npos) << leaky.out;
    auto clean = lcm_cli("check --no-timing " + temp_file("clean.lcm", "func f():\n  r1 = load x\n  store y, r1\n"));
    EXPECT_EQ(clean.status, 0) << clean.out;
    auto missing = lcm_cli("check /nonexistent/file.lcm");
    EXPECT_EQ(missing.status, 2);
    auto bad_engine = lcm_cli("check --engine v9 " + corpus("figures/fig1_spectre_v1.lcm"));
    EXPECT_NE(bad_engine.status, 0);
    EXPECT_NE(bad_engine.status, 1);
}

TEST(Cli, CheckIsDeterministic) {
    std::string args = "check --engine all --classes all --include-committed --no-timing " +
                       corpus("figures/fig2_spectre_v1_spec.lcm") + " " + corpus("stl/stl01.lcm");
    auto a = lcm_cli(args), b = lcm_cli(args);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.status, b.status);
}

TEST(Cli, JsonLinesRecords) {
    auto r = lcm_cli("check --engine v1 --format jsonl --no-timing " + corpus("figures/fig1_spectre_v1.lcm"));
    EXPECT_EQ(r.status, 1);
    std::istringstream is(r.out);
    std::size_t findings = 0;
    for (std::string line; std::getline(is, line);) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("transmitter")) {
            ++findings;
            EXPECT_EQ(j["transmitter"], "e6_S");
            EXPECT_EQ(j["class"], "universal_data");
        }
    }
    EXPECT_EQ(findings, 1u);
}

TEST(Cli, RepairWritesFencedProgram) {
    auto out = std::filesystem::temp_directory_path() / "lcm_cli_test_fenced.lcm";
    auto r = lcm_cli("repair --engine v4 -o " + out.string() + " " + corpus("figures/fig4a_spectre_v4.lcm"));
    EXPECT_EQ(r.status, 0) << r.out;
    auto fenced = lcm_cli("check --engine v4 --no-timing " + out.string());
    EXPECT_EQ(fenced.status, 0) << fenced.out;
    auto silent = lcm_cli("repair --engine none --silent-stores --no-observer --classes all --include-committed " +
                          corpus("figures/fig5a_silent_stores.lcm"));
    EXPECT_EQ(silent.status, 1) << silent.out;
}

TEST(Cli, CorpusCommandPassesOnShippedCorpus) {
    auto r = lcm_cli("corpus --no-timing " + std::string(LCM_CORPUS_DIR));
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("38/38 programs match their expectations"), std::string::npos) << r.out;
}

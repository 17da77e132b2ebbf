#pragma once

// Fence synthesis: every transient leak instance yields the set of program
// points where an lfence would cut its speculation window; a minimum hitting
// set of those sets is inserted, and the program is re-analyzed until clean.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lcm/ir.hpp"
#include "lcm/leakage.hpp"

namespace lcm::repair {

using leakage::FencePoint;

struct RepairPlan {
    std::vector<FencePoint> points;       // original-program points, sorted
    ir::Program program;                  // the fenced program
    int iterations = 0;
    bool clean = false;                   // the fenced program reports no findings
    std::size_t residual = 0;             // findings left in the fenced program
    std::vector<std::string> unrepairable;
    std::optional<bool> minimal;          // set by verify_minimality
};

/// Inserts an lfence before each point; labels on the instruction move to the
/// fence so branch targets land before it.
inline ir::Program insert_fences(const ir::Program& p, const std::vector<FencePoint>& points) {
    ir::Program out = p;
    std::map<std::string, std::set<std::size_t>> by_fn;
    for (const auto& pt : points) by_fn[pt.function].insert(pt.index);
    for (auto& f : out.functions) {
        auto it = by_fn.find(f.name);
        if (it == by_fn.end()) continue;
        for (auto idx = it->second.rbegin(); idx != it->second.rend(); ++idx) {
            std::size_t i = *idx;
            if (i > f.body.size()) throw Error("fence point " + leakage::to_string({f.name, i}) + " out of range");
            ir::Instruction fence;
            fence.op = ir::Op::fence;
            fence.fence = ir::FenceKind::lfence;
            if (i < f.body.size()) {
                fence.pos = f.body[i].pos;
                fence.labels = std::move(f.body[i].labels);
                f.body[i].labels.clear();
            }
            f.body.insert(f.body.begin() + static_cast<std::ptrdiff_t>(i), fence);
            for (auto& [label, at] : f.label_index)
                if (at > i) ++at;
        }
    }
    for (const auto& [fn, idx] : by_fn)
        if (!p.find(fn)) throw Error("fence point names unknown function '" + fn + "'");
    return out;
}

/// Exact minimum hitting set by branch and bound.  Among minimum solutions
/// the lexicographically smallest (earliest points) is returned.
inline std::vector<FencePoint> min_hitting_set(std::vector<std::vector<FencePoint>> sets) {
    for (auto& s : sets) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        if (s.empty()) throw Error("a leak has no fence point that removes it");
    }
    std::sort(sets.begin(), sets.end());
    sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
    // drop supersets: hitting the subset hits them too
    std::vector<std::vector<FencePoint>> core;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        bool super = false;
        for (std::size_t j = 0; j < sets.size() && !super; ++j)
            if (i != j && sets[j].size() < sets[i].size() &&
                std::includes(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end()))
                super = true;
        if (!super) core.push_back(sets[i]);
    }
    std::optional<std::vector<FencePoint>> best;
    std::vector<FencePoint> chosen;
    auto hit = [&](const std::vector<FencePoint>& s) {
        for (const auto& p : chosen)
            if (std::binary_search(s.begin(), s.end(), p)) return true;
        return false;
    };
    auto rec = [&](auto&& self) -> void {
        if (best && chosen.size() > best->size()) return;
        const std::vector<FencePoint>* pick = nullptr;
        for (const auto& s : core)
            if (!hit(s) && (!pick || s.size() < pick->size())) pick = &s;
        if (!pick) {
            auto sol = chosen;
            std::sort(sol.begin(), sol.end());
            if (!best || sol.size() < best->size() || (sol.size() == best->size() && sol < *best)) best = sol;
            return;
        }
        if (best && chosen.size() + 1 > best->size()) return;
        for (const auto& p : *pick) {
            chosen.push_back(p);
            self(self);
            chosen.pop_back();
        }
    };
    rec(rec);
    return best ? *best : std::vector<FencePoint>{};
}

namespace detail {

/// Maps indices of a fenced program back to the original program.
struct PointMap {
    std::map<std::string, std::vector<std::size_t>> orig;  // current index -> original index

    explicit PointMap(const ir::Program& p) {
        for (const auto& f : p.functions) {
            auto& v = orig[f.name];
            for (std::size_t i = 0; i < f.body.size(); ++i) v.push_back(i);
        }
    }
    /// Rebuilds the map for the original program fenced at `points`.
    static PointMap after(const ir::Program& original, const std::vector<FencePoint>& points) {
        PointMap m(original);
        std::map<std::string, std::set<std::size_t>> by_fn;
        for (const auto& pt : points) by_fn[pt.function].insert(pt.index);
        for (auto& [fn, v] : m.orig) {
            std::vector<std::size_t> nv;
            const auto& ins = by_fn[fn];
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (ins.count(i)) nv.push_back(i);  // the fence maps to the instruction it precedes
                nv.push_back(i);
            }
            v = std::move(nv);
        }
        return m;
    }
    FencePoint back(const FencePoint& cur) const {
        const auto& v = orig.at(cur.function);
        return {cur.function, cur.index < v.size() ? v[cur.index] : cur.index};
    }
};

}  // namespace detail

struct RepairConfig {
    leakage::LeakConfig leak;
    int max_iterations = 8;
};

/// Union of the fence points named by any requirement of `p` under `cfg`.
inline std::vector<FencePoint> candidate_fence_points(const ir::Program& p, const leakage::LeakConfig& cfg) {
    auto c = cfg;
    c.collect_repair = true;
    auto rep = leakage::analyze(p, c);
    std::set<FencePoint> pts;
    for (const auto& r : rep.requirements) pts.insert(r.begin(), r.end());
    return {pts.begin(), pts.end()};
}

inline RepairPlan repair(const ir::Program& p, const RepairConfig& cfg) {
    RepairPlan plan;
    plan.program = p;
    auto lc = cfg.leak;
    lc.collect_repair = true;
    std::set<FencePoint> points;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        auto rep = leakage::analyze(plan.program, lc);
        plan.iterations = iter + 1;
        plan.residual = rep.findings.size();
        plan.unrepairable = rep.unrepairable;
        if (rep.findings.empty()) {
            plan.clean = true;
            break;
        }
        if (rep.requirements.empty()) break;
        auto map = detail::PointMap::after(p, {points.begin(), points.end()});
        std::vector<std::vector<FencePoint>> sets;
        for (const auto& req : rep.requirements) {
            std::vector<FencePoint> s;
            for (const auto& pt : req) {
                auto o = map.back(pt);
                if (!points.count(o)) s.push_back(o);
            }
            if (!s.empty()) sets.push_back(std::move(s));
        }
        if (sets.empty()) break;
        auto add = min_hitting_set(std::move(sets));
        if (add.empty()) break;
        points.insert(add.begin(), add.end());
        plan.points.assign(points.begin(), points.end());
        plan.program = insert_fences(p, plan.points);
    }
    plan.points.assign(points.begin(), points.end());
    return plan;
}

/// Brute-force check that no smaller subset of the candidate points removes
/// every finding.  Skipped (returns nullopt) beyond `max_candidates` points.
inline std::optional<bool> verify_minimality(const ir::Program& p, const RepairPlan& plan, const RepairConfig& cfg,
                                             std::size_t max_candidates = 20) {
    if (!plan.clean) return std::nullopt;
    auto lc = cfg.leak;
    lc.collect_repair = false;
    std::set<FencePoint> universe(plan.points.begin(), plan.points.end());
    auto cand = candidate_fence_points(p, cfg.leak);
    universe.insert(cand.begin(), cand.end());
    std::vector<FencePoint> u(universe.begin(), universe.end());
    if (u.size() > max_candidates) return std::nullopt;
    std::size_t k = plan.points.size();
    for (std::uint32_t mask = 0; mask < (1u << u.size()); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) >= k) continue;
        std::vector<FencePoint> sub;
        for (std::size_t i = 0; i < u.size(); ++i)
            if (mask & (1u << i)) sub.push_back(u[i]);
        if (leakage::analyze(insert_fences(p, sub), lc).findings.empty()) return false;
    }
    return true;
}

}  // namespace lcm::repair

// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "phylomemy/error.hpp"
#include "phylomemy/pipeline.hpp"
#include "synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

using namespace phylo;
using phylo::testing::read_file;
using phylo::testing::scratch_dir;

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Weakly connected components of the kinship graph, by graph search.
std::size_t weak_components(const KinshipGraph& graph) {
    std::vector<std::vector<GroupIndex>> adj(graph.groups.size());
    for (const auto& l : graph.links) {
        adj[l.child].push_back(l.parent);
        adj[l.parent].push_back(l.child);
    }
    std::vector<bool> seen(graph.groups.size(), false);
    std::size_t count = 0;
    for (GroupIndex s = 0; s < graph.groups.size(); ++s) {
        if (seen[s]) continue;
        ++count;
        std::vector<GroupIndex> stack{s};
        seen[s] = true;
        while (!stack.empty()) {
            const GroupIndex g = stack.back();
            stack.pop_back();
            for (GroupIndex n : adj[g]) {
                if (!seen[n]) {
                    seen[n] = true;
                    stack.push_back(n);
                }
            }
        }
    }
    return count;
}

// Phylomemies every structural criterion is checked on.
std::vector<Phylomemy> test_phylomemies() {
    std::vector<Phylomemy> out;
    std::mt19937 rng(1001);
    for (int i = 0; i < 24; ++i) {
        const std::size_t periods = 3 + rng() % 6;
        auto groups = phylo::testing::random_groups(rng, 30 + rng() % 120, periods, 20 + rng() % 40, 5);
        const auto graph = build_kinship_graph(groups, periods, {});
        for (double lambda : {0.0, 0.3, 0.5, 0.8, 1.0}) out.push_back(rise(graph, {lambda}));
    }
    BuildConfig toy = load_config(PHYLO_FIXTURES "/toy.conf");
    const Reconstruction rec = reconstruct(toy);
    for (double lambda : {0.0, 0.5, 1.0}) out.push_back(rise(rec.kinship, {lambda}));
    return out;
}

Outcome oracle_equivalence() {
    std::mt19937 rng(2024);
    const auto start = Clock::now();
    std::size_t identical = 0;
    const std::size_t instances = 50;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t periods = 2 + rng() % 6;
        auto groups = phylo::testing::random_groups(rng, 5 + rng() % 26, periods, 6 + rng() % 14, 5);
        MatchConfig cfg;
        cfg.window = 1 + rng() % 3;
        cfg.all_above_floor = i % 5 == 4;
        const auto fast = build_kinship_graph(groups, periods, cfg);
        const auto slow = brute_force_oracle(groups, periods, cfg);
        identical += fast.links == slow.links;
    }
    const double secs = seconds_since(start);
    return {identical == instances && secs < 5.0,
            fmt::format("{}/{} instances link-for-link identical in {:.3f} s (limit 5 s)", identical, instances, secs)};
}

Outcome foliation_refinement(const std::vector<Phylomemy>& phylomemies) {
    std::size_t blocks = 0, nested = 0, pairs = 0;
    for (const auto& p : phylomemies) {
        const auto levels = committed_levels(p);
        for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
            ++pairs;
            const auto coarse = foliation_slice(p, levels[i]);
            const auto fine = foliation_slice(p, levels[i + 1]);
            std::vector<std::size_t> owner(p.groups.size());
            for (std::size_t b = 0; b < coarse.size(); ++b) {
                for (GroupIndex g : coarse[b]) owner[g] = b;
            }
            for (const auto& block : fine) {
                ++blocks;
                nested += std::all_of(block.begin(), block.end(), [&](GroupIndex g) { return owner[g] == owner[block.front()]; });
            }
        }
    }
    return {blocks > 0 && nested == blocks,
            fmt::format("{}/{} blocks nest across {} consecutive level pairs in {} phylomemies", nested, blocks, pairs,
                        phylomemies.size())};
}

Outcome ghost_bound(const std::vector<Phylomemy>& phylomemies) {
    std::size_t ghosts = 0, violations = 0;
    for (const auto& p : phylomemies) {
        const auto owner = p.tree.leaf_of_groups(p.groups.size());
        for (const auto& g : p.ghosts) {
            ++ghosts;
            const double ceiling = std::min(p.tree.nodes[owner[g.child]].elevation, p.tree.nodes[owner[g.parent]].elevation);
            if (!(g.weight < g.cut_level && g.cut_level <= ceiling)) ++violations;
        }
    }
    return {ghosts > 0 && violations == 0, fmt::format("{} violations over {} ghost links", violations, ghosts)};
}

Outcome lambda_monotonicity() {
    std::mt19937 rng(7);
    auto groups = phylo::testing::random_groups(rng, 150, 8, 45, 5);
    const auto graph = build_kinship_graph(groups, 8, {});
    std::vector<std::size_t> counts;
    for (double lambda : {0.0, 0.5, 1.0}) counts.push_back(rise(graph, {lambda}).tree.leaves().size());
    const std::size_t wcc = weak_components(graph);
    return {counts[0] <= counts[1] && counts[1] <= counts[2] && counts[0] == wcc,
            fmt::format("leaf branches at lambda 0/0.5/1 = {}/{}/{}, weakly connected components = {}", counts[0], counts[1],
                        counts[2], wcc)};
}

Outcome planted_lineage() {
    const auto dir = scratch_dir("acceptance_planted");
    phylo::testing::ChainSpec spec;
    const auto corpus = phylo::testing::planted_chains(dir, spec);
    BuildConfig cfg = phylo::testing::config_for(corpus, dir / "planted.json");
    cfg.min_periods = 2;
    const auto start = Clock::now();
    const Reconstruction rec = reconstruct(cfg);
    const LevelResult level = build_level(rec, cfg, 0.5);
    const double secs = seconds_since(start);
    const PhyloExport& e = level.projection;

    // Majority planted topic of every branch, then agreement of every group with it.
    std::map<std::string, std::map<std::size_t, std::size_t>> votes;
    std::vector<std::pair<std::string, std::size_t>> group_topic;
    for (const auto& g : e.groups) {
        std::set<std::size_t> topics;
        for (const auto& t : g.terms) topics.insert(phylo::testing::planted_topic(rec.labels[t.id]));
        const std::size_t topic = topics.size() == 1 ? *topics.begin() : spec.topics;
        group_topic.emplace_back(g.branch, topic);
        ++votes[g.branch][topic];
    }
    std::map<std::string, std::size_t> branch_topic;
    for (const auto& [b, v] : votes) {
        branch_topic[b] = std::max_element(v.begin(), v.end(), [](auto& x, auto& y) { return x.second < y.second; })->first;
    }
    std::size_t agree = 0;
    for (const auto& [b, topic] : group_topic) agree += topic == branch_topic[b];
    std::set<std::size_t> distinct;
    for (const auto& [b, topic] : branch_topic) distinct.insert(topic);
    const double agreement = group_topic.empty() ? 0.0 : 100.0 * static_cast<double>(agree) / static_cast<double>(group_topic.size());
    const bool pass = e.branches.size() == 3 && distinct.size() == 3 && agree == group_topic.size() && secs < 10.0;
    return {pass, fmt::format("{} branches over {} groups, agreement {:.1f}%, {} distinct topics, {:.3f} s (limit 10 s)",
                              e.branches.size(), e.groups.size(), agreement, distinct.size(), secs)};
}

Outcome quality_endpoints() {
    std::mt19937 rng(5);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        auto groups = phylo::testing::random_groups(rng, 5 + rng() % 40, 4, 12, 5);
        const TermStats stats(groups);
        std::vector<GroupIndex> all(groups.size());
        std::iota(all.begin(), all.end(), GroupIndex{0});
        const std::vector<std::vector<GroupIndex>> whole{all};
        std::vector<std::vector<GroupIndex>> singles;
        for (GroupIndex g : all) singles.push_back({g});
        worst = std::max(worst, std::abs(branch_quality(whole, groups, 0.0, stats) - 1.0));
        worst = std::max(worst, std::abs(branch_quality(singles, groups, 1.0, stats) - 1.0));
    }
    return {worst <= 1e-12, fmt::format("max |F - 1| = {:.3e} over 20 random group sets (tolerance 1e-12)", worst)};
}

Outcome determinism() {
    const auto dir = scratch_dir("acceptance_determinism");
    phylo::testing::ChainSpec spec;
    spec.seed = 99;
    const auto corpus = phylo::testing::planted_chains(dir, spec);
    std::vector<std::uint64_t> hashes;
    for (std::size_t threads : {1, 1, 4}) {
        BuildConfig cfg = phylo::testing::config_for(corpus, dir / fmt::format("out{}.json", hashes.size()));
        cfg.threads = threads;
        cfg.lambdas = {0.3};
        run_build(cfg);
        hashes.push_back(fnv1a(read_file(cfg.output)));
    }
    BuildConfig toy = load_config(PHYLO_FIXTURES "/toy.conf");
    for (std::size_t threads : {1, 3}) {
        toy.output = dir / fmt::format("toy{}.json", threads);
        toy.threads = threads;
        run_build(toy);
    }
    const bool toy_same = read_file(dir / "toy1.json") == read_file(dir / "toy3.json");
    const bool same = hashes[0] == hashes[1] && hashes[1] == hashes[2] && toy_same;
    return {same, fmt::format("export hashes {:016x} {:016x} {:016x} (threads 1, 1, 4); toy fixture identical across 1/3 threads: {}",
                              hashes[0], hashes[1], hashes[2], toy_same)};
}

double matching_seconds(std::size_t groups_count, std::uint32_t seed) {
    std::mt19937 rng(seed);
    auto groups = phylo::testing::random_groups(rng, groups_count, 10, 300, 6);
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
        const auto start = Clock::now();
        const auto graph = build_kinship_graph(groups, 10, {});
        best = std::min(best, seconds_since(start));
        if (graph.groups.size() != groups_count) return -1.0;
    }
    return best;
}

Outcome performance() {
    const auto dir = scratch_dir("acceptance_performance");
    phylo::testing::BulkSpec spec;
    const auto corpus = phylo::testing::bulk_corpus(dir, spec);
    BuildConfig cfg = phylo::testing::config_for(corpus, dir / "bulk.json");
    const auto start = Clock::now();
    run_build(cfg);
    const double secs = seconds_since(start);
    const PhyloExport e = read_export(cfg.output);

    const double t1 = matching_seconds(2000, 17);
    const double t2 = matching_seconds(4000, 17);
    const double ratio = t2 / t1;
    return {secs < 120.0 && ratio <= 4.5,
            fmt::format("{} docs / {} roots / {} periods end to end in {:.2f} s (limit 120 s, {} groups); "
                        "matching 2000 -> 4000 groups: {:.3f} s -> {:.3f} s, ratio {:.2f} (limit 4.5)",
                        spec.documents, spec.roots, e.periods.size(), secs, e.metadata["counts"]["groups_before_filter"].get<std::size_t>(),
                        t1, t2, ratio)};
}

Outcome export_contract() {
    const auto dir = scratch_dir("acceptance_export");
    std::vector<fs::path> exports;

    BuildConfig toy = load_config(PHYLO_FIXTURES "/toy.conf");
    toy.output = dir / "toy.json";
    toy.lambdas = {0.0, 0.5, 1.0};
    toy.min_periods = 1;
    for (const auto& p : run_build(toy)) exports.push_back(p);

    const auto planted = phylo::testing::planted_chains(dir, {});
    BuildConfig pc = phylo::testing::config_for(planted, dir / "planted.json");
    for (const auto& p : run_build(pc)) exports.push_back(p);

    // Enough groups to cross the rendering threshold.
    phylo::testing::BulkSpec spec;
    spec.documents = 6000;
    spec.topics = 120;
    spec.seed = 3;
    const auto bulk = phylo::testing::bulk_corpus(dir, spec);
    BuildConfig bc = phylo::testing::config_for(bulk, dir / "bulk.json");
    bc.min_periods = 1;
    for (const auto& p : run_build(bc)) exports.push_back(p);

    std::size_t round_trips = 0, flags_ok = 0, large = 0;
    for (const auto& path : exports) {
        const std::string text = read_file(path);
        const PhyloExport e = parse_export(text);
        round_trips += serialize(e) == text && parse_export(serialize(e)) == e;
        const bool is_large = e.groups.size() > kLargeExportGroups;
        large += is_large;
        flags_ok += e.metadata["large_export"].get<bool>() == is_large;
    }
    return {round_trips == exports.size() && flags_ok == exports.size() && large > 0,
            fmt::format("{}/{} fixtures round-trip exactly; warning flag correct on {}/{} ({} above {} groups)", round_trips,
                        exports.size(), flags_ok, exports.size(), large, kLargeExportGroups)};
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
    std::vector<Phylomemy> phylomemies;
    criteria.emplace_back("oracle equivalence", oracle_equivalence);
    criteria.emplace_back("foliation refinement", [&] {
        if (phylomemies.empty()) phylomemies = test_phylomemies();
        return foliation_refinement(phylomemies);
    });
    criteria.emplace_back("ghost-line bound", [&] {
        if (phylomemies.empty()) phylomemies = test_phylomemies();
        return ghost_bound(phylomemies);
    });
    criteria.emplace_back("lambda shape monotonicity", lambda_monotonicity);
    criteria.emplace_back("planted-lineage recovery", planted_lineage);
    criteria.emplace_back("quality endpoints", quality_endpoints);
    criteria.emplace_back("determinism", determinism);
    criteria.emplace_back("desk-scale performance", performance);
    criteria.emplace_back("export contract", export_contract);

    std::size_t failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail << std::endl;
    }
    std::cout << fmt::format("{}/{} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
    return failed == 0 ? 0 : 1;
}

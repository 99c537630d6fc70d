#include "phylomemy/error.hpp"
#include "phylomemy/sea_level.hpp"
#include "synthetic.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>

#include <doctest.h>

using namespace phylo;

namespace {

// Groups and weighted links given by hand, bypassing the matcher.
KinshipGraph hand_graph(std::vector<std::pair<PeriodId, std::vector<TermId>>> groups,
                        std::vector<KinshipLink> links, std::size_t periods) {
    KinshipGraph g;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        g.groups.push_back({group_id(i), groups[i].first, groups[i].second, 1});
    }
    std::sort(links.begin(), links.end(), [](auto& a, auto& b) { return std::tie(a.child, a.parent) < std::tie(b.child, b.parent); });
    g.links = std::move(links);
    g.period_count = periods;
    return g;
}

// Two clusters of three identical groups, 0.9 inside, bridged by 0.1.
KinshipGraph two_clusters() {
    return hand_graph({{0, {1, 2, 3}}, {0, {4, 5, 6}}, {1, {1, 2, 3}}, {1, {4, 5, 6}}, {2, {1, 2, 3}}, {2, {4, 5, 6}}},
                      {{2, 0, 0.9}, {4, 2, 0.9}, {3, 1, 0.9}, {5, 3, 0.9}, {3, 0, 0.1}}, 3);
}

// Four clusters: pairs bridged at 0.5, the two pairs bridged at 0.1.
KinshipGraph four_clusters() {
    std::vector<std::pair<PeriodId, std::vector<TermId>>> groups;
    std::vector<KinshipLink> links;
    for (TermId c = 0; c < 4; ++c) {
        const GroupIndex first = groups.size();
        for (PeriodId p = 0; p < 3; ++p) groups.push_back({p, {10 * c, 10 * c + 1}});
        links.push_back({first + 1, first, 0.9});
        links.push_back({first + 2, first + 1, 0.9});
    }
    links.push_back({4, 0, 0.5});   // cluster 1 -> cluster 0
    links.push_back({10, 6, 0.5});  // cluster 3 -> cluster 2
    links.push_back({8, 1, 0.1});   // second pair -> first pair
    // Cluster order by id must follow creation order: sort groups by (period, terms).
    return hand_graph(groups, links, 3);
}

double reference_quality(const std::vector<std::vector<GroupIndex>>& partition, const std::vector<Group>& groups, double lambda) {
    std::map<TermId, double> g;
    for (const auto& grp : groups) {
        for (TermId t : grp.terms) g[t] += 1.0;
    }
    std::set<TermId> present;
    for (const auto& block : partition) {
        for (GroupIndex i : block) present.insert(groups[i].terms.begin(), groups[i].terms.end());
    }
    double total = 0.0;
    for (TermId t : present) total += g[t];
    double f = 0.0;
    for (TermId t : present) {
        double s = 0.0;
        for (const auto& block : partition) {
            double n = 0.0;
            for (GroupIndex i : block) n += std::count(groups[i].terms.begin(), groups[i].terms.end(), t);
            if (n == 0.0) continue;
            const double a = n / static_cast<double>(block.size());
            const double r = n / g[t];
            s += r * (lambda * a + (1.0 - lambda) * r);
        }
        f += g[t] / total * s;
    }
    return f;
}

std::vector<std::string> leaf_ids(const Phylomemy& p) {
    std::vector<std::string> ids;
    for (BranchIndex b : p.tree.leaves()) ids.push_back(p.tree.nodes[b].id);
    return ids;
}

void dfs_leaves(const SplitTree& tree, BranchIndex b, std::vector<BranchIndex>& out) {
    if (tree.nodes[b].children.empty()) {
        out.push_back(b);
        return;
    }
    for (BranchIndex c : tree.nodes[b].children) dfs_leaves(tree, c, out);
}

}  // namespace

TEST_CASE("quality of a hand-computed partition") {
    // a in G0 G1 G2, b in G0 G3 G4, c in G2 G4 G5.
    std::vector<Group> groups{{"g0", 0, {0, 1}, 1}, {"g1", 0, {0}, 1}, {"g2", 1, {0, 2}, 1},
                              {"g3", 1, {1}, 1},    {"g4", 2, {1, 2}, 1}, {"g5", 2, {2}, 1}};
    const TermStats stats(groups);
    const std::vector<std::vector<GroupIndex>> partition{{0, 1}, {2, 3, 4, 5}};
    CHECK(std::abs(branch_quality(partition, groups, 0.5, stats) - 37.0 / 54.0) < 1e-12);
    for (double lambda : {0.0, 0.2, 0.7, 1.0}) {
        CHECK(std::abs(branch_quality(partition, groups, lambda, stats) - reference_quality(partition, groups, lambda)) < 1e-12);
    }
    const std::vector<std::vector<GroupIndex>> whole{{0, 1, 2, 3, 4, 5}};
    CHECK(std::abs(branch_quality(whole, groups, 0.0, stats) - 1.0) < 1e-12);
    const std::vector<std::vector<GroupIndex>> singles{{0}, {1}, {2}, {3}, {4}, {5}};
    CHECK(std::abs(branch_quality(singles, groups, 1.0, stats) - 1.0) < 1e-12);

    CHECK_THROWS_AS(branch_quality(partition, groups, 1.5, stats), ConfigError);
    const std::vector<std::vector<GroupIndex>> with_empty{{0}, {}};
    CHECK_THROWS_AS(branch_quality(with_empty, groups, 0.5, stats), Error);
}

TEST_CASE("quality matches the reference on random partitions") {
    std::mt19937 rng(31);
    for (int round = 0; round < 50; ++round) {
        auto groups = phylo::testing::random_groups(rng, 4 + rng() % 20, 4, 8, 4);
        const TermStats stats(groups);
        const std::size_t k = 1 + rng() % groups.size();
        std::vector<std::vector<GroupIndex>> partition(k);
        for (GroupIndex i = 0; i < groups.size(); ++i) partition[i < k ? i : rng() % k].push_back(i);
        const double lambda = static_cast<double>(rng() % 11) / 10.0;
        CHECK(std::abs(branch_quality(partition, groups, lambda, stats) - reference_quality(partition, groups, lambda)) < 1e-12);
    }
}

TEST_CASE("continent components") {
    KinshipGraph g = two_clusters();
    g.links.erase(std::remove_if(g.links.begin(), g.links.end(), [](auto& l) { return l.weight < 0.5; }), g.links.end());
    SplitTree tree = initial_continent(g);
    REQUIRE(tree.roots.size() == 2);
    CHECK(tree.nodes[0].id == "0");
    CHECK(tree.nodes[0].groups == std::vector<GroupIndex>{0, 2, 4});
    CHECK(tree.nodes[1].groups == std::vector<GroupIndex>{1, 3, 5});
}

TEST_CASE("two clusters split at the midpoint under full accuracy") {
    Phylomemy p = rise(two_clusters(), {1.0});
    CHECK(leaf_ids(p) == std::vector<std::string>{"0.1", "0.2"});
    REQUIRE(p.ghosts.size() == 1);
    CHECK(p.ghosts[0].child == 3);
    CHECK(p.ghosts[0].parent == 0);
    CHECK(p.ghosts[0].cut_level == doctest::Approx(0.5));
    CHECK(p.tree.nodes[0].split_level == doctest::Approx(0.5));
    CHECK(p.tree.nodes[1].elevation == doctest::Approx(0.5));
    CHECK(p.links.size() == 4);
    REQUIRE(committed_levels(p).size() == 1);
    CHECK(committed_levels(p)[0] == doctest::Approx(0.5));
    // The singleton split inside a cluster was evaluated and refused.
    CHECK(std::count_if(p.trace.begin(), p.trace.end(), [](auto& d) { return !d.committed; }) == 2);
}

TEST_CASE("full recall keeps the continent") {
    Phylomemy p = rise(two_clusters(), {0.0});
    CHECK(leaf_ids(p) == std::vector<std::string>{"0"});
    CHECK(p.ghosts.empty());
    REQUIRE(p.trace.size() == 1);
    CHECK_FALSE(p.trace[0].committed);
    CHECK(p.trace[0].quality_before == doctest::Approx(1.0));
}

TEST_CASE("nested splits are numbered in drift order") {
    Phylomemy p = rise(four_clusters(), {1.0});
    CHECK(leaf_ids(p) == std::vector<std::string>{"0.1.1", "0.1.2", "0.2.1", "0.2.2"});
    const auto levels = committed_levels(p);
    REQUIRE(levels.size() == 2);
    CHECK(levels[0] == doctest::Approx(0.3));
    CHECK(levels[1] == doctest::Approx(0.7));
    std::vector<BranchIndex> reference;
    for (BranchIndex r : p.tree.roots) dfs_leaves(p.tree, r, reference);
    CHECK(p.tree.leaves() == reference);
    const auto leaves = p.tree.leaves();
    CHECK(p.tree.lowest_common_ancestor(leaves[0], leaves[1]) == p.tree.nodes[leaves[0]].parent);
    CHECK(p.tree.lowest_common_ancestor(leaves[0], leaves[3]) == std::optional<BranchIndex>{0});
}

TEST_CASE("weight-one links never break") {
    auto g = hand_graph({{0, {1}}, {1, {1}}}, {{1, 0, 1.0}}, 2);
    Phylomemy p = rise(g, {1.0});
    CHECK(leaf_ids(p) == std::vector<std::string>{"0"});
    CHECK(p.trace.empty());
}

TEST_CASE("rise invariants on random kinship graphs") {
    std::mt19937 rng(32);
    for (int round = 0; round < 30; ++round) {
        const std::size_t periods = 3 + rng() % 5;
        auto groups = phylo::testing::random_groups(rng, 20 + rng() % 60, periods, 15 + rng() % 20, 4);
        const auto graph = build_kinship_graph(groups, periods, {});
        const double lambda = static_cast<double>(rng() % 11) / 10.0;
        const Phylomemy p = rise(graph, {lambda});

        // Leaves partition the groups.
        const auto owner = p.tree.leaf_of_groups(p.groups.size());
        for (BranchIndex b : owner) CHECK(b < p.tree.nodes.size());
        std::size_t covered = 0;
        for (BranchIndex b : p.tree.leaves()) covered += p.tree.nodes[b].groups.size();
        CHECK(covered == p.groups.size());

        // Surviving links stay inside a leaf; every removed link is accounted for.
        for (const auto& l : p.links) CHECK(owner[l.child] == owner[l.parent]);
        for (const auto& l : p.ghosts) CHECK(owner[l.child] != owner[l.parent]);
        CHECK(p.links.size() + p.ghosts.size() + p.submerged_links == graph.links.size());

        // Ghosts sit below their cut, which sits at or below both branch elevations.
        for (const auto& l : p.ghosts) {
            CHECK(l.weight < l.cut_level);
            CHECK(l.cut_level <= std::min(p.tree.nodes[owner[l.child]].elevation, p.tree.nodes[owner[l.parent]].elevation));
        }

        // Committed steps strictly improved the quality; children rise above parents.
        for (const auto& d : p.trace) {
            if (d.committed) CHECK(d.quality_after > d.quality_before);
        }
        for (const auto& node : p.tree.nodes) {
            if (node.parent) CHECK(node.elevation > p.tree.nodes[*node.parent].elevation);
        }

        // Each committed level refines the previous one.
        const auto levels = committed_levels(p);
        for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
            const auto coarse = foliation_slice(p, levels[i]);
            const auto fine = foliation_slice(p, levels[i + 1]);
            std::vector<std::size_t> block_of(p.groups.size());
            for (std::size_t b = 0; b < coarse.size(); ++b) {
                for (GroupIndex g : coarse[b]) block_of[g] = b;
            }
            for (const auto& block : fine) {
                for (GroupIndex g : block) CHECK(block_of[g] == block_of[block.front()]);
            }
        }
    }
}

TEST_CASE("zero lambda never splits a component") {
    std::mt19937 rng(33);
    for (int round = 0; round < 20; ++round) {
        auto groups = phylo::testing::random_groups(rng, 40, 5, 20, 4);
        const auto graph = build_kinship_graph(groups, 5, {});
        const Phylomemy p = rise(graph, {0.0});
        CHECK(p.tree.leaves().size() == initial_continent(graph).roots.size());
    }
}

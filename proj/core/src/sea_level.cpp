#include "phylomemy/sea_level.hpp"

#include "phylomemy/error.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

namespace phylo {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
        return true;
    }

private:
    std::vector<std::size_t> parent_;
};

// Orders blocks by earliest period, then by smallest group id.
void order_blocks(std::vector<std::vector<GroupIndex>>& blocks, std::span<const Group> groups) {
    struct Key {
        PeriodId period;
        const std::string* id;
    };
    auto key = [&](const std::vector<GroupIndex>& block) {
        Key k{groups[block.front()].period, &groups[block.front()].id};
        for (GroupIndex g : block) {
            k.period = std::min(k.period, groups[g].period);
            if (groups[g].id < *k.id) k.id = &groups[g].id;
        }
        return k;
    };
    std::vector<std::pair<Key, std::vector<GroupIndex>>> keyed;
    keyed.reserve(blocks.size());
    for (auto& b : blocks) {
        std::sort(b.begin(), b.end());
        keyed.emplace_back(key(b), std::move(b));
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first.period != b.first.period) return a.first.period < b.first.period;
        return *a.first.id < *b.first.id;
    });
    blocks.clear();
    for (auto& [k, b] : keyed) blocks.push_back(std::move(b));
}

// Components of `members` under the given undirected edges (indices into
// `members` space are resolved through `local`).
std::vector<std::vector<GroupIndex>> components(std::span<const GroupIndex> members,
                                                const std::vector<std::pair<GroupIndex, GroupIndex>>& edges,
                                                std::span<const Group> groups) {
    std::unordered_map<GroupIndex, std::size_t> local;
    for (std::size_t i = 0; i < members.size(); ++i) local.emplace(members[i], i);
    DisjointSets sets(members.size());
    for (const auto& [a, b] : edges) sets.unite(local.at(a), local.at(b));
    std::map<std::size_t, std::vector<GroupIndex>> by_root;
    for (std::size_t i = 0; i < members.size(); ++i) by_root[sets.find(i)].push_back(members[i]);
    std::vector<std::vector<GroupIndex>> blocks;
    for (auto& [root, block] : by_root) blocks.push_back(std::move(block));
    order_blocks(blocks, groups);
    return blocks;
}

void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError(fmt::format("lambda must lie in [0, 1], got {}", lambda));
    }
}

}  // namespace

TermStats::TermStats(std::span<const Group> groups) {
    for (const auto& g : groups) {
        for (TermId t : g.terms) {
            if (t >= freq_.size()) freq_.resize(static_cast<std::size_t>(t) + 1, 0);
            ++freq_[t];
        }
    }
}

std::vector<BranchIndex> SplitTree::leaves() const {
    std::vector<BranchIndex> out;
    std::vector<BranchIndex> stack(roots.rbegin(), roots.rend());
    while (!stack.empty()) {
        const BranchIndex b = stack.back();
        stack.pop_back();
        if (nodes[b].is_leaf()) {
            out.push_back(b);
            continue;
        }
        for (auto it = nodes[b].children.rbegin(); it != nodes[b].children.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

std::vector<BranchIndex> SplitTree::leaf_of_groups(std::size_t group_count) const {
    std::vector<BranchIndex> owner(group_count, nodes.size());
    for (BranchIndex b : leaves()) {
        for (GroupIndex g : nodes[b].groups) owner.at(g) = b;
    }
    return owner;
}

std::optional<BranchIndex> SplitTree::lowest_common_ancestor(BranchIndex a, BranchIndex b) const {
    std::vector<BranchIndex> path;
    for (std::optional<BranchIndex> x = a; x; x = nodes[*x].parent) path.push_back(*x);
    for (std::optional<BranchIndex> y = b; y; y = nodes[*y].parent) {
        if (std::find(path.begin(), path.end(), *y) != path.end()) return y;
    }
    return std::nullopt;
}

SplitTree initial_continent(const KinshipGraph& graph) {
    std::vector<GroupIndex> all(graph.groups.size());
    std::iota(all.begin(), all.end(), GroupIndex{0});
    std::vector<std::pair<GroupIndex, GroupIndex>> edges;
    edges.reserve(graph.links.size());
    for (const auto& l : graph.links) edges.emplace_back(l.child, l.parent);

    SplitTree tree;
    if (all.empty()) return tree;
    auto blocks = components(all, edges, graph.groups);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        Branch b;
        b.id = std::to_string(k);
        b.groups = std::move(blocks[k]);
        b.elevation = 0.0;
        tree.roots.push_back(tree.nodes.size());
        tree.nodes.push_back(std::move(b));
    }
    return tree;
}

double branch_quality(std::span<const std::vector<GroupIndex>> partition, std::span<const Group> groups, double lambda,
                      const TermStats& stats) {
    check_lambda(lambda);
    // term -> per-block counts
    std::map<TermId, std::vector<std::size_t>> counts;
    for (std::size_t b = 0; b < partition.size(); ++b) {
        if (partition[b].empty()) {
            throw Error("branch_quality: empty branch");
        }
        for (GroupIndex g : partition[b]) {
            for (TermId t : groups[g].terms) {
                auto& row = counts[t];
                if (row.empty()) row.assign(partition.size(), 0);
                ++row[b];
            }
        }
    }
    if (counts.empty()) return 0.0;

    auto frequency = [&](TermId t, const std::vector<std::size_t>& row) {
        const std::size_t local = std::accumulate(row.begin(), row.end(), std::size_t{0});
        return static_cast<double>(std::max(stats.frequency(t), local));
    };
    double total = 0.0;
    for (const auto& [t, row] : counts) total += frequency(t, row);

    double quality = 0.0;
    for (const auto& [t, row] : counts) {
        const double g = frequency(t, row);
        double term_score = 0.0;
        for (std::size_t b = 0; b < row.size(); ++b) {
            if (row[b] == 0) continue;
            const double n = static_cast<double>(row[b]);
            const double accuracy = n / static_cast<double>(partition[b].size());
            const double recall = n / g;
            term_score += recall * (lambda * accuracy + (1.0 - lambda) * recall);
        }
        quality += (g / total) * term_score;
    }
    return quality;
}

Phylomemy rise(const KinshipGraph& graph, const RiseConfig& config) {
    return rise(graph, initial_continent(graph), config);
}

Phylomemy rise(const KinshipGraph& graph, SplitTree initial, const RiseConfig& config) {
    check_lambda(config.lambda);
    Phylomemy phylo;
    phylo.groups = graph.groups;
    phylo.lambda = config.lambda;
    phylo.period_count = graph.period_count;
    phylo.tree = std::move(initial);
    const std::span<const Group> groups = phylo.groups;
    const TermStats stats(groups);

    // Each link is alive until it is ghosted or submerged.
    enum class State { alive, ghost, submerged };
    std::vector<State> state(graph.links.size(), State::alive);
    std::vector<BranchIndex> owner(groups.size(), phylo.tree.nodes.size());
    for (BranchIndex b = 0; b < phylo.tree.nodes.size(); ++b) {
        for (GroupIndex g : phylo.tree.nodes[b].groups) owner.at(g) = b;
    }
    // links touching each group, for local link lookup
    std::vector<std::vector<std::size_t>> incident(groups.size());
    for (std::size_t i = 0; i < graph.links.size(); ++i) {
        incident[graph.links[i].child].push_back(i);
        incident[graph.links[i].parent].push_back(i);
    }

    std::deque<BranchIndex> pending(phylo.tree.roots.begin(), phylo.tree.roots.end());
    while (!pending.empty()) {
        const BranchIndex node = pending.front();
        pending.pop_front();
        const std::vector<GroupIndex> members = phylo.tree.nodes[node].groups;
        if (members.size() < 2) continue;

        std::vector<std::size_t> intra;
        for (GroupIndex g : members) {
            for (std::size_t li : incident[g]) {
                const auto& l = graph.links[li];
                if (state[li] != State::alive || owner[l.child] != node || owner[l.parent] != node) continue;
                if (l.child == g) intra.push_back(li);  // count each link once
            }
        }
        if (intra.empty()) continue;
        std::sort(intra.begin(), intra.end(), [&](std::size_t a, std::size_t b) {
            if (graph.links[a].weight != graph.links[b].weight) return graph.links[a].weight > graph.links[b].weight;
            return a < b;
        });

        // The branch first disconnects when the level passes the lightest
        // edge of a maximum spanning forest.
        std::unordered_map<GroupIndex, std::size_t> local;
        for (std::size_t i = 0; i < members.size(); ++i) local.emplace(members[i], i);
        DisjointSets forest(members.size());
        double bottleneck = 1.0;
        for (std::size_t li : intra) {
            const auto& l = graph.links[li];
            if (forest.unite(local.at(l.child), local.at(l.parent))) bottleneck = std::min(bottleneck, l.weight);
        }
        if (bottleneck >= 1.0) continue;  // only weight-1 links hold the branch together

        double next = -1.0;
        for (auto it = intra.rbegin(); it != intra.rend(); ++it) {
            if (graph.links[*it].weight > bottleneck) {
                next = graph.links[*it].weight;
                break;
            }
        }
        const double epsilon = next > 0.0 ? (next - bottleneck) / 2.0 : std::min(config.top_epsilon, (1.0 - bottleneck) / 2.0);
        const double delta = bottleneck + epsilon;

        std::vector<std::pair<GroupIndex, GroupIndex>> kept;
        for (std::size_t li : intra) {
            if (graph.links[li].weight >= delta) kept.emplace_back(graph.links[li].child, graph.links[li].parent);
        }
        auto blocks = components(members, kept, groups);

        const std::vector<std::vector<GroupIndex>> whole{members};
        SplitDecision decision;
        decision.branch = phylo.tree.nodes[node].id;
        decision.delta = delta;
        decision.components = blocks.size();
        decision.quality_before = branch_quality(whole, groups, config.lambda, stats);
        decision.quality_after = branch_quality(blocks, groups, config.lambda, stats);
        decision.committed = decision.quality_after - decision.quality_before > config.tolerance;
        phylo.trace.push_back(decision);
        if (!decision.committed) continue;

        phylo.tree.nodes[node].split_level = delta;
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            Branch child;
            child.id = fmt::format("{}.{}", phylo.tree.nodes[node].id, k + 1);
            child.groups = std::move(blocks[k]);
            child.elevation = delta;
            child.parent = node;
            const BranchIndex idx = phylo.tree.nodes.size();
            for (GroupIndex g : child.groups) owner[g] = idx;
            phylo.tree.nodes.push_back(std::move(child));
            phylo.tree.nodes[node].children.push_back(idx);
            pending.push_back(idx);
        }
        for (std::size_t li : intra) {
            const auto& l = graph.links[li];
            if (l.weight >= delta) continue;
            state[li] = owner[l.child] != owner[l.parent] ? State::ghost : State::submerged;
            if (state[li] == State::ghost) {
                phylo.ghosts.push_back({l.child, l.parent, l.weight, delta});
            } else {
                ++phylo.submerged_links;
            }
        }
    }

    for (std::size_t i = 0; i < graph.links.size(); ++i) {
        if (state[i] == State::alive) phylo.links.push_back(graph.links[i]);
    }
    std::sort(phylo.ghosts.begin(), phylo.ghosts.end(), [](const GhostLink& a, const GhostLink& b) {
        return a.child != b.child ? a.child < b.child : a.parent < b.parent;
    });
    return phylo;
}

std::vector<std::vector<GroupIndex>> foliation_slice(const Phylomemy& phylomemy, double delta) {
    std::vector<GroupIndex> all(phylomemy.groups.size());
    std::iota(all.begin(), all.end(), GroupIndex{0});
    std::vector<std::pair<GroupIndex, GroupIndex>> edges;
    for (const auto& l : phylomemy.links) {
        if (l.weight >= delta) edges.emplace_back(l.child, l.parent);
    }
    for (const auto& l : phylomemy.ghosts) {
        if (l.weight >= delta) edges.emplace_back(l.child, l.parent);
    }
    if (all.empty()) return {};
    return components(all, edges, phylomemy.groups);
}

std::vector<double> committed_levels(const Phylomemy& phylomemy) {
    std::vector<double> levels;
    for (const auto& b : phylomemy.tree.nodes) {
        if (b.split_level) levels.push_back(*b.split_level);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

}  // namespace phylo

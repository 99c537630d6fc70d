#pragma once

// Sea level rise: recursive, quality-driven foliation of the kinship graph
// into branches.

#include "phylomemy/matching.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phylo {

using BranchIndex = std::size_t;

/// Node of the split tree. Leaves are the final branches.
struct Branch {
    std::string id;  // tree address, e.g. "0.1.2"
    std::vector<GroupIndex> groups;  // ascending
    double elevation = 0.0;          // level at which the branch emerged
    std::optional<BranchIndex> parent;
    std::vector<BranchIndex> children;  // in creation order
    std::optional<double> split_level;  // set on internal nodes

    bool is_leaf() const { return children.empty(); }
};

struct GhostLink {
    GroupIndex child = 0;
    GroupIndex parent = 0;
    double weight = 0.0;
    double cut_level = 0.0;

    friend bool operator==(const GhostLink&, const GhostLink&) = default;
};

struct SplitTree {
    std::vector<Branch> nodes;
    std::vector<BranchIndex> roots;

    /// Leaves in drift order (depth-first, children in creation order).
    std::vector<BranchIndex> leaves() const;
    /// Leaf owning each group, indexed by GroupIndex.
    std::vector<BranchIndex> leaf_of_groups(std::size_t group_count) const;
    std::optional<BranchIndex> lowest_common_ancestor(BranchIndex a, BranchIndex b) const;
};

/// One evaluated step of the rise.
struct SplitDecision {
    std::string branch;
    double delta = 0.0;
    std::size_t components = 0;
    double quality_before = 0.0;
    double quality_after = 0.0;
    bool committed = false;
};

struct RiseConfig {
    double lambda = 0.5;
    double tolerance = 1e-12;  // minimal strict improvement of the quality
    double top_epsilon = 1e-9;
};

struct Phylomemy {
    std::vector<Group> groups;
    std::vector<KinshipLink> links;  // surviving, sorted by (child, parent)
    std::vector<GhostLink> ghosts;   // sorted by (child, parent)
    SplitTree tree;
    double lambda = 0.5;
    std::size_t period_count = 0;
    std::size_t submerged_links = 0;  // intra-branch links dropped below a committed level
    std::vector<SplitDecision> trace;
};

/// Number of groups containing each term (the global group frequency).
class TermStats {
public:
    TermStats() = default;
    explicit TermStats(std::span<const Group> groups);

    std::size_t frequency(TermId term) const { return term < freq_.size() ? freq_[term] : 0; }

private:
    std::vector<std::size_t> freq_;
};

/// One root branch per weakly connected component, elevation 0.
SplitTree initial_continent(const KinshipGraph& graph);

/// Quality of a partition (each block a list of group indices) over the
/// terms occurring in it: frequency-weighted sum over branches of
/// recall * (lambda * accuracy + (1 - lambda) * recall).
double branch_quality(std::span<const std::vector<GroupIndex>> partition, std::span<const Group> groups, double lambda,
                      const TermStats& stats);

/// Recursively raises the local threshold inside every branch, committing a
/// split only when it strictly improves the branch quality.
Phylomemy rise(const KinshipGraph& graph, const RiseConfig& config);
Phylomemy rise(const KinshipGraph& graph, SplitTree initial, const RiseConfig& config);

/// Weakly connected components after dropping surviving and ghost links
/// lighter than `delta`. Blocks are sorted by (earliest period, smallest id).
std::vector<std::vector<GroupIndex>> foliation_slice(const Phylomemy& phylomemy, double delta);

/// Committed split levels in ascending order, without duplicates.
std::vector<double> committed_levels(const Phylomemy& phylomemy);

}  // namespace phylo

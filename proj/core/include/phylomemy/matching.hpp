#pragma once

// Inter-temporal matching: kinship links between groups of distinct periods.

#include "phylomemy/period_graphs.hpp"

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

namespace phylo {

/// Index of a group inside the phylomemy-wide group vector.
using GroupIndex = std::size_t;

enum class Direction { upstream, downstream };

struct KinshipLink {
    GroupIndex child = 0;
    GroupIndex parent = 0;
    double weight = 0.0;  // Jaccard similarity, in (0, 1]

    friend bool operator==(const KinshipLink&, const KinshipLink&) = default;
};

/// Window actually used when matching one group in one direction.
struct WindowTrace {
    GroupIndex group = 0;
    Direction direction = Direction::upstream;
    std::size_t requested = 0;
    std::size_t used = 0;
    bool matched = false;

    friend bool operator==(const WindowTrace&, const WindowTrace&) = default;
};

struct KinshipGraph {
    std::vector<Group> groups;
    std::vector<KinshipLink> links;  // sorted by (child, parent)
    std::size_t window = 1;
    std::size_t period_count = 0;
    std::vector<WindowTrace> trace;
};

struct MatchConfig {
    std::size_t window = 1;
    double floor = 0.0;            // links need Jaccard strictly above this
    bool all_above_floor = false;  // keep every candidate above the floor, not just the best
    std::size_t threads = 1;
};

/// |A n B| / |A u B| over sorted term sets. Throws when both are empty.
double jaccard(std::span<const TermId> a, std::span<const TermId> b);

/// A single group or an unordered pair of groups seen as one term set.
struct Candidate {
    std::vector<GroupIndex> members;  // one or two, ascending
    std::vector<TermId> terms;        // union of member terms
};

/// Groups bucketed by period, shared by the matching routines.
class GroupTimeline {
public:
    GroupTimeline(std::span<const Group> groups, std::size_t period_count);

    std::span<const Group> groups() const { return groups_; }
    std::size_t period_count() const { return period_count_; }
    const std::vector<GroupIndex>& in_period(PeriodId p) const { return by_period_[p]; }
    /// Groups of the given periods containing `term`, ascending.
    const std::vector<GroupIndex>& with_term(TermId term) const;

    /// Inclusive period range of the window, empty when first > last.
    std::pair<std::ptrdiff_t, std::ptrdiff_t> window_range(PeriodId period, Direction direction, std::size_t window) const;

private:
    std::span<const Group> groups_;
    std::size_t period_count_;
    std::vector<std::vector<GroupIndex>> by_period_;
    std::unordered_map<TermId, std::vector<GroupIndex>> postings_;
};

/// All single groups and unordered pairs drawn from the periods within
/// `window` strictly before (upstream) or after (downstream) the group.
std::vector<Candidate> enumerate_candidates(const GroupTimeline& timeline, GroupIndex group, Direction direction,
                                            std::size_t window);

struct MatchResult {
    std::vector<KinshipLink> links;
    WindowTrace trace;
};

/// Best-candidate matching with automatic window extension.
MatchResult match_group(const GroupTimeline& timeline, GroupIndex group, Direction direction, const MatchConfig& config);

/// Matches every group in both directions; duplicate (child, parent) pairs
/// keep the maximum weight. Groups must carry ids and be sorted by period.
KinshipGraph build_kinship_graph(std::vector<Group> groups, std::size_t period_count, const MatchConfig& config);

/// Exhaustive unpruned reference for build_kinship_graph.
KinshipGraph brute_force_oracle(std::vector<Group> groups, std::size_t period_count, const MatchConfig& config,
                                std::size_t cap = 50);

}  // namespace phylo

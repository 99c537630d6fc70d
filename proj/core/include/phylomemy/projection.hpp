#pragma once

// Projection of a reconstructed phylomemy onto its seabed and kinship views.

#include "phylomemy/sea_level.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phylo {

/// A leaf branch of the split tree, as shown in the views.
struct LeafBranch {
    BranchIndex node = 0;
    std::string id;
    std::vector<GroupIndex> groups;
    double elevation = 0.0;
};

struct Network {
    std::vector<LeafBranch> branches;  // drift order
    std::vector<GhostLink> ghosts;     // between retained branches
    std::vector<std::string> removed;  // ids of branches dropped by filtering
};

/// Leaves with their final elevations, in drift order, plus ghost lines.
Network extract_network(const Phylomemy& phylomemy);

/// Drops branches whose groups cover fewer than `min_periods` distinct periods.
/// Throws when nothing survives.
Network filter_minor_branches(Network network, std::span<const Group> groups, std::size_t min_periods);

std::size_t period_span(const LeafBranch& branch, std::span<const Group> groups);

/// Document frequency of every term per period: freq[period][term].
using FrequencyTable = std::vector<std::vector<std::uint32_t>>;

FrequencyTable document_frequencies(const PeriodSet& periods, const DocumentSet& docs, std::size_t term_count);

struct TermDynamics {
    TermId term = 0;
    PeriodId first_period = 0;
    PeriodId last_period = 0;
    std::vector<GroupIndex> emerging_groups;    // groups of first_period holding the term
    std::vector<GroupIndex> decreasing_groups;  // groups of last_period holding the term
    std::vector<std::uint32_t> freq_by_period;  // document frequency per period
    std::uint32_t freq_last = 0;                // frequency in the most recent period
    bool cross_branch = false;
    std::size_t group_count = 0;
    std::size_t branch_count = 0;
};

/// Dynamics of every term occurring in a retained group, sorted by term.
std::vector<TermDynamics> compute_term_dynamics(const Network& network, std::span<const Group> groups,
                                                std::size_t period_count, const FrequencyTable& frequencies);

struct BranchLabel {
    std::vector<TermId> terms;  // two terms, or one when the vocabulary is a single term
    bool degenerate = false;
};

/// Most frequently emerging term of the branch followed by the best
/// branch-scoped tf-idf term; the two best tf-idf terms when nothing emerges.
BranchLabel label_branch(const LeafBranch& branch, const Network& network, std::span<const Group> groups,
                         std::span<const TermDynamics> dynamics, std::span<const std::string> term_labels);

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Peaks of the leaves (given in drift order): y is the elevation, x the
/// normalized cumulative gap 1 - split_level(lca) between neighbours.
std::vector<Point> seabed_coordinates(const SplitTree& tree, std::span<const BranchIndex> leaves);

struct LayoutConfig {
    double glyph_diameter = 1.0;
    double min_band_width = 2.0;
    double drift_gap_scale = 2.0;
    std::size_t sweeps = 4;
};

struct KinshipLayout {
    std::vector<std::optional<Point>> positions;  // by GroupIndex; empty for dropped groups
    std::vector<double> band_centers;             // per branch
    std::size_t crossings_before = 0;
    std::size_t crossings_after = 0;
};

/// Layered layout: rows are periods (earliest on top), one band per branch
/// ordered like the seabed, barycenter sweeps inside each band.
KinshipLayout kinship_layout(const Network& network, std::span<const Point> peaks, const Phylomemy& phylomemy,
                             const LayoutConfig& config = {});

}  // namespace phylo

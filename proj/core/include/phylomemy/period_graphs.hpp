#pragma once

// Per-period similarity graphs and field (group) detection.

#include "phylomemy/corpus.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace phylo {

enum class Symmetrization { max, min };

Symmetrization parse_symmetrization(std::string_view name);
std::string_view to_string(Symmetrization s);

/// Confidence of the association x<->y: max (or min) of the two directional
/// rule confidences cooc(x,y)/occ(x) and cooc(x,y)/occ(y).
double confidence(const CoocMatrix& matrix, TermId x, TermId y, Symmetrization mode = Symmetrization::max);

struct SimilarityEdge {
    TermId a = 0;  // a < b
    TermId b = 0;
    double weight = 0.0;

    friend bool operator==(const SimilarityEdge&, const SimilarityEdge&) = default;
};

struct SimilarityGraph {
    PeriodId period = 0;
    std::vector<TermId> nodes;          // sorted, occ > 0
    std::vector<SimilarityEdge> edges;  // sorted by (a, b)

    /// Sorted neighbour lists indexed by position in `nodes`.
    std::vector<std::vector<std::size_t>> adjacency() const;
};

SimilarityGraph build_similarity_graph(const CoocMatrix& matrix, double edge_threshold,
                                       Symmetrization mode = Symmetrization::max, PeriodId period = 0);

/// A field: a set of root terms localized in one period.
struct Group {
    std::string id;
    PeriodId period = 0;
    std::vector<TermId> terms;  // sorted, unique, non-empty
    std::size_t support = 0;
};

struct CliqueOptions {
    bool keep_singletons = false;
    std::size_t max_cliques = 100000;
};

/// One group per maximal clique (Bron-Kerbosch with pivoting). `period_docs`
/// are the term sets of the period's documents, used for the support count.
/// Throws Error("period too dense ...") past `max_cliques`.
std::vector<Group> detect_fields_cliques(const SimilarityGraph& graph,
                                         std::span<const std::vector<TermId>> period_docs,
                                         const CliqueOptions& options = {});

/// Maximal frequent term sets with support >= min_support.
std::vector<Group> detect_fields_itemsets(std::span<const std::vector<TermId>> period_docs, std::size_t min_support,
                                          bool keep_singletons = false, PeriodId period = 0);

/// Sorts groups by (period, term set) and assigns phylomemy-wide ids.
void assign_group_ids(std::vector<Group>& groups);

std::string group_id(std::size_t ordinal);

}  // namespace phylo

#include "phylomemy/period_graphs.hpp"

#include "phylomemy/error.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>

#include <fmt/format.h>

namespace phylo {

namespace {

// Fixed-size bitset over a runtime universe.
class Bits {
public:
    Bits() = default;
    explicit Bits(std::size_t n) : words_((n + 63) / 64, 0) {}

    void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    void reset(std::size_t i) { words_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }
    bool none() const {
        return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
    }
    Bits operator&(const Bits& o) const {
        Bits r = *this;
        for (std::size_t i = 0; i < words_.size(); ++i) r.words_[i] &= o.words_[i];
        return r;
    }
    Bits& operator|=(const Bits& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }
    std::size_t and_count(const Bits& o) const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < words_.size(); ++i) c += static_cast<std::size_t>(std::popcount(words_[i] & o.words_[i]));
        return c;
    }
    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t word = words_[w];
            while (word) {
                f(w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
                word &= word - 1;
            }
        }
    }

private:
    std::vector<std::uint64_t> words_;
};

struct CliqueSearch {
    const std::vector<Bits>& neighbours;
    std::size_t cap;
    std::vector<std::vector<std::size_t>> cliques;
    std::vector<std::size_t> current;

    void expand(Bits candidates, Bits excluded) {
        if (candidates.none() && excluded.none()) {
            cliques.push_back(current);
            if (cliques.size() > cap) {
                throw Error(fmt::format("period too dense: more than {} maximal cliques; raise the edge threshold", cap));
            }
            return;
        }
        // Pivot: vertex of P u X with the most neighbours in P.
        std::size_t pivot = 0;
        std::size_t best = 0;
        bool have_pivot = false;
        auto consider = [&](std::size_t u) {
            std::size_t c = candidates.and_count(neighbours[u]);
            if (!have_pivot || c > best) {
                pivot = u;
                best = c;
                have_pivot = true;
            }
        };
        candidates.for_each(consider);
        excluded.for_each(consider);

        std::vector<std::size_t> order;
        candidates.for_each([&](std::size_t v) {
            if (!neighbours[pivot].test(v)) order.push_back(v);
        });
        for (std::size_t v : order) {
            current.push_back(v);
            expand(candidates & neighbours[v], excluded & neighbours[v]);
            current.pop_back();
            candidates.reset(v);
            excluded.set(v);
        }
    }
};

bool lexicographic_less(const std::vector<TermId>& a, const std::vector<TermId>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::size_t count_intersection(std::span<const TermId> a, std::span<const TermId> b) {
    std::size_t c = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) ++i;
        else if (*j < *i) ++j;
        else {
            ++c;
            ++i;
            ++j;
        }
    }
    return c;
}

}  // namespace

Symmetrization parse_symmetrization(std::string_view name) {
    if (name == "max") return Symmetrization::max;
    if (name == "min") return Symmetrization::min;
    throw ConfigError(fmt::format("unknown symmetrization '{}' (expected max or min)", name));
}

std::string_view to_string(Symmetrization s) {
    return s == Symmetrization::max ? "max" : "min";
}

double confidence(const CoocMatrix& matrix, TermId x, TermId y, Symmetrization mode) {
    const auto ox = matrix.occ(x);
    const auto oy = matrix.occ(y);
    if (ox == 0 || oy == 0) {
        throw Error("term absent from period");
    }
    const double c = matrix.at(x, y);
    const double forward = c / ox;
    const double backward = c / oy;
    return mode == Symmetrization::max ? std::max(forward, backward) : std::min(forward, backward);
}

std::vector<std::vector<std::size_t>> SimilarityGraph::adjacency() const {
    std::vector<std::vector<std::size_t>> adj(nodes.size());
    for (const auto& e : edges) {
        const auto ia = static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), e.a) - nodes.begin());
        const auto ib = static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), e.b) - nodes.begin());
        adj[ia].push_back(ib);
        adj[ib].push_back(ia);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
}

SimilarityGraph build_similarity_graph(const CoocMatrix& matrix, double edge_threshold, Symmetrization mode,
                                       PeriodId period) {
    SimilarityGraph g;
    g.period = period;
    const auto n = static_cast<TermId>(matrix.term_count());
    for (TermId x = 0; x < n; ++x) {
        if (matrix.occ(x) > 0) g.nodes.push_back(x);
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
            const TermId x = g.nodes[i];
            const TermId y = g.nodes[j];
            if (matrix.at(x, y) == 0) continue;
            const double w = confidence(matrix, x, y, mode);
            if (w >= edge_threshold) g.edges.push_back({x, y, w});
        }
    }
    return g;
}

std::vector<Group> detect_fields_cliques(const SimilarityGraph& graph, std::span<const std::vector<TermId>> period_docs,
                                         const CliqueOptions& options) {
    const std::size_t n = graph.nodes.size();
    const auto adj = graph.adjacency();
    std::vector<Bits> neighbours(n, Bits(n));
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t u : adj[v]) neighbours[v].set(u);
    }

    CliqueSearch search{neighbours, options.max_cliques, {}, {}};
    Bits all(n);
    for (std::size_t v = 0; v < n; ++v) all.set(v);
    search.expand(all, Bits(n));

    std::vector<Group> groups;
    for (const auto& clique : search.cliques) {
        if (clique.size() < 2 && !options.keep_singletons) continue;
        Group g;
        g.period = graph.period;
        for (std::size_t v : clique) g.terms.push_back(graph.nodes[v]);
        std::sort(g.terms.begin(), g.terms.end());
        // Support: documents witnessing at least one internal edge (or the
        // single term, for a singleton group).
        const std::size_t needed = g.terms.size() < 2 ? 1 : 2;
        for (const auto& doc : period_docs) {
            if (count_intersection(doc, g.terms) >= needed) ++g.support;
        }
        groups.push_back(std::move(g));
    }
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return lexicographic_less(a.terms, b.terms); });
    return groups;
}

namespace {

struct ItemsetMiner {
    std::size_t min_support;
    const std::vector<Bits>& tids;  // per item
    std::vector<std::vector<std::size_t>> candidates;

    struct Tail {
        std::size_t item;
        Bits tids;
    };

    void search(std::vector<std::size_t> head, const Bits& head_tids, const std::vector<std::size_t>& tail_items) {
        const std::size_t head_count = head_tids.count();
        std::vector<Tail> tail;
        for (std::size_t item : tail_items) {
            Bits t = head_tids & tids[item];
            const std::size_t c = t.count();
            if (c < min_support) continue;
            if (c == head_count) {
                head.push_back(item);  // present in every supporting document
            } else {
                tail.push_back({item, std::move(t)});
            }
        }
        if (tail.empty()) {
            if (!head.empty()) candidates.push_back(head);
            return;
        }
        Bits all = head_tids;
        for (const auto& t : tail) all = all & t.tids;
        if (all.count() >= min_support) {
            auto full = head;
            for (const auto& t : tail) full.push_back(t.item);
            candidates.push_back(std::move(full));
            return;
        }
        for (std::size_t i = 0; i < tail.size(); ++i) {
            auto next_head = head;
            next_head.push_back(tail[i].item);
            std::vector<std::size_t> rest;
            for (std::size_t j = i + 1; j < tail.size(); ++j) rest.push_back(tail[j].item);
            search(std::move(next_head), tail[i].tids, rest);
        }
    }
};

}  // namespace

std::vector<Group> detect_fields_itemsets(std::span<const std::vector<TermId>> period_docs, std::size_t min_support,
                                          bool keep_singletons, PeriodId period) {
    if (min_support < 1) {
        throw ConfigError("min_support must be >= 1");
    }
    const std::size_t ndocs = period_docs.size();
    if (ndocs < min_support) return {};

    std::vector<TermId> items;
    for (const auto& doc : period_docs) items.insert(items.end(), doc.begin(), doc.end());
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());

    std::vector<Bits> tids(items.size(), Bits(ndocs));
    for (std::size_t d = 0; d < ndocs; ++d) {
        for (TermId t : period_docs[d]) {
            tids[static_cast<std::size_t>(std::lower_bound(items.begin(), items.end(), t) - items.begin())].set(d);
        }
    }
    std::vector<std::size_t> frequent;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (tids[i].count() >= min_support) frequent.push_back(i);
    }
    // Least frequent first keeps tidsets small early in the search.
    std::stable_sort(frequent.begin(), frequent.end(),
                     [&](std::size_t a, std::size_t b) { return tids[a].count() < tids[b].count(); });

    Bits everything(ndocs);
    for (std::size_t d = 0; d < ndocs; ++d) everything.set(d);
    ItemsetMiner miner{min_support, tids, {}};
    miner.search({}, everything, frequent);

    std::vector<Group> groups;
    std::vector<std::vector<TermId>> seen;
    for (auto& candidate : miner.candidates) {
        Bits support = everything;
        for (std::size_t item : candidate) support = support & tids[item];
        std::sort(candidate.begin(), candidate.end());
        bool maximal = true;
        for (std::size_t j : frequent) {
            if (std::binary_search(candidate.begin(), candidate.end(), j)) continue;
            if (support.and_count(tids[j]) >= min_support) {
                maximal = false;
                break;
            }
        }
        if (!maximal) continue;
        std::vector<TermId> terms;
        for (std::size_t item : candidate) terms.push_back(items[item]);
        std::sort(terms.begin(), terms.end());
        if (terms.size() < 2 && !keep_singletons) continue;
        if (std::find(seen.begin(), seen.end(), terms) != seen.end()) continue;
        seen.push_back(terms);
        groups.push_back(Group{{}, period, std::move(terms), support.count()});
    }
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return lexicographic_less(a.terms, b.terms); });
    return groups;
}

std::string group_id(std::size_t ordinal) {
    return fmt::format("g{:06d}", ordinal);
}

void assign_group_ids(std::vector<Group>& groups) {
    std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        if (a.period != b.period) return a.period < b.period;
        return lexicographic_less(a.terms, b.terms);
    });
    for (std::size_t i = 0; i < groups.size(); ++i) groups[i].id = group_id(i);
}

}  // namespace phylo

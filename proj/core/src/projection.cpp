#include "phylomemy/projection.hpp"

#include "phylomemy/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace phylo {

namespace {

std::unordered_map<GroupIndex, std::size_t> branch_of_groups(const Network& network) {
    std::unordered_map<GroupIndex, std::size_t> owner;
    for (std::size_t b = 0; b < network.branches.size(); ++b) {
        for (GroupIndex g : network.branches[b].groups) owner.emplace(g, b);
    }
    return owner;
}

const TermDynamics* find_dynamics(std::span<const TermDynamics> dynamics, TermId term) {
    auto it = std::lower_bound(dynamics.begin(), dynamics.end(), term,
                               [](const TermDynamics& d, TermId t) { return d.term < t; });
    return it != dynamics.end() && it->term == term ? &*it : nullptr;
}

}  // namespace

Network extract_network(const Phylomemy& phylomemy) {
    Network net;
    for (BranchIndex b : phylomemy.tree.leaves()) {
        const Branch& node = phylomemy.tree.nodes[b];
        net.branches.push_back({b, node.id, node.groups, node.elevation});
    }
    net.ghosts = phylomemy.ghosts;
    return net;
}

std::size_t period_span(const LeafBranch& branch, std::span<const Group> groups) {
    std::set<PeriodId> periods;
    for (GroupIndex g : branch.groups) periods.insert(groups[g].period);
    return periods.size();
}

Network filter_minor_branches(Network network, std::span<const Group> groups, std::size_t min_periods) {
    if (min_periods < 1) {
        throw ConfigError("min_periods must be >= 1");
    }
    Network out;
    for (auto& b : network.branches) {
        if (period_span(b, groups) >= min_periods) out.branches.push_back(std::move(b));
        else out.removed.push_back(b.id);
    }
    if (out.branches.empty()) {
        throw Error(fmt::format("every branch covers fewer than {} periods; use a smaller min_periods", min_periods));
    }
    out.removed.insert(out.removed.begin(), network.removed.begin(), network.removed.end());
    const auto owner = branch_of_groups(out);
    for (const auto& ghost : network.ghosts) {
        if (owner.count(ghost.child) && owner.count(ghost.parent)) out.ghosts.push_back(ghost);
    }
    return out;
}

FrequencyTable document_frequencies(const PeriodSet& periods, const DocumentSet& docs, std::size_t term_count) {
    FrequencyTable table(periods.size(), std::vector<std::uint32_t>(term_count, 0));
    for (const auto& p : periods.periods) {
        for (std::size_t d : p.documents) {
            for (TermId t : docs.documents[d].terms) ++table[p.id][t];
        }
    }
    return table;
}

std::vector<TermDynamics> compute_term_dynamics(const Network& network, std::span<const Group> groups,
                                                std::size_t period_count, const FrequencyTable& frequencies) {
    struct Acc {
        std::vector<GroupIndex> groups;
        std::set<std::size_t> branches;
    };
    std::map<TermId, Acc> acc;
    for (std::size_t b = 0; b < network.branches.size(); ++b) {
        for (GroupIndex g : network.branches[b].groups) {
            for (TermId t : groups[g].terms) {
                auto& a = acc[t];
                a.groups.push_back(g);
                a.branches.insert(b);
            }
        }
    }
    std::vector<TermDynamics> out;
    out.reserve(acc.size());
    for (auto& [term, a] : acc) {
        std::sort(a.groups.begin(), a.groups.end());
        TermDynamics d;
        d.term = term;
        d.first_period = groups[a.groups.front()].period;
        d.last_period = d.first_period;
        for (GroupIndex g : a.groups) {
            d.first_period = std::min(d.first_period, groups[g].period);
            d.last_period = std::max(d.last_period, groups[g].period);
        }
        for (GroupIndex g : a.groups) {
            if (groups[g].period == d.first_period) d.emerging_groups.push_back(g);
            if (groups[g].period == d.last_period) d.decreasing_groups.push_back(g);
        }
        d.freq_by_period.assign(period_count, 0);
        for (std::size_t p = 0; p < period_count && p < frequencies.size(); ++p) {
            if (term < frequencies[p].size()) d.freq_by_period[p] = frequencies[p][term];
        }
        d.freq_last = period_count ? d.freq_by_period.back() : 0;
        d.group_count = a.groups.size();
        d.branch_count = a.branches.size();
        d.cross_branch = d.branch_count >= 2;
        out.push_back(std::move(d));
    }
    return out;
}

BranchLabel label_branch(const LeafBranch& branch, const Network& network, std::span<const Group> groups,
                         std::span<const TermDynamics> dynamics, std::span<const std::string> term_labels) {
    if (branch.groups.empty()) {
        throw Error(fmt::format("branch '{}' has no groups", branch.id));
    }
    struct Stat {
        std::size_t tf = 0;
        std::size_t emergences = 0;
        double tfidf = 0.0;
    };
    std::map<TermId, Stat> stats;
    for (GroupIndex g : branch.groups) {
        for (TermId t : groups[g].terms) ++stats[t].tf;
    }
    const auto branch_count = static_cast<double>(network.branches.size());
    for (auto& [t, s] : stats) {
        const TermDynamics* d = find_dynamics(dynamics, t);
        const double holders = d && d->branch_count ? static_cast<double>(d->branch_count) : 1.0;
        s.tfidf = static_cast<double>(s.tf) * std::log(branch_count / holders);
        if (d) {
            for (GroupIndex g : d->emerging_groups) {
                if (std::binary_search(branch.groups.begin(), branch.groups.end(), g)) ++s.emergences;
            }
        }
    }
    auto label_of = [&](TermId t) -> const std::string& { return term_labels[t]; };

    BranchLabel label;
    if (stats.size() == 1) {
        label.terms = {stats.begin()->first};
        label.degenerate = true;
        return label;
    }

    std::vector<TermId> by_tfidf;
    for (const auto& [t, s] : stats) by_tfidf.push_back(t);
    std::sort(by_tfidf.begin(), by_tfidf.end(), [&](TermId a, TermId b) {
        const auto& sa = stats.at(a);
        const auto& sb = stats.at(b);
        if (sa.tfidf != sb.tfidf) return sa.tfidf > sb.tfidf;
        if (sa.tf != sb.tf) return sa.tf > sb.tf;
        return label_of(a) < label_of(b);
    });

    std::optional<TermId> emerging;
    for (const auto& [t, s] : stats) {
        if (s.emergences == 0) continue;
        if (!emerging) {
            emerging = t;
            continue;
        }
        const auto& best = stats.at(*emerging);
        if (s.emergences > best.emergences ||
            (s.emergences == best.emergences && (s.tf > best.tf || (s.tf == best.tf && label_of(t) < label_of(*emerging))))) {
            emerging = t;
        }
    }
    if (emerging) {
        label.terms.push_back(*emerging);
        for (TermId t : by_tfidf) {
            if (t != *emerging) {
                label.terms.push_back(t);
                break;
            }
        }
    } else {
        label.terms = {by_tfidf[0], by_tfidf[1]};
    }
    return label;
}

std::vector<Point> seabed_coordinates(const SplitTree& tree, std::span<const BranchIndex> leaves) {
    std::vector<Point> peaks;
    if (leaves.empty()) return peaks;
    peaks.reserve(leaves.size());
    if (leaves.size() == 1) {
        peaks.push_back({0.5, tree.nodes[leaves[0]].elevation});
        return peaks;
    }
    std::vector<double> cumulative{0.0};
    for (std::size_t i = 1; i < leaves.size(); ++i) {
        const auto lca = tree.lowest_common_ancestor(leaves[i - 1], leaves[i]);
        const double split = lca && tree.nodes[*lca].split_level ? *tree.nodes[*lca].split_level : 0.0;
        cumulative.push_back(cumulative.back() + (1.0 - split));
    }
    const double total = cumulative.back();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        peaks.push_back({cumulative[i] / total, tree.nodes[leaves[i]].elevation});
    }
    return peaks;
}

namespace {

struct Segment {
    GroupIndex a;
    GroupIndex b;
    Point p;
    Point q;
};

double orientation(Point a, Point b, Point c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

std::size_t count_crossings(const std::vector<Segment>& segments) {
    std::size_t crossings = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        for (std::size_t j = i + 1; j < segments.size(); ++j) {
            const auto& s = segments[i];
            const auto& t = segments[j];
            if (s.a == t.a || s.a == t.b || s.b == t.a || s.b == t.b) continue;
            const double o1 = orientation(s.p, s.q, t.p);
            const double o2 = orientation(s.p, s.q, t.q);
            const double o3 = orientation(t.p, t.q, s.p);
            const double o4 = orientation(t.p, t.q, s.q);
            if (o1 * o2 < 0.0 && o3 * o4 < 0.0) ++crossings;
        }
    }
    return crossings;
}

class BandLayout {
public:
    BandLayout(const LeafBranch& branch, std::span<const Group> groups, std::span<const KinshipLink> links, double sep)
        : groups_(groups), sep_(sep) {
        for (GroupIndex g : branch.groups) rows_[groups[g].period].push_back(g);
        for (auto& [p, row] : rows_) std::sort(row.begin(), row.end());
        for (const auto& l : links) {
            if (!std::binary_search(branch.groups.begin(), branch.groups.end(), l.child) ||
                !std::binary_search(branch.groups.begin(), branch.groups.end(), l.parent)) {
                continue;
            }
            links_.push_back(l);
            up_[l.child].push_back(l.parent);
            down_[l.parent].push_back(l.child);
        }
        refresh();
    }

    std::size_t crossings() const { return count_crossings(segments()); }

    void sweep(bool downward) {
        std::vector<PeriodId> order;
        for (const auto& [p, row] : rows_) order.push_back(p);
        if (!downward) std::reverse(order.begin(), order.end());
        for (std::size_t r = 1; r < order.size(); ++r) {
            auto& row = rows_[order[r]];
            const auto& neighbours = downward ? up_ : down_;
            std::vector<std::pair<double, GroupIndex>> keyed;
            for (GroupIndex g : row) {
                double key = offset_.at(g);
                auto it = neighbours.find(g);
                if (it != neighbours.end() && !it->second.empty()) {
                    std::vector<double> xs;
                    for (GroupIndex n : it->second) xs.push_back(offset_.at(n));
                    std::sort(xs.begin(), xs.end());
                    const std::size_t m = xs.size() / 2;
                    key = xs.size() % 2 ? xs[m] : (xs[m - 1] + xs[m]) / 2.0;
                }
                keyed.emplace_back(key, g);
            }
            std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t i = 0; i < row.size(); ++i) row[i] = keyed[i].second;
            refresh_row(row);
        }
    }

    std::map<PeriodId, std::vector<GroupIndex>> rows() const { return rows_; }
    void set_rows(std::map<PeriodId, std::vector<GroupIndex>> rows) {
        rows_ = std::move(rows);
        refresh();
    }
    double offset(GroupIndex g) const { return offset_.at(g); }
    std::size_t widest_row() const {
        std::size_t w = 0;
        for (const auto& [p, row] : rows_) w = std::max(w, row.size());
        return w;
    }

private:
    void refresh() {
        for (const auto& [p, row] : rows_) refresh_row(row);
    }
    void refresh_row(const std::vector<GroupIndex>& row) {
        const double mid = (static_cast<double>(row.size()) - 1.0) / 2.0;
        for (std::size_t i = 0; i < row.size(); ++i) offset_[row[i]] = (static_cast<double>(i) - mid) * sep_;
    }
    std::vector<Segment> segments() const {
        std::vector<Segment> out;
        out.reserve(links_.size());
        for (const auto& l : links_) {
            out.push_back({l.parent, l.child, {offset_.at(l.parent), static_cast<double>(groups_[l.parent].period)},
                           {offset_.at(l.child), static_cast<double>(groups_[l.child].period)}});
        }
        return out;
    }

    std::span<const Group> groups_;
    double sep_;
    std::map<PeriodId, std::vector<GroupIndex>> rows_;
    std::vector<KinshipLink> links_;
    std::unordered_map<GroupIndex, std::vector<GroupIndex>> up_;
    std::unordered_map<GroupIndex, std::vector<GroupIndex>> down_;
    std::unordered_map<GroupIndex, double> offset_;
};

}  // namespace

KinshipLayout kinship_layout(const Network& network, std::span<const Point> peaks, const Phylomemy& phylomemy,
                             const LayoutConfig& config) {
    if (peaks.size() != network.branches.size()) {
        throw Error("kinship_layout: one peak per branch required");
    }
    KinshipLayout layout;
    layout.positions.assign(phylomemy.groups.size(), std::nullopt);
    const double sep = config.glyph_diameter;

    std::vector<BandLayout> bands;
    std::vector<double> widths;
    for (const auto& branch : network.branches) {
        BandLayout band(branch, phylomemy.groups, phylomemy.links, sep);
        auto best_rows = band.rows();
        std::size_t best = band.crossings();
        layout.crossings_before += best;
        for (std::size_t s = 0; s < config.sweeps && best > 0; ++s) {
            for (bool downward : {true, false}) {
                band.sweep(downward);
                const std::size_t c = band.crossings();
                if (c < best) {
                    best = c;
                    best_rows = band.rows();
                }
            }
        }
        band.set_rows(std::move(best_rows));
        layout.crossings_after += best;
        widths.push_back(std::max(config.min_band_width, static_cast<double>(band.widest_row()) * sep));
        bands.push_back(std::move(band));
    }

    const auto n = static_cast<double>(network.branches.size());
    double cursor = 0.0;
    for (std::size_t i = 0; i < network.branches.size(); ++i) {
        if (i > 0) {
            const double drift = std::max(0.0, peaks[i].x - peaks[i - 1].x);
            cursor += config.glyph_diameter * (1.0 + config.drift_gap_scale * drift * n);
        }
        const double center = cursor + widths[i] / 2.0;
        layout.band_centers.push_back(center);
        cursor += widths[i];
        for (GroupIndex g : network.branches[i].groups) {
            layout.positions[g] = Point{center + bands[i].offset(g), static_cast<double>(phylomemy.groups[g].period)};
        }
    }
    return layout;
}

}  // namespace phylo

#include "phylomemy/matching.hpp"

#include "parallel.hpp"
#include "phylomemy/error.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include <fmt/format.h>

namespace phylo {

namespace {

std::size_t intersection_size(std::span<const TermId> a, std::span<const TermId> b) {
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

std::vector<TermId> set_union(std::span<const TermId> a, std::span<const TermId> b) {
    std::vector<TermId> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::size_t period_gap(PeriodId a, PeriodId b) {
    return a > b ? a - b : b - a;
}

// Ranking of a scored candidate: higher similarity, then smaller period gap,
// then larger term overlap, then singles before pairs, then smaller ids.
struct Score {
    double delta = 0.0;
    std::size_t gap = 0;
    std::size_t overlap = 0;
    std::vector<GroupIndex> members;
};

bool ids_less(std::span<const Group> groups, const std::vector<GroupIndex>& a, const std::vector<GroupIndex>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [&](GroupIndex x, GroupIndex y) { return groups[x].id < groups[y].id; });
}

bool better(std::span<const Group> groups, const Score& a, const Score& b) {
    if (a.delta != b.delta) return a.delta > b.delta;
    if (a.gap != b.gap) return a.gap < b.gap;
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
    return ids_less(groups, a.members, b.members);
}

void emit(std::vector<KinshipLink>& out, GroupIndex self, GroupIndex member, Direction direction, double weight) {
    if (direction == Direction::upstream) out.push_back({self, member, weight});
    else out.push_back({member, self, weight});
}

bool window_saturated(const GroupTimeline& timeline, std::pair<std::ptrdiff_t, std::ptrdiff_t> range, Direction direction) {
    if (direction == Direction::upstream) return range.first <= 0;
    return range.second >= static_cast<std::ptrdiff_t>(timeline.period_count()) - 1;
}

void dedupe_max(std::vector<KinshipLink>& links) {
    std::sort(links.begin(), links.end(), [](const KinshipLink& a, const KinshipLink& b) {
        if (a.child != b.child) return a.child < b.child;
        if (a.parent != b.parent) return a.parent < b.parent;
        return a.weight > b.weight;
    });
    links.erase(std::unique(links.begin(), links.end(),
                            [](const KinshipLink& a, const KinshipLink& b) {
                                return a.child == b.child && a.parent == b.parent;
                            }),
                links.end());
}

void check_config(const MatchConfig& config) {
    if (config.window < 1) {
        throw ConfigError("window must be >= 1");
    }
    if (!(config.floor >= 0.0 && config.floor < 1.0)) {
        throw ConfigError("match floor must lie in [0, 1)");
    }
}

void check_groups(const std::vector<Group>& groups, std::size_t period_count) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].period >= period_count) {
            throw Error(fmt::format("group '{}' lies in period {} beyond the {} periods", groups[i].id, groups[i].period,
                                    period_count));
        }
        if (groups[i].terms.empty()) {
            throw Error(fmt::format("group '{}' has no terms", groups[i].id));
        }
    }
}

}  // namespace

double jaccard(std::span<const TermId> a, std::span<const TermId> b) {
    if (a.empty() && b.empty()) {
        throw Error("jaccard of two empty term sets");
    }
    const std::size_t inter = intersection_size(a, b);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

GroupTimeline::GroupTimeline(std::span<const Group> groups, std::size_t period_count)
    : groups_(groups), period_count_(period_count), by_period_(period_count) {
    for (GroupIndex i = 0; i < groups.size(); ++i) {
        by_period_.at(groups[i].period).push_back(i);
        for (TermId t : groups[i].terms) postings_[t].push_back(i);
    }
}

const std::vector<GroupIndex>& GroupTimeline::with_term(TermId term) const {
    static const std::vector<GroupIndex> empty;
    auto it = postings_.find(term);
    return it == postings_.end() ? empty : it->second;
}

std::pair<std::ptrdiff_t, std::ptrdiff_t> GroupTimeline::window_range(PeriodId period, Direction direction,
                                                                      std::size_t window) const {
    const auto p = static_cast<std::ptrdiff_t>(period);
    const auto w = static_cast<std::ptrdiff_t>(window);
    if (direction == Direction::upstream) {
        return {std::max<std::ptrdiff_t>(0, p - w), p - 1};
    }
    return {p + 1, std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(period_count_) - 1, p + w)};
}

std::vector<Candidate> enumerate_candidates(const GroupTimeline& timeline, GroupIndex group, Direction direction,
                                            std::size_t window) {
    if (window < 1) {
        throw ConfigError("window must be >= 1");
    }
    const auto groups = timeline.groups();
    const auto [lo, hi] = timeline.window_range(groups[group].period, direction, window);
    std::vector<GroupIndex> pool;
    for (std::ptrdiff_t p = lo; p <= hi; ++p) {
        const auto& members = timeline.in_period(static_cast<PeriodId>(p));
        pool.insert(pool.end(), members.begin(), members.end());
    }
    std::sort(pool.begin(), pool.end());

    std::vector<Candidate> out;
    out.reserve(pool.size() + pool.size() * (pool.size() - (pool.empty() ? 0 : 1)) / 2);
    for (GroupIndex g : pool) out.push_back({{g}, groups[g].terms});
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.size(); ++j) {
            out.push_back({{pool[i], pool[j]}, set_union(groups[pool[i]].terms, groups[pool[j]].terms)});
        }
    }
    return out;
}

MatchResult match_group(const GroupTimeline& timeline, GroupIndex group, Direction direction, const MatchConfig& config) {
    check_config(config);
    const auto groups = timeline.groups();
    const Group& self = groups[group];
    const std::span<const TermId> a = self.terms;
    const std::size_t max_window = std::max(config.window, timeline.period_count());

    MatchResult result;
    result.trace = {group, direction, config.window, config.window, false};
    std::vector<char> mark(groups.size(), 0);

    for (std::size_t w = config.window; w <= max_window; ++w) {
        result.trace.used = w;
        const auto range = timeline.window_range(self.period, direction, w);
        if (range.first > range.second) break;

        // Only groups sharing a term can belong to a winning candidate: a pair
        // member without shared terms never raises the similarity of its
        // partner and loses the tie to the single.
        std::vector<GroupIndex> pool;
        for (TermId t : a) {
            for (GroupIndex g : timeline.with_term(t)) {
                const auto p = static_cast<std::ptrdiff_t>(groups[g].period);
                if (p < range.first || p > range.second || mark[g]) continue;
                mark[g] = 1;
                pool.push_back(g);
            }
        }
        for (GroupIndex g : pool) mark[g] = 0;
        std::sort(pool.begin(), pool.end());

        struct Entry {
            GroupIndex g;
            std::size_t inter;
            std::size_t uni;
            std::size_t gap;
        };
        std::vector<Entry> entries;
        entries.reserve(pool.size());
        for (GroupIndex g : pool) {
            const std::size_t inter = intersection_size(a, groups[g].terms);
            entries.push_back({g, inter, a.size() + groups[g].terms.size() - inter, period_gap(self.period, groups[g].period)});
        }

        std::optional<Score> best;
        std::vector<KinshipLink> all_links;
        auto consider = [&](Score s) {
            if (!(s.delta > config.floor)) return;
            if (config.all_above_floor) {
                for (GroupIndex m : s.members) emit(all_links, group, m, direction, s.delta);
            }
            if (!best || better(groups, s, *best)) best = std::move(s);
        };

        for (const auto& e : entries) {
            consider({static_cast<double>(e.inter) / static_cast<double>(e.uni), e.gap, e.inter, {e.g}});
        }
        // Partners by decreasing overlap: (x.inter + y.inter) / x.uni then
        // bounds every remaining pair of x, so the scan can stop early.
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.inter > y.inter; });
        std::vector<TermId> merged;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            for (std::size_t j = i + 1; j < entries.size(); ++j) {
                const auto& x = entries[i];
                const auto& y = entries[j];
                if (!config.all_above_floor && best) {
                    const auto shared = static_cast<double>(x.inter + y.inter);
                    if (shared / static_cast<double>(x.uni) < best->delta) break;
                    if (shared / static_cast<double>(std::max(x.uni, y.uni)) < best->delta) continue;
                }
                merged.clear();
                std::set_union(groups[x.g].terms.begin(), groups[x.g].terms.end(), groups[y.g].terms.begin(),
                               groups[y.g].terms.end(), std::back_inserter(merged));
                const std::size_t inter = intersection_size(a, merged);
                const std::size_t uni = a.size() + merged.size() - inter;
                consider({static_cast<double>(inter) / static_cast<double>(uni), std::max(x.gap, y.gap), inter, {std::min(x.g, y.g), std::max(x.g, y.g)}});
            }
        }

        if (best) {
            result.trace.matched = true;
            if (config.all_above_floor) {
                result.links = std::move(all_links);
                dedupe_max(result.links);
            } else {
                for (GroupIndex m : best->members) emit(result.links, group, m, direction, best->delta);
            }
            break;
        }
        if (window_saturated(timeline, range, direction)) break;
    }
    return result;
}

KinshipGraph build_kinship_graph(std::vector<Group> groups, std::size_t period_count, const MatchConfig& config) {
    check_config(config);
    check_groups(groups, period_count);
    KinshipGraph graph;
    graph.window = config.window;
    graph.period_count = period_count;
    graph.groups = std::move(groups);
    if (period_count < 2 || graph.groups.empty()) return graph;

    const GroupTimeline timeline(graph.groups, period_count);
    const std::size_t n = graph.groups.size();
    std::vector<MatchResult> results(2 * n);
    detail::parallel_for(2 * n, config.threads, [&](std::size_t k) {
        const Direction dir = k % 2 == 0 ? Direction::upstream : Direction::downstream;
        results[k] = match_group(timeline, k / 2, dir, config);
    });
    for (auto& r : results) {
        graph.links.insert(graph.links.end(), r.links.begin(), r.links.end());
        graph.trace.push_back(r.trace);
    }
    dedupe_max(graph.links);
    return graph;
}

KinshipGraph brute_force_oracle(std::vector<Group> groups, std::size_t period_count, const MatchConfig& config,
                                std::size_t cap) {
    if (groups.size() > cap) {
        throw Error(fmt::format("brute-force oracle capped at {} groups, got {}", cap, groups.size()));
    }
    check_config(config);
    check_groups(groups, period_count);
    KinshipGraph graph;
    graph.window = config.window;
    graph.period_count = period_count;
    graph.groups = std::move(groups);
    if (period_count < 2 || graph.groups.empty()) return graph;

    const GroupTimeline timeline(graph.groups, period_count);
    const std::span<const Group> all = graph.groups;
    for (GroupIndex g = 0; g < all.size(); ++g) {
        for (Direction dir : {Direction::upstream, Direction::downstream}) {
            WindowTrace trace{g, dir, config.window, config.window, false};
            for (std::size_t w = config.window; w <= std::max(config.window, period_count); ++w) {
                trace.used = w;
                const auto range = timeline.window_range(all[g].period, dir, w);
                if (range.first > range.second) break;
                std::vector<Score> scored;
                for (const auto& c : enumerate_candidates(timeline, g, dir, w)) {
                    Score s;
                    s.delta = jaccard(all[g].terms, c.terms);
                    s.members = c.members;
                    for (GroupIndex m : c.members) s.gap = std::max(s.gap, period_gap(all[g].period, all[m].period));
                    s.overlap = intersection_size(all[g].terms, c.terms);
                    if (s.delta > config.floor) scored.push_back(std::move(s));
                }
                if (!scored.empty()) {
                    trace.matched = true;
                    std::sort(scored.begin(), scored.end(), [&](const Score& x, const Score& y) { return better(all, x, y); });
                    const std::size_t keep = config.all_above_floor ? scored.size() : 1;
                    for (std::size_t i = 0; i < keep; ++i) {
                        for (GroupIndex m : scored[i].members) {
                            // Under all_above_floor a member sharing no term is not a relative.
                            if (config.all_above_floor && intersection_size(all[g].terms, all[m].terms) == 0) continue;
                            emit(graph.links, g, m, dir, scored[i].delta);
                        }
                    }
                    break;
                }
                if (window_saturated(timeline, range, dir)) break;
            }
            graph.trace.push_back(trace);
        }
    }
    dedupe_max(graph.links);
    return graph;
}

}  // namespace phylo

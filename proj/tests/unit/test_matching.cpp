#include "phylomemy/error.hpp"
#include "phylomemy/matching.hpp"
#include "synthetic.hpp"

#include <algorithm>
#include <random>

#include <doctest.h>

using namespace phylo;

namespace {

std::vector<Group> make_groups(std::vector<std::pair<PeriodId, std::vector<TermId>>> spec) {
    std::vector<Group> groups;
    for (auto& [p, terms] : spec) groups.push_back({"", p, std::move(terms), 1});
    assign_group_ids(groups);
    return groups;
}

GroupIndex find(const std::vector<Group>& groups, PeriodId p, const std::vector<TermId>& terms) {
    for (GroupIndex i = 0; i < groups.size(); ++i) {
        if (groups[i].period == p && groups[i].terms == terms) return i;
    }
    FAIL("group not found");
    return 0;
}

}  // namespace

TEST_CASE("jaccard") {
    const std::vector<TermId> a{1, 2, 3}, b{2, 3, 4, 5}, none{};
    CHECK(jaccard(a, b) == doctest::Approx(2.0 / 5.0));
    CHECK(jaccard(a, a) == 1.0);
    CHECK(jaccard(a, none) == 0.0);
    CHECK_THROWS_AS(jaccard(none, none), Error);
}

TEST_CASE("candidates are the singles and unordered pairs of the window") {
    auto groups = make_groups({{0, {1}}, {0, {2}}, {1, {3}}, {2, {1, 2}}});
    GroupTimeline timeline(groups, 3);
    const GroupIndex self = find(groups, 2, {1, 2});
    CHECK(enumerate_candidates(timeline, self, Direction::upstream, 1).size() == 1);
    auto both = enumerate_candidates(timeline, self, Direction::upstream, 2);
    CHECK(both.size() == 3 + 3);
    CHECK(both.back().members.size() == 2);
    CHECK(enumerate_candidates(timeline, self, Direction::downstream, 1).empty());
    CHECK_THROWS_AS(enumerate_candidates(timeline, self, Direction::upstream, 0), ConfigError);
}

TEST_CASE("a pair whose union rebuilds the group beats every single") {
    auto groups = make_groups({{0, {1, 2}}, {0, {3, 4}}, {0, {1, 2, 3, 4, 5, 6}}, {1, {1, 2, 3, 4}}});
    const GroupIndex a = find(groups, 1, {1, 2, 3, 4});
    const GroupIndex b = find(groups, 0, {1, 2});
    const GroupIndex c = find(groups, 0, {3, 4});
    const GroupIndex d = find(groups, 0, {1, 2, 3, 4, 5, 6});
    GroupTimeline timeline(groups, 2);

    auto up = match_group(timeline, a, Direction::upstream, {});
    CHECK(up.trace.matched);
    REQUIRE(up.links.size() == 2);
    CHECK(up.links[0] == KinshipLink{a, std::min(b, c), 1.0});
    CHECK(up.links[1] == KinshipLink{a, std::max(b, c), 1.0});

    // Downstream, b only sees a: 2 shared terms over 4.
    auto down = match_group(timeline, b, Direction::downstream, {});
    REQUIRE(down.links.size() == 1);
    CHECK(down.links[0] == KinshipLink{a, b, 0.5});

    KinshipGraph graph = build_kinship_graph(groups, 2, {});
    // (a, b) and (a, c) keep the larger weight; d is matched downstream to a at 4/6.
    std::vector<KinshipLink> expected{{a, b, 1.0}, {a, c, 1.0}, {a, d, 4.0 / 6.0}};
    std::sort(expected.begin(), expected.end(), [](auto& x, auto& y) { return std::tie(x.child, x.parent) < std::tie(y.child, y.parent); });
    CHECK(graph.links == expected);
}

TEST_CASE("ties prefer the nearer period, then larger overlap, then the single") {
    // Same similarity 0.5 at gap 1 and gap 2.
    auto groups = make_groups({{0, {1, 2}}, {1, {1, 3}}, {2, {1}}});
    const GroupIndex self = find(groups, 2, {1});
    const GroupIndex near = find(groups, 1, {1, 3});
    GroupTimeline timeline(groups, 3);
    MatchConfig cfg;
    cfg.window = 2;
    auto r = match_group(timeline, self, Direction::upstream, cfg);
    REQUIRE(r.links.size() == 1);
    CHECK(r.links[0].parent == near);

    // {1,2} vs {1,2,3,4}: single {1,2,3,4} gives 0.5 with overlap 2;
    // single {1,9} gives 1/3; the pair {1,2,3,4}+{1,9} gives 2/5.
    auto g2 = make_groups({{0, {1, 2, 3, 4}}, {0, {1, 9}}, {1, {1, 2}}});
    GroupTimeline t2(g2, 2);
    auto r2 = match_group(t2, find(g2, 1, {1, 2}), Direction::upstream, {});
    REQUIRE(r2.links.size() == 1);
    CHECK(r2.links[0].parent == find(g2, 0, {1, 2, 3, 4}));
    CHECK(r2.links[0].weight == doctest::Approx(0.5));

    // Pair {1}+{2} equals single {1,2} exactly: the single wins.
    auto g3 = make_groups({{0, {1}}, {0, {2}}, {0, {1, 2}}, {1, {1, 2}}});
    GroupTimeline t3(g3, 2);
    auto r3 = match_group(t3, find(g3, 1, {1, 2}), Direction::upstream, {});
    REQUIRE(r3.links.size() == 1);
    CHECK(r3.links[0].parent == find(g3, 0, {1, 2}));
}

TEST_CASE("the window widens until a candidate appears") {
    auto groups = make_groups({{0, {1, 2}}, {1, {7, 8}}, {2, {1, 2}}, {3, {9}}});
    const GroupIndex late = find(groups, 2, {1, 2});
    GroupTimeline timeline(groups, 4);
    auto r = match_group(timeline, late, Direction::upstream, {});
    CHECK(r.trace.requested == 1);
    CHECK(r.trace.used == 2);
    CHECK(r.trace.matched);
    REQUIRE(r.links.size() == 1);
    CHECK(r.links[0].parent == find(groups, 0, {1, 2}));

    auto lonely = match_group(timeline, find(groups, 3, {9}), Direction::upstream, {});
    CHECK_FALSE(lonely.trace.matched);
    CHECK(lonely.trace.used == 3);
    CHECK(lonely.links.empty());
}

TEST_CASE("all-above-floor mode links every related candidate") {
    auto groups = make_groups({{0, {1, 2}}, {0, {2, 3}}, {0, {8}}, {1, {1, 2, 3}}});
    const GroupIndex self = find(groups, 1, {1, 2, 3});
    GroupTimeline timeline(groups, 2);
    MatchConfig cfg;
    cfg.all_above_floor = true;
    auto r = match_group(timeline, self, Direction::upstream, cfg);
    REQUIRE(r.links.size() == 2);
    // Both appear in the pair reaching similarity 1.
    for (const auto& l : r.links) CHECK(l.weight == 1.0);

    cfg.floor = 0.99;
    cfg.all_above_floor = false;
    auto strict = match_group(timeline, self, Direction::upstream, cfg);
    CHECK(strict.links.size() == 2);
    cfg.floor = 1.5;
    CHECK_THROWS_AS(match_group(timeline, self, Direction::upstream, cfg), ConfigError);
}

TEST_CASE("a single period yields no links") {
    auto groups = make_groups({{0, {1, 2}}, {0, {1, 2, 3}}});
    auto graph = build_kinship_graph(groups, 1, {});
    CHECK(graph.links.empty());
    CHECK(graph.groups.size() == 2);
    CHECK_THROWS_AS(build_kinship_graph(groups, 0, {}), Error);
}

TEST_CASE("pruned matching equals the exhaustive oracle") {
    std::mt19937 rng(77);
    for (int instance = 0; instance < 60; ++instance) {
        const std::size_t periods = 2 + rng() % 5;
        auto groups = phylo::testing::random_groups(rng, 5 + rng() % 26, periods, 6 + rng() % 10, 4);
        MatchConfig cfg;
        cfg.window = 1 + rng() % 3;
        cfg.all_above_floor = instance % 3 == 0;
        cfg.floor = instance % 4 == 1 ? 0.25 : 0.0;
        const auto fast = build_kinship_graph(groups, periods, cfg);
        const auto slow = brute_force_oracle(groups, periods, cfg);
        CHECK(fast.links == slow.links);
        CHECK(fast.trace == slow.trace);
    }
}

TEST_CASE("parallel matching is identical to sequential matching") {
    std::mt19937 rng(78);
    auto groups = phylo::testing::random_groups(rng, 400, 10, 60, 5);
    MatchConfig cfg;
    const auto one = build_kinship_graph(groups, 10, cfg);
    cfg.threads = 4;
    const auto four = build_kinship_graph(groups, 10, cfg);
    CHECK(one.links == four.links);
    CHECK(one.trace == four.trace);
}

TEST_CASE("every link joins distinct periods with the parent earlier") {
    std::mt19937 rng(79);
    auto groups = phylo::testing::random_groups(rng, 200, 8, 40, 5);
    const auto graph = build_kinship_graph(groups, 8, {});
    for (const auto& l : graph.links) {
        CHECK(graph.groups[l.parent].period < graph.groups[l.child].period);
        CHECK(l.weight > 0.0);
        CHECK(l.weight <= 1.0);
    }
}

#include "phylomemy/error.hpp"
#include "phylomemy/export.hpp"
#include "phylomemy/pipeline.hpp"
#include "synthetic.hpp"

#include <set>

#include <doctest.h>

using namespace phylo;
using nlohmann::json;

namespace {

PhyloExport toy_export(double lambda = 0.5) {
    BuildConfig cfg = load_config(PHYLO_FIXTURES "/toy.conf");
    const Reconstruction rec = reconstruct(cfg);
    return build_level(rec, cfg, lambda).projection;
}

// One branch of `n` groups alternating over two periods, without links.
PhyloExport wide_export(std::size_t n) {
    Phylomemy p;
    p.period_count = 2;
    Branch root;
    root.id = "0";
    for (std::size_t i = 0; i < n; ++i) {
        p.groups.push_back({group_id(i), i % 2, {static_cast<TermId>(i % 50), static_cast<TermId>(50 + i % 7)}, 1});
        root.groups.push_back(i);
    }
    p.tree.nodes = {root};
    p.tree.roots = {0};
    PeriodSet periods;
    periods.periods = {{0, Date{std::chrono::year{2000}, std::chrono::January, std::chrono::day{1}}, Date{std::chrono::year{2001}, std::chrono::January, std::chrono::day{1}}, {}},
                       {1, Date{std::chrono::year{2001}, std::chrono::January, std::chrono::day{1}}, Date{std::chrono::year{2002}, std::chrono::January, std::chrono::day{1}}, {}}};
    const FrequencyTable freq(2, std::vector<std::uint32_t>(57, 1));
    ProjectionContext ctx;
    ctx.periods = &periods;
    ctx.frequencies = &freq;
    return project(p, ctx, {});
}

}  // namespace

TEST_CASE("canonical dump sorts keys and fixes float precision") {
    const json value = {{"b", 1.5}, {"a", {true, nullptr, "x", 3, -2}}, {"c", 1.0 / 3.0}};
    CHECK(canonical_dump(value) == "{\"a\":[true,null,\"x\",3,-2],\"b\":1.500000,\"c\":0.333333}\n");
    CHECK(quantize(0.1234565) == doctest::Approx(0.123457));
    CHECK(quantize(-1e-9) == 0.0);
    CHECK_THROWS_AS(quantize(std::nan("")), Error);
}

TEST_CASE("export round trip is exact") {
    const PhyloExport e = toy_export();
    REQUIRE_FALSE(e.branches.empty());
    const std::string text = serialize(e);
    const PhyloExport back = parse_export(text);
    CHECK(back == e);
    CHECK(serialize(back) == text);

    auto dir = phylo::testing::scratch_dir("export_roundtrip");
    write_export(e, dir / "e.json");
    CHECK(read_export(dir / "e.json") == e);
}

TEST_CASE("export content is self-consistent") {
    const PhyloExport e = toy_export();
    std::set<std::string> branch_ids, group_ids;
    for (const auto& b : e.branches) branch_ids.insert(b.id);
    for (const auto& g : e.groups) {
        group_ids.insert(g.id);
        CHECK(branch_ids.count(g.branch) == 1);
        CHECK(g.y == static_cast<double>(g.period));
    }
    for (const auto& l : e.links) {
        CHECK(group_ids.count(l.parent) == 1);
        CHECK(group_ids.count(l.child) == 1);
    }
    for (const auto& l : e.ghost_links) CHECK(l.weight < l.cut_level);
    for (const auto& t : e.terms) {
        CHECK(t.freq_by_period.size() == e.periods.size());
        CHECK(e.search_index.at(t.label).size() == t.group_count);
    }
    CHECK(e.metadata["counts"]["groups"] == e.groups.size());
    CHECK(e.metadata["large_export"] == false);
    CHECK(e.metadata["format_version"] == 1);
    CHECK(e.metadata["config"]["edge_threshold"] == 0.3);
}

TEST_CASE("large exports carry the warning flag") {
    const PhyloExport small = wide_export(kLargeExportGroups);
    CHECK(small.metadata["large_export"] == false);
    const PhyloExport large = wide_export(kLargeExportGroups + 1);
    CHECK(large.metadata["large_export"] == true);
    REQUIRE(large.metadata["warnings"].size() == 1);
    CHECK(parse_export(serialize(large)) == large);
}

TEST_CASE("malformed exports name the offending key") {
    json j = to_json(toy_export());
    j["groups"][3].erase("x");
    CHECK_THROWS_WITH_AS(from_json(j), "export: missing key 'groups[3].x'", InputError);
    j = to_json(toy_export());
    j["branches"][0]["span"] = {1};
    CHECK_THROWS_WITH_AS(from_json(j), doctest::Contains("branches[0].span"), InputError);
    j = to_json(toy_export());
    j["terms"][0]["label"] = 4;
    CHECK_THROWS_WITH_AS(from_json(j), "export: wrong type at 'terms[0].label'", InputError);
    CHECK_THROWS_AS(parse_export("{"), InputError);
    CHECK_THROWS_AS(parse_export("[]"), InputError);
    CHECK_THROWS_AS(serialize(PhyloExport{}), Error);
}

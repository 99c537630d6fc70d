#include "phylomemy/export.hpp"

#include "phylomemy/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

namespace phylo {

using nlohmann::json;

double quantize(double value) {
    if (!std::isfinite(value)) {
        throw Error("non-finite value in export");
    }
    const double q = std::round(value * 1e6) / 1e6;
    return q == 0.0 ? 0.0 : q;
}

namespace {

void quantize_tree(json& value) {
    if (value.is_number_float()) {
        value = quantize(value.get<double>());
    } else if (value.is_structured()) {
        for (auto& item : value) quantize_tree(item);
    }
}

void dump_into(const json& value, std::string& out) {
    switch (value.type()) {
    case json::value_t::object: {
        out.push_back('{');
        bool first = true;
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (!first) out.push_back(',');
            first = false;
            out += json(it.key()).dump();
            out.push_back(':');
            dump_into(it.value(), out);
        }
        out.push_back('}');
        break;
    }
    case json::value_t::array: {
        out.push_back('[');
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (i) out.push_back(',');
            dump_into(value[i], out);
        }
        out.push_back(']');
        break;
    }
    case json::value_t::number_float:
        out += fmt::format("{:.6f}", quantize(value.get<double>()));
        break;
    default:
        out += value.dump();
    }
}

template <typename T>
T field(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw InputError(fmt::format("export: missing key '{}{}'", path, key));
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw InputError(fmt::format("export: wrong type at '{}{}'", path, key));
    }
}

const json& array_field(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array()) {
        throw InputError(fmt::format("export: missing array '{}{}'", path, key));
    }
    return *it;
}

}  // namespace

std::string canonical_dump(const json& value) {
    std::string out;
    dump_into(value, out);
    out.push_back('\n');
    return out;
}

PhyloExport project(const Phylomemy& phylomemy, const ProjectionContext& context, const ProjectionConfig& config) {
    if (!context.periods || !context.frequencies) {
        throw Error("projection requires the period table and term frequencies");
    }
    const std::span<const Group> groups = phylomemy.groups;
    Network network = filter_minor_branches(extract_network(phylomemy), groups, config.min_periods);
    const auto dynamics = compute_term_dynamics(network, groups, phylomemy.period_count, *context.frequencies);

    std::vector<BranchIndex> leaves;
    for (const auto& b : network.branches) leaves.push_back(b.node);
    const auto peaks = seabed_coordinates(phylomemy.tree, leaves);
    const auto layout = kinship_layout(network, peaks, phylomemy, config.layout);

    auto term_label = [&](TermId t) -> std::string {
        return t < context.term_labels.size() ? context.term_labels[t] : fmt::format("term{}", t);
    };
    std::vector<std::string> labels(context.term_labels.begin(), context.term_labels.end());
    for (const auto& d : dynamics) {
        if (d.term >= labels.size()) labels.resize(static_cast<std::size_t>(d.term) + 1);
        if (labels[d.term].empty()) labels[d.term] = term_label(d.term);
    }

    PhyloExport out;
    std::unordered_map<GroupIndex, std::string> branch_of;
    json degenerate = json::array();
    for (std::size_t i = 0; i < network.branches.size(); ++i) {
        const auto& b = network.branches[i];
        ExportBranch eb;
        eb.id = b.id;
        const auto label = label_branch(b, network, groups, dynamics, labels);
        for (TermId t : label.terms) eb.label.push_back(labels[t]);
        if (label.degenerate) degenerate.push_back(b.id);
        eb.peak = {quantize(peaks[i].x), quantize(peaks[i].y)};
        eb.elevation = quantize(b.elevation);
        eb.first_period = groups[b.groups.front()].period;
        eb.last_period = eb.first_period;
        for (GroupIndex g : b.groups) {
            eb.first_period = std::min(eb.first_period, groups[g].period);
            eb.last_period = std::max(eb.last_period, groups[g].period);
            branch_of.emplace(g, b.id);
        }
        out.branches.push_back(std::move(eb));
    }

    std::unordered_map<TermId, const TermDynamics*> by_term;
    for (const auto& d : dynamics) by_term.emplace(d.term, &d);
    std::vector<GroupIndex> retained;
    for (const auto& [g, id] : branch_of) retained.push_back(g);
    std::sort(retained.begin(), retained.end());

    for (GroupIndex g : retained) {
        ExportGroup eg;
        eg.id = groups[g].id;
        eg.branch = branch_of.at(g);
        eg.period = groups[g].period;
        eg.x = quantize(layout.positions[g]->x);
        eg.y = quantize(layout.positions[g]->y);
        for (TermId t : groups[g].terms) {
            const TermDynamics& d = *by_term.at(t);
            eg.terms.push_back({t, std::binary_search(d.emerging_groups.begin(), d.emerging_groups.end(), g),
                                std::binary_search(d.decreasing_groups.begin(), d.decreasing_groups.end(), g)});
            out.search_index[labels[t]].push_back(groups[g].id);
        }
        out.groups.push_back(std::move(eg));
    }

    for (const auto& l : phylomemy.links) {
        if (branch_of.count(l.child) && branch_of.count(l.parent)) {
            out.links.push_back({groups[l.parent].id, groups[l.child].id, quantize(l.weight)});
        }
    }
    for (const auto& l : network.ghosts) {
        out.ghost_links.push_back({groups[l.parent].id, groups[l.child].id, quantize(l.weight), quantize(l.cut_level)});
    }

    for (const auto& d : dynamics) {
        ExportTerm et;
        et.id = d.term;
        et.label = labels[d.term];
        et.first_period = d.first_period;
        et.last_period = d.last_period;
        double sum_x = 0.0;
        for (GroupIndex g : d.emerging_groups) {
            et.emerging_groups.push_back(groups[g].id);
            sum_x += layout.positions[g]->x;
        }
        for (GroupIndex g : d.decreasing_groups) et.decreasing_groups.push_back(groups[g].id);
        et.emergence_x = quantize(sum_x / static_cast<double>(d.emerging_groups.size()));
        et.freq_by_period = d.freq_by_period;
        et.freq_last = d.freq_last;
        et.cross_branch = d.cross_branch;
        et.group_count = d.group_count;
        out.terms.push_back(std::move(et));
    }

    std::size_t documents = 0;
    for (const auto& p : context.periods->periods) {
        out.periods.push_back({p.id, format_date(p.start), format_date(p.end), p.documents.size()});
        documents += p.documents.size();
    }

    json warnings = json::array();
    const bool large = out.groups.size() > kLargeExportGroups;
    if (large) {
        warnings.push_back(fmt::format("{} groups exceed {}: interactive rendering may be slow", out.groups.size(),
                                       kLargeExportGroups));
    }
    json removed = json::array();
    for (const auto& id : network.removed) removed.push_back(id);

    json meta;
    meta["format_version"] = 1;
    meta["lambda"] = phylomemy.lambda;
    meta["config"] = context.config_echo;
    meta["large_export"] = large;
    meta["warnings"] = warnings;
    meta["removed_branches"] = removed;
    meta["degenerate_labels"] = degenerate;
    meta["counts"] = {{"documents", documents},
                      {"periods", out.periods.size()},
                      {"groups", out.groups.size()},
                      {"groups_before_filter", groups.size()},
                      {"branches", out.branches.size()},
                      {"links", out.links.size()},
                      {"ghost_links", out.ghost_links.size()},
                      {"submerged_links", phylomemy.submerged_links},
                      {"terms", out.terms.size()}};
    meta["layout"] = {{"crossings_before", layout.crossings_before}, {"crossings_after", layout.crossings_after}};
    meta["formulas"] = {
        {"confidence", "max(cooc(x,y)/occ(x), cooc(x,y)/occ(y)) (min when symmetrization=min)"},
        {"similarity", "jaccard(group, candidate union)"},
        {"quality", "sum_x g(x)/sum_y g(y) * sum_b R(x,b) * (lambda*A(x,b) + (1-lambda)*R(x,b))"},
        {"tfidf", "tf(x,b) * ln(|branches| / |branches containing x|)"},
        {"seabed_gap", "1 - split_level(lca(u,v))"}};
    quantize_tree(meta);
    out.metadata = std::move(meta);
    return out;
}

json to_json(const PhyloExport& e) {
    json j;
    j["metadata"] = e.metadata;
    json periods = json::array();
    for (const auto& p : e.periods) {
        periods.push_back({{"id", p.id}, {"start", p.start}, {"end", p.end}, {"documents", p.documents}});
    }
    j["periods"] = std::move(periods);

    json branches = json::array();
    for (const auto& b : e.branches) {
        branches.push_back({{"id", b.id},
                            {"label", b.label},
                            {"peak", {{"x", b.peak.x}, {"y", b.peak.y}}},
                            {"elevation", b.elevation},
                            {"span", {b.first_period, b.last_period}}});
    }
    j["branches"] = std::move(branches);

    json groups = json::array();
    for (const auto& g : e.groups) {
        json terms = json::array();
        for (const auto& t : g.terms) terms.push_back({{"id", t.id}, {"emerging", t.emerging}, {"decreasing", t.decreasing}});
        groups.push_back(
            {{"id", g.id}, {"branch", g.branch}, {"period", g.period}, {"x", g.x}, {"y", g.y}, {"terms", std::move(terms)}});
    }
    j["groups"] = std::move(groups);

    json links = json::array();
    for (const auto& l : e.links) links.push_back({{"parent", l.parent}, {"child", l.child}, {"weight", l.weight}});
    j["links"] = std::move(links);

    json ghosts = json::array();
    for (const auto& l : e.ghost_links) {
        ghosts.push_back({{"parent", l.parent}, {"child", l.child}, {"weight", l.weight}, {"cut_level", l.cut_level}});
    }
    j["ghost_links"] = std::move(ghosts);

    json terms = json::array();
    for (const auto& t : e.terms) {
        terms.push_back({{"id", t.id},
                         {"label", t.label},
                         {"first_period", t.first_period},
                         {"last_period", t.last_period},
                         {"emerging_groups", t.emerging_groups},
                         {"decreasing_groups", t.decreasing_groups},
                         {"freq_by_period", t.freq_by_period},
                         {"freq_last", t.freq_last},
                         {"cross_branch", t.cross_branch},
                         {"group_count", t.group_count},
                         {"emergence_x", t.emergence_x}});
    }
    j["terms"] = std::move(terms);
    j["search_index"] = e.search_index;
    return j;
}

PhyloExport from_json(const json& j) {
    if (!j.is_object()) {
        throw InputError("export: top-level value must be an object");
    }
    PhyloExport e;
    auto meta = j.find("metadata");
    if (meta == j.end() || !meta->is_object()) {
        throw InputError("export: missing object 'metadata'");
    }
    e.metadata = *meta;

    for (std::size_t i = 0; const auto& p : array_field(j, "periods", "")) {
        const std::string path = fmt::format("periods[{}].", i++);
        e.periods.push_back({field<PeriodId>(p, "id", path), field<std::string>(p, "start", path),
                             field<std::string>(p, "end", path), field<std::size_t>(p, "documents", path)});
    }
    for (std::size_t i = 0; const auto& b : array_field(j, "branches", "")) {
        const std::string path = fmt::format("branches[{}].", i++);
        ExportBranch eb;
        eb.id = field<std::string>(b, "id", path);
        eb.label = field<std::vector<std::string>>(b, "label", path);
        const auto peak = field<json>(b, "peak", path);
        eb.peak = {field<double>(peak, "x", path + "peak."), field<double>(peak, "y", path + "peak.")};
        eb.elevation = field<double>(b, "elevation", path);
        const auto span = field<std::vector<PeriodId>>(b, "span", path);
        if (span.size() != 2) {
            throw InputError(fmt::format("export: '{}span' must hold two periods", path));
        }
        eb.first_period = span[0];
        eb.last_period = span[1];
        e.branches.push_back(std::move(eb));
    }
    for (std::size_t i = 0; const auto& g : array_field(j, "groups", "")) {
        const std::string path = fmt::format("groups[{}].", i++);
        ExportGroup eg;
        eg.id = field<std::string>(g, "id", path);
        eg.branch = field<std::string>(g, "branch", path);
        eg.period = field<PeriodId>(g, "period", path);
        eg.x = field<double>(g, "x", path);
        eg.y = field<double>(g, "y", path);
        for (std::size_t k = 0; const auto& t : array_field(g, "terms", path)) {
            const std::string tpath = fmt::format("{}terms[{}].", path, k++);
            eg.terms.push_back({field<TermId>(t, "id", tpath), field<bool>(t, "emerging", tpath),
                                field<bool>(t, "decreasing", tpath)});
        }
        e.groups.push_back(std::move(eg));
    }
    for (std::size_t i = 0; const auto& l : array_field(j, "links", "")) {
        const std::string path = fmt::format("links[{}].", i++);
        e.links.push_back({field<std::string>(l, "parent", path), field<std::string>(l, "child", path),
                           field<double>(l, "weight", path)});
    }
    for (std::size_t i = 0; const auto& l : array_field(j, "ghost_links", "")) {
        const std::string path = fmt::format("ghost_links[{}].", i++);
        e.ghost_links.push_back({field<std::string>(l, "parent", path), field<std::string>(l, "child", path),
                                 field<double>(l, "weight", path), field<double>(l, "cut_level", path)});
    }
    for (std::size_t i = 0; const auto& t : array_field(j, "terms", "")) {
        const std::string path = fmt::format("terms[{}].", i++);
        ExportTerm et;
        et.id = field<TermId>(t, "id", path);
        et.label = field<std::string>(t, "label", path);
        et.first_period = field<PeriodId>(t, "first_period", path);
        et.last_period = field<PeriodId>(t, "last_period", path);
        et.emerging_groups = field<std::vector<std::string>>(t, "emerging_groups", path);
        et.decreasing_groups = field<std::vector<std::string>>(t, "decreasing_groups", path);
        et.freq_by_period = field<std::vector<std::uint32_t>>(t, "freq_by_period", path);
        et.freq_last = field<std::uint32_t>(t, "freq_last", path);
        et.cross_branch = field<bool>(t, "cross_branch", path);
        et.group_count = field<std::size_t>(t, "group_count", path);
        et.emergence_x = field<double>(t, "emergence_x", path);
        e.terms.push_back(std::move(et));
    }
    e.search_index = field<std::map<std::string, std::vector<std::string>>>(j, "search_index", "");
    return e;
}

std::string serialize(const PhyloExport& e) {
    if (e.branches.empty()) {
        throw Error("refusing to export a projection without branches");
    }
    return canonical_dump(to_json(e));
}

PhyloExport parse_export(std::string_view text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw InputError("export: invalid JSON");
    }
    return from_json(j);
}

void write_export(const PhyloExport& e, const std::filesystem::path& path) {
    const std::string text = serialize(e);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(fmt::format("cannot write export '{}'", path.string()));
    }
    out << text;
    if (!out) {
        throw Error(fmt::format("failed writing export '{}'", path.string()));
    }
}

PhyloExport read_export(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError(fmt::format("cannot read export '{}'", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_export(buffer.str());
}

}  // namespace phylo

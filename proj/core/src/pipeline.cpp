#include "phylomemy/pipeline.hpp"

#include "parallel.hpp"
#include "phylomemy/error.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace phylo {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string unquote(std::string value) {
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
        return value.substr(1, value.size() - 2);
    }
    return value;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, value));
}

long long parse_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, value));
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    const long long v = parse_integer(key, value);
    if (v < 0) throw ConfigError(fmt::format("{} must be non-negative", key));
    return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

std::vector<double> parse_double_list(const std::string& key, std::string value) {
    if (!value.empty() && value.front() == '[') value.erase(value.begin());
    if (!value.empty() && value.back() == ']') value.pop_back();
    std::vector<double> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
    fs::path p(value);
    return p.is_relative() && !base.empty() ? base / p : p;
}

class StageTimer {
public:
    StageTimer(std::ostream* log, std::string name)
        : log_(log), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

    void done(const std::string& summary) const {
        if (!log_) return;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        fmt::print(*log_, "[{}] {} ({:.3f} s)\n", name_, summary, secs);
    }

    template <typename F>
    auto run(F&& body) const {
        try {
            return body();
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("stage '{}': {}", name_, e.what()));
        } catch (const Error& e) {
            throw Error(fmt::format("stage '{}': {}", name_, e.what()));
        }
    }

private:
    std::ostream* log_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

Date default_origin(const DocumentSet& docs, PeriodUnit unit) {
    using namespace std::chrono;
    Date earliest = docs.documents.front().date;
    for (const auto& d : docs.documents) earliest = std::min(earliest, d.date);
    switch (unit) {
    case PeriodUnit::year: return Date{earliest.year(), January, day{1}};
    case PeriodUnit::month: return Date{earliest.year(), earliest.month(), day{1}};
    case PeriodUnit::week: return earliest;
    }
    return earliest;
}

std::string format_lambda(double lambda) {
    return fmt::format("{}", quantize(lambda));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

}  // namespace

ClusteringMode parse_clustering_mode(std::string_view name) {
    if (name == "cliques") return ClusteringMode::cliques;
    if (name == "itemsets") return ClusteringMode::itemsets;
    throw ConfigError(fmt::format("unknown clustering mode '{}' (expected cliques or itemsets)", name));
}

std::string_view to_string(ClusteringMode mode) {
    return mode == ClusteringMode::cliques ? "cliques" : "itemsets";
}

BuildConfig parse_config_text(std::string_view text, const fs::path& base_dir) {
    BuildConfig cfg;
    std::vector<std::string> errors;
    std::set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Strip comments outside quotes.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        const std::string entry = trim(line);
        if (entry.empty()) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
            errors.push_back(fmt::format("line {}: expected 'key = value'", line_no));
            continue;
        }
        const std::string key = trim(std::string_view(entry).substr(0, eq));
        const std::string value = unquote(trim(std::string_view(entry).substr(eq + 1)));
        if (!seen.insert(key).second) {
            errors.push_back(fmt::format("line {}: duplicate key '{}'", line_no, key));
            continue;
        }
        try {
            if (key == "corpus") cfg.corpus = resolve(base_dir, value);
            else if (key == "corpus_format") cfg.corpus_format = parse_corpus_format(value);
            else if (key == "rootlist") cfg.rootlist = resolve(base_dir, value);
            else if (key == "period_unit") cfg.period_unit = parse_period_unit(value);
            else if (key == "period_length") cfg.period_length = static_cast<int>(parse_integer(key, value));
            else if (key == "period_origin") cfg.period_origin = parse_date(value);
            else if (key == "edge_threshold") cfg.edge_threshold = parse_double(key, value);
            else if (key == "symmetrization") cfg.symmetrization = parse_symmetrization(value);
            else if (key == "clustering") cfg.clustering = parse_clustering_mode(value);
            else if (key == "min_support") cfg.min_support = parse_count(key, value);
            else if (key == "keep_singletons") cfg.keep_singletons = parse_bool(key, value);
            else if (key == "max_cliques") cfg.max_cliques = parse_count(key, value);
            else if (key == "window") cfg.window = parse_count(key, value);
            else if (key == "all_above_floor") cfg.all_above_floor = parse_bool(key, value);
            else if (key == "lambda") cfg.lambdas = parse_double_list(key, value);
            else if (key == "min_periods") cfg.min_periods = parse_count(key, value);
            else if (key == "glyph_diameter") cfg.layout.glyph_diameter = parse_double(key, value);
            else if (key == "layout_sweeps") cfg.layout.sweeps = parse_count(key, value);
            else if (key == "output") cfg.output = resolve(base_dir, value);
            else if (key == "diagnostics") cfg.diagnostics = resolve(base_dir, value);
            else if (key == "threads") cfg.threads = parse_count(key, value);
            else errors.push_back(fmt::format("line {}: unknown key '{}'", line_no, key));
        } catch (const Error& e) {
            errors.push_back(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    if (!errors.empty()) {
        std::string joined;
        for (const auto& e : errors) joined += (joined.empty() ? "" : "\n") + e;
        throw ConfigError(joined);
    }
    return cfg;
}

BuildConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.parent_path());
}

std::vector<std::string> check_config(const BuildConfig& config) {
    std::vector<std::string> errors;
    if (config.corpus.empty()) errors.emplace_back("corpus path is required");
    else if (!fs::is_regular_file(config.corpus)) errors.push_back(fmt::format("corpus file not found: {}", config.corpus.string()));
    if (config.rootlist.empty()) errors.emplace_back("rootlist path is required");
    else if (!fs::is_regular_file(config.rootlist)) errors.push_back(fmt::format("rootlist file not found: {}", config.rootlist.string()));
    if (!config.corpus_format && !config.corpus.empty()) {
        const auto ext = config.corpus.extension().string();
        if (ext != ".csv" && ext != ".jsonl") {
            errors.push_back(fmt::format("cannot infer corpus format from '{}'; set corpus_format", config.corpus.string()));
        }
    }
    if (config.period_length < 1) errors.emplace_back("period_length must be >= 1");
    if (!(config.edge_threshold >= 0.0 && config.edge_threshold <= 1.0)) errors.emplace_back("edge_threshold must lie in [0, 1]");
    if (config.clustering == ClusteringMode::itemsets && config.min_support < 1) errors.emplace_back("min_support must be >= 1");
    if (config.max_cliques < 1) errors.emplace_back("max_cliques must be >= 1");
    if (config.window < 1) errors.emplace_back("window must be >= 1");
    if (config.lambdas.empty()) errors.emplace_back("at least one lambda is required");
    for (double l : config.lambdas) {
        if (!(l >= 0.0 && l <= 1.0)) errors.push_back(fmt::format("lambda must lie in [0, 1], got {}", l));
    }
    std::set<std::string> distinct;
    for (double l : config.lambdas) {
        if (!distinct.insert(format_lambda(l)).second) errors.push_back(fmt::format("lambda {} listed twice", l));
    }
    if (config.min_periods < 1) errors.emplace_back("min_periods must be >= 1");
    if (!(config.layout.glyph_diameter > 0.0)) errors.emplace_back("glyph_diameter must be > 0");
    if (config.output.empty()) errors.emplace_back("output path is required");
    return errors;
}

std::vector<std::string> validate(const fs::path& config_path) {
    try {
        return check_config(load_config(config_path));
    } catch (const ConfigError& e) {
        std::vector<std::string> errors;
        std::istringstream in(e.what());
        std::string line;
        while (std::getline(in, line)) errors.push_back(line);
        return errors;
    }
}

nlohmann::json config_echo(const BuildConfig& config) {
    nlohmann::json j;
    j["corpus"] = config.corpus.filename().string();
    j["rootlist"] = config.rootlist.filename().string();
    j["period_unit"] = std::string(to_string(config.period_unit));
    j["period_length"] = config.period_length;
    j["period_origin"] = config.period_origin ? format_date(*config.period_origin) : std::string("auto");
    j["edge_threshold"] = config.edge_threshold;
    j["symmetrization"] = std::string(to_string(config.symmetrization));
    j["clustering"] = std::string(to_string(config.clustering));
    j["min_support"] = config.min_support;
    j["keep_singletons"] = config.keep_singletons;
    j["max_cliques"] = config.max_cliques;
    j["window"] = config.window;
    j["window_extension"] = true;
    j["all_above_floor"] = config.all_above_floor;
    j["match_floor"] = 0.0;
    j["lambdas"] = config.lambdas;
    j["min_periods"] = config.min_periods;
    j["glyph_diameter"] = config.layout.glyph_diameter;
    j["layout_sweeps"] = config.layout.sweeps;
    j["split_tolerance"] = "1e-12";
    return j;
}

Reconstruction reconstruct(const BuildConfig& config, std::ostream* log) {
    if (auto errors = check_config(config); !errors.empty()) {
        std::string joined;
        for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
        throw ConfigError("invalid configuration: " + joined);
    }
    Reconstruction rec;

    {
        StageTimer t(log, "ingest");
        t.run([&] {
            const CorpusFormat format = config.corpus_format.value_or(
                config.corpus.extension() == ".jsonl" ? CorpusFormat::jsonl : CorpusFormat::csv);
            rec.roots = parse_rootlist(config.rootlist);
            rec.documents = index_documents(parse_corpus(config.corpus, format), rec.roots);
            PeriodSpec spec{config.period_unit, config.period_length,
                            config.period_origin.value_or(default_origin(rec.documents, config.period_unit))};
            rec.periods = periodize(rec.documents, spec);
            rec.frequencies = document_frequencies(rec.periods, rec.documents, rec.roots.size());
            for (const auto& r : rec.roots.roots()) rec.labels.push_back(r.canonical);
            return 0;
        });
        t.done(fmt::format("documents={} rejects={} unindexed={} roots={} periods={}", rec.documents.size(),
                           rec.documents.rejects.size(), rec.documents.unindexed_count(), rec.roots.size(),
                           rec.periods.size()));
    }

    std::vector<Group> groups;
    {
        StageTimer t(log, "period_graphs");
        std::size_t edges = 0;
        t.run([&] {
            const std::size_t n = rec.periods.size();
            std::vector<SimilarityGraph> graphs(n);
            std::vector<std::vector<Group>> per_period(n);
            detail::parallel_for(n, config.threads, [&](std::size_t p) {
                const Period& period = rec.periods.periods[p];
                std::vector<std::vector<TermId>> docs;
                docs.reserve(period.documents.size());
                for (std::size_t d : period.documents) docs.push_back(rec.documents.documents[d].terms);
                if (config.clustering == ClusteringMode::cliques) {
                    const CoocMatrix m = cooccurrence(period, rec.documents, rec.roots.size());
                    graphs[p] = build_similarity_graph(m, config.edge_threshold, config.symmetrization, p);
                    per_period[p] = detect_fields_cliques(graphs[p], docs, {config.keep_singletons, config.max_cliques});
                } else {
                    graphs[p].period = p;
                    per_period[p] = detect_fields_itemsets(docs, config.min_support, config.keep_singletons, p);
                }
            });
            for (auto& g : graphs) edges += g.edges.size();
            for (auto& list : per_period) {
                for (auto& g : list) groups.push_back(std::move(g));
            }
            assign_group_ids(groups);
            if (config.diagnostics) rec.graphs = std::move(graphs);
            return 0;
        });
        t.done(fmt::format("mode={} edges={} groups={}", to_string(config.clustering), edges, groups.size()));
    }

    {
        StageTimer t(log, "matching");
        t.run([&] {
            MatchConfig mc;
            mc.window = config.window;
            mc.all_above_floor = config.all_above_floor;
            mc.threads = config.threads;
            rec.kinship = build_kinship_graph(std::move(groups), rec.periods.size(), mc);
            return 0;
        });
        std::size_t extended = 0;
        for (const auto& tr : rec.kinship.trace) extended += tr.used > tr.requested ? 1 : 0;
        t.done(fmt::format("links={} window={} extended_windows={}", rec.kinship.links.size(), config.window, extended));
    }

    if (config.diagnostics) {
        fs::create_directories(*config.diagnostics);
        std::string graphs = "period\tterm_a\tterm_b\tweight\n";
        for (const auto& g : rec.graphs) {
            for (const auto& e : g.edges) {
                graphs += fmt::format("{}\t{}\t{}\t{:.6f}\n", g.period, rec.labels[e.a], rec.labels[e.b], e.weight);
            }
        }
        write_text(*config.diagnostics / "graphs.tsv", graphs);
        std::string links = "child\tparent\tweight\n";
        for (const auto& l : rec.kinship.links) {
            links += fmt::format("{}\t{}\t{:.6f}\n", rec.kinship.groups[l.child].id, rec.kinship.groups[l.parent].id, l.weight);
        }
        write_text(*config.diagnostics / "links.tsv", links);
        std::string windows = "group\tdirection\trequested\tused\tmatched\n";
        for (const auto& tr : rec.kinship.trace) {
            windows += fmt::format("{}\t{}\t{}\t{}\t{}\n", rec.kinship.groups[tr.group].id,
                                   tr.direction == Direction::upstream ? "upstream" : "downstream", tr.requested, tr.used,
                                   tr.matched);
        }
        write_text(*config.diagnostics / "windows.tsv", windows);
    }
    return rec;
}

LevelResult build_level(const Reconstruction& rec, const BuildConfig& config, double lambda, std::ostream* log) {
    LevelResult level;
    level.lambda = lambda;
    {
        StageTimer t(log, fmt::format("sea_level lambda={}", format_lambda(lambda)));
        level.phylomemy = t.run([&] {
            RiseConfig rc;
            rc.lambda = lambda;
            return rise(rec.kinship, rc);
        });
        t.done(fmt::format("leaves={} ghosts={} surviving_links={}", level.phylomemy.tree.leaves().size(),
                           level.phylomemy.ghosts.size(), level.phylomemy.links.size()));
    }
    {
        StageTimer t(log, fmt::format("projection lambda={}", format_lambda(lambda)));
        level.projection = t.run([&] {
            ProjectionContext ctx;
            ctx.periods = &rec.periods;
            ctx.frequencies = &rec.frequencies;
            ctx.term_labels = rec.labels;
            ctx.config_echo = config_echo(config);
            ctx.config_echo["rejected_records"] = rec.documents.rejects.size();
            ProjectionConfig pc;
            pc.min_periods = config.min_periods;
            pc.layout = config.layout;
            return project(level.phylomemy, ctx, pc);
        });
        t.done(fmt::format("branches={} groups={} removed={}", level.projection.branches.size(),
                           level.projection.groups.size(), level.projection.metadata["removed_branches"].size()));
    }
    if (config.diagnostics) {
        std::string trace = "branch\tdelta\tcomponents\tquality_before\tquality_after\tcommitted\n";
        for (const auto& d : level.phylomemy.trace) {
            trace += fmt::format("{}\t{:.9f}\t{}\t{:.12f}\t{:.12f}\t{}\n", d.branch, d.delta, d.components,
                                 d.quality_before, d.quality_after, d.committed);
        }
        write_text(*config.diagnostics / fmt::format("split_trace.lambda-{}.tsv", format_lambda(lambda)), trace);
    }
    return level;
}

fs::path level_output_path(const BuildConfig& config, double lambda) {
    if (config.lambdas.size() <= 1) return config.output;
    fs::path out = config.output;
    const std::string name = fmt::format("{}.lambda-{}{}", out.stem().string(), format_lambda(lambda), out.extension().string());
    return out.parent_path() / name;
}

std::vector<fs::path> run_build(const BuildConfig& config, std::ostream* log) {
    const Reconstruction rec = reconstruct(config, log);
    if (!rec.documents.rejects.empty()) {
        fs::path sidecar = config.output;
        sidecar += ".rejects.tsv";
        if (sidecar.has_parent_path()) fs::create_directories(sidecar.parent_path());
        write_rejects(rec.documents, sidecar);
        if (log) fmt::print(*log, "[ingest] {} rejected records written to {}\n", rec.documents.rejects.size(), sidecar.string());
    }
    std::vector<fs::path> written;
    for (double lambda : config.lambdas) {
        const LevelResult level = build_level(rec, config, lambda, log);
        const fs::path path = level_output_path(config, lambda);
        StageTimer t(log, "export");
        t.run([&] {
            if (path.has_parent_path()) fs::create_directories(path.parent_path());
            write_export(level.projection, path);
            return 0;
        });
        t.done(path.string());
        written.push_back(path);
    }
    return written;
}

std::string inspect(const PhyloExport& e, std::string_view query) {
    std::ostringstream out;
    auto group_count = [&](const std::string& branch) {
        return std::count_if(e.groups.begin(), e.groups.end(), [&](const ExportGroup& g) { return g.branch == branch; });
    };
    auto label_text = [](const std::vector<std::string>& label) {
        std::string s;
        for (const auto& t : label) s += (s.empty() ? "" : " ") + t;
        return s;
    };

    for (const auto& b : e.branches) {
        if (b.id != query) continue;
        fmt::print(out, "branch {}\n", b.id);
        fmt::print(out, "  label: {}\n", label_text(b.label));
        fmt::print(out, "  span: {} - {}\n", e.periods.at(b.first_period).start, e.periods.at(b.last_period).start);
        fmt::print(out, "  periods: {}..{}\n", b.first_period, b.last_period);
        fmt::print(out, "  elevation: {:.6f}\n", b.elevation);
        fmt::print(out, "  peak: ({:.6f}, {:.6f})\n", b.peak.x, b.peak.y);
        fmt::print(out, "  groups: {}\n", group_count(b.id));
        std::set<std::string> vocabulary;
        for (const auto& g : e.groups) {
            if (g.branch != b.id) continue;
            for (const auto& t : g.terms) {
                auto it = std::find_if(e.terms.begin(), e.terms.end(), [&](const ExportTerm& x) { return x.id == t.id; });
                if (it != e.terms.end()) vocabulary.insert(it->label);
            }
        }
        fmt::print(out, "  terms: {}\n", vocabulary.size());
        return out.str();
    }

    // An ancestor id of the split tree lists the exported branches below it.
    const std::string prefix = fmt::format("{}.", query);
    std::vector<const ExportBranch*> below;
    for (const auto& b : e.branches) {
        if (b.id.starts_with(prefix)) below.push_back(&b);
    }
    if (!below.empty()) {
        fmt::print(out, "branch {} (split into {})\n", query, below.size());
        for (const ExportBranch* b : below) {
            fmt::print(out, "  branch {} [{}] periods={}..{} elevation={:.6f} groups={}\n", b->id, label_text(b->label),
                       b->first_period, b->last_period, b->elevation, group_count(b->id));
        }
        return out.str();
    }

    auto term =std::find_if(e.terms.begin(), e.terms.end(), [&](const ExportTerm& t) { return t.label == query; });
    if (term == e.terms.end()) {
        throw Error(fmt::format("term not found: '{}'", query));
    }
    fmt::print(out, "term {}\n", term->label);
    fmt::print(out, "  periods: {}..{}\n", term->first_period, term->last_period);
    fmt::print(out, "  groups: {}\n", term->group_count);
    fmt::print(out, "  freq_last: {}\n", term->freq_last);
    fmt::print(out, "  cross_branch: {}\n", term->cross_branch);
    std::set<std::string> branches;
    for (const auto& g : e.groups) {
        auto ref = std::find_if(g.terms.begin(), g.terms.end(), [&](const ExportTermRef& r) { return r.id == term->id; });
        if (ref == g.terms.end()) continue;
        branches.insert(g.branch);
    }
    for (const auto& id : branches) {
        auto b = std::find_if(e.branches.begin(), e.branches.end(), [&](const ExportBranch& x) { return x.id == id; });
        fmt::print(out, "  branch {} [{}]\n", id, b != e.branches.end() ? label_text(b->label) : std::string("?"));
        for (const auto& g : e.groups) {
            if (g.branch != id) continue;
            auto ref = std::find_if(g.terms.begin(), g.terms.end(), [&](const ExportTermRef& r) { return r.id == term->id; });
            if (ref == g.terms.end()) continue;
            fmt::print(out, "    {} period={}{}{}\n", g.id, g.period, ref->emerging ? " emerging" : "",
                       ref->decreasing ? " decreasing" : "");
        }
    }
    return out.str();
}

std::string inspect(const fs::path& export_path, std::string_view query) {
    return inspect(read_export(export_path), query);
}

}  // namespace phylo

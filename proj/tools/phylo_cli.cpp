// Command-line front end: build, inspect and validate.

#include "phylomemy/error.hpp"
#include "phylomemy/pipeline.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

namespace {

struct BuildOverrides {
    std::string config;
    std::optional<std::string> corpus;
    std::optional<std::string> corpus_format;
    std::optional<std::string> rootlist;
    std::optional<std::string> period_unit;
    std::optional<int> period_length;
    std::optional<std::string> period_origin;
    std::optional<double> edge_threshold;
    std::optional<std::string> symmetrization;
    std::optional<std::string> clustering;
    std::optional<std::size_t> min_support;
    bool keep_singletons = false;
    std::optional<std::size_t> max_cliques;
    std::optional<std::size_t> window;
    bool all_above_floor = false;
    std::vector<double> lambdas;
    std::optional<std::size_t> min_periods;
    std::optional<std::string> output;
    std::optional<std::string> diagnostics;
    std::optional<std::size_t> threads;
    bool quiet = false;
};

phylo::BuildConfig resolve_config(const BuildOverrides& o) {
    phylo::BuildConfig cfg = o.config.empty() ? phylo::BuildConfig{} : phylo::load_config(o.config);
    if (o.corpus) cfg.corpus = *o.corpus;
    if (o.corpus_format) cfg.corpus_format = phylo::parse_corpus_format(*o.corpus_format);
    if (o.rootlist) cfg.rootlist = *o.rootlist;
    if (o.period_unit) cfg.period_unit = phylo::parse_period_unit(*o.period_unit);
    if (o.period_length) cfg.period_length = *o.period_length;
    if (o.period_origin) cfg.period_origin = phylo::parse_date(*o.period_origin);
    if (o.edge_threshold) cfg.edge_threshold = *o.edge_threshold;
    if (o.symmetrization) cfg.symmetrization = phylo::parse_symmetrization(*o.symmetrization);
    if (o.clustering) cfg.clustering = phylo::parse_clustering_mode(*o.clustering);
    if (o.min_support) cfg.min_support = *o.min_support;
    if (o.keep_singletons) cfg.keep_singletons = true;
    if (o.max_cliques) cfg.max_cliques = *o.max_cliques;
    if (o.window) cfg.window = *o.window;
    if (o.all_above_floor) cfg.all_above_floor = true;
    if (!o.lambdas.empty()) cfg.lambdas = o.lambdas;
    if (o.min_periods) cfg.min_periods = *o.min_periods;
    if (o.output) cfg.output = *o.output;
    if (o.diagnostics) cfg.diagnostics = *o.diagnostics;
    if (o.threads) cfg.threads = *o.threads;
    return cfg;
}

int run_build(const BuildOverrides& o) {
    const phylo::BuildConfig cfg = resolve_config(o);
    if (auto errors = phylo::check_config(cfg); !errors.empty()) {
        for (const auto& e : errors) std::cerr << "error: " << e << '\n';
        return 2;
    }
    const auto written = phylo::run_build(cfg, o.quiet ? nullptr : &std::cerr);
    for (const auto& path : written) std::cout << path.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reconstruct and inspect phylomemies of scientific corpora"};
    app.require_subcommand(1);

    BuildOverrides b;
    auto* build = app.add_subcommand("build", "Reconstruct a phylomemy and write the export file(s)");
    build->add_option("-c,--config", b.config, "Config file (key = value)");
    build->add_option("--corpus", b.corpus, "Corpus file (.csv or .jsonl)");
    build->add_option("--corpus-format", b.corpus_format, "csv or jsonl");
    build->add_option("--rootlist", b.rootlist, "Root list file");
    build->add_option("--period-unit", b.period_unit, "week, month or year");
    build->add_option("--period-length", b.period_length, "Units per period");
    build->add_option("--period-origin", b.period_origin, "First period start (YYYY-MM-DD)");
    build->add_option("--edge-threshold", b.edge_threshold, "Minimum confidence for a similarity edge");
    build->add_option("--symmetrization", b.symmetrization, "max or min");
    build->add_option("--clustering", b.clustering, "cliques or itemsets");
    build->add_option("--min-support", b.min_support, "Itemset support threshold");
    build->add_flag("--keep-singletons", b.keep_singletons, "Keep single-term groups");
    build->add_option("--max-cliques", b.max_cliques, "Clique enumeration cap per period");
    build->add_option("--window", b.window, "Matching window in periods");
    build->add_flag("--all-above-floor", b.all_above_floor, "Link every candidate member instead of the best one");
    build->add_option("--lambda", b.lambdas, "Level(s) of observation in [0, 1]")->delimiter(',');
    build->add_option("--min-periods", b.min_periods, "Minimum branch span kept in the export");
    build->add_option("-o,--output", b.output, "Export file");
    build->add_option("--diagnostics", b.diagnostics, "Directory for intermediate dumps");
    build->add_option("-j,--threads", b.threads, "Worker threads (0 = hardware concurrency)");
    build->add_flag("-q,--quiet", b.quiet, "Suppress stage logs");

    std::string export_path;
    std::optional<std::string> branch_query;
    std::optional<std::string> term_query;
    std::optional<std::string> positional_query;
    auto* insp = app.add_subcommand("inspect", "Describe a branch or a term of an export file");
    insp->add_option("export", export_path, "Export file")->required();
    insp->add_option("query", positional_query, "Branch id or term label");
    auto* by_branch = insp->add_option("--branch", branch_query, "Branch id");
    insp->add_option("--term", term_query, "Term label")->excludes(by_branch);

    std::string validate_path;
    auto* val = app.add_subcommand("validate", "Check a config file without running a build");
    val->add_option("config", validate_path, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*build) return run_build(b);
        if (*insp) {
            const auto query = branch_query ? branch_query : term_query ? term_query : positional_query;
            if (!query) {
                std::cerr << "error: inspect needs a branch id or a term label\n";
                return 2;
            }
            std::cout << phylo::inspect(std::filesystem::path(export_path), *query);
            return 0;
        }
        if (*val) {
            const auto errors = phylo::validate(validate_path);
            for (const auto& e : errors) std::cerr << "error: " << e << '\n';
            if (errors.empty()) std::cout << "ok\n";
            return errors.empty() ? 0 : 2;
        }
    } catch (const phylo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

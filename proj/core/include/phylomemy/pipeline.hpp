#pragma once

// End-to-end orchestration: config, reconstruction stages, multi-level
// builds and export inspection.

#include "phylomemy/export.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace phylo {

enum class ClusteringMode { cliques, itemsets };

ClusteringMode parse_clustering_mode(std::string_view name);
std::string_view to_string(ClusteringMode mode);

struct BuildConfig {
    std::filesystem::path corpus;
    std::optional<CorpusFormat> corpus_format;  // inferred from the extension when unset
    std::filesystem::path rootlist;

    PeriodUnit period_unit = PeriodUnit::year;
    int period_length = 1;
    std::optional<Date> period_origin;  // start of the earliest document's unit when unset

    double edge_threshold = 0.1;
    Symmetrization symmetrization = Symmetrization::max;
    ClusteringMode clustering = ClusteringMode::cliques;
    std::size_t min_support = 2;
    bool keep_singletons = false;
    std::size_t max_cliques = 100000;

    std::size_t window = 1;
    bool all_above_floor = false;

    std::vector<double> lambdas{0.5};
    std::size_t min_periods = 2;
    LayoutConfig layout;

    std::filesystem::path output = "phylomemy.json";
    std::optional<std::filesystem::path> diagnostics;
    std::size_t threads = 1;
};

/// Reads a `key = value` config file. Relative paths are resolved against
/// the file's directory. Throws ConfigError listing every problem found.
BuildConfig load_config(const std::filesystem::path& path);
BuildConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});

/// Static checks (domains, file presence); empty when the config is valid.
std::vector<std::string> check_config(const BuildConfig& config);

/// Validates a config file without side effects.
std::vector<std::string> validate(const std::filesystem::path& config_path);

/// Parameters echoed into export metadata (run-invariant fields only).
nlohmann::json config_echo(const BuildConfig& config);

/// State shared by every level of observation of one build.
struct Reconstruction {
    DocumentSet documents;
    RootList roots;
    PeriodSet periods;
    FrequencyTable frequencies;
    std::vector<SimilarityGraph> graphs;
    KinshipGraph kinship;
    std::vector<std::string> labels;
};

/// Ingest, similarity graphs, field detection and inter-temporal matching.
Reconstruction reconstruct(const BuildConfig& config, std::ostream* log = nullptr);

struct LevelResult {
    double lambda = 0.0;
    Phylomemy phylomemy;
    PhyloExport projection;
};

LevelResult build_level(const Reconstruction& rec, const BuildConfig& config, double lambda, std::ostream* log = nullptr);

/// Output path of one level: the configured path itself for single-level
/// builds, `<stem>.lambda-<value><ext>` otherwise.
std::filesystem::path level_output_path(const BuildConfig& config, double lambda);

/// Runs every stage and writes one export per lambda. Stage failures are
/// rethrown as Error prefixed with the stage name.
std::vector<std::filesystem::path> run_build(const BuildConfig& config, std::ostream* log = nullptr);

/// Textual report about a branch id or a term label of an export.
std::string inspect(const PhyloExport& e, std::string_view query);
std::string inspect(const std::filesystem::path& export_path, std::string_view query);

}  // namespace phylo

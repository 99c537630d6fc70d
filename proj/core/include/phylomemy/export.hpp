#pragma once

// Pre-spatialized export file: the contract between the reconstruction
// engine and the viewer.

#include "phylomemy/projection.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace phylo {

/// Exports above this many groups carry a rendering warning.
inline constexpr std::size_t kLargeExportGroups = 1000;

struct ExportPeriod {
    PeriodId id = 0;
    std::string start;
    std::string end;
    std::size_t documents = 0;

    friend bool operator==(const ExportPeriod&, const ExportPeriod&) = default;
};

struct ExportTermRef {
    TermId id = 0;
    bool emerging = false;
    bool decreasing = false;

    friend bool operator==(const ExportTermRef&, const ExportTermRef&) = default;
};

struct ExportGroup {
    std::string id;
    std::string branch;
    PeriodId period = 0;
    double x = 0.0;
    double y = 0.0;
    std::vector<ExportTermRef> terms;

    friend bool operator==(const ExportGroup&, const ExportGroup&) = default;
};

struct ExportLink {
    std::string parent;
    std::string child;
    double weight = 0.0;

    friend bool operator==(const ExportLink&, const ExportLink&) = default;
};

struct ExportGhostLink {
    std::string parent;
    std::string child;
    double weight = 0.0;
    double cut_level = 0.0;

    friend bool operator==(const ExportGhostLink&, const ExportGhostLink&) = default;
};

struct ExportBranch {
    std::string id;
    std::vector<std::string> label;
    Point peak;
    double elevation = 0.0;
    PeriodId first_period = 0;
    PeriodId last_period = 0;

    friend bool operator==(const ExportBranch&, const ExportBranch&) = default;
};

struct ExportTerm {
    TermId id = 0;
    std::string label;
    PeriodId first_period = 0;
    PeriodId last_period = 0;
    std::vector<std::string> emerging_groups;
    std::vector<std::string> decreasing_groups;
    std::vector<std::uint32_t> freq_by_period;
    std::uint32_t freq_last = 0;
    bool cross_branch = false;
    std::size_t group_count = 0;
    double emergence_x = 0.0;  // barycenter of the emerging groups

    friend bool operator==(const ExportTerm&, const ExportTerm&) = default;
};

struct PhyloExport {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<ExportPeriod> periods;
    std::vector<ExportBranch> branches;
    std::vector<ExportGroup> groups;
    std::vector<ExportLink> links;
    std::vector<ExportGhostLink> ghost_links;
    std::vector<ExportTerm> terms;
    std::map<std::string, std::vector<std::string>> search_index;

    friend bool operator==(const PhyloExport&, const PhyloExport&) = default;
};

struct ProjectionConfig {
    std::size_t min_periods = 2;
    LayoutConfig layout;
};

/// Inputs of the projection besides the phylomemy itself.
struct ProjectionContext {
    const PeriodSet* periods = nullptr;
    const FrequencyTable* frequencies = nullptr;
    std::span<const std::string> term_labels;
    nlohmann::json config_echo = nlohmann::json::object();
};

/// Extracts, filters, labels and lays out the phylomemy. All floating point
/// values are rounded to 6 decimals so that the export round-trips exactly.
PhyloExport project(const Phylomemy& phylomemy, const ProjectionContext& context, const ProjectionConfig& config);

/// Rounds to 6 decimal places (the precision of the file format).
double quantize(double value);

nlohmann::json to_json(const PhyloExport& e);
PhyloExport from_json(const nlohmann::json& j);

/// Canonical text: sorted keys, floats with exactly 6 decimals, newline-terminated.
std::string serialize(const PhyloExport& e);
PhyloExport parse_export(std::string_view text);

void write_export(const PhyloExport& e, const std::filesystem::path& path);
PhyloExport read_export(const std::filesystem::path& path);

/// Canonical dump of an arbitrary JSON value (used for every export file).
std::string canonical_dump(const nlohmann::json& value);

}  // namespace phylo

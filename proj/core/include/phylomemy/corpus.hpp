#pragma once

// Corpus ingestion: documents, root-term lists, time discretization and
// per-period co-occurrence counting.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phylo {

using TermId = std::uint32_t;
using PeriodId = std::size_t;
using Date = std::chrono::year_month_day;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD). Throws InputError.
Date parse_date(std::string_view text);
std::string format_date(Date date);

struct Document {
    std::string id;
    Date date;
    std::string text;
    std::vector<TermId> terms;  // sorted, unique
};

struct RejectedRecord {
    std::size_t line = 0;
    std::string reason;
    std::string raw;
};

struct DocumentSet {
    std::vector<Document> documents;
    std::vector<RejectedRecord> rejects;

    std::size_t size() const { return documents.size(); }
    /// Number of documents in which indexing found no root term.
    std::size_t unindexed_count() const;
};

enum class CorpusFormat { csv, jsonl };

CorpusFormat parse_corpus_format(std::string_view name);

/// Reads a CSV (RFC-4180, header with id,date,title,abstract) or JSON-lines
/// corpus. Malformed records are collected in `rejects`; duplicate ids and an
/// input without any valid record are errors.
DocumentSet parse_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Writes one line per rejected record: `line<TAB>reason<TAB>raw`.
void write_rejects(const DocumentSet& docs, const std::filesystem::path& path);

struct RootTerm {
    TermId id = 0;
    std::string canonical;
    std::vector<std::string> variants;
};

class RootList {
public:
    RootList() = default;
    /// Validates uniqueness of canonical forms and variant ownership.
    explicit RootList(std::vector<RootTerm> roots);

    const std::vector<RootTerm>& roots() const { return roots_; }
    std::size_t size() const { return roots_.size(); }
    const std::string& label(TermId id) const { return roots_.at(id).canonical; }

private:
    std::vector<RootTerm> roots_;
};

inline constexpr char kVariantDelimiter = '|';

/// One root per line, variants after the canonical form separated by '|'.
/// Blank lines and lines starting with '#' are skipped.
RootList parse_rootlist(const std::filesystem::path& path);
RootList parse_rootlist_text(std::string_view text);

/// Case-folded, punctuation-normalized token sequence used for matching.
std::vector<std::string> tokenize(std::string_view text);

/// Fills every document's `terms` with the roots whose canonical form or a
/// variant occurs as a whole-token subsequence, longest match first.
DocumentSet index_documents(DocumentSet docs, const RootList& roots);

enum class PeriodUnit { week, month, year };

PeriodUnit parse_period_unit(std::string_view name);
std::string_view to_string(PeriodUnit unit);

struct PeriodSpec {
    PeriodUnit unit = PeriodUnit::year;
    int length = 1;
    Date origin{};
};

struct Period {
    PeriodId id = 0;
    Date start;  // inclusive
    Date end;    // exclusive
    std::vector<std::size_t> documents;  // indices into DocumentSet::documents
};

struct PeriodSet {
    std::vector<Period> periods;

    std::size_t size() const { return periods.size(); }
    /// Period containing `date`, or size() when out of range.
    PeriodId locate(Date date) const;
};

/// Calendar-aligned contiguous periods from `spec.origin`. Empty periods are
/// kept so that period indices stay calendar-true.
PeriodSet periodize(const DocumentSet& docs, const PeriodSpec& spec);

/// Symmetric document co-occurrence counts; the diagonal holds occurrences.
class CoocMatrix {
public:
    CoocMatrix() = default;
    explicit CoocMatrix(std::size_t term_count)
        : n_(term_count), counts_(term_count * term_count, 0) {}

    std::size_t term_count() const { return n_; }
    std::uint32_t at(TermId x, TermId y) const { return counts_[x * n_ + y]; }
    std::uint32_t occ(TermId x) const { return at(x, x); }
    void add_document(std::span<const TermId> terms);

private:
    std::size_t n_ = 0;
    std::vector<std::uint32_t> counts_;
};

CoocMatrix cooccurrence(const Period& period, const DocumentSet& docs, std::size_t term_count);

}  // namespace phylo

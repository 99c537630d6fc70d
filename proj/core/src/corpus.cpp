#include "phylomemy/corpus.hpp"

#include "phylomemy/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

namespace phylo {

namespace {

using namespace std::chrono;

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError(fmt::format("cannot read file '{}'", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string join_text(const std::string& title, const std::string& abstract) {
    if (title.empty()) return abstract;
    if (abstract.empty()) return title;
    return title + " " + abstract;
}

struct CsvRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
    std::string raw;
    bool malformed = false;
};

// RFC-4180: quoted fields may contain separators, doubled quotes and line breaks.
std::vector<CsvRecord> split_csv(const std::string& data) {
    std::vector<CsvRecord> records;
    std::size_t line = 1;
    std::size_t i = 0;
    const std::size_t n = data.size();
    while (i < n) {
        CsvRecord rec;
        rec.line = line;
        const std::size_t record_start = i;
        std::string field;
        bool in_quotes = false;
        bool field_was_quoted = false;
        bool done = false;
        while (i < n && !done) {
            char c = data[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < n && data[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                        continue;
                    }
                    in_quotes = false;
                    ++i;
                    continue;
                }
                if (c == '\n') ++line;
                field.push_back(c);
                ++i;
                continue;
            }
            switch (c) {
            case '"':
                if (field.empty() && !field_was_quoted) {
                    in_quotes = true;
                    field_was_quoted = true;
                } else {
                    rec.malformed = true;
                    field.push_back(c);
                }
                ++i;
                break;
            case ',':
                rec.fields.push_back(std::move(field));
                field.clear();
                field_was_quoted = false;
                ++i;
                break;
            case '\r':
                ++i;
                break;
            case '\n':
                ++line;
                ++i;
                done = true;
                break;
            default:
                if (field_was_quoted) rec.malformed = true;
                field.push_back(c);
                ++i;
            }
        }
        if (in_quotes) rec.malformed = true;
        rec.fields.push_back(std::move(field));
        rec.raw = trim(std::string_view(data).substr(record_start, i - record_start));
        if (rec.raw.empty()) continue;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<std::pair<Document, std::size_t>> read_csv(const std::string& data, std::vector<RejectedRecord>& rejects) {
    auto records = split_csv(data);
    std::vector<std::pair<Document, std::size_t>> out;
    if (records.empty()) return out;

    const auto& header = records.front();
    int col_id = -1, col_date = -1, col_title = -1, col_abstract = -1;
    for (std::size_t c = 0; c < header.fields.size(); ++c) {
        std::string name = trim(header.fields[c]);
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (name == "id") col_id = static_cast<int>(c);
        else if (name == "date") col_date = static_cast<int>(c);
        else if (name == "title") col_title = static_cast<int>(c);
        else if (name == "abstract") col_abstract = static_cast<int>(c);
    }
    if (col_id < 0 || col_date < 0 || (col_title < 0 && col_abstract < 0)) {
        throw InputError("CSV header must name columns id, date and at least one of title, abstract");
    }

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        auto reject = [&](std::string reason) { rejects.push_back({rec.line, std::move(reason), rec.raw}); };
        if (rec.malformed) {
            reject("malformed quoting");
            continue;
        }
        if (rec.fields.size() != header.fields.size()) {
            reject(fmt::format("expected {} fields, found {}", header.fields.size(), rec.fields.size()));
            continue;
        }
        Document doc;
        doc.id = trim(rec.fields[col_id]);
        if (doc.id.empty()) {
            reject("missing id");
            continue;
        }
        try {
            doc.date = parse_date(trim(rec.fields[col_date]));
        } catch (const InputError& e) {
            reject(e.what());
            continue;
        }
        std::string title = col_title >= 0 ? trim(rec.fields[col_title]) : std::string{};
        std::string abstract = col_abstract >= 0 ? trim(rec.fields[col_abstract]) : std::string{};
        if (title.empty() && abstract.empty()) {
            reject("no text field");
            continue;
        }
        doc.text = join_text(title, abstract);
        out.emplace_back(std::move(doc), rec.line);
    }
    return out;
}

std::vector<std::pair<Document, std::size_t>> read_jsonl(const std::string& data, std::vector<RejectedRecord>& rejects) {
    std::vector<std::pair<Document, std::size_t>> out;
    std::istringstream in(data);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string raw = trim(line);
        if (raw.empty()) continue;
        auto reject = [&](std::string reason) { rejects.push_back({line_no, std::move(reason), raw}); };
        nlohmann::json obj = nlohmann::json::parse(raw, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            reject("not a JSON object");
            continue;
        }
        auto text_field = [&](const char* key, std::string& dst) {
            auto it = obj.find(key);
            if (it == obj.end() || it->is_null()) return true;
            if (!it->is_string()) return false;
            dst = trim(it->get<std::string>());
            return true;
        };
        std::string id, date, title, abstract;
        if (!text_field("id", id) || id.empty()) {
            auto it = obj.find("id");
            if (it != obj.end() && it->is_number_integer()) {
                id = std::to_string(it->get<long long>());
            } else {
                reject("missing id");
                continue;
            }
        }
        if (!text_field("date", date) || date.empty()) {
            reject("missing date");
            continue;
        }
        if (!text_field("title", title) || !text_field("abstract", abstract)) {
            reject("text fields must be strings");
            continue;
        }
        if (title.empty() && abstract.empty()) {
            reject("no text field");
            continue;
        }
        Document doc;
        doc.id = std::move(id);
        try {
            doc.date = parse_date(date);
        } catch (const InputError& e) {
            reject(e.what());
            continue;
        }
        doc.text = join_text(title, abstract);
        out.emplace_back(std::move(doc), line_no);
    }
    return out;
}

std::string normalized_key(std::string_view text) {
    auto tokens = tokenize(text);
    std::string key;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) key.push_back(' ');
        key += tokens[i];
    }
    return key;
}

Date add_units(Date origin, PeriodUnit unit, long long count) {
    switch (unit) {
    case PeriodUnit::week:
        return Date{sys_days(origin) + days(7 * count)};
    case PeriodUnit::month:
    case PeriodUnit::year: {
        const long long m = unit == PeriodUnit::year ? 12 * count : count;
        Date shifted = origin + months(m);
        if (!shifted.ok()) {
            shifted = Date{year_month_day_last(shifted.year(), month_day_last(shifted.month()))};
        }
        return shifted;
    }
    }
    return origin;
}

}  // namespace

Date parse_date(std::string_view text) {
    // YYYY-MM-DD; a trailing time component ("T...") is ignored.
    std::string_view s = text.substr(0, std::min<std::size_t>(text.size(), text.find('T')));
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) ||
        !all_digits(s.substr(8, 2))) {
        throw InputError(fmt::format("invalid date '{}'", text));
    }
    Date d{year{std::stoi(std::string(s.substr(0, 4)))}, month{static_cast<unsigned>(std::stoi(std::string(s.substr(5, 2))))},
           day{static_cast<unsigned>(std::stoi(std::string(s.substr(8, 2))))}};
    if (!d.ok()) {
        throw InputError(fmt::format("invalid date '{}'", text));
    }
    return d;
}

std::string format_date(Date date) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                       static_cast<unsigned>(date.day()));
}

std::size_t DocumentSet::unindexed_count() const {
    return static_cast<std::size_t>(
        std::count_if(documents.begin(), documents.end(), [](const Document& d) { return d.terms.empty(); }));
}

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "csv") return CorpusFormat::csv;
    if (name == "jsonl") return CorpusFormat::jsonl;
    throw ConfigError(fmt::format("unknown corpus format '{}' (expected csv or jsonl)", name));
}

DocumentSet parse_corpus(const std::filesystem::path& path, CorpusFormat format) {
    const std::string data = read_file(path);
    DocumentSet set;
    auto parsed = format == CorpusFormat::csv ? read_csv(data, set.rejects) : read_jsonl(data, set.rejects);
    if (parsed.empty()) {
        throw InputError(fmt::format("'{}': zero valid records", path.string()));
    }
    std::unordered_map<std::string, std::size_t> seen;
    set.documents.reserve(parsed.size());
    for (auto& [doc, line] : parsed) {
        auto [it, inserted] = seen.emplace(doc.id, line);
        if (!inserted) {
            throw InputError(fmt::format("'{}': duplicate id '{}' (lines {} and {})", path.string(), doc.id, it->second, line));
        }
        set.documents.push_back(std::move(doc));
    }
    return set;
}

void write_rejects(const DocumentSet& docs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError(fmt::format("cannot write rejects report '{}'", path.string()));
    }
    for (const auto& r : docs.rejects) {
        std::string raw = r.raw;
        std::replace(raw.begin(), raw.end(), '\n', ' ');
        out << r.line << '\t' << r.reason << '\t' << raw << '\n';
    }
}

RootList::RootList(std::vector<RootTerm> roots) : roots_(std::move(roots)) {
    std::unordered_map<std::string, TermId> owner;
    for (TermId i = 0; i < roots_.size(); ++i) {
        auto& root = roots_[i];
        root.id = i;
        const std::string key = normalized_key(root.canonical);
        if (key.empty()) {
            throw InputError(fmt::format("root '{}' has no indexable token", root.canonical));
        }
        auto [it, inserted] = owner.emplace(key, i);
        if (!inserted) {
            throw InputError(fmt::format("duplicate canonical form '{}'", root.canonical));
        }
    }
    for (TermId i = 0; i < roots_.size(); ++i) {
        std::vector<std::string> kept;
        for (auto& variant : roots_[i].variants) {
            const std::string key = normalized_key(variant);
            if (key.empty()) continue;
            auto [it, inserted] = owner.emplace(key, i);
            if (!inserted && it->second != i) {
                throw InputError(fmt::format("variant '{}' claimed by roots '{}' and '{}'", variant,
                                             roots_[it->second].canonical, roots_[i].canonical));
            }
            kept.push_back(std::move(variant));
        }
        roots_[i].variants = std::move(kept);
    }
}

RootList parse_rootlist_text(std::string_view text) {
    std::vector<RootTerm> roots;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::string entry = trim(line);
        if (entry.empty() || entry.front() == '#') continue;
        RootTerm root;
        std::size_t start = 0;
        bool first = true;
        while (start <= entry.size()) {
            std::size_t stop = entry.find(kVariantDelimiter, start);
            if (stop == std::string::npos) stop = entry.size();
            std::string part = trim(std::string_view(entry).substr(start, stop - start));
            if (first) {
                root.canonical = std::move(part);
                first = false;
            } else if (!part.empty()) {
                root.variants.push_back(std::move(part));
            }
            start = stop + 1;
        }
        roots.push_back(std::move(root));
    }
    return RootList(std::move(roots));
}

RootList parse_rootlist(const std::filesystem::path& path) {
    return parse_rootlist_text(read_file(path));
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (c >= 0x80 || std::isalnum(c)) {
            current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

DocumentSet index_documents(DocumentSet docs, const RootList& roots) {
    std::unordered_map<std::string, TermId> patterns;
    std::size_t longest = 0;
    auto add = [&](std::string_view form, TermId id) {
        auto tokens = tokenize(form);
        if (tokens.empty()) return;
        longest = std::max(longest, tokens.size());
        patterns.emplace(normalized_key(form), id);
    };
    for (const auto& root : roots.roots()) {
        add(root.canonical, root.id);
        for (const auto& v : root.variants) add(v, root.id);
    }

    for (auto& doc : docs.documents) {
        const auto tokens = tokenize(doc.text);
        std::vector<TermId> found;
        std::size_t pos = 0;
        while (pos < tokens.size()) {
            std::size_t matched = 0;
            const std::size_t max_len = std::min(longest, tokens.size() - pos);
            std::string key;
            // Build the longest window once, then shrink from the right.
            for (std::size_t k = 0; k < max_len; ++k) {
                if (k) key.push_back(' ');
                key += tokens[pos + k];
            }
            for (std::size_t len = max_len; len >= 1; --len) {
                auto it = patterns.find(key);
                if (it != patterns.end()) {
                    found.push_back(it->second);
                    matched = len;
                    break;
                }
                if (len > 1) key.resize(key.size() - tokens[pos + len - 1].size() - 1);
            }
            pos += matched ? matched : 1;
        }
        std::sort(found.begin(), found.end());
        found.erase(std::unique(found.begin(), found.end()), found.end());
        doc.terms = std::move(found);
    }
    return docs;
}

PeriodUnit parse_period_unit(std::string_view name) {
    if (name == "week") return PeriodUnit::week;
    if (name == "month") return PeriodUnit::month;
    if (name == "year") return PeriodUnit::year;
    throw ConfigError(fmt::format("unknown period unit '{}' (expected week, month or year)", name));
}

std::string_view to_string(PeriodUnit unit) {
    switch (unit) {
    case PeriodUnit::week: return "week";
    case PeriodUnit::month: return "month";
    case PeriodUnit::year: return "year";
    }
    return "?";
}

PeriodId PeriodSet::locate(Date date) const {
    auto it = std::upper_bound(periods.begin(), periods.end(), date,
                               [](Date d, const Period& p) { return d < p.start; });
    if (it == periods.begin()) return periods.size();
    --it;
    return date < it->end ? it->id : periods.size();
}

PeriodSet periodize(const DocumentSet& docs, const PeriodSpec& spec) {
    if (spec.length < 1) {
        throw ConfigError("period length must be >= 1");
    }
    if (docs.documents.empty()) {
        throw InputError("cannot periodize an empty document set");
    }
    auto [min_it, max_it] = std::minmax_element(docs.documents.begin(), docs.documents.end(),
                                                [](const Document& a, const Document& b) { return a.date < b.date; });
    if (spec.origin > min_it->date) {
        throw ConfigError(fmt::format("period origin {} is after the earliest document ({})", format_date(spec.origin),
                                      format_date(min_it->date)));
    }
    PeriodSet set;
    Date start = spec.origin;
    for (long long k = 1;; ++k) {
        Date end = add_units(spec.origin, spec.unit, k * spec.length);
        set.periods.push_back(Period{set.periods.size(), start, end, {}});
        if (max_it->date < end) break;
        start = end;
    }
    for (std::size_t i = 0; i < docs.documents.size(); ++i) {
        set.periods[set.locate(docs.documents[i].date)].documents.push_back(i);
    }
    return set;
}

void CoocMatrix::add_document(std::span<const TermId> terms) {
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const TermId x = terms[i];
        counts_[x * n_ + x] += 1;
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
            const TermId y = terms[j];
            counts_[x * n_ + y] += 1;
            counts_[y * n_ + x] += 1;
        }
    }
}

CoocMatrix cooccurrence(const Period& period, const DocumentSet& docs, std::size_t term_count) {
    CoocMatrix m(term_count);
    for (std::size_t idx : period.documents) {
        m.add_document(docs.documents.at(idx).terms);
    }
    return m;
}

}  // namespace phylo

#pragma once

// Reading, validating, writing and merging run records.
//
// Two flat formats share one canonical schema: JSON lines (one object per
// line) and CSV with a header row. Unknown keys/columns are ignored.

#include "perfspec/errors.hpp"
#include "perfspec/metrics.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace perfspec {

enum class RecordFormat { JsonLines, Csv };

[[nodiscard]] constexpr std::string_view to_string(RecordFormat f) noexcept {
    return f == RecordFormat::JsonLines ? "json-lines" : "csv";
}

[[nodiscard]] inline std::optional<RecordFormat> parse_record_format(std::string_view s) noexcept {
    if (s == "json-lines" || s == "jsonl") return RecordFormat::JsonLines;
    if (s == "csv") return RecordFormat::Csv;
    return std::nullopt;
}

/// Guess the format from a file name; anything not ending in .csv is JSON lines.
[[nodiscard]] inline RecordFormat record_format_for_path(std::string_view path) noexcept {
    return path.ends_with(".csv") ? RecordFormat::Csv : RecordFormat::JsonLines;
}

enum class ParseMode { Strict, Lenient };

struct ParseWarning {
    std::size_t line;
    std::string reason;
};

struct RecordDocument {
    RecordFormat format{RecordFormat::JsonLines};
    std::vector<RunRecord> records;
    std::vector<ParseWarning> warnings; // lenient mode only
};

/// Canonical column order, also the CSV header written by serialize_records.
inline constexpr std::array<std::string_view, 15> kRecordFields{
    "label",     "dofs",       "wall_time_s", "flops",          "workers",
    "linear_iterations", "nonlinear_iterations", "h_size", "l2_error", "alpha",
    "discretization", "l1_misses", "l2_misses", "l3_misses", "line_size_bytes"};

inline constexpr std::uint32_t kDefaultLineSize = 64;

/// Every violated record invariant, one message per violation. Never throws.
[[nodiscard]] inline std::vector<std::string> validate_record(const RunRecord& r) {
    std::vector<std::string> out;
    if (r.dofs < 1) out.emplace_back("dofs must be ≥ 1");
    if (!(r.wall_time > 0.0) || !std::isfinite(r.wall_time)) out.emplace_back("wall_time must be > 0");
    if (r.workers < 1) out.emplace_back("workers must be ≥ 1");
    if (r.linear_iterations && *r.linear_iterations < 1) out.emplace_back("linear_iterations must be ≥ 1");
    if (r.h_size && !(*r.h_size > 0.0)) out.emplace_back("h_size must be > 0");
    if (r.l2_error && !(*r.l2_error >= 0.0)) out.emplace_back("l2_error must be ≥ 0");
    if (r.alpha && !(*r.alpha >= 0.0)) out.emplace_back("alpha must be ≥ 0");
    std::array<bool, 3> seen{};
    for (const auto& c : r.cache_counters) {
        auto& s = seen[static_cast<std::size_t>(c.level)];
        if (s) out.push_back("duplicate cache counters for " + std::string(to_string(c.level)));
        s = true;
        if (!is_valid_line_size(c.line_size)) {
            out.emplace_back("line_size must be a power of two in {32,64,128,256}");
        }
    }
    return out;
}

namespace detail {

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

struct FieldError {
    std::string reason;
};

// Field sources adapt JSON objects and CSV rows to one typed lookup. Each
// getter returns nullopt for an absent field and throws FieldError on a
// type error.
class JsonFieldSource {
public:
    explicit JsonFieldSource(const nlohmann::json& obj) : obj_(obj) {}

    [[nodiscard]] const nlohmann::json* find(std::string_view key) const {
        auto it = obj_.find(std::string(key));
        if (it == obj_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    [[nodiscard]] std::optional<std::string> text(std::string_view key) const {
        const auto* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw FieldError{std::string(key) + " must be a string"};
        return v->get<std::string>();
    }

    [[nodiscard]] std::optional<std::int64_t> integer(std::string_view key) const {
        const auto* v = find(key);
        if (!v) return std::nullopt;
        if (v->is_number_unsigned()) {
            const auto u = v->get<std::uint64_t>();
            if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
                throw FieldError{std::string(key) + " is out of range"};
            }
            return static_cast<std::int64_t>(u);
        }
        if (v->is_number_integer()) return v->get<std::int64_t>();
        if (v->is_number_float()) {
            const double d = v->get<double>();
            if (std::floor(d) == d && std::abs(d) < 9.0e18) return static_cast<std::int64_t>(d);
        }
        throw FieldError{std::string(key) + " must be an integer"};
    }

    [[nodiscard]] std::optional<double> real(std::string_view key) const {
        const auto* v = find(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) throw FieldError{std::string(key) + " must be a number"};
        return v->get<double>();
    }

private:
    const nlohmann::json& obj_;
};

class CsvFieldSource {
public:
    CsvFieldSource(const std::map<std::string, std::size_t, std::less<>>& columns,
                   const std::vector<std::string>& row)
        : columns_(columns), row_(row) {}

    [[nodiscard]] std::optional<std::string> text(std::string_view key) const {
        auto it = columns_.find(key);
        if (it == columns_.end() || row_[it->second].empty()) return std::nullopt;
        return row_[it->second];
    }

    [[nodiscard]] std::optional<std::int64_t> integer(std::string_view key) const {
        auto s = text(key);
        if (!s) return std::nullopt;
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc{} || ptr != s->data() + s->size()) {
            throw FieldError{std::string(key) + " must be an integer, got '" + *s + "'"};
        }
        return v;
    }

    [[nodiscard]] std::optional<double> real(std::string_view key) const {
        auto s = text(key);
        if (!s) return std::nullopt;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc{} || ptr != s->data() + s->size()) {
            throw FieldError{std::string(key) + " must be a number, got '" + *s + "'"};
        }
        return v;
    }

private:
    const std::map<std::string, std::size_t, std::less<>>& columns_;
    const std::vector<std::string>& row_;
};

inline std::uint64_t nonnegative(std::string_view key, std::int64_t v) {
    if (v < 0) throw FieldError{std::string(key) + " must be ≥ 0"};
    return static_cast<std::uint64_t>(v);
}

/// Builds and validates one record; throws FieldError with the reason.
template <typename Source>
RunRecord build_record(const Source& src) {
    RunRecord r;
    const auto dofs = src.integer("dofs");
    if (!dofs) throw FieldError{"dofs is required"};
    if (*dofs < 1) throw FieldError{"dofs must be ≥ 1"};
    r.dofs = static_cast<std::uint64_t>(*dofs);

    const auto wall = src.real("wall_time_s");
    if (!wall) throw FieldError{"wall_time_s is required"};
    r.wall_time = *wall;

    r.label = src.text("label").value_or("");
    if (auto v = src.integer("flops")) r.flops = nonnegative("flops", *v);
    if (auto v = src.integer("workers")) {
        if (*v < 1 || *v > std::numeric_limits<std::uint32_t>::max()) {
            throw FieldError{"workers must be ≥ 1"};
        }
        r.workers = static_cast<std::uint32_t>(*v);
    }
    if (auto v = src.integer("linear_iterations")) {
        r.linear_iterations = nonnegative("linear_iterations", *v);
    }
    if (auto v = src.integer("nonlinear_iterations")) {
        r.nonlinear_iterations = nonnegative("nonlinear_iterations", *v);
    }
    r.h_size = src.real("h_size");
    r.l2_error = src.real("l2_error");
    r.alpha = src.real("alpha");
    if (auto d = src.text("discretization")) {
        auto parsed = parse_discretization(*d);
        if (!parsed) throw FieldError{"discretization must be CG1, CG2, DG1 or DG2, got '" + *d + "'"};
        r.discretization = *parsed;
    }

    std::uint32_t line_size = kDefaultLineSize;
    if (auto v = src.integer("line_size_bytes")) {
        if (*v < 1 || *v > 4096) {
            throw FieldError{"line_size must be a power of two in {32,64,128,256}"};
        }
        line_size = static_cast<std::uint32_t>(*v);
    }
    constexpr std::array<std::pair<std::string_view, CacheLevel>, 3> miss_keys{
        {{"l1_misses", CacheLevel::L1}, {"l2_misses", CacheLevel::L2}, {"l3_misses", CacheLevel::L3}}};
    for (const auto& [key, level] : miss_keys) {
        if (auto v = src.integer(key)) {
            r.cache_counters.push_back({level, nonnegative(key, *v), line_size});
        }
    }

    auto violations = validate_record(r);
    if (!violations.empty()) throw FieldError{violations.front()};
    return r;
}

/// Splits CSV text into rows of fields (RFC 4180 quoting). Each row carries the
/// 1-based physical line it starts on.
struct CsvRow {
    std::size_t line;
    std::vector<std::string> fields;
};

inline std::vector<CsvRow> split_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    std::size_t line = 1;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        CsvRow row{line, {}};
        std::string field;
        bool in_quotes = false;
        bool row_done = false;
        bool any_content = false;
        while (i < n && !row_done) {
            const char c = text[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < n && text[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                        continue;
                    }
                    in_quotes = false;
                } else {
                    if (c == '\n') ++line;
                    field.push_back(c);
                }
                ++i;
                continue;
            }
            switch (c) {
            case '"':
                if (!field.empty()) throw ParseError(line, "unexpected quote inside unquoted field");
                in_quotes = true;
                any_content = true;
                break;
            case ',':
                row.fields.push_back(std::move(field));
                field.clear();
                any_content = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                row_done = true;
                break;
            default:
                field.push_back(c);
                any_content = true;
            }
            ++i;
        }
        if (in_quotes) throw ParseError(row.line, "unterminated quoted field");
        if (!any_content) continue; // blank line
        row.fields.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void handle_bad_line(RecordDocument& doc, ParseMode mode, std::size_t line, std::string reason) {
    if (mode == ParseMode::Strict) throw ParseError(line, std::move(reason));
    doc.warnings.push_back({line, std::move(reason)});
}

} // namespace detail

/// Parses a whole document. In strict mode the first bad line throws a
/// ParseError; in lenient mode bad lines are skipped and reported as warnings.
[[nodiscard]] inline RecordDocument parse_records(std::string_view input, RecordFormat format,
                                                  ParseMode mode = ParseMode::Strict) {
    RecordDocument doc;
    doc.format = format;
    if (format == RecordFormat::JsonLines) {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= input.size()) {
            const auto end = input.find('\n', pos);
            auto line = input.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
            pos = end == std::string_view::npos ? input.size() + 1 : end + 1;
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error&) {
                detail::handle_bad_line(doc, mode, line_no, "invalid JSON");
                continue;
            }
            if (!obj.is_object()) {
                detail::handle_bad_line(doc, mode, line_no, "expected a JSON object");
                continue;
            }
            try {
                doc.records.push_back(detail::build_record(detail::JsonFieldSource(obj)));
            } catch (const detail::FieldError& e) {
                detail::handle_bad_line(doc, mode, line_no, e.reason);
            }
        }
        return doc;
    }

    const auto rows = detail::split_csv(input);
    if (rows.empty()) return doc;
    std::map<std::string, std::size_t, std::less<>> columns;
    for (std::size_t i = 0; i < rows.front().fields.size(); ++i) {
        columns.emplace(rows.front().fields[i], i);
    }
    const auto width = rows.front().fields.size();
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != width) {
            detail::handle_bad_line(doc, mode, row.line,
                                    "expected " + std::to_string(width) + " fields, got " +
                                        std::to_string(row.fields.size()));
            continue;
        }
        try {
            doc.records.push_back(detail::build_record(detail::CsvFieldSource(columns, row.fields)));
        } catch (const detail::FieldError& e) {
            detail::handle_bad_line(doc, mode, row.line, e.reason);
        }
    }
    return doc;
}

[[nodiscard]] inline RecordDocument parse_records(std::istream& in, RecordFormat format,
                                                  ParseMode mode = ParseMode::Strict) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_records(text, format, mode);
}

[[nodiscard]] inline nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json j;
    j["label"] = r.label;
    j["dofs"] = r.dofs;
    j["wall_time_s"] = r.wall_time;
    j["flops"] = r.flops;
    j["workers"] = r.workers;
    if (r.linear_iterations) j["linear_iterations"] = *r.linear_iterations;
    if (r.nonlinear_iterations) j["nonlinear_iterations"] = *r.nonlinear_iterations;
    if (r.h_size) j["h_size"] = *r.h_size;
    if (r.l2_error) j["l2_error"] = *r.l2_error;
    if (r.alpha) j["alpha"] = *r.alpha;
    j["discretization"] = std::string(to_string(r.discretization));
    if (!r.cache_counters.empty()) {
        for (const auto& c : r.cache_counters) {
            switch (c.level) {
            case CacheLevel::L1: j["l1_misses"] = c.misses; break;
            case CacheLevel::L2: j["l2_misses"] = c.misses; break;
            case CacheLevel::L3: j["l3_misses"] = c.misses; break;
            }
        }
        j["line_size_bytes"] = r.cache_counters.front().line_size;
    }
    return j;
}

/// One JSON-lines line, without the trailing newline.
[[nodiscard]] inline std::string to_json_line(const RunRecord& r) { return to_json(r).dump(); }

/// Writes records in either format. The flat schema holds a single line size,
/// so records whose levels disagree on line size cannot be written.
[[nodiscard]] inline std::string serialize_records(std::span<const RunRecord> records, RecordFormat format) {
    for (const auto& r : records) {
        for (const auto& c : r.cache_counters) {
            if (c.line_size != r.cache_counters.front().line_size) {
                throw DataError("record '" + r.label + "' mixes cache line sizes");
            }
        }
    }
    std::string out;
    if (format == RecordFormat::JsonLines) {
        for (const auto& r : records) {
            out += to_json_line(r);
            out += '\n';
        }
        return out;
    }

    for (std::size_t i = 0; i < kRecordFields.size(); ++i) {
        if (i) out += ',';
        out += kRecordFields[i];
    }
    out += '\n';
    auto opt_u = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); };
    auto opt_d = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
    for (const auto& r : records) {
        auto misses = [&r](CacheLevel level) {
            const auto* c = r.counters(level);
            return c ? std::to_string(c->misses) : std::string();
        };
        const std::array<std::string, 15> cells{
            detail::csv_escape(r.label),
            std::to_string(r.dofs),
            detail::format_double(r.wall_time),
            std::to_string(r.flops),
            std::to_string(r.workers),
            opt_u(r.linear_iterations),
            opt_u(r.nonlinear_iterations),
            opt_d(r.h_size),
            opt_d(r.l2_error),
            opt_d(r.alpha),
            std::string(to_string(r.discretization)),
            misses(CacheLevel::L1),
            misses(CacheLevel::L2),
            misses(CacheLevel::L3),
            r.cache_counters.empty() ? std::string() : std::to_string(r.cache_counters.front().line_size)};
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    }
    return out;
}

/// Reduces per-worker records of one parallel run into a single record:
/// time is the maximum, FLOPs and misses are summed, workers is the count.
[[nodiscard]] inline RunRecord merge_worker_records(std::span<const RunRecord> records) {
    if (records.empty()) throw MergeError("cannot merge an empty record list");
    const auto& first = records.front();
    RunRecord out = first;
    out.wall_time = 0.0;
    out.flops = 0;
    out.cache_counters.clear();
    out.workers = static_cast<std::uint32_t>(records.size());

    std::array<std::optional<CacheLevelCounters>, 3> levels;
    for (const auto& r : records) {
        if (r.dofs != first.dofs) throw MergeError("cannot merge records with different dofs");
        if (r.discretization != first.discretization) {
            throw MergeError("cannot merge records with different discretizations");
        }
        if (r.h_size != first.h_size) throw MergeError("cannot merge records with different h_size");
        if (r.alpha != first.alpha) throw MergeError("cannot merge records with different alpha");
        if (r.linear_iterations != first.linear_iterations ||
            r.nonlinear_iterations != first.nonlinear_iterations) {
            throw MergeError("cannot merge records with different iteration counts");
        }
        out.wall_time = std::max(out.wall_time, r.wall_time);
        out.flops += r.flops;
        if (r.label < out.label) out.label = r.label;
        if (r.l2_error && (!out.l2_error || *r.l2_error > *out.l2_error)) out.l2_error = r.l2_error;
        for (const auto& c : r.cache_counters) {
            auto& slot = levels[static_cast<std::size_t>(c.level)];
            if (!slot) {
                slot = CacheLevelCounters{c.level, 0, c.line_size};
            } else if (slot->line_size != c.line_size) {
                throw MergeError("cannot merge records with different line sizes");
            }
            slot->misses += c.misses;
        }
    }
    for (const auto& slot : levels) {
        if (slot) out.cache_counters.push_back(*slot);
    }
    return out;
}

} // namespace perfspec

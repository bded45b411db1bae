#pragma once

// Performance-spectrum reports: grouping run records into scaling series,
// the four spectrum panels as SVG, and metric tables as CSV or text.

#include "perfspec/errors.hpp"
#include "perfspec/ingest.hpp"
#include "perfspec/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace perfspec {

enum class GroupBy { Label, Discretization, Alpha, Workers };

[[nodiscard]] inline std::optional<GroupBy> parse_group_by(std::string_view s) noexcept {
    if (s == "label") return GroupBy::Label;
    if (s == "discretization") return GroupBy::Discretization;
    if (s == "alpha") return GroupBy::Alpha;
    if (s == "workers") return GroupBy::Workers;
    return std::nullopt;
}

[[nodiscard]] inline std::string group_key(const RunRecord& r, GroupBy by) {
    switch (by) {
    case GroupBy::Label: return r.label;
    case GroupBy::Discretization: return std::string(to_string(r.discretization));
    case GroupBy::Alpha: return r.alpha ? "alpha=" + detail::format_double(*r.alpha) : "alpha=?";
    case GroupBy::Workers: return "workers=" + std::to_string(r.workers);
    }
    return r.label;
}

struct SeriesSummary {
    ScalingSeries series;
    std::optional<StaticScaling> classification; // needs >= 3 points
    std::optional<HalfSlopes> slopes;
    std::optional<double> convergence_order;     // needs >= 2 points with h_size and l2_error > 0
};

struct SpectrumReport {
    GroupBy group_by{GroupBy::Label};
    std::vector<SeriesSummary> series; // ordered by series label
};

[[nodiscard]] inline SpectrumReport build_spectrum_report(std::span<const RunRecord> records,
                                                          GroupBy group_by = GroupBy::Label) {
    if (records.empty()) throw DataError("no records to report");
    std::map<std::string, std::vector<SpectrumPoint>> groups;
    for (const auto& r : records) {
        if (!(r.wall_time > 0.0)) throw DataError("record '" + r.label + "' has no positive wall time");
        groups[group_key(r, group_by)].push_back(make_spectrum_point(r));
    }
    SpectrumReport report;
    report.group_by = group_by;
    for (auto& [key, points] : groups) {
        SeriesSummary s{make_scaling_series(key, std::move(points)), {}, {}, {}};
        if (s.series.points.size() >= 3) {
            s.slopes = static_scaling_slopes(s.series);
            s.classification = classify_static_scaling(s.series);
        }
        std::vector<ErrorSample> errors;
        for (const auto& p : s.series.points) {
            if (p.record.h_size && p.record.l2_error && *p.record.l2_error > 0.0) {
                errors.push_back({*p.record.h_size, *p.record.l2_error});
            }
        }
        if (errors.size() >= 2) s.convergence_order = convergence_slope(errors);
        report.series.push_back(std::move(s));
    }
    return report;
}

// --- panels ----------------------------------------------------------------

enum class Panel { AiVsTime, StaticScaling, IterationsVsDofs, Rate2VsTime };

inline constexpr std::array<Panel, 4> kPanels{Panel::AiVsTime, Panel::StaticScaling, Panel::IterationsVsDofs,
                                              Panel::Rate2VsTime};

[[nodiscard]] constexpr std::string_view to_string(Panel p) noexcept {
    switch (p) {
    case Panel::AiVsTime: return "ai";
    case Panel::StaticScaling: return "static-scaling";
    case Panel::IterationsVsDofs: return "iterations";
    case Panel::Rate2VsTime: return "rate2";
    }
    return "?";
}

[[nodiscard]] inline std::optional<Panel> parse_panel(std::string_view s) noexcept {
    for (auto p : kPanels) {
        if (to_string(p) == s) return p;
    }
    return std::nullopt;
}

struct PanelPoint {
    double x;
    double y;
};

struct PanelLine {
    std::string name;
    std::vector<PanelPoint> points;
};

struct PanelData {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PanelLine> lines;
};

/// Values plotted in a panel, straight from the spectrum points. Series that
/// lack the panel's quantity are left out.
[[nodiscard]] inline PanelData panel_data(const SpectrumReport& report, Panel panel) {
    PanelData d;
    for (const auto& s : report.series) {
        const auto& pts = s.series.points;
        switch (panel) {
        case Panel::AiVsTime:
            for (auto level : kCacheLevels) {
                PanelLine line{s.series.label + " " + std::string(to_string(level)), {}};
                for (const auto& p : pts) {
                    const auto* li = p.level(level);
                    if (li && li->ai_per_miss) line.points.push_back({p.record.wall_time, *li->ai_per_miss});
                }
                if (!line.points.empty()) d.lines.push_back(std::move(line));
            }
            break;
        case Panel::StaticScaling: {
            PanelLine line{s.series.label, {}};
            for (const auto& p : pts) line.points.push_back({p.record.wall_time, p.rate1});
            d.lines.push_back(std::move(line));
            break;
        }
        case Panel::IterationsVsDofs: {
            PanelLine line{s.series.label, {}};
            for (const auto& p : pts) {
                if (p.record.linear_iterations) {
                    line.points.push_back({static_cast<double>(p.record.dofs),
                                           static_cast<double>(*p.record.linear_iterations)});
                }
            }
            if (!line.points.empty()) d.lines.push_back(std::move(line));
            break;
        }
        case Panel::Rate2VsTime: {
            PanelLine line{s.series.label, {}};
            for (const auto& p : pts) {
                if (p.rate2) line.points.push_back({p.record.wall_time, *p.rate2});
            }
            if (!line.points.empty()) d.lines.push_back(std::move(line));
            break;
        }
        }
    }
    switch (panel) {
    case Panel::AiVsTime:
        d.title = "Arithmetic intensity";
        d.x_label = "time (s), log scale";
        d.y_label = "FLOP per cache miss, log scale";
        break;
    case Panel::StaticScaling:
        d.title = "Static scaling";
        d.x_label = "time (s), log scale";
        d.y_label = "DOF per second, log scale";
        break;
    case Panel::IterationsVsDofs:
        d.title = "Solver iterations";
        d.x_label = "degrees of freedom, log scale";
        d.y_label = "iterations";
        break;
    case Panel::Rate2VsTime:
        d.title = "DOF per second per iteration";
        d.x_label = "time (s), log scale";
        d.y_label = "DOF per second per iteration, log scale";
        break;
    }
    return d;
}

struct SvgOptions {
    int width{720};
    int height{480};
    bool linear_y{false}; // honored by the iterations panel only
};

namespace detail {

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

/// FNV-1a, so a label keeps its color across runs and platforms.
inline std::uint32_t stable_hash(std::string_view s) noexcept {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

inline constexpr std::array<std::string_view, 10> kPalette{"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                                           "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
                                                           "#9c755f", "#bab0ac"};

inline std::string_view color_for(std::string_view label) noexcept {
    return kPalette[stable_hash(label) % kPalette.size()];
}

/// One plot axis in transformed (log10 or linear) coordinates.
struct Axis {
    bool log{true};
    double lo{0.0};
    double hi{1.0};

    [[nodiscard]] double transform(double v) const { return log ? std::log10(v) : v; }

    /// Data range padded by 5% of its span on each side.
    static Axis fit(std::span<const double> values, bool log) {
        Axis a;
        a.log = log;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (double v : values) {
            const double t = log ? std::log10(v) : v;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        double pad = 0.05 * (hi - lo);
        if (pad == 0.0) pad = log ? 0.5 : std::max(0.5, 0.05 * std::abs(lo));
        a.lo = lo - pad;
        a.hi = hi + pad;
        return a;
    }

    [[nodiscard]] std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            for (double k = std::ceil(lo); k <= hi; k += 1.0) out.push_back(k);
            if (out.size() < 2) {
                out.clear();
                for (double k = std::floor(lo); k <= hi; k += 1.0) {
                    for (double m : {1.0, 2.0, 5.0}) {
                        const double t = k + std::log10(m);
                        if (t >= lo && t <= hi) out.push_back(t);
                    }
                }
            }
            return out;
        }
        const double raw = (hi - lo) / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {2.0, 5.0, 10.0}) {
            if (step < raw) step = m * mag;
        }
        for (double t = std::ceil(lo / step) * step; t <= hi; t += step) out.push_back(t);
        return out;
    }

    [[nodiscard]] std::string tick_label(double t) const {
        return log ? fmt::format("{:g}", std::pow(10.0, t)) : fmt::format("{:g}", t);
    }
};

} // namespace detail

/// Renders one panel as a standalone SVG 1.1 document. Output depends only on
/// the report and options; numbers are written with '.' decimals whatever
/// the process locale.
[[nodiscard]] inline std::string render_svg(const SpectrumReport& report, Panel panel,
                                            const SvgOptions& options = {}) {
    auto data = panel_data(report, panel);
    if (data.lines.empty()) {
        throw DataError("panel '" + std::string(to_string(panel)) + "' has no data");
    }
    std::sort(data.lines.begin(), data.lines.end(),
              [](const PanelLine& a, const PanelLine& b) { return a.name < b.name; });

    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& l : data.lines) {
        for (const auto& p : l.points) {
            xs.push_back(p.x);
            ys.push_back(p.y);
        }
    }
    const bool linear_y = options.linear_y && panel == Panel::IterationsVsDofs;
    if (linear_y) data.y_label = "iterations";
    else if (panel == Panel::IterationsVsDofs) data.y_label = "iterations, log scale";
    const auto xa = detail::Axis::fit(xs, true);
    const auto ya = detail::Axis::fit(ys, !linear_y);

    const double w = options.width;
    const double h = options.height;
    constexpr double left = 80.0;
    constexpr double right = 190.0;
    constexpr double top = 40.0;
    constexpr double bottom = 60.0;
    const double pw = w - left - right;
    const double ph = h - top - bottom;
    auto px = [&](double v) { return left + (xa.transform(v) - xa.lo) / (xa.hi - xa.lo) * pw; };
    auto py = [&](double v) { return top + ph - (ya.transform(v) - ya.lo) / (ya.hi - ya.lo) * ph; };

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" "
                     "viewBox=\"0 0 {} {}\">\n",
                     options.width, options.height, options.width, options.height);
    s += fmt::format("<title>{}</title>\n", detail::xml_escape(data.title));
    s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", options.width,
                     options.height);
    s += fmt::format("<text x=\"{:.2f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
                     "text-anchor=\"middle\">{}</text>\n",
                     left + pw / 2, detail::xml_escape(data.title));

    // frame and ticks
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
                     "stroke=\"#000000\"/>\n",
                     left, top, pw, ph);
    s += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">\n";
    for (double t : xa.ticks()) {
        const double x = left + (t - xa.lo) / (xa.hi - xa.lo) * pw;
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#dddddd\"/>\n",
                         x, top, top + ph);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x, top + ph + 16,
                         xa.tick_label(t));
    }
    for (double t : ya.ticks()) {
        const double y = top + ph - (t - ya.lo) / (ya.hi - ya.lo) * ph;
        s += fmt::format("<line x1=\"{1:.2f}\" y1=\"{0:.2f}\" x2=\"{2:.2f}\" y2=\"{0:.2f}\" stroke=\"#dddddd\"/>\n",
                         y, left, left + pw);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", left - 6, y + 4,
                         ya.tick_label(t));
    }
    s += "</g>\n";
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
                     "text-anchor=\"middle\">{}</text>\n",
                     left + pw / 2, h - 18, detail::xml_escape(data.x_label));
    s += fmt::format("<text x=\"16\" y=\"{0:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
                     "text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.2f})\">{1}</text>\n",
                     top + ph / 2, detail::xml_escape(data.y_label));

    // data
    for (const auto& line : data.lines) {
        const auto color = detail::color_for(line.name);
        s += fmt::format("<g class=\"series\" stroke=\"{0}\" fill=\"{0}\">\n", color);
        if (line.points.size() > 1) {
            s += "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < line.points.size(); ++i) {
                if (i) s += ' ';
                s += fmt::format("{:.2f},{:.2f}", px(line.points[i].x), py(line.points[i].y));
            }
            s += "\"/>\n";
        }
        for (const auto& p : line.points) {
            s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\"/>\n", px(p.x), py(p.y));
        }
        s += "</g>\n";
    }

    // legend, lexicographic
    s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    double ly = top + 10;
    for (const auto& line : data.lines) {
        const auto color = detail::color_for(line.name);
        s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
                         left + pw + 14, ly - 9, color);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", left + pw + 30, ly,
                         detail::xml_escape(line.name));
        ly += 16;
    }
    s += "</g>\n</svg>\n";
    return s;
}

// --- tables ----------------------------------------------------------------

enum class TableFormat { Csv, Text };

/// Column names of the metrics table; the first six use the record schema so
/// the CSV form reads back through parse_records.
inline constexpr std::array<std::string_view, 12> kTableColumns{
    "label",          "dofs",           "wall_time_s",    "flops", "workers", "linear_iterations",
    "ai_per_miss_l1", "ai_per_miss_l2", "ai_per_miss_l3", "rate1", "rate2",   "rate3"};

[[nodiscard]] inline std::string render_table(const SpectrumReport& report, TableFormat format) {
    std::vector<std::array<std::string, kTableColumns.size()>> rows;
    const bool csv = format == TableFormat::Csv;
    auto real = [csv](double v, int decimals) {
        return csv ? detail::format_double(v) : fmt::format("{:.{}f}", v, decimals);
    };
    for (const auto& s : report.series) {
        for (const auto& p : s.series.points) {
            const auto& r = p.record;
            std::array<std::string, kTableColumns.size()> row;
            row[0] = csv ? detail::csv_escape(r.label) : r.label;
            row[1] = std::to_string(r.dofs);
            row[2] = csv ? detail::format_double(r.wall_time) : fmt::format("{:.6g}", r.wall_time);
            row[3] = std::to_string(r.flops);
            row[4] = std::to_string(r.workers);
            row[5] = r.linear_iterations ? std::to_string(*r.linear_iterations) : "";
            for (std::size_t l = 0; l < 3; ++l) {
                const auto* li = p.level(kCacheLevels[l]);
                row[6 + l] = (li && li->ai_per_miss) ? real(*li->ai_per_miss, 2) : "";
            }
            row[9] = real(p.rate1, 2);
            row[10] = p.rate2 ? real(*p.rate2, 2) : "";
            row[11] = real(p.rate3, 2);
            rows.push_back(std::move(row));
        }
    }

    std::string out;
    if (csv) {
        for (std::size_t c = 0; c < kTableColumns.size(); ++c) {
            if (c) out += ',';
            out += kTableColumns[c];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) out += ',';
                out += row[c];
            }
            out += '\n';
        }
        return out;
    }

    std::array<std::size_t, kTableColumns.size()> width{};
    for (std::size_t c = 0; c < width.size(); ++c) width[c] = kTableColumns[c].size();
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    auto emit = [&](auto&& cell) {
        for (std::size_t c = 0; c < width.size(); ++c) {
            if (c) out += "  ";
            // label left-aligned, numbers right-aligned
            out += c == 0 ? fmt::format("{:<{}}", cell(c), width[c]) : fmt::format("{:>{}}", cell(c), width[c]);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    };
    emit([&](std::size_t c) { return std::string(kTableColumns[c]); });
    for (const auto& row : rows) emit([&](std::size_t c) { return row[c]; });
    return out;
}

/// Per-series classification and convergence-order lines.
[[nodiscard]] inline std::string render_summary(const SpectrumReport& report) {
    std::string out;
    for (const auto& s : report.series) {
        out += fmt::format("series {}: {} point(s)", s.series.label, s.series.points.size());
        if (s.classification) {
            out += fmt::format(", static scaling {} (rate slope lower {:.2f}, upper {:.2f})",
                               to_string(*s.classification), s.slopes->lower, s.slopes->upper);
        }
        out += '\n';
        if (s.convergence_order) {
            out += fmt::format("  order ≈ {:.2f} (L2 error vs h)\n", *s.convergence_order);
        }
    }
    return out;
}

} // namespace perfspec

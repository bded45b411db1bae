// perfspec: run diffusion benchmarks, analyze run records and render
// performance-spectrum panels.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 solver non-convergence.

#include "perfspec/bench.hpp"
#include "perfspec/ingest.hpp"
#include "perfspec/report.hpp"
#include "perfspec/triad.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace perfspec;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNoConvergence = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BenchFlags {
    std::size_t n{0};
    std::vector<std::size_t> sizes;
    double alpha{0.0};
    double tol{1e-7};
    std::size_t workers{1};
    std::size_t max_iterations{10'000};
    std::string cache;
    std::string out;
    bool overwrite{false};
};

void add_solver_flags(CLI::App* cmd, BenchFlags& f) {
    cmd->add_option("--alpha", f.alpha, "Anisotropy strength of the diffusivity tensor (>= 0)")->required();
    cmd->add_option("--tol", f.tol, "Relative residual tolerance in (0, 1)")->capture_default_str();
    cmd->add_option("--workers", f.workers, "Worker threads for the solver")->capture_default_str();
    cmd->add_option("--max-iterations", f.max_iterations, "Solver iteration limit")->capture_default_str();
    cmd->add_option("--cache", f.cache,
                    "Cache model: a config file (level.name/level.size_kb/level.ways/line_size_bytes) or 'default'");
    cmd->add_option("--out", f.out, "JSON-lines file that records are appended to")->required();
    cmd->add_flag("--overwrite", f.overwrite, "Truncate the output file first");
}

BenchConfig bench_config(const BenchFlags& f, std::size_t n) {
    BenchConfig c;
    c.n = n;
    c.alpha = f.alpha;
    c.tol = f.tol;
    c.workers = f.workers;
    c.max_iterations = f.max_iterations;
    if (f.cache == "default") {
        c.cache_model = default_cache_config();
    } else if (!f.cache.empty()) {
        try {
            c.cache_model = load_cache_config(f.cache);
        } catch (const ParseError& e) {
            throw DataError(f.cache + ": " + e.what());
        }
    }
    return c;
}

std::ofstream open_output(const BenchFlags& f) {
    std::ofstream out(f.out, f.overwrite ? std::ios::trunc : std::ios::app);
    if (!out) throw DataError("cannot open '" + f.out + "' for writing");
    return out;
}

void run_and_append(const BenchConfig& config, std::ofstream& out, const std::string& path) {
    const auto result = run_benchmark_detailed(config);
    const auto& r = result.record;
    out << to_json_line(r) << '\n';
    out.flush();
    if (!out) throw DataError("failed writing to '" + path + "'");
    fmt::print("{}: n={} dofs={} iterations={} time={:.6g}s flops={} l2_error={:.4e}\n", r.label, config.n, r.dofs,
               *r.linear_iterations, r.wall_time, r.flops, *r.l2_error);
}

std::vector<RunRecord> read_records(const std::string& path, const std::string& format) {
    RecordFormat fmt = record_format_for_path(path);
    if (!format.empty()) {
        const auto parsed = parse_record_format(format);
        if (!parsed) throw UsageError("--format must be json-lines or csv");
        fmt = *parsed;
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return parse_records(in, fmt).records;
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

GroupBy group_by_flag(const std::string& s) {
    const auto g = parse_group_by(s);
    if (!g) throw UsageError("--group-by must be label, discretization, alpha or workers");
    return *g;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Performance-spectrum toolkit: benchmarks, run-record analysis and spectrum plots", "perfspec"};
    app.require_subcommand(1);

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run one diffusion benchmark and append its record");
    bench_cmd->add_option("--n", bench.n, "Mesh segments per side (h = 1/n, n >= 2)")->required();
    add_solver_flags(bench_cmd, bench);

    BenchFlags sweep;
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Static-scaling sweep: fixed workers, increasing n, one record per size");
    sweep_cmd->add_option("--n", sweep.sizes, "Comma-separated mesh sizes, e.g. 4,8,16")
        ->required()
        ->delimiter(',');
    add_solver_flags(sweep_cmd, sweep);

    std::string in_path;
    std::string format;
    std::string group = "label";
    auto* analyze_cmd = app.add_subcommand("analyze", "Print the metrics table of a record file");
    analyze_cmd->add_option("--in", in_path, "Record file")->required();
    analyze_cmd->add_option("--format", format, "json-lines or csv (default: from the file extension)");
    analyze_cmd->add_option("--group-by", group, "Series grouping: label, discretization, alpha, workers")
        ->capture_default_str();
    std::string table_format = "text";
    analyze_cmd->add_option("--table", table_format, "Table output: text or csv")->capture_default_str();

    std::string panel_name;
    std::string svg_path;
    std::string size = "720x480";
    bool linear_y = false;
    auto* report_cmd = app.add_subcommand("report", "Render one spectrum panel as SVG");
    report_cmd->add_option("--in", in_path, "Record file")->required();
    report_cmd->add_option("--panel", panel_name, "ai, static-scaling, iterations or rate2")->required();
    report_cmd->add_option("--svg", svg_path, "Output SVG file")->required();
    report_cmd->add_option("--format", format, "json-lines or csv (default: from the file extension)");
    report_cmd->add_option("--group-by", group, "Series grouping: label, discretization, alpha, workers")
        ->capture_default_str();
    report_cmd->add_option("--size", size, "Image size in pixels, WIDTHxHEIGHT")->capture_default_str();
    report_cmd->add_flag("--linear-y", linear_y, "Linear y axis on the iterations panel");

    std::size_t triad_length = 0;
    std::size_t triad_workers = 1;
    auto* triad_cmd = app.add_subcommand("triad", "STREAM-style triad bandwidth, best of 10");
    triad_cmd->add_option("--length", triad_length, "Elements per array")->required();
    triad_cmd->add_option("--workers", triad_workers, "Worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "perfspec: " << e.what() << '\n';
        return kUsage;
    }

    if (bench_cmd->parsed()) {
        const auto config = bench_config(bench, bench.n);
        validate(config);
        auto out = open_output(bench);
        run_and_append(config, out, bench.out);
    } else if (sweep_cmd->parsed()) {
        auto sizes = sweep.sizes;
        std::sort(sizes.begin(), sizes.end());
        if (std::adjacent_find(sizes.begin(), sizes.end()) != sizes.end()) {
            throw UsageError("--n lists a size twice");
        }
        std::vector<BenchConfig> configs;
        for (auto n : sizes) {
            configs.push_back(bench_config(sweep, n));
            validate(configs.back());
        }
        auto out = open_output(sweep);
        for (const auto& c : configs) run_and_append(c, out, sweep.out);
    } else if (analyze_cmd->parsed()) {
        if (table_format != "text" && table_format != "csv") throw UsageError("--table must be text or csv");
        const auto by = group_by_flag(group);
        const auto records = read_records(in_path, format);
        const auto report = build_spectrum_report(records, by);
        std::cout << render_table(report, table_format == "csv" ? TableFormat::Csv : TableFormat::Text);
        if (table_format == "text") std::cout << '\n' << render_summary(report);
    } else if (report_cmd->parsed()) {
        const auto panel = parse_panel(panel_name);
        if (!panel) throw UsageError("--panel must be ai, static-scaling, iterations or rate2");
        SvgOptions opt;
        opt.linear_y = linear_y;
        char x = 0;
        std::istringstream sz(size);
        if (!(sz >> opt.width >> x >> opt.height) || x != 'x' || !sz.eof() || opt.width < 320 || opt.height < 240) {
            throw UsageError("--size must be WIDTHxHEIGHT with at least 320x240");
        }
        const auto by = group_by_flag(group);
        const auto records = read_records(in_path, format);
        const auto svg = render_svg(build_spectrum_report(records, by), *panel, opt);
        std::ofstream out(svg_path, std::ios::trunc | std::ios::binary);
        if (!out || !(out << svg)) throw DataError("cannot write '" + svg_path + "'");
    } else if (triad_cmd->parsed()) {
        const auto r = stream_triad(triad_length, triad_workers);
        if (!r.verified) throw DataError("triad output verification failed");
        fmt::print("triad length={} workers={} best_time_s={:.6g} bandwidth_gbs={:.3f}\n", r.length, r.workers,
                   r.best_time, r.bandwidth_gbs);
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "perfspec: " << e.what() << '\n';
        return kUsage;
    } catch (const perfspec::NonConvergenceError& e) {
        std::cerr << "perfspec: " << e.what() << '\n';
        return kNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "perfspec: " << e.what() << '\n';
        return kData;
    }
}

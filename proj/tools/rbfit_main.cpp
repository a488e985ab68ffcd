// Batch front end: gen-synthetic | fit | eval | bench-blocks.
// Result lines go to stdout (stable key-value or TSV form); timings and
// warnings go to stderr so pipelines can capture results alone.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rbfit/data.hpp"
#include "rbfit/kernel.hpp"
#include "rbfit/model.hpp"
#include "rbfit/solver.hpp"

namespace {

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_ms(double seconds) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", seconds * 1e3);
    return buf;
}

struct GridShape {
    std::size_t nx = 0, ny = 0;  // ny == 0: square count form
};

GridShape parse_refs_grid(const std::string& text) {
    const auto to_count = [&](const std::string& part) {
        std::size_t value = 0;
        const auto res = std::from_chars(part.data(), part.data() + part.size(), value);
        if (res.ec != std::errc{} || res.ptr != part.data() + part.size() || value == 0)
            throw std::invalid_argument("--refs-grid: '" + text +
                                        "' is not a positive count or NXxNY shape");
        return value;
    };
    const auto sep = text.find_first_of("xX");
    if (sep == std::string::npos) return {to_count(text), 0};
    return {to_count(text.substr(0, sep)), to_count(text.substr(sep + 1))};
}

struct FitArgs {
    std::string in_path;
    std::string kernel_name = "wendland-3-1";
    double alpha = 1.0;
    std::string refs_grid;
    std::string refs_file;
    bool poly = false;
    std::size_t ram_budget = std::size_t{1} << 30;
    std::optional<std::size_t> block_size;
};

void add_fit_options(CLI::App* cmd, FitArgs& args, std::size_t& block_size_raw) {
    cmd->add_option("--in", args.in_path, "training data, x y h per line")->required();
    cmd->add_option("--kernel", args.kernel_name,
                    "kernel family: wendland-3-0 | wendland-3-1 | wendland-3-3");
    cmd->add_option("--alpha", args.alpha, "kernel shape (support radius 1/alpha)")
        ->required();
    auto* grid = cmd->add_option("--refs-grid", args.refs_grid,
                                 "reference grid over the data's bounding box: a square "
                                 "count M or a shape NXxNY");
    auto* file = cmd->add_option("--refs-file", args.refs_file,
                                 "reference coordinates from a file, x y per line");
    grid->excludes(file);
    file->excludes(grid);
    cmd->add_flag("--poly", args.poly, "border the system with a linear polynomial");
    cmd->add_option("--ram-budget", args.ram_budget,
                    "memory budget in bytes for planning the column blocks");
    cmd->add_option("--block-size", block_size_raw,
                    "fixed block size, skips budget planning");
}

struct Problem {
    rbfit::PointCloud cloud;
    std::vector<rbfit::Point2> refs;
    rbfit::KernelSpec kernel;
    rbfit::FitOptions options;
};

Problem load_problem(const FitArgs& args) {
    if (args.refs_grid.empty() && args.refs_file.empty())
        throw std::invalid_argument("one of --refs-grid or --refs-file is required");

    rbfit::PointCloud cloud = rbfit::center_cloud(rbfit::load_xyz(args.in_path));

    std::vector<rbfit::Point2> refs;
    if (!args.refs_grid.empty()) {
        const GridShape shape = parse_refs_grid(args.refs_grid);
        const rbfit::Aabb box = rbfit::bounding_box(cloud.points);
        refs = shape.ny == 0 ? rbfit::uniform_grid_refs(box, shape.nx)
                             : rbfit::uniform_grid_refs(box, shape.nx, shape.ny);
    } else {
        refs = rbfit::load_ref_points(args.refs_file);
        for (auto& r : refs) {  // reference files share the raw data frame
            r.x -= cloud.offset.x;
            r.y -= cloud.offset.y;
        }
    }

    rbfit::FitOptions options;
    options.poly = args.poly;
    options.ram_budget_bytes = args.ram_budget;
    options.block_size = args.block_size;
    return Problem{std::move(cloud), std::move(refs),
                   rbfit::KernelSpec(rbfit::kernel_from_name(args.kernel_name), args.alpha),
                   options};
}

int cmd_gen(std::size_t count, const std::string& out_path) {
    const rbfit::PointCloud cloud = rbfit::make_franke_cloud(count);
    rbfit::save_xyz(cloud, out_path);
    std::cout << "points " << cloud.size() << "\n";
    return 0;
}

int cmd_fit(const FitArgs& args, const std::string& model_path) {
    Problem p = load_problem(args);

    rbfit::FitReport report;
    const rbfit::Model model =
        rbfit::fit(p.cloud, std::move(p.refs), p.kernel, p.options, &report);
    rbfit::save_model(model, model_path);

    const rbfit::ErrorReport errors =
        rbfit::error_report(model, p.cloud, report.design_nnz);

    std::cout << "points " << p.cloud.size() << "\n"
              << "refs " << model.refs.size() << "\n"
              << "kernel " << rbfit::kernel_name(model.kernel.family()) << "\n"
              << "alpha " << fmt(model.kernel.alpha()) << "\n"
              << "block-size " << report.plan.block_size << "\n"
              << "n-blocks " << report.plan.n_blocks << "\n"
              << "design-nnz " << report.design_nnz << "\n"
              << "density-pct " << fmt(errors.density_pct.value()) << "\n"
              << "mae " << fmt(errors.mean_absolute_error) << "\n"
              << "deviation " << fmt(errors.deviation_of_error) << "\n"
              << "mean-relative-error-pct " << fmt(errors.mean_relative_error_pct) << "\n"
              << "empty-support-refs " << report.empty_support_refs.size() << "\n"
              << "ridge-lambda " << fmt(report.ridge_lambda) << "\n";

    std::cerr << "index: " << fmt_ms(report.index_seconds) << " ms\n"
              << "assembly: " << fmt_ms(report.assembly_seconds) << " ms\n"
              << "gram+solve: " << fmt_ms(report.gram_solve_seconds) << " ms\n"
              << "peak-memory: " << report.peak_bytes << " bytes\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& in_path,
             const std::string& out_path) {
    const rbfit::Model model = rbfit::load_model(model_path);
    const rbfit::EvalPoints input = rbfit::load_eval_points(in_path);

    std::cout << "points " << input.points.size() << "\n";
    if (input.has_values) {
        rbfit::PointCloud cloud{input.points, input.values, {0.0, 0.0}};
        const rbfit::ErrorReport errors = rbfit::error_report(model, cloud);
        std::vector<double> predictions(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
            predictions[i] = cloud.values[i] + errors.signed_errors[i];
        rbfit::write_signed_errors(cloud, predictions, out_path);
        std::cout << "mae " << fmt(errors.mean_absolute_error) << "\n"
                  << "deviation " << fmt(errors.deviation_of_error) << "\n"
                  << "mean-relative-error-pct " << fmt(errors.mean_relative_error_pct)
                  << "\n";
    } else {
        const std::vector<double> f = rbfit::evaluate_model(model, input.points);
        std::string text;
        for (std::size_t i = 0; i < f.size(); ++i) {
            text += fmt(input.points[i].x);
            text += ' ';
            text += fmt(input.points[i].y);
            text += ' ';
            text += fmt(f[i]);
            text += '\n';
        }
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
        out << text;
    }
    return 0;
}

int cmd_bench(const FitArgs& args, const std::vector<std::size_t>& block_sizes) {
    Problem p = load_problem(args);

    double index_seconds = 0.0;
    const std::vector<rbfit::BenchRow> rows = rbfit::bench_block_sizes(
        p.cloud, std::move(p.refs), p.kernel, p.options, block_sizes, &index_seconds);

    std::cerr << "index: " << fmt_ms(index_seconds) << " ms\n";
    std::cout << "block_size\tn_blocks\tassembly_ms\tgram_solve_ms\ttotal_ms\tmae\t"
                 "max_rel_diff\n";
    double worst = 0.0;
    for (const auto& row : rows) {
        std::cout << row.block_size << '\t' << row.n_blocks << '\t'
                  << fmt_ms(row.assembly_seconds) << '\t'
                  << fmt_ms(row.gram_solve_seconds) << '\t'
                  << fmt_ms(row.assembly_seconds + row.gram_solve_seconds) << '\t'
                  << fmt(row.mae) << '\t' << fmt(row.max_rel_diff) << '\n';
        worst = std::max(worst, row.max_rel_diff);
    }
    if (worst > 1e-10)
        throw std::runtime_error("normal system drifted across block sizes: max relative "
                                 "difference " + fmt(worst));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Out-of-core RBF surface fitting with compactly supported kernels"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-synthetic",
                                   "sample Franke's surface at Halton points");
    std::size_t gen_count = 1089;
    std::string gen_out;
    gen->add_option("-n,--count", gen_count, "number of points")
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "output file, x y h per line")->required();

    auto* fit = app.add_subcommand("fit", "fit a model to scattered data");
    FitArgs fit_args;
    std::size_t fit_block_raw = 0;
    std::string fit_model_path;
    add_fit_options(fit, fit_args, fit_block_raw);
    fit->add_option("--model", fit_model_path, "where to write the fitted model")
        ->required();

    auto* eval = app.add_subcommand("eval", "evaluate a fitted model at query points");
    std::string eval_model, eval_in, eval_out;
    eval->add_option("--model", eval_model, "fitted model file")->required();
    eval->add_option("--in", eval_in, "query points: x y, or x y h for error maps")
        ->required();
    eval->add_option("--out", eval_out, "output file")->required();

    auto* bench = app.add_subcommand(
        "bench-blocks", "compare block sizes on one fitting problem");
    FitArgs bench_args;
    std::size_t bench_block_raw = 0;
    std::vector<std::size_t> bench_sizes;
    add_fit_options(bench, bench_args, bench_block_raw);
    bench->add_option("--block-sizes", bench_sizes, "comma-separated block sizes")
        ->required()
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(gen_count, gen_out);
        if (fit->parsed()) {
            if (fit->count("--block-size")) fit_args.block_size = fit_block_raw;
            return cmd_fit(fit_args, fit_model_path);
        }
        if (eval->parsed()) return cmd_eval(eval_model, eval_in, eval_out);
        if (bench->parsed()) {
            if (bench->count("--block-size")) bench_args.block_size = bench_block_raw;
            return cmd_bench(bench_args, bench_sizes);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rbfit/data.hpp"
#include "rbfit/kernel.hpp"

namespace rbfit {

/// A fitted surface: f(x) = sum_j w_j phi(|x' - xi_j|) [+ a.x' + b.y' + c],
/// where x' = x - offset. Reference coordinates live in the translated
/// (fitting) frame; `offset` maps raw query coordinates into it.
struct Model {
    KernelSpec kernel;
    std::vector<Point2> refs;
    std::vector<double> weights;                   // one per reference point
    std::optional<std::array<double, 3>> poly;     // {a, b, c} for a*x + b*y + c
    Point2 offset{0.0, 0.0};
};

/// Line-oriented text format, version header "rbfit model 1". Doubles are
/// written with shortest round-trip formatting, so save -> load is
/// value-exact. Loading rejects unknown versions and malformed files.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// Evaluates the model at raw-frame query points (offset applied inside).
/// Builds a kd-tree over the reference points and sums, per query, the
/// weighted kernel values of the references whose support contains it -- in
/// ascending reference order, matching the assembled design matrix exactly.
/// A query outside every support (and no polynomial) evaluates to zero.
std::vector<double> evaluate_model(const Model& model, std::span<const Point2> queries);

struct ErrorReport {
    double mean_absolute_error = 0.0;
    /// Population variance of the absolute errors.
    double deviation_of_error = 0.0;
    /// 100 * MAE / mean(|h_i|); 0 when the normalizer is zero.
    double mean_relative_error_pct = 0.0;
    std::vector<double> signed_errors;      // f_i - h_i per point
    std::optional<double> density_pct;      // 100 * nnz / (N*M) when nnz given
};

/// Compares model predictions against the cloud's values. The cloud may be in
/// any translation frame: its own offset is honored, so passing the centered
/// training cloud reproduces the training residuals exactly. `design_nnz`,
/// when known, yields the design-matrix density.
ErrorReport error_report(const Model& model, const PointCloud& cloud,
                         std::optional<std::size_t> design_nnz = std::nullopt);

/// Error-map export: one "x y h f e" line per point (raw coordinates),
/// where e = f - h is the signed error.
void write_signed_errors(const PointCloud& cloud, std::span<const double> predictions,
                         const std::filesystem::path& path);

}  // namespace rbfit

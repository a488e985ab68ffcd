#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rbfit/geometry.hpp"

namespace rbfit {

/// Scattered samples (x_i, y_i) -> h_i. `offset` records a translation that
/// has already been applied to the coordinates (zero for freshly loaded data);
/// the values h are never translated.
struct PointCloud {
    std::vector<Point2> points;
    std::vector<double> values;
    Point2 offset{0.0, 0.0};

    std::size_t size() const { return points.size(); }
};

/// Van der Corput radical inverse of `index` in the given base.
double radical_inverse(unsigned base, std::uint64_t index);

/// Halton sequence in the unit cube, `dims` in {1,2,3} (bases 2, 3, 5),
/// starting from index 1. Returned flattened, point-major.
std::vector<double> halton_points(std::size_t count, int dims);

/// 2-d Halton points (bases 2 and 3), starting from index 1.
std::vector<Point2> halton_2d(std::size_t count);

/// Franke's test surface: three Gaussian bumps minus one dip on [0,1]^2.
double franke(Point2 p);

/// `count` Halton points sampled from Franke's surface.
PointCloud make_franke_cloud(std::size_t count);

/// Reads "x y h" records: whitespace- or comma-separated, '#' starts a
/// comment, blank lines are skipped. Malformed or non-finite records raise an
/// error naming the line. An input without any data record is an error.
PointCloud load_xyz(const std::filesystem::path& path);

/// Writes "x y h" lines with shortest round-trip formatting; a rerun on the
/// same cloud is byte-identical.
void save_xyz(const PointCloud& cloud, const std::filesystem::path& path);

/// Points for evaluation: rows of "x y" or uniformly "x y h".
struct EvalPoints {
    std::vector<Point2> points;
    std::vector<double> values;  // empty unless has_values
    bool has_values = false;
};
EvalPoints load_eval_points(const std::filesystem::path& path);

/// Reference coordinates: rows of "x y" (a trailing third column is ignored
/// so an XYZ dataset can serve directly as a reference set).
std::vector<Point2> load_ref_points(const std::filesystem::path& path);

/// Translates the cloud so its center of gravity lands on the origin and
/// records the subtracted mean in `offset` (accumulated if already nonzero).
PointCloud center_cloud(PointCloud cloud);

/// Boundary-inclusive uniform grid spanning the box. `count` must be a
/// perfect square; count == 1 degenerates to the box center.
std::vector<Point2> uniform_grid_refs(const Aabb& box, std::size_t count);

/// Per-axis variant for non-square counts; nx == 1 (or ny == 1) centers that
/// axis. Emits rows in y-major order, x fastest.
std::vector<Point2> uniform_grid_refs(const Aabb& box, std::size_t nx, std::size_t ny);

}  // namespace rbfit

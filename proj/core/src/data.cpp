#include "rbfit/data.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>

namespace rbfit {

namespace {

bool parse_double(std::string_view token, double& out) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool is_sep(char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r'; }

// Splits a data line into numeric fields; returns the field count, up to max.
// A '#' ends the record. Returns SIZE_MAX on a malformed/overlong field list.
std::size_t split_fields(std::string_view line, std::array<double, 4>& out) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_sep(line[i])) ++i;
        if (i >= line.size() || line[i] == '#') break;
        std::size_t j = i;
        while (j < line.size() && !is_sep(line[j]) && line[j] != '#') ++j;
        if (count >= out.size()) return static_cast<std::size_t>(-1);
        if (!parse_double(line.substr(i, j - i), out[count])) return static_cast<std::size_t>(-1);
        ++count;
        i = j;
    }
    return count;
}

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

void format_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.append(buf, ptr);
}

// Shared reader: calls sink(line_no, fields, count) for every data record.
template <typename Sink>
void for_each_record(const std::filesystem::path& path, Sink&& sink) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    std::string line;
    std::size_t line_no = 0;
    std::array<double, 4> fields{};
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t n = split_fields(line, fields);
        if (n == static_cast<std::size_t>(-1))
            line_error(path, line_no, "malformed record '" + line + "'");
        if (n == 0) continue;  // blank or comment line
        sink(line_no, fields, n);
    }
}

}  // namespace

double radical_inverse(unsigned base, std::uint64_t index) {
    if (base < 2) throw std::invalid_argument("radical inverse base must be at least 2");
    const double inv_base = 1.0 / base;
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f *= inv_base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

std::vector<double> halton_points(std::size_t count, int dims) {
    static constexpr unsigned kBases[] = {2, 3, 5};
    if (dims < 1 || dims > 3)
        throw std::invalid_argument("halton_points supports 1 to 3 dimensions");
    std::vector<double> out;
    out.reserve(count * static_cast<std::size_t>(dims));
    for (std::size_t i = 1; i <= count; ++i)  // index 0 (the origin) is skipped
        for (int d = 0; d < dims; ++d) out.push_back(radical_inverse(kBases[d], i));
    return out;
}

std::vector<Point2> halton_2d(std::size_t count) {
    std::vector<Point2> out;
    out.reserve(count);
    for (std::size_t i = 1; i <= count; ++i)
        out.push_back({radical_inverse(2, i), radical_inverse(3, i)});
    return out;
}

double franke(Point2 p) {
    const auto sq = [](double v) { return v * v; };
    const double x = p.x, y = p.y;
    const double f1 = 0.75 * std::exp(-(sq(9.0 * x - 2.0) / 4.0 + sq(9.0 * y - 2.0) / 4.0));
    const double f2 = 0.75 * std::exp(-(sq(9.0 * x + 1.0) / 49.0 + (9.0 * y + 1.0) / 10.0));
    const double f3 = 0.5 * std::exp(-(sq(9.0 * x - 7.0) / 4.0 + sq(9.0 * y - 3.0) / 4.0));
    const double f4 = 0.2 * std::exp(-(sq(9.0 * x - 4.0) + sq(9.0 * y - 7.0)));
    return f1 + f2 + f3 - f4;
}

PointCloud make_franke_cloud(std::size_t count) {
    PointCloud cloud;
    cloud.points = halton_2d(count);
    cloud.values.reserve(count);
    for (const Point2 p : cloud.points) cloud.values.push_back(franke(p));
    return cloud;
}

PointCloud load_xyz(const std::filesystem::path& path) {
    PointCloud cloud;
    for_each_record(path, [&](std::size_t line_no, const std::array<double, 4>& f,
                              std::size_t n) {
        if (n != 3)
            line_error(path, line_no,
                       "expected 3 fields (x y h), got " + std::to_string(n));
        if (!std::isfinite(f[0]) || !std::isfinite(f[1]) || !std::isfinite(f[2]))
            line_error(path, line_no, "non-finite value");
        cloud.points.push_back({f[0], f[1]});
        cloud.values.push_back(f[2]);
    });
    if (cloud.points.empty())
        throw std::runtime_error("'" + path.string() + "' contains no data records");
    return cloud;
}

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    std::string line;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        line.clear();
        format_double(line, cloud.points[i].x);
        line.push_back(' ');
        format_double(line, cloud.points[i].y);
        line.push_back(' ');
        format_double(line, cloud.values[i]);
        line.push_back('\n');
        out << line;
    }
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

EvalPoints load_eval_points(const std::filesystem::path& path) {
    EvalPoints pts;
    std::size_t arity = 0;
    for_each_record(path, [&](std::size_t line_no, const std::array<double, 4>& f,
                              std::size_t n) {
        if (n != 2 && n != 3)
            line_error(path, line_no, "expected 2 (x y) or 3 (x y h) fields");
        if (arity == 0) {
            arity = n;
            pts.has_values = (n == 3);
        } else if (n != arity) {
            line_error(path, line_no, "mixed 2- and 3-field records");
        }
        if (!std::isfinite(f[0]) || !std::isfinite(f[1]) || (n == 3 && !std::isfinite(f[2])))
            line_error(path, line_no, "non-finite value");
        pts.points.push_back({f[0], f[1]});
        if (n == 3) pts.values.push_back(f[2]);
    });
    if (pts.points.empty())
        throw std::runtime_error("'" + path.string() + "' contains no data records");
    return pts;
}

std::vector<Point2> load_ref_points(const std::filesystem::path& path) {
    std::vector<Point2> refs;
    for_each_record(path, [&](std::size_t line_no, const std::array<double, 4>& f,
                              std::size_t n) {
        if (n != 2 && n != 3)  // a third column (h) is tolerated and ignored
            line_error(path, line_no, "expected 2 (x y) fields");
        if (!std::isfinite(f[0]) || !std::isfinite(f[1]))
            line_error(path, line_no, "non-finite value");
        refs.push_back({f[0], f[1]});
    });
    if (refs.empty())
        throw std::runtime_error("'" + path.string() + "' contains no data records");
    return refs;
}

PointCloud center_cloud(PointCloud cloud) {
    if (cloud.points.empty()) throw std::invalid_argument("center_cloud: empty cloud");
    // Neumaier-compensated sums keep the recorded mean faithful on large inputs.
    double sx = 0.0, cx = 0.0, sy = 0.0, cy = 0.0;
    const auto add = [](double& sum, double& comp, double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    };
    for (const Point2 p : cloud.points) {
        add(sx, cx, p.x);
        add(sy, cy, p.y);
    }
    const double n = static_cast<double>(cloud.points.size());
    const Point2 mean{(sx + cx) / n, (sy + cy) / n};
    for (Point2& p : cloud.points) {
        p.x -= mean.x;
        p.y -= mean.y;
    }
    cloud.offset.x += mean.x;
    cloud.offset.y += mean.y;
    return cloud;
}

std::vector<Point2> uniform_grid_refs(const Aabb& box, std::size_t count) {
    if (count == 0) throw std::invalid_argument("grid reference count must be positive");
    const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(count))));
    if (k * k != count)
        throw std::invalid_argument("grid reference count " + std::to_string(count) +
                                    " is not a perfect square; give per-axis counts instead");
    return uniform_grid_refs(box, k, k);
}

std::vector<Point2> uniform_grid_refs(const Aabb& box, std::size_t nx, std::size_t ny) {
    if (nx == 0 || ny == 0) throw std::invalid_argument("grid axis counts must be positive");
    if (!(box.min.x <= box.max.x) || !(box.min.y <= box.max.y))
        throw std::invalid_argument("grid box is inverted or non-finite");
    const auto coord = [](double lo, double hi, std::size_t i, std::size_t n) {
        if (n == 1) return 0.5 * (lo + hi);
        return lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(n - 1));
    };
    std::vector<Point2> refs;
    refs.reserve(nx * ny);
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix)
            refs.push_back({coord(box.min.x, box.max.x, ix, nx),
                            coord(box.min.y, box.max.y, iy, ny)});
    return refs;
}

}  // namespace rbfit

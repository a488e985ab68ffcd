#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

namespace rbfit {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline bool finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

inline double dist2(Point2 a, Point2 b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline double dist(Point2 a, Point2 b) { return std::sqrt(dist2(a, b)); }

struct Aabb {
    Point2 min;
    Point2 max;
};

inline Aabb bounding_box(std::span<const Point2> pts) {
    if (pts.empty()) throw std::invalid_argument("bounding_box: empty point set");
    Aabb box{pts[0], pts[0]};
    for (const Point2 p : pts) {
        if (p.x < box.min.x) box.min.x = p.x;
        if (p.y < box.min.y) box.min.y = p.y;
        if (p.x > box.max.x) box.max.x = p.x;
        if (p.y > box.max.y) box.max.y = p.y;
    }
    return box;
}

}  // namespace rbfit

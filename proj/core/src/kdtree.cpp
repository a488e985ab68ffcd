#include "rbfit/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rbfit {

PointIndex::PointIndex(std::vector<Point2> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("point index requires at least one point");
    if (points_.size() > 0xffffffffull)
        throw std::invalid_argument("point index limited to 2^32-1 points");
    for (std::size_t i = 0; i < points_.size(); ++i)
        if (!finite(points_[i]))
            throw std::invalid_argument("non-finite coordinate at point index " +
                                        std::to_string(i));

    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

std::uint32_t PointIndex::build(std::uint32_t begin, std::uint32_t end, int depth) {
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    const int axis = depth & 1;
    const std::uint32_t mid = begin + (end - begin) / 2;
    // Ties broken by index so the tree is a pure function of the input order.
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ca = coord(a, axis), cb = coord(b, axis);
                         return ca < cb || (ca == cb && a < b);
                     });
    const double split = coord(order_[mid], axis);
    const std::uint32_t left = build(begin, mid, depth + 1);
    const std::uint32_t right = build(mid, end, depth + 1);
    nodes_[id].split = split;
    nodes_[id].axis = static_cast<std::uint8_t>(axis);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<PointIndex::Neighbor> PointIndex::radius_query(Point2 center, double radius) const {
    std::vector<Neighbor> out;
    radius_query(center, radius, out);
    return out;
}

void PointIndex::radius_query(Point2 center, double radius,
                              std::vector<Neighbor>& out) const {
    out.clear();
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("radius query requires a positive finite radius");
    if (!finite(center)) throw std::invalid_argument("radius query center must be finite");

    const double r2 = radius * radius;
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = root_;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (node.left == kNone) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t p = order_[i];
                const double d2 = dist2(points_[p], center);
                if (d2 < r2) out.push_back({p, std::sqrt(d2)});
            }
            continue;
        }
        // Children hold coords <= split (left) and >= split (right); a side
        // whose closest possible axis distance reaches the radius can be
        // skipped outright (the query is strict).
        const double d = (node.axis == 0 ? center.x : center.y) - node.split;
        if (d < radius) stack[top++] = node.left;
        if (-d < radius) stack[top++] = node.right;
    }
    std::sort(out.begin(), out.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
}

}  // namespace rbfit

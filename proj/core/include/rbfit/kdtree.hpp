#pragma once

#include <cstdint>
#include <vector>

#include "rbfit/geometry.hpp"

namespace rbfit {

/// Static 2-d kd-tree over a point set, median split with axis cycling.
/// Immutable once built; concurrent queries from multiple threads are safe.
class PointIndex {
  public:
    struct Neighbor {
        std::uint32_t index;  // original point index
        double distance;      // Euclidean distance to the query center
    };

    /// Takes ownership of the points (original order is kept and all query
    /// results refer to it). Throws on an empty set or non-finite coordinates.
    explicit PointIndex(std::vector<Point2> points);

    std::size_t size() const { return points_.size(); }
    const std::vector<Point2>& points() const { return points_; }

    /// All points strictly closer than `radius` to `center`, sorted by
    /// ascending original index. `radius` must be positive and finite.
    std::vector<Neighbor> radius_query(Point2 center, double radius) const;

    /// Same, reusing the caller's buffer (cleared first) - for hot loops.
    void radius_query(Point2 center, double radius, std::vector<Neighbor>& out) const;

  private:
    static constexpr std::uint32_t kNone = 0xffffffffu;
    static constexpr std::uint32_t kLeafSize = 16;

    struct Node {
        double split = 0.0;
        std::uint32_t left = kNone;
        std::uint32_t right = kNone;
        std::uint32_t begin = 0;  // leaf payload range in order_
        std::uint32_t end = 0;
        std::uint8_t axis = 0;
    };

    double coord(std::uint32_t i, int axis) const {
        return axis == 0 ? points_[i].x : points_[i].y;
    }
    std::uint32_t build(std::uint32_t begin, std::uint32_t end, int depth);

    std::vector<Point2> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::uint32_t root_ = 0;
};

}  // namespace rbfit

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbfit/geometry.hpp"
#include "rbfit/kdtree.hpp"

using rbfit::Point2;
using rbfit::PointIndex;

TEST_CASE("radius query on a small line of points") {
    const PointIndex index({{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}});
    const auto hits = index.radius_query({1.1, 0.0}, 1.2);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].index == 0);
    CHECK(hits[1].index == 1);
    CHECK(hits[2].index == 2);
    CHECK(hits[0].distance == doctest::Approx(1.1));
    CHECK(hits[1].distance == doctest::Approx(0.1));
    CHECK(hits[2].distance == doctest::Approx(0.9));
}

TEST_CASE("radius query boundary is strict") {
    // (3,4) sits exactly at distance 5: not strictly inside radius 5.
    const PointIndex index({{0.0, 0.0}, {3.0, 4.0}});
    const auto at5 = index.radius_query({0.0, 0.0}, 5.0);
    REQUIRE(at5.size() == 1);
    CHECK(at5[0].index == 0);
    CHECK(at5[0].distance == 0.0);

    const auto just_over = index.radius_query({0.0, 0.0}, std::nextafter(5.0, 6.0));
    CHECK(just_over.size() == 2);
}

TEST_CASE("point index validates its inputs") {
    CHECK_THROWS_AS(PointIndex({}), std::invalid_argument);
    try {
        PointIndex({{0.0, 0.0}, {std::nan(""), 1.0}});
        CHECK_MESSAGE(false, "non-finite point must throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    }

    const PointIndex index({{0.0, 0.0}});
    CHECK_THROWS_AS(index.radius_query({0.0, 0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(index.radius_query({0.0, 0.0}, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(index.radius_query({0.0, 0.0}, std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(index.radius_query({std::nan(""), 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("radius query matches a linear scan on random clouds") {
    std::mt19937 rng(20240917);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    for (const std::size_t n : {1u, 2u, 17u, 300u, 2000u}) {
        std::vector<Point2> pts(n);
        for (auto& p : pts) p = {uni(rng), uni(rng)};
        const PointIndex index(pts);

        for (int q = 0; q < 50; ++q) {
            const Point2 center{uni(rng) * 1.2 - 0.1, uni(rng) * 1.2 - 0.1};
            const double radius = 0.02 + 0.3 * uni(rng);
            const double r2 = radius * radius;

            std::vector<PointIndex::Neighbor> expect;
            for (std::size_t i = 0; i < n; ++i) {
                const double d2 = rbfit::dist2(pts[i], center);
                if (d2 < r2)
                    expect.push_back({static_cast<std::uint32_t>(i), std::sqrt(d2)});
            }

            const auto got = index.radius_query(center, radius);
            REQUIRE(got.size() == expect.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].index == expect[i].index);
                // same dist2 + sqrt on both sides: identical to the bit
                CHECK(got[i].distance == expect[i].distance);
            }
        }
    }
}

TEST_CASE("radius query results come back in ascending point order") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Point2> pts(500);
    for (auto& p : pts) p = {uni(rng), uni(rng)};
    const PointIndex index(pts);

    std::vector<PointIndex::Neighbor> hits;
    for (int q = 0; q < 20; ++q) {
        index.radius_query({uni(rng), uni(rng)}, 0.4, hits);
        CHECK(std::is_sorted(hits.begin(), hits.end(),
                             [](const auto& a, const auto& b) { return a.index < b.index; }));
    }
}

TEST_CASE("duplicate points are all reported") {
    const PointIndex index({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {2.0, 2.0}});
    const auto hits = index.radius_query({0.5, 0.5}, 0.1);
    REQUIRE(hits.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(hits[i].index == i);
        CHECK(hits[i].distance == 0.0);
    }
}

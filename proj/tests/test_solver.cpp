#include <doctest.h>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "rbfit/data.hpp"
#include "rbfit/model.hpp"
#include "rbfit/solver.hpp"

using rbfit::BlockPlan;
using rbfit::BuildStats;
using rbfit::KernelFamily;
using rbfit::KernelSpec;
using rbfit::NormalSystem;
using rbfit::Point2;
using rbfit::PointCloud;

namespace {

BlockPlan plan_for(std::size_t m, std::size_t mb) {
    return BlockPlan{m, mb, (m + mb - 1) / mb, std::size_t{1} << 30, 8, false};
}

PointCloud random_cloud(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    PointCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        cloud.points.push_back({uni(rng), uni(rng)});
        cloud.values.push_back(2.0 * uni(rng) - 1.0);
    }
    return cloud;
}

// Straightforward dense construction of the same normal system, used as the
// oracle for the blocked path.
NormalSystem dense_oracle(const PointCloud& cloud, std::span<const Point2> refs,
                          const KernelSpec& kernel, bool poly) {
    const std::size_t n = cloud.size();
    const std::size_t m = refs.size();
    const std::size_t side = m + (poly ? 3 : 0);

    std::vector<double> a(n * side, 0.0);  // row-major [A | P]
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d2 = rbfit::dist2(cloud.points[i], refs[j]);
            const double r = kernel.support_radius();
            if (d2 < r * r) a[i * side + j] = kernel.evaluate(std::sqrt(d2));
        }
        if (poly) {
            a[i * side + m + 0] = cloud.points[i].x;
            a[i * side + m + 1] = cloud.points[i].y;
            a[i * side + m + 2] = 1.0;
        }
    }

    NormalSystem sys;
    sys.side = side;
    sys.poly = poly;
    sys.b.assign(side * side, 0.0);
    sys.rhs.assign(side, 0.0);
    for (std::size_t p = 0; p < side; ++p) {
        for (std::size_t q = 0; q < side; ++q) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += a[i * side + p] * a[i * side + q];
            sys.b[p * side + q] = s;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i * side + p] * cloud.values[i];
        sys.rhs[p] = s;
    }
    return sys;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double scale = 0.0;
    for (const double v : a) scale = std::max(scale, std::abs(v));
    scale = std::max(scale, 1e-300);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    return worst;
}

}  // namespace

TEST_CASE("dense-mode block planning") {
    // 10^6 points, 10^4 references, 8 GB budget, 8-byte scalars.
    const BlockPlan plan = rbfit::choose_block_size(1000000, 10000, 8000000000ULL, 8);
    CHECK(plan.block_size == 449);
    CHECK(plan.n_blocks == 23);
    CHECK_FALSE(plan.sparse_mode);

    // Roomy budget caps the block at the full column range.
    const BlockPlan roomy = rbfit::choose_block_size(1000, 50, std::size_t{1} << 30, 8);
    CHECK(roomy.block_size == 50);
    CHECK(roomy.n_blocks == 1);

    // The normal matrix alone exhausting the budget is an error...
    CHECK_THROWS_AS(rbfit::choose_block_size(1000, 100, 100 * 100 * 8, 8),
                    std::invalid_argument);
    // ...and so is having no room for even one design column.
    CHECK_THROWS_AS(rbfit::choose_block_size(100, 10, 10 * 10 * 8 + 1, 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(rbfit::choose_block_size(0, 10, 1 << 20, 8), std::invalid_argument);
    CHECK_THROWS_AS(rbfit::choose_block_size(10, 0, 1 << 20, 8), std::invalid_argument);
}

TEST_CASE("sparse-mode planning uses the sampled support population") {
    // (M^2 + 2*ceil(M_B*5)) * 8 < budget; with M_B = M = 100 that needs
    // 88000 bytes, so 88001 just fits and 88000 does not.
    const BlockPlan fits = rbfit::choose_block_size(10000, 100, 88001, 8, 5.0);
    CHECK(fits.sparse_mode);
    CHECK(fits.block_size == 100);
    CHECK(fits.n_blocks == 1);

    const BlockPlan tight = rbfit::choose_block_size(10000, 100, 88000, 8, 5.0);
    CHECK(tight.block_size == 99);

    CHECK_THROWS_AS(rbfit::choose_block_size(10000, 100, 80001, 8,
                                             std::nan("")),
                    std::invalid_argument);
}

TEST_CASE("support population estimate counts actual neighbours") {
    const PointCloud cloud = random_cloud(500, 11);
    const rbfit::PointIndex index(cloud.points);
    const std::vector<Point2> refs{{0.5, 0.5}};
    const KernelSpec kernel(KernelFamily::wendland_3_0, 2.0);  // radius 0.5
    const double est = rbfit::estimate_nnz_per_ref(index, refs, kernel);
    CHECK(est == static_cast<double>(index.radius_query({0.5, 0.5}, 0.5).size()));
}

TEST_CASE("smallest normal system by hand") {
    // Three points on a line, one reference in the middle, support radius 2:
    // design column (0.25, 1, 0.25), values all one.
    PointCloud cloud;
    cloud.points = {{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
    cloud.values = {1.0, 1.0, 1.0};
    const std::vector<Point2> refs{{1.0, 0.0}};
    const KernelSpec kernel(KernelFamily::wendland_3_0, 0.5);

    NormalSystem sys =
        rbfit::build_normal_system(cloud, refs, kernel, plan_for(1, 1), false);
    REQUIRE(sys.side == 1);
    CHECK(sys.b[0] == 1.125);
    CHECK(sys.rhs[0] == 1.5);
    CHECK(sys.empty_support_refs.empty());

    const rbfit::Weights w = rbfit::solve_weights(sys);
    REQUIRE(w.c.size() == 1);
    CHECK(w.c[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK_FALSE(w.poly.has_value());
}

TEST_CASE("every block pair re-assembles its sub-matrix") {
    const PointCloud cloud = random_cloud(200, 3);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 16);
    const KernelSpec kernel(KernelFamily::wendland_3_1, 1.0);

    BuildStats stats{};
    rbfit::build_normal_system(cloud, refs, kernel, plan_for(16, 4), false, &stats);
    // 4 blocks: diagonal pass assembles each once, plus one assembly per
    // ordered pair (k, l>k) -> 4 + 6 = 10.
    CHECK(stats.blocks_assembled == 10);
    CHECK(stats.design_nnz > 0);
    CHECK(stats.peak_bytes > 0);
}

TEST_CASE("blocked build matches the dense oracle") {
    for (const bool poly : {false, true}) {
        const PointCloud cloud = random_cloud(150, poly ? 21 : 20);
        const std::vector<Point2> refs =
            rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 9);
        const KernelSpec kernel(KernelFamily::wendland_3_3, 1.5);

        const NormalSystem oracle = dense_oracle(cloud, refs, kernel, poly);
        const NormalSystem sys =
            rbfit::build_normal_system(cloud, refs, kernel, plan_for(9, 4), poly);
        REQUIRE(sys.side == oracle.side);
        CHECK(max_rel_diff(sys.b, oracle.b) < 1e-13);
        CHECK(max_rel_diff(sys.rhs, oracle.rhs) < 1e-13);
    }
}

TEST_CASE("the assembled system does not depend on the block size") {
    const PointCloud cloud = random_cloud(300, 40);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 25);
    const KernelSpec kernel(KernelFamily::wendland_3_1, 2.0);

    for (const bool poly : {false, true}) {
        const NormalSystem first =
            rbfit::build_normal_system(cloud, refs, kernel, plan_for(25, 25), poly);
        for (const std::size_t mb : {1ul, 2ul, 7ul, 12ul, 24ul}) {
            const NormalSystem other =
                rbfit::build_normal_system(cloud, refs, kernel, plan_for(25, mb), poly);
            CHECK(other.b == first.b);      // identical to the bit
            CHECK(other.rhs == first.rhs);  // identical to the bit
        }
    }
}

TEST_CASE("normal matrix is positive semidefinite and symmetric") {
    const PointCloud cloud = random_cloud(120, 77);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 16);
    const KernelSpec kernel(KernelFamily::wendland_3_0, 1.2);

    const NormalSystem sys =
        rbfit::build_normal_system(cloud, refs, kernel, plan_for(16, 5), true);
    const auto side = static_cast<Eigen::Index>(sys.side);
    const Eigen::Map<const Eigen::MatrixXd> b(sys.b.data(), side, side);
    CHECK((b - b.transpose()).cwiseAbs().maxCoeff() == 0.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    REQUIRE(es.info() == Eigen::Success);
    CHECK(es.eigenvalues().minCoeff() > -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
}

TEST_CASE("solved weights minimize the squared residual") {
    const PointCloud cloud = random_cloud(80, 8);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 9);
    const KernelSpec kernel(KernelFamily::wendland_3_1, 1.0);

    const NormalSystem sys =
        rbfit::build_normal_system(cloud, refs, kernel, plan_for(9, 9), false);
    const rbfit::Weights w = rbfit::solve_weights(sys);

    const auto residual2 = [&](const std::vector<double>& c) {
        double total = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            double f = 0.0;
            for (std::size_t j = 0; j < refs.size(); ++j) {
                const double r = rbfit::dist(cloud.points[i], refs[j]);
                f += c[j] * kernel.evaluate(r);
            }
            const double e = f - cloud.values[i];
            total += e * e;
        }
        return total;
    };

    const double best = residual2(w.c);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> perturbed = w.c;
        for (auto& v : perturbed) v += 1e-3 * uni(rng);
        CHECK(residual2(perturbed) >= best - 1e-9 * (1.0 + best));
    }
}

TEST_CASE("references with empty support are reported and solved to zero") {
    PointCloud cloud = random_cloud(60, 5);
    std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 4);
    refs.push_back({50.0, 50.0});  // far outside every support
    const KernelSpec kernel(KernelFamily::wendland_3_0, 1.0);

    const NormalSystem sys =
        rbfit::build_normal_system(cloud, refs, kernel, plan_for(5, 2), false);
    REQUIRE(sys.empty_support_refs.size() == 1);
    CHECK(sys.empty_support_refs[0] == 4);

    rbfit::SolveDiag diag{};
    const rbfit::Weights w = rbfit::solve_weights(sys, &diag);
    CHECK(diag.ridge_lambda > 0.0);  // plain factorization must have failed
    CHECK(std::abs(w.c[4]) < 1e-8);  // the dead reference gets no weight
}

TEST_CASE("a flat-kernel fit escapes the ridge bias through the orthogonal re-pass") {
    // A very wide wendland-3-3 makes cond(A)^2 overflow double precision: the
    // plain factorization fails and the ridge rungs would shrink the large
    // near-cancelling weights this surface needs. The fit must land on the
    // true least-squares solution instead (checked against a dense QR solve
    // of the same design matrix) and say so in the diagnostics.
    const PointCloud cloud = rbfit::make_franke_cloud(9000);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::Aabb{{0.0, 0.0}, {1.0, 1.0}}, 81);
    const KernelSpec kernel(KernelFamily::wendland_3_3, 0.25);

    rbfit::FitReport report;
    const rbfit::Model model = rbfit::fit(cloud, refs, kernel, {}, &report);
    CHECK(report.ridge_lambda == 0.0);
    REQUIRE(!report.warnings.empty());
    CHECK(report.warnings[0].find("re-pass") != std::string::npos);

    Eigen::MatrixXd a(cloud.size(), refs.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (std::size_t j = 0; j < refs.size(); ++j)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                kernel.evaluate(rbfit::dist(cloud.points[i], refs[j]));
    const Eigen::VectorXd h =
        Eigen::Map<const Eigen::VectorXd>(cloud.values.data(), cloud.size());
    const Eigen::VectorXd c_qr = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(a).solve(h);
    const double mae_qr = (a * c_qr - h).cwiseAbs().mean();

    const double mae_fit = rbfit::error_report(model, cloud).mean_absolute_error;
    CHECK(mae_fit == doctest::Approx(mae_qr).epsilon(0.02));
    CHECK(mae_fit < 2.0 * mae_qr);  // the ridge solution would be ~10x worse
}

TEST_CASE("a hopeless system names the failing pivot") {
    NormalSystem sys;
    sys.side = 2;
    sys.b = {0.0, 0.0, 0.0, 0.0};
    sys.rhs = {1.0, 1.0};
    try {
        rbfit::solve_weights(sys);
        CHECK_MESSAGE(false, "zero matrix must not factorize");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("pivot") != std::string::npos);
        CHECK(std::string(e.what()).find("0") != std::string::npos);
    }
}

TEST_CASE("memory accounting stays under the planned budget") {
    // A deliberately small budget forces several blocks; the recorded peak
    // must stay below both the planning bound (M^2 + 2*M_B*N)*prec and the
    // budget itself.
    const std::size_t n = 20000, m = 400;
    const std::size_t budget = 44000000;
    PointCloud cloud;
    cloud.points = rbfit::halton_2d(n);
    cloud.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) cloud.values[i] = rbfit::franke(cloud.points[i]);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::Aabb{{0.0, 0.0}, {1.0, 1.0}}, m);
    const KernelSpec kernel(KernelFamily::wendland_3_1, 10.0);

    const BlockPlan plan = rbfit::choose_block_size(n, m, budget, 8);
    CHECK(plan.block_size == 133);
    REQUIRE(plan.n_blocks >= 3);

    BuildStats stats{};
    rbfit::build_normal_system(cloud, refs, kernel, plan, false, &stats);
    const std::size_t bound = (m * m + 2 * plan.block_size * n) * 8;
    CHECK(stats.peak_bytes < bound);
    CHECK(stats.peak_bytes < budget);
}

TEST_CASE("fit handles the degenerate one-point problem") {
    PointCloud cloud;
    cloud.points = {{0.0, 0.0}};
    cloud.values = {5.0};
    const KernelSpec kernel(KernelFamily::wendland_3_0, 1.0);

    rbfit::FitReport report;
    const rbfit::Model model = rbfit::fit(cloud, {{0.0, 0.0}}, kernel, {}, &report);
    REQUIRE(model.weights.size() == 1);
    CHECK(model.weights[0] == 5.0);
    CHECK(report.plan.n_blocks == 1);

    const auto f = rbfit::evaluate_model(model, std::vector<Point2>{{0.0, 0.0}});
    CHECK(f[0] == 5.0);
}

TEST_CASE("fit warns when the system is underdetermined") {
    PointCloud cloud;
    cloud.points = {{0.1, 0.1}, {0.9, 0.9}};
    cloud.values = {1.0, 2.0};
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::Aabb{{0.0, 0.0}, {1.0, 1.0}}, 4);

    rbfit::FitReport report;
    rbfit::fit(cloud, refs, KernelSpec(KernelFamily::wendland_3_0, 0.5), {}, &report);
    REQUIRE(!report.warnings.empty());
    CHECK(report.warnings[0].find("underdetermined") != std::string::npos);
}

TEST_CASE("fit respects an explicit block size override") {
    const PointCloud cloud = random_cloud(100, 60);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 9);
    rbfit::FitOptions options;
    options.block_size = 4;

    rbfit::FitReport report;
    rbfit::fit(cloud, refs, KernelSpec(KernelFamily::wendland_3_1, 1.0), options, &report);
    CHECK(report.plan.block_size == 4);
    CHECK(report.plan.n_blocks == 3);
}

TEST_CASE("block-size sweep reports invariant systems") {
    const PointCloud cloud = random_cloud(400, 90);
    const std::vector<Point2> refs =
        rbfit::uniform_grid_refs(rbfit::bounding_box(cloud.points), 16);
    const std::vector<std::size_t> sizes{4, 8, 16};

    double index_seconds = -1.0;
    const auto rows = rbfit::bench_block_sizes(
        cloud, refs, KernelSpec(KernelFamily::wendland_3_1, 1.5), {}, sizes,
        &index_seconds);
    REQUIRE(rows.size() == 3);
    CHECK(index_seconds >= 0.0);
    for (const auto& row : rows) {
        CHECK(row.max_rel_diff == 0.0);  // bitwise block invariance
        CHECK(row.mae == rows[0].mae);
    }
    CHECK(rows[0].block_size == 4);
    CHECK(rows[0].n_blocks == 4);
    CHECK(rows[2].n_blocks == 1);
}

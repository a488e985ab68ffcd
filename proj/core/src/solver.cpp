#include "rbfit/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "rbfit/memory.hpp"

namespace rbfit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::size_t kPolyTerms = 3;  // x, y, 1

using u128 = unsigned __int128;

void validate_plan_inputs(std::size_t n_points, std::size_t m_refs, std::size_t ram_budget,
                          std::size_t prec) {
    if (n_points == 0) throw std::invalid_argument("block plan: point count must be positive");
    if (m_refs == 0)
        throw std::invalid_argument("block plan: reference count must be positive");
    if (prec == 0) throw std::invalid_argument("block plan: precision bytes must be positive");
    const u128 b_bytes = u128(m_refs) * m_refs * prec;
    if (u128(ram_budget) <= b_bytes)
        throw std::invalid_argument(
            "ram budget of " + std::to_string(ram_budget) +
            " bytes cannot hold the " + std::to_string(m_refs) + "x" + std::to_string(m_refs) +
            " normal matrix; reduce the number of reference points or raise the budget");
}

BlockPlan finish_plan(std::size_t m_refs, std::size_t mb, std::size_t ram_budget,
                      std::size_t prec, bool sparse_mode) {
    if (mb == 0)
        throw std::invalid_argument(
            "ram budget cannot hold a single design-matrix block column next to the normal "
            "matrix; raise the budget");
    mb = std::min(mb, m_refs);
    return BlockPlan{m_refs, mb, (m_refs + mb - 1) / mb, ram_budget, prec, sparse_mode};
}

// First non-positive pivot of a plain scalar Cholesky, for the error message
// when every ridge attempt failed. Runs on the last (most shifted) matrix.
std::size_t first_bad_pivot(const Eigen::MatrixXd& a) {
    const auto side = a.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(side, side);
    for (Eigen::Index j = 0; j < side; ++j) {
        double d = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) return static_cast<std::size_t>(j);
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < side; ++i) {
            double s = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return static_cast<std::size_t>(side);  // no bad pivot found
}

}  // namespace

BlockPlan choose_block_size(std::size_t n_points, std::size_t m_refs,
                            std::size_t ram_budget_bytes, std::size_t prec_bytes) {
    validate_plan_inputs(n_points, m_refs, ram_budget_bytes, prec_bytes);
    // Largest M_B with (M^2 + 2*M_B*N) * prec < budget.
    const u128 headroom = u128(ram_budget_bytes) - u128(m_refs) * m_refs * prec_bytes;
    const u128 mb = (headroom - 1) / (u128(2) * n_points * prec_bytes);
    const std::size_t capped =
        mb > u128(m_refs) ? m_refs : static_cast<std::size_t>(mb);
    return finish_plan(m_refs, capped, ram_budget_bytes, prec_bytes, false);
}

BlockPlan choose_block_size(std::size_t n_points, std::size_t m_refs,
                            std::size_t ram_budget_bytes, std::size_t prec_bytes,
                            double nnz_per_ref) {
    validate_plan_inputs(n_points, m_refs, ram_budget_bytes, prec_bytes);
    if (!(nnz_per_ref >= 0.0) || !std::isfinite(nnz_per_ref))
        throw std::invalid_argument("block plan: nnz-per-reference estimate must be finite");
    if (nnz_per_ref == 0.0)  // empty design: any partition fits
        return finish_plan(m_refs, m_refs, ram_budget_bytes, prec_bytes, true);

    // Largest M_B with (M^2 + 2*ceil(M_B*nnz_per_ref)) * prec < budget.
    const double headroom_entries =
        (static_cast<double>(ram_budget_bytes) -
         static_cast<double>(u128(m_refs) * m_refs * prec_bytes)) /
        static_cast<double>(prec_bytes);
    std::size_t mb = static_cast<std::size_t>(
        std::max(0.0, std::floor(headroom_entries / (2.0 * nnz_per_ref))));
    mb = std::min(mb, m_refs);
    const auto fits = [&](std::size_t cand) {
        const u128 block_nnz =
            static_cast<u128>(std::ceil(static_cast<double>(cand) * nnz_per_ref));
        const u128 total =
            (u128(m_refs) * m_refs + u128(2) * block_nnz) * prec_bytes;
        return total < u128(ram_budget_bytes);
    };
    while (mb > 0 && !fits(mb)) --mb;
    return finish_plan(m_refs, mb, ram_budget_bytes, prec_bytes, true);
}

double estimate_nnz_per_ref(const PointIndex& index, std::span<const Point2> refs,
                            const KernelSpec& kernel) {
    if (refs.empty())
        throw std::invalid_argument("estimate_nnz_per_ref: empty reference set");
    const std::size_t sample = std::min<std::size_t>(refs.size(), 256);
    const double radius = kernel.support_radius();
    std::vector<PointIndex::Neighbor> hits;
    std::size_t total = 0;
    for (std::size_t s = 0; s < sample; ++s) {
        const std::size_t j = s * refs.size() / sample;  // deterministic stride
        index.radius_query(refs[j], radius, hits);
        total += hits.size();
    }
    return static_cast<double>(total) / static_cast<double>(sample);
}

NormalSystem build_normal_system(const PointIndex& index, std::span<const double> values,
                                 std::span<const Point2> refs, const KernelSpec& kernel,
                                 const BlockPlan& plan, bool poly, BuildStats* stats) {
    const std::size_t n = index.size();
    if (values.size() != n)
        throw std::invalid_argument("build_normal_system: value count does not match points");
    const std::size_t m = refs.size();
    if (m == 0) throw std::invalid_argument("build_normal_system: no reference points");
    if (plan.m_total != m)
        throw std::invalid_argument(
            "build_normal_system: plan was made for a different reference count");
    if (plan.block_size == 0 || plan.block_size > m || plan.n_blocks == 0)
        throw std::invalid_argument("build_normal_system: malformed block plan");

    const std::size_t side = m + (poly ? kPolyTerms : 0);
    const auto& pts = index.points();

    MemoryAccountant acct;
    BuildStats local{};

    NormalSystem sys;
    sys.side = side;
    sys.poly = poly;
    sys.b.assign(side * side, 0.0);
    sys.rhs.assign(side, 0.0);
    acct.charge((sys.b.size() + sys.rhs.size()) * sizeof(double));

    std::vector<std::uint32_t> ref_nnz(m, 0);
    acct.charge(ref_nnz.size() * sizeof(std::uint32_t));

    const std::size_t nb = plan.n_blocks;
    const auto block_begin = [&](std::size_t blk) { return blk * plan.block_size; };
    const auto block_width = [&](std::size_t blk) {
        return std::min(plan.block_size, m - block_begin(blk));
    };

    const auto assemble_block = [&](std::size_t blk) {
        const auto t0 = Clock::now();
        CooMatrix a =
            assemble_submatrix(index, refs.subspan(block_begin(blk), block_width(blk)), kernel);
        local.assembly_seconds += seconds_since(t0);
        ++local.blocks_assembled;
        acct.charge(a.storage_bytes());
        return a;
    };

    for (std::size_t k = 0; k < nb; ++k) {
        const std::size_t kb = block_begin(k);
        const std::size_t wk = block_width(k);
        const CooMatrix ak = assemble_block(k);
        local.design_nnz += ak.nnz();
        for (const std::uint32_t c : ak.cols()) ++ref_nnz[kb + c];

        auto tg = Clock::now();
        {  // rhs slice: (A_k)^T h
            const std::vector<double> rk = ak.transpose_matvec(values);
            for (std::size_t i = 0; i < wk; ++i) sys.rhs[kb + i] = rk[i];
        }
        if (poly) {  // (A_k)^T P border, streamed in stored triplet order
            std::vector<double> atp(wk * kPolyTerms, 0.0);
            const auto arow = ak.rows();
            const auto acol = ak.cols();
            const auto aval = ak.values();
            for (std::size_t i = 0; i < aval.size(); ++i) {
                const Point2 p = pts[arow[i]];
                double* slot = &atp[acol[i] * kPolyTerms];
                slot[0] += aval[i] * p.x;
                slot[1] += aval[i] * p.y;
                slot[2] += aval[i];
            }
            for (std::size_t i = 0; i < wk; ++i)
                for (std::size_t q = 0; q < kPolyTerms; ++q) {
                    const double v = atp[i * kPolyTerms + q];
                    sys.b[(kb + i) * side + (m + q)] = v;
                    sys.b[(m + q) * side + (kb + i)] = v;
                }
        }

        const CooRowView view(ak);
        acct.charge(view.storage_bytes());
        {  // diagonal block B_kk
            const DenseBlock bkk = gram_self(view);
            for (std::size_t i = 0; i < wk; ++i)
                for (std::size_t j = 0; j < wk; ++j)
                    sys.b[(kb + i) * side + (kb + j)] = bkk.at(i, j);
        }
        local.gram_seconds += seconds_since(tg);

        for (std::size_t l = k + 1; l < nb; ++l) {
            const std::size_t lb = block_begin(l);
            const std::size_t wl = block_width(l);
            const CooMatrix al = assemble_block(l);
            tg = Clock::now();
            const DenseBlock bkl = gram_product(view, al);
            for (std::size_t i = 0; i < wk; ++i)
                for (std::size_t j = 0; j < wl; ++j) {
                    const double v = bkl.at(i, j);
                    sys.b[(kb + i) * side + (lb + j)] = v;
                    sys.b[(lb + j) * side + (kb + i)] = v;  // exact mirror
                }
            local.gram_seconds += seconds_since(tg);
            acct.release(al.storage_bytes());
        }
        acct.release(view.storage_bytes());
        acct.release(ak.storage_bytes());
    }

    if (poly) {  // P^T P and P^T h in one pass over the points
        const auto tg = Clock::now();
        double sxx = 0, sxy = 0, sx = 0, syy = 0, sy = 0;
        double phx = 0, phy = 0, ph1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = pts[i].x, y = pts[i].y, h = values[i];
            sxx += x * x;
            sxy += x * y;
            sx += x;
            syy += y * y;
            sy += y;
            phx += x * h;
            phy += y * h;
            ph1 += h;
        }
        const double ptp[kPolyTerms][kPolyTerms] = {
            {sxx, sxy, sx}, {sxy, syy, sy}, {sx, sy, static_cast<double>(n)}};
        for (std::size_t p = 0; p < kPolyTerms; ++p)
            for (std::size_t q = 0; q < kPolyTerms; ++q)
                sys.b[(m + p) * side + (m + q)] = ptp[p][q];
        sys.rhs[m + 0] = phx;
        sys.rhs[m + 1] = phy;
        sys.rhs[m + 2] = ph1;
        local.gram_seconds += seconds_since(tg);
    }

    for (std::size_t j = 0; j < m; ++j)
        if (ref_nnz[j] == 0) sys.empty_support_refs.push_back(static_cast<std::uint32_t>(j));

    local.peak_bytes = acct.peak();
    if (stats) {
        local.index_seconds = stats->index_seconds;  // preserved from the overload
        *stats = local;
    }
    return sys;
}

NormalSystem build_normal_system(const PointCloud& cloud, std::span<const Point2> refs,
                                 const KernelSpec& kernel, const BlockPlan& plan, bool poly,
                                 BuildStats* stats) {
    const auto t0 = Clock::now();
    const PointIndex index(cloud.points);
    const double index_seconds = seconds_since(t0);
    BuildStats local{};
    local.index_seconds = index_seconds;
    NormalSystem sys =
        build_normal_system(index, cloud.values, refs, kernel, plan, poly, &local);
    if (stats) *stats = local;
    return sys;
}

Weights solve_weights(const NormalSystem& sys, SolveDiag* diag) {
    const std::size_t side = sys.side;
    if (side == 0 || sys.b.size() != side * side || sys.rhs.size() != side)
        throw std::invalid_argument("solve_weights: malformed normal system");

    const Eigen::Map<const Eigen::MatrixXd> b(sys.b.data(), side, side);
    const Eigen::Map<const Eigen::VectorXd> rhs(sys.rhs.data(), side);
    const double mean_diag = b.diagonal().sum() / static_cast<double>(side);

    static constexpr double kLambdas[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
    Eigen::MatrixXd work;
    Eigen::VectorXd x;
    SolveDiag local{};
    bool solved = false;
    for (const double lambda : kLambdas) {
        work = b;
        if (lambda > 0.0) work.diagonal().array() += lambda * mean_diag;
        ++local.attempts;
        const Eigen::LLT<Eigen::MatrixXd> llt(work);
        if (llt.info() == Eigen::Success) {
            x = llt.solve(rhs);
            local.ridge_lambda = lambda;
            local.ridge_shift = lambda * mean_diag;
            solved = true;
            break;
        }
    }
    if (!solved) {
        const std::size_t pivot = first_bad_pivot(work);
        throw std::runtime_error(
            "normal system is not positive definite even with ridge 1e-06; first "
            "non-positive pivot at index " +
            std::to_string(pivot));
    }

    Weights w;
    const std::size_t m = sys.poly ? side - kPolyTerms : side;
    w.c.assign(x.data(), x.data() + m);
    if (sys.poly) w.poly = {{x[m], x[m + 1], x[m + 2]}};
    if (diag) *diag = local;
    return w;
}

namespace {

// The ridge rungs keep a numerically singular system solvable, but they bias
// the weights: once cond(A)^2 exceeds double precision the rounded normal
// matrix no longer determines the least-squares solution, regardless of how
// it is factorized. This helper makes one more pass over the data, pushing
// fixed-size row chunks of the design matrix through an incremental
// Householder QR of [A P | h], which solves the same problem at cond(A)
// instead of cond(A)^2. The chunk layout never depends on the column block
// plan, so neither do the recovered weights. A rank-deficient design (e.g. a
// reference with empty support) surfaces as a zero pivot in the triangular
// solve and yields non-finite weights; the caller keeps the ridge solution
// in that case.
std::optional<Weights> least_squares_repass(const PointCloud& cloud,
                                            std::span<const Point2> refs,
                                            const KernelSpec& kernel, bool poly,
                                            std::size_t* peak_bytes) {
    const auto m = static_cast<Eigen::Index>(refs.size());
    const Eigen::Index width = m + (poly ? kPolyTerms : 0);
    const Eigen::Index aug = width + 1;  // trailing column carries h

    const PointIndex ref_index(std::vector<Point2>(refs.begin(), refs.end()));
    const double radius = kernel.support_radius();

    const auto chunk_rows =
        static_cast<Eigen::Index>(std::min<std::size_t>(cloud.size(), 4096));
    Eigen::MatrixXd stack(aug + chunk_rows, aug);
    Eigen::MatrixXd r_factor = Eigen::MatrixXd::Zero(aug, aug);
    if (peak_bytes)  // stack, its copy inside the QR, and the running R factor
        *peak_bytes = (2 * stack.size() + r_factor.size()) * sizeof(double);

    std::vector<PointIndex::Neighbor> hits;
    for (std::size_t base = 0; base < cloud.size();) {
        const auto rows = static_cast<Eigen::Index>(
            std::min<std::size_t>(static_cast<std::size_t>(chunk_rows), cloud.size() - base));
        auto block = stack.topRows(aug + rows);
        block.setZero();
        block.topRows(aug) = r_factor;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Point2 p = cloud.points[base + static_cast<std::size_t>(r)];
            ref_index.radius_query(p, radius, hits);
            for (const auto& nb : hits)
                block(aug + r, static_cast<Eigen::Index>(nb.index)) =
                    kernel.evaluate(nb.distance);
            if (poly) {
                block(aug + r, m + 0) = p.x;
                block(aug + r, m + 1) = p.y;
                block(aug + r, m + 2) = 1.0;
            }
            block(aug + r, width) = cloud.values[base + static_cast<std::size_t>(r)];
        }
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(block);
        r_factor = qr.matrixQR().topRows(aug).triangularView<Eigen::Upper>();
        base += static_cast<std::size_t>(rows);
    }

    const Eigen::VectorXd x = r_factor.topLeftCorner(width, width)
                                  .triangularView<Eigen::Upper>()
                                  .solve(r_factor.topRightCorner(width, 1));
    if (!x.allFinite()) return std::nullopt;

    Weights w;
    w.c.assign(x.data(), x.data() + m);
    if (poly) w.poly = {{x[m], x[m + 1], x[m + 2]}};
    return w;
}

}  // namespace

Model fit(const PointCloud& cloud, std::vector<Point2> refs, const KernelSpec& kernel,
          const FitOptions& options, FitReport* report) {
    if (cloud.size() == 0) throw std::invalid_argument("fit: empty point cloud");
    if (cloud.values.size() != cloud.points.size())
        throw std::invalid_argument("fit: cloud value count mismatch");
    if (refs.empty()) throw std::invalid_argument("fit: no reference points");

    FitReport local{};
    if (cloud.size() < refs.size())
        local.warnings.push_back(
            "fewer data points than reference points; the least-squares system is "
            "underdetermined");

    const std::size_t m = refs.size();
    if (options.block_size) {
        const std::size_t mb = std::clamp<std::size_t>(*options.block_size, 1, m);
        local.plan = BlockPlan{m,
                               mb,
                               (m + mb - 1) / mb,
                               options.ram_budget_bytes,
                               options.prec_bytes,
                               false};
    } else {
        local.plan =
            choose_block_size(cloud.size(), m, options.ram_budget_bytes, options.prec_bytes);
    }

    auto t0 = Clock::now();
    const PointIndex index(cloud.points);
    local.index_seconds = seconds_since(t0);

    BuildStats stats{};
    NormalSystem sys = build_normal_system(index, cloud.values, refs, kernel, local.plan,
                                           options.poly, &stats);
    SolveDiag sd{};
    t0 = Clock::now();
    Weights w;
    std::size_t repass_bytes = 0;
    try {
        w = solve_weights(sys, &sd);
    } catch (const std::runtime_error&) {
        // Even the deepest ridge rung failed; the re-pass below is the last
        // resort, and a rank-deficient design rethrows.
        auto exact = least_squares_repass(cloud, refs, kernel, options.poly, &repass_bytes);
        if (!exact) throw;
        w = std::move(*exact);
        sd = SolveDiag{};
        local.warnings.push_back(
            "normal equations unsolvable; weights recovered by an orthogonal re-pass "
            "over the data");
    }
    if (sd.ridge_lambda > 0.0) {
        // The plain factorization failed, so the normal matrix is numerically
        // singular and the ridge solution is biased toward small weights.
        if (auto exact =
                least_squares_repass(cloud, refs, kernel, options.poly, &repass_bytes)) {
            w = std::move(*exact);
            sd.ridge_lambda = 0.0;
            sd.ridge_shift = 0.0;
            local.warnings.push_back(
                "normal equations numerically singular; weights recovered by an "
                "orthogonal re-pass over the data");
        }
    }
    const double solve_seconds = seconds_since(t0);

    local.assembly_seconds = stats.assembly_seconds;
    local.gram_solve_seconds = stats.gram_seconds + solve_seconds;
    local.peak_bytes = std::max(stats.peak_bytes, repass_bytes);
    local.design_nnz = stats.design_nnz;
    local.empty_support_refs = std::move(sys.empty_support_refs);
    local.ridge_lambda = sd.ridge_lambda;
    local.ridge_shift = sd.ridge_shift;

    Model model{kernel, std::move(refs), std::move(w.c), w.poly, cloud.offset};
    if (report) *report = std::move(local);
    return model;
}

std::vector<BenchRow> bench_block_sizes(const PointCloud& cloud, std::vector<Point2> refs,
                                        const KernelSpec& kernel, const FitOptions& options,
                                        std::span<const std::size_t> block_sizes,
                                        double* index_seconds) {
    if (block_sizes.empty())
        throw std::invalid_argument("bench_block_sizes: no block sizes given");
    if (cloud.size() == 0) throw std::invalid_argument("bench_block_sizes: empty cloud");
    if (refs.empty()) throw std::invalid_argument("bench_block_sizes: no reference points");

    const auto t0 = Clock::now();
    const PointIndex index(cloud.points);
    if (index_seconds) *index_seconds = seconds_since(t0);

    const std::size_t m = refs.size();
    std::vector<BenchRow> rows;
    rows.reserve(block_sizes.size());
    NormalSystem baseline;
    for (const std::size_t requested : block_sizes) {
        const std::size_t mb = std::clamp<std::size_t>(requested, 1, m);
        const BlockPlan plan{m,      mb,
                             (m + mb - 1) / mb, options.ram_budget_bytes,
                             options.prec_bytes, false};
        BuildStats stats{};
        NormalSystem sys =
            build_normal_system(index, cloud.values, refs, kernel, plan, options.poly, &stats);
        const auto ts = Clock::now();
        Weights w = solve_weights(sys);
        const double solve_seconds = seconds_since(ts);

        const Model model{kernel, refs, std::move(w.c), w.poly, cloud.offset};
        const ErrorReport er = error_report(model, cloud, stats.design_nnz);

        BenchRow row;
        row.block_size = mb;
        row.n_blocks = plan.n_blocks;
        row.assembly_seconds = stats.assembly_seconds;
        row.gram_solve_seconds = stats.gram_seconds + solve_seconds;
        row.mae = er.mean_absolute_error;
        if (rows.empty()) {
            baseline = std::move(sys);
            row.max_rel_diff = 0.0;
        } else {
            double worst = 0.0;
            const auto update = [&worst](double a, double b) {
                const double mag = std::max(std::abs(a), std::abs(b));
                if (mag > 0.0) worst = std::max(worst, std::abs(a - b) / mag);
            };
            for (std::size_t i = 0; i < baseline.b.size(); ++i)
                update(baseline.b[i], sys.b[i]);
            for (std::size_t i = 0; i < baseline.rhs.size(); ++i)
                update(baseline.rhs[i], sys.rhs[i]);
            row.max_rel_diff = worst;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rbfit

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbfit/coo.hpp"
#include "rbfit/data.hpp"
#include "rbfit/kdtree.hpp"
#include "rbfit/kernel.hpp"
#include "rbfit/model.hpp"

namespace rbfit {

/// Column partition of the design matrix chosen against a RAM budget.
///
/// The planning model counts the M x M normal matrix plus two resident
/// N x M_B sub-matrices at `prec` bytes per scalar:
///
///   dense:   (M^2 + 2*M_B*N)   * prec < budget
///   sparse:  (M^2 + 2*N_NZ)    * prec < budget,  N_NZ = nonzeros per block
///
/// and picks the largest feasible M_B, capped at M.
struct BlockPlan {
    std::size_t m_total = 0;
    std::size_t block_size = 0;
    std::size_t n_blocks = 0;
    std::size_t ram_budget_bytes = 0;
    std::size_t prec_bytes = 8;
    bool sparse_mode = false;
};

/// Dense-mode plan. Errors when the budget cannot even hold the M x M normal
/// matrix (reduce M) or not a single design column next to it.
BlockPlan choose_block_size(std::size_t n_points, std::size_t m_refs,
                            std::size_t ram_budget_bytes, std::size_t prec_bytes);

/// Sparse-mode plan from an estimated nonzero count per reference column.
/// With compact supports this typically allows far larger blocks than the
/// dense rule.
BlockPlan choose_block_size(std::size_t n_points, std::size_t m_refs,
                            std::size_t ram_budget_bytes, std::size_t prec_bytes,
                            double nnz_per_ref);

/// Mean support population over a deterministic sample of min(M, 256)
/// reference points, counted with radius queries -- the input to the
/// sparse-mode plan.
double estimate_nnz_per_ref(const PointIndex& index, std::span<const Point2> refs,
                            const KernelSpec& kernel);

/// The assembled least-squares system b * w = rhs. Without a polynomial,
/// side == M and b is the gram matrix of the design columns; with the linear
/// polynomial the system is bordered by the three columns (x, y, 1):
///
///   [ A^T A   A^T P ] [c]   [A^T h]
///   [ P^T A   P^T P ] [k] = [P^T h]
///
/// b is exactly symmetric by construction (mirrored copies).
struct NormalSystem {
    std::size_t side = 0;
    std::vector<double> b;    // row-major, side x side
    std::vector<double> rhs;  // length side
    bool poly = false;
    /// References whose support contains no data point (zero column).
    /// Diagnostic, not an error; their weights solve to zero under ridge.
    std::vector<std::uint32_t> empty_support_refs;
};

struct BuildStats {
    double index_seconds = 0.0;     // only set by the overload that builds the tree
    double assembly_seconds = 0.0;  // sub-matrix assembly (radius queries + kernel)
    double gram_seconds = 0.0;      // gram products, rhs, mirroring
    std::size_t peak_bytes = 0;     // accountant peak over working allocations
    std::size_t design_nnz = 0;     // nonzeros of the full design matrix
    std::size_t blocks_assembled = 0;
};

/// Builds the normal system block by block: for each diagonal block k the
/// sub-matrix A_k is assembled and kept (with its row view) while the blocks
/// l > k are assembled, multiplied and dropped -- at most two sub-matrices
/// resident at any time, upper-triangle block pairs only, mirrored into the
/// lower triangle. Sub-matrices are re-assembled per pair, so small blocks
/// trade repeated kernel evaluations for memory.
NormalSystem build_normal_system(const PointIndex& index, std::span<const double> values,
                                 std::span<const Point2> refs, const KernelSpec& kernel,
                                 const BlockPlan& plan, bool poly,
                                 BuildStats* stats = nullptr);

/// Convenience overload that builds the point index itself.
NormalSystem build_normal_system(const PointCloud& cloud, std::span<const Point2> refs,
                                 const KernelSpec& kernel, const BlockPlan& plan, bool poly,
                                 BuildStats* stats = nullptr);

struct SolveDiag {
    double ridge_lambda = 0.0;  // 0 when the plain factorization succeeded
    double ridge_shift = 0.0;   // lambda * mean diagonal, the amount added
    int attempts = 0;
};

struct Weights {
    std::vector<double> c;
    std::optional<std::array<double, 3>> poly;
};

/// Cholesky solve of the normal system. If the plain factorization fails,
/// retries with a diagonal shift lambda * trace(b)/side for lambda = 1e-10,
/// escalating tenfold up to 1e-6; past that, throws an error naming the
/// first non-positive pivot.
Weights solve_weights(const NormalSystem& sys, SolveDiag* diag = nullptr);

struct FitOptions {
    bool poly = false;
    std::size_t ram_budget_bytes = std::size_t{1} << 30;  // 1 GiB default
    std::size_t prec_bytes = 8;
    std::optional<std::size_t> block_size;  // explicit override, skips planning
};

struct FitReport {
    BlockPlan plan;
    double index_seconds = 0.0;
    double assembly_seconds = 0.0;
    double gram_solve_seconds = 0.0;
    std::size_t peak_bytes = 0;
    std::size_t design_nnz = 0;
    std::vector<std::uint32_t> empty_support_refs;
    double ridge_lambda = 0.0;
    double ridge_shift = 0.0;
    std::vector<std::string> warnings;
};

/// Plans (or takes the override), assembles, solves, and packages the model.
/// The cloud's recorded offset is carried into the model so evaluation can
/// accept raw coordinates. Warns (in the report) when N < M.
Model fit(const PointCloud& cloud, std::vector<Point2> refs, const KernelSpec& kernel,
          const FitOptions& options = {}, FitReport* report = nullptr);

struct BenchRow {
    std::size_t block_size = 0;
    std::size_t n_blocks = 0;
    double assembly_seconds = 0.0;
    double gram_solve_seconds = 0.0;
    double mae = 0.0;
    /// Largest relative elementwise difference of (b, rhs) against the first
    /// run -- the built-in block-invariance check.
    double max_rel_diff = 0.0;
};

/// Fits the same problem once per requested block size (point index built
/// once, its time returned separately) and reports the two phases --
/// sub-matrix assembly vs gram/solve -- plus the invariance check.
std::vector<BenchRow> bench_block_sizes(const PointCloud& cloud, std::vector<Point2> refs,
                                        const KernelSpec& kernel, const FitOptions& options,
                                        std::span<const std::size_t> block_sizes,
                                        double* index_seconds = nullptr);

}  // namespace rbfit

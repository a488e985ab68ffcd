#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rbfit/kdtree.hpp"
#include "rbfit/kernel.hpp"

namespace rbfit {

/// Sparse matrix in coordinate (triplet) form: parallel row/col/value arrays.
/// Storage is proportional to the number of nonzeros; indices are 32-bit.
/// Assembled blocks keep their triplets sorted by (col, row), i.e. grouped by
/// reference point with ascending point index inside each group.
class CooMatrix {
  public:
    struct Triplet {
        std::uint32_t row = 0;
        std::uint32_t col = 0;
        double value = 0.0;
    };

    CooMatrix() = default;
    CooMatrix(std::size_t n_rows, std::size_t n_cols);  // no entries

    /// Validates (bounds, finite nonzero values, no duplicate positions) and
    /// stores the triplets in canonical (col, row) order.
    static CooMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> triplets);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }
    std::size_t nnz() const { return data_.size(); }

    std::span<const std::uint32_t> rows() const { return row_; }
    std::span<const std::uint32_t> cols() const { return col_; }
    std::span<const double> values() const { return data_; }

    /// Bytes held by the triplet arrays (grows linearly with nnz).
    std::size_t storage_bytes() const {
        return row_.size() * sizeof(std::uint32_t) + col_.size() * sizeof(std::uint32_t) +
               data_.size() * sizeof(double);
    }

    /// y = A x, accumulating y[row[i]] += data[i] * x[col[i]] over the stored
    /// triplets. x must have n_cols entries.
    std::vector<double> matvec(std::span<const double> x) const;

    /// z = A^T y, accumulating z[col[i]] += data[i] * y[row[i]]. y must have
    /// n_rows entries.
    std::vector<double> transpose_matvec(std::span<const double> y) const;

    /// Debug dump, one "row col value" line per stored entry.
    void dump(std::ostream& os) const;

  private:
    CooMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::uint32_t> row,
              std::vector<std::uint32_t> col, std::vector<double> data);

    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::uint32_t> row_;
    std::vector<std::uint32_t> col_;
    std::vector<double> data_;

    friend CooMatrix assemble_submatrix(const PointIndex&, std::span<const Point2>,
                                        const KernelSpec&);
};

/// Row-grouped (CSR-like) view of a COO block, built with a stable counting
/// sort by row. Lets gram products walk only the rows where a column pair
/// actually overlaps, without materializing dense columns.
class CooRowView {
  public:
    explicit CooRowView(const CooMatrix& m);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }
    std::size_t storage_bytes() const {
        return ptr_.size() * sizeof(std::uint32_t) + col_.size() * sizeof(std::uint32_t) +
               val_.size() * sizeof(double);
    }

  private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::uint32_t> ptr_;  // n_rows + 1 offsets
    std::vector<std::uint32_t> col_;
    std::vector<double> val_;

    friend struct GramOps;
};

/// Dense row-major block, the output of gram products.
struct DenseBlock {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> data;  // row-major

    double at(std::size_t i, std::size_t j) const { return data[i * n_cols + j]; }
};

/// left^T * right for two blocks over the same row space (point set).
/// Contributions to each output entry accumulate in ascending row order, so
/// the result is independent of how the full column range was partitioned.
DenseBlock gram_product(const CooRowView& left, const CooMatrix& right);

/// A^T * A for one block; computes the upper triangle and mirrors it.
DenseBlock gram_self(const CooRowView& block);

/// Convenience wrapper: builds the row view of `left` and multiplies. Passing
/// the same object twice uses the symmetric path.
DenseBlock coo_gram_block(const CooMatrix& left, const CooMatrix& right);

/// Builds the design sub-matrix for one block of reference points: for each
/// reference, a radius query over the point index collects every point inside
/// the kernel support (strictly closer than 1/alpha), and phi(distance) is
/// stored as a triplet. Entries come out grouped by reference (column) with
/// rows ascending; exact zeros are never stored.
CooMatrix assemble_submatrix(const PointIndex& index, std::span<const Point2> refs,
                             const KernelSpec& kernel);

}  // namespace rbfit

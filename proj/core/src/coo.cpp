#include "rbfit/coo.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rbfit {

namespace {

void check_dim_limit(std::size_t n, const char* what) {
    if (n > 0xffffffffull)
        throw std::invalid_argument(std::string(what) + " exceeds 32-bit triplet index range");
}

}  // namespace

CooMatrix::CooMatrix(std::size_t n_rows, std::size_t n_cols) : n_rows_(n_rows), n_cols_(n_cols) {
    check_dim_limit(n_rows, "row count");
    check_dim_limit(n_cols, "column count");
}

CooMatrix::CooMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::uint32_t> row,
                     std::vector<std::uint32_t> col, std::vector<double> data)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_(std::move(row)),
      col_(std::move(col)),
      data_(std::move(data)) {}

CooMatrix CooMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                   std::vector<Triplet> triplets) {
    check_dim_limit(n_rows, "row count");
    check_dim_limit(n_cols, "column count");
    for (const Triplet& t : triplets) {
        if (t.row >= n_rows || t.col >= n_cols)
            throw std::invalid_argument("triplet index (" + std::to_string(t.row) + ", " +
                                        std::to_string(t.col) + ") out of bounds");
        if (t.value == 0.0 || !std::isfinite(t.value))
            throw std::invalid_argument("triplet values must be finite and nonzero");
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.col < b.col || (a.col == b.col && a.row < b.row);
    });
    for (std::size_t i = 1; i < triplets.size(); ++i)
        if (triplets[i].row == triplets[i - 1].row && triplets[i].col == triplets[i - 1].col)
            throw std::invalid_argument("duplicate triplet position (" +
                                        std::to_string(triplets[i].row) + ", " +
                                        std::to_string(triplets[i].col) + ")");

    CooMatrix m(n_rows, n_cols);
    m.row_.reserve(triplets.size());
    m.col_.reserve(triplets.size());
    m.data_.reserve(triplets.size());
    for (const Triplet& t : triplets) {
        m.row_.push_back(t.row);
        m.col_.push_back(t.col);
        m.data_.push_back(t.value);
    }
    return m;
}

std::vector<double> CooMatrix::matvec(std::span<const double> x) const {
    if (x.size() != n_cols_)
        throw std::invalid_argument("matvec: vector has " + std::to_string(x.size()) +
                                    " entries, matrix has " + std::to_string(n_cols_) +
                                    " columns");
    std::vector<double> y(n_rows_, 0.0);
    for (std::size_t i = 0; i < data_.size(); ++i) y[row_[i]] += data_[i] * x[col_[i]];
    return y;
}

std::vector<double> CooMatrix::transpose_matvec(std::span<const double> y) const {
    if (y.size() != n_rows_)
        throw std::invalid_argument("transpose_matvec: vector has " + std::to_string(y.size()) +
                                    " entries, matrix has " + std::to_string(n_rows_) + " rows");
    std::vector<double> z(n_cols_, 0.0);
    for (std::size_t i = 0; i < data_.size(); ++i) z[col_[i]] += data_[i] * y[row_[i]];
    return z;
}

void CooMatrix::dump(std::ostream& os) const {
    for (std::size_t i = 0; i < data_.size(); ++i)
        os << row_[i] << ' ' << col_[i] << ' ' << data_[i] << '\n';
}

CooRowView::CooRowView(const CooMatrix& m) : n_rows_(m.n_rows()), n_cols_(m.n_cols()) {
    const auto rows = m.rows();
    const auto cols = m.cols();
    const auto vals = m.values();
    ptr_.assign(n_rows_ + 1, 0);
    for (const std::uint32_t r : rows) ++ptr_[r + 1];
    for (std::size_t r = 0; r < n_rows_; ++r) ptr_[r + 1] += ptr_[r];
    col_.resize(cols.size());
    val_.resize(vals.size());
    // Stable counting sort by row: within a row, source (col, row) order keeps
    // columns ascending. ptr_ is used as a write cursor and then restored.
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::uint32_t pos = ptr_[rows[i]]++;
        col_[pos] = cols[i];
        val_[pos] = vals[i];
    }
    for (std::size_t r = n_rows_; r > 0; --r) ptr_[r] = ptr_[r - 1];
    ptr_[0] = 0;
}

struct GramOps {
    static DenseBlock product(const CooRowView& left, const CooMatrix& right) {
        if (left.n_rows() != right.n_rows())
            throw std::invalid_argument("gram product: blocks span different point sets");
        DenseBlock out{left.n_cols(), right.n_cols(),
                       std::vector<double>(left.n_cols() * right.n_cols(), 0.0)};
        const auto rrow = right.rows();
        const auto rcol = right.cols();
        const auto rval = right.values();
        const std::size_t wr = out.n_cols;
        // Right triplets stream in (col, row) order, so each output entry
        // accumulates its overlapping rows in ascending row order -- the same
        // order no matter how the column range was split into blocks.
        for (std::size_t i = 0; i < rval.size(); ++i) {
            const std::uint32_t r = rrow[i];
            const std::size_t b = rcol[i];
            const double v = rval[i];
            const std::uint32_t e0 = left.ptr_[r];
            const std::uint32_t e1 = left.ptr_[r + 1];
            for (std::uint32_t e = e0; e < e1; ++e)
                out.data[left.col_[e] * wr + b] += left.val_[e] * v;
        }
        return out;
    }

    static DenseBlock self(const CooRowView& block) {
        const std::size_t w = block.n_cols();
        DenseBlock out{w, w, std::vector<double>(w * w, 0.0)};
        for (std::size_t r = 0; r < block.n_rows(); ++r) {
            const std::uint32_t e0 = block.ptr_[r];
            const std::uint32_t e1 = block.ptr_[r + 1];
            for (std::uint32_t i = e0; i < e1; ++i) {
                const double vi = block.val_[i];
                const std::size_t base = block.col_[i] * w;
                for (std::uint32_t j = i; j < e1; ++j)
                    out.data[base + block.col_[j]] += vi * block.val_[j];
            }
        }
        // Upper triangle was accumulated (cols ascend within a row); mirror it.
        for (std::size_t i = 0; i < w; ++i)
            for (std::size_t j = i + 1; j < w; ++j) out.data[j * w + i] = out.data[i * w + j];
        return out;
    }
};

DenseBlock gram_product(const CooRowView& left, const CooMatrix& right) {
    return GramOps::product(left, right);
}

DenseBlock gram_self(const CooRowView& block) { return GramOps::self(block); }

DenseBlock coo_gram_block(const CooMatrix& left, const CooMatrix& right) {
    CooRowView view(left);
    if (&left == &right) return GramOps::self(view);
    return GramOps::product(view, right);
}

CooMatrix assemble_submatrix(const PointIndex& index, std::span<const Point2> refs,
                             const KernelSpec& kernel) {
    if (refs.empty()) throw std::invalid_argument("assemble_submatrix: empty reference block");
    check_dim_limit(refs.size(), "reference count");
    for (std::size_t j = 0; j < refs.size(); ++j)
        if (!finite(refs[j]))
            throw std::invalid_argument("non-finite reference point at index " +
                                        std::to_string(j));

    const double radius = kernel.support_radius();
    std::vector<std::uint32_t> row, col;
    std::vector<double> data;
    std::vector<PointIndex::Neighbor> hits;
    for (std::size_t j = 0; j < refs.size(); ++j) {
        index.radius_query(refs[j], radius, hits);
        for (const auto& nb : hits) {
            const double v = kernel.evaluate(nb.distance);
            if (v != 0.0) {  // strict-radius hits are nonzero; keep the invariant anyway
                row.push_back(nb.index);
                col.push_back(static_cast<std::uint32_t>(j));
                data.push_back(v);
            }
        }
    }
    return CooMatrix(index.size(), refs.size(), std::move(row), std::move(col),
                     std::move(data));
}

}  // namespace rbfit

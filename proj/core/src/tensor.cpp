#include "mdmlp/tensor.hpp"

#include <cmath>
#include <sstream>

#include "mdmlp/errors.hpp"

namespace mdmlp {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

namespace {

std::int64_t checked_size(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

} // namespace

Tensor Tensor::uninit(Shape shape) {
    auto n = checked_size(shape);
    return Tensor(std::move(shape), std::shared_ptr<double[]>(new double[static_cast<std::size_t>(n)]),
                  n);
}

Tensor Tensor::zeros(Shape shape) {
    Tensor t = uninit(std::move(shape));
    std::fill(t.mut().begin(), t.mut().end(), 0.0);
    return t;
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t = uninit(std::move(shape));
    std::fill(t.mut().begin(), t.mut().end(), value);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
    auto n = checked_size(shape);
    if (n != static_cast<std::int64_t>(data.size()))
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    Tensor t = uninit(std::move(shape));
    std::copy(data.begin(), data.end(), t.mut().begin());
    return t;
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t = uninit(std::move(shape));
    for (auto& v : t.mut()) v = rng.uniform(lo, hi);
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() requires a one-element tensor, got " + shape_str(shape_));
    return data_[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw DimensionError("index rank mismatch for shape " + shape_str(shape_));
    std::int64_t flat = 0;
    int i = 0;
    for (auto v : idx) {
        flat = flat * shape_[static_cast<std::size_t>(i)] + v;
        ++i;
    }
    return data_[flat];
}

bool Tensor::all_finite() const {
    for (double v : data())
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (checked_size(shape) != size())
        throw DimensionError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                             " changes element count");
    return Tensor(std::move(shape), data_, len_);
}

Tensor Tensor::clone() const {
    if (!data_) return {};
    Tensor t = uninit(shape_);
    std::copy(data().begin(), data().end(), t.mut().begin());
    return t;
}

namespace {

// i-k-j kernel with a contiguous axpy inner loop. Each output row depends
// only on its own A row and on B, accumulated in a fixed order, so identical
// rows produce bit-identical results and row permutations commute exactly
// with the product. A BLAS backend does not give that guarantee.
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const double* a, std::int64_t lda, const double* b, std::int64_t ldb,
             double beta, double* c, std::int64_t ldc) {
#pragma omp parallel for schedule(static) if (m >= 64 && n * k >= 4096)
    for (std::int64_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        if (beta == 0.0)
            for (std::int64_t j = 0; j < n; ++j) crow[j] = 0.0;
        const double* arow = a + i * lda;
        std::int64_t p = 0;
        for (; p + 4 <= k; p += 4) {
            const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
            const double* b0 = b + p * ldb;
            const double* b1 = b0 + ldb;
            const double* b2 = b1 + ldb;
            const double* b3 = b2 + ldb;
            for (std::int64_t j = 0; j < n; ++j)
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * ldb;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

std::vector<double> transpose_copy(const double* x, std::int64_t rows, std::int64_t cols,
                                   std::int64_t ld) {
    std::vector<double> out(static_cast<std::size_t>(rows * cols));
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j) out[static_cast<std::size_t>(j * rows + i)] = x[i * ld + j];
    return out;
}

} // namespace

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          const double* a, std::int64_t lda, const double* b, std::int64_t ldb,
          double beta, double* c, std::int64_t ldc) {
    // Transposed operands are staged into contiguous copies; the O(mk + kn)
    // copy is noise next to the O(mkn) product.
    if (!trans_a && !trans_b) {
        gemm_nn(m, n, k, a, lda, b, ldb, beta, c, ldc);
    } else if (trans_a && !trans_b) {
        const auto at = transpose_copy(a, k, m, lda); // stored [k x m] -> [m x k]
        gemm_nn(m, n, k, at.data(), k, b, ldb, beta, c, ldc);
    } else if (!trans_a && trans_b) {
        const auto bt = transpose_copy(b, n, k, ldb); // stored [n x k] -> [k x n]
        gemm_nn(m, n, k, a, lda, bt.data(), n, beta, c, ldc);
    } else {
        const auto at = transpose_copy(a, k, m, lda);
        const auto bt = transpose_copy(b, n, k, ldb);
        gemm_nn(m, n, k, at.data(), k, bt.data(), n, beta, c, ldc);
    }
}

} // namespace mdmlp

#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mdmlp/rng.hpp"

namespace mdmlp {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);

// Dense row-major array of 64-bit reals. Values are immutable once published;
// mut() is reserved for the single owner that fills or updates the buffer
// (construction, optimizer step).
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from(Shape shape, std::vector<double> data);
    static Tensor scalar(double value);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);
    // Uninitialized storage; the caller must write every element.
    static Tensor uninit(Shape shape);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return len_; }
    bool empty() const { return data_ == nullptr; }

    std::span<const double> data() const { return {data_.get(), static_cast<std::size_t>(len_)}; }
    std::span<double> mut() { return {data_.get(), static_cast<std::size_t>(len_)}; }
    const double* ptr() const { return data_.get(); }

    double item() const;
    double at(std::initializer_list<std::int64_t> idx) const;

    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // Shares the underlying buffer; element count must match.
    Tensor reshaped(Shape shape) const;

    Tensor clone() const;

  private:
    Tensor(Shape shape, std::shared_ptr<double[]> data, std::int64_t len)
        : shape_(std::move(shape)), data_(std::move(data)), len_(len) {}

    Shape shape_;
    std::shared_ptr<double[]> data_;
    std::int64_t len_ = 0;
};

// C[m x n] = A[m x k] * B[k x n], optionally transposing either operand's
// logical view. Accumulates into C when beta == 1.
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          const double* a, std::int64_t lda, const double* b, std::int64_t ldb,
          double beta, double* c, std::int64_t ldc);

} // namespace mdmlp

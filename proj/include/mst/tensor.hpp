#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mst {

/// Dense row-major tensor of doubles, rank 1 to 3. The single value carrier
/// for all math in this project; everything is 64-bit in memory (checkpoints
/// narrow to 32-bit on disk).
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    static Tensor zeros(std::size_t n);
    static Tensor zeros(std::size_t r, std::size_t c);
    static Tensor full(std::vector<std::size_t> shape, double v);
    static Tensor from_row(std::initializer_list<double> v);
    static Tensor from_matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    const std::vector<std::size_t>& shape() const { return shape_; }

    /// Rank-2 accessors; rank-1 tensors are treated as a single row.
    std::size_t rows() const { return rank() == 1 ? 1 : shape_[0]; }
    std::size_t cols() const { return rank() == 1 ? shape_[0] : shape_[1]; }

    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols(); }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols(); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    void fill(double v);

    /// "3x4" style string for error messages.
    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Plain matrix product, rank-2 only. Throws std::invalid_argument naming both
/// shapes on a dimension mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

namespace detail {
// Accumulating kernels shared by the forward ops and backward sweeps.
// All take raw row-major buffers and add into c.
void matmul_nn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
// c[m x n] += a[m x p] * b[n x p]^T
void matmul_nt_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t p, std::size_t n);
// c[p x n] += a[m x p]^T * b[m x n]
void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t p, std::size_t n);
} // namespace detail

} // namespace mst

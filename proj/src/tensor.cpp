#include "mst/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>

namespace mst {

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 3)
        throw std::invalid_argument("Tensor: rank must be 1..3, got rank " +
                                    std::to_string(shape_.size()));
    std::size_t n = 1;
    for (std::size_t d : shape_) {
        if (d == 0) throw std::invalid_argument("Tensor: zero dimension in shape");
        n *= d;
    }
    data_.assign(n, 0.0);
}

Tensor Tensor::zeros(std::size_t n) { return Tensor({n}); }
Tensor Tensor::zeros(std::size_t r, std::size_t c) { return Tensor({r, c}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::from_row(std::initializer_list<double> v) {
    Tensor t({v.size()});
    std::size_t i = 0;
    for (double x : v) t.at(i++) = x;
    return t;
}

Tensor Tensor::from_matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = rows.begin()->size();
    Tensor t({r, c});
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("Tensor::from_matrix: ragged rows");
        std::size_t j = 0;
        for (double x : row) t.at(i, j++) = x;
        ++i;
    }
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const {
    std::string s;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape_[i]);
    }
    return s;
}

namespace detail {

void matmul_nn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t p, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * p;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * p;
            double acc = 0.0;
            for (std::size_t t = 0; t < p; ++t) acc += arow[t] * brow[t];
            crow[j] += acc;
        }
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t p, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * p;
        const double* brow = b + i * n;
        for (std::size_t t = 0; t < p; ++t) {
            const double av = arow[t];
            double* crow = c + t * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

} // namespace detail

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: rank-2 tensors required, got " + a.shape_str() +
                                    " and " + b.shape_str());
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree: " + a.shape_str() +
                                    " vs " + b.shape_str());
    Tensor c = Tensor::zeros(a.rows(), b.cols());
    detail::matmul_nn_acc(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

} // namespace mst

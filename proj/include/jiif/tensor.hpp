#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "jiif/errors.hpp"

namespace jiif {

/// Dense row-major double tensor. Shapes are small (<= 3 dims in practice);
/// all heavy math happens through the kernels below or the autograd ops.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

    static Tensor from(std::vector<int64_t> shape, std::vector<double> data) {
        Tensor t;
        require(checked_numel(shape) == static_cast<int64_t>(data.size()),
                "Tensor::from: shape does not match data size");
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    size_t ndim() const { return shape_.size(); }
    int64_t dim(size_t i) const {
        require(i < shape_.size(), "Tensor::dim: axis out of range");
        return shape_[i];
    }
    const std::vector<int64_t>& shape() const { return shape_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    /// Matrix element access for 2-D tensors.
    double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

    /// Planar access for [C,H,W] tensors.
    double& at(int64_t c, int64_t y, int64_t x) {
        return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }
    double at(int64_t c, int64_t y, int64_t x) const {
        return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
    }

    /// Reinterpret the shape; the element count must not change.
    Tensor reshaped(std::vector<int64_t> shape) const {
        require(checked_numel(shape) == numel(), "Tensor::reshaped: element count mismatch");
        Tensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    static int64_t checked_numel(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (const int64_t d : shape) {
            require(d >= 0, "Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

namespace detail {

// Deterministic GEMM kernels. Every output element accumulates its products
// in a fixed index order regardless of how the batch dimension is tiled, so
// splitting a batch into chunks reproduces the unchunked result bit for bit.
// That invariant is load-bearing for chunked inference; do not swap these for
// a BLAS call.

/// Y[M,N] += A[M,K] * B[K,N]
inline void gemm_nn(int64_t M, int64_t N, int64_t K,
                    const double* A, const double* B, double* Y) {
    constexpr int64_t TI = 4;  // row tile, reuses the B panel
    int64_t i = 0;
    for (; i + TI <= M; i += TI) {
        for (int64_t k = 0; k < K; ++k) {
            const double a0 = A[(i + 0) * K + k];
            const double a1 = A[(i + 1) * K + k];
            const double a2 = A[(i + 2) * K + k];
            const double a3 = A[(i + 3) * K + k];
            const double* __restrict__ b = B + k * N;
            double* __restrict__ y0 = Y + (i + 0) * N;
            double* __restrict__ y1 = Y + (i + 1) * N;
            double* __restrict__ y2 = Y + (i + 2) * N;
            double* __restrict__ y3 = Y + (i + 3) * N;
            for (int64_t j = 0; j < N; ++j) {
                y0[j] += a0 * b[j];
                y1[j] += a1 * b[j];
                y2[j] += a2 * b[j];
                y3[j] += a3 * b[j];
            }
        }
    }
    for (; i < M; ++i) {
        for (int64_t k = 0; k < K; ++k) {
            const double a = A[i * K + k];
            const double* __restrict__ b = B + k * N;
            double* __restrict__ y = Y + i * N;
            for (int64_t j = 0; j < N; ++j) y[j] += a * b[j];
        }
    }
}

/// Y[M,N] += A[K,M]^T * B[K,N]
inline void gemm_tn(int64_t M, int64_t N, int64_t K,
                    const double* A, const double* B, double* Y) {
    for (int64_t k = 0; k < K; ++k) {
        const double* __restrict__ arow = A + k * M;
        const double* __restrict__ brow = B + k * N;
        for (int64_t m = 0; m < M; ++m) {
            const double a = arow[m];
            double* __restrict__ y = Y + m * N;
            for (int64_t j = 0; j < N; ++j) y[j] += a * brow[j];
        }
    }
}

/// Y[M,N] += A[M,K] * B[N,K]^T
inline void gemm_nt(int64_t M, int64_t N, int64_t K,
                    const double* A, const double* B, double* Y) {
    for (int64_t i = 0; i < M; ++i) {
        const double* __restrict__ a = A + i * K;
        double* __restrict__ y = Y + i * N;
        for (int64_t j = 0; j < N; ++j) {
            const double* __restrict__ b = B + j * K;
            double s = 0.0;
            for (int64_t k = 0; k < K; ++k) s += a[k] * b[k];
            y[j] += s;
        }
    }
}

}  // namespace detail
}  // namespace jiif

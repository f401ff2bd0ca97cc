#include <catch2/catch_amalgamated.hpp>

#include <stdexcept>
#include <vector>

#include "jiif/rng.hpp"
#include "jiif/tensor.hpp"

using jiif::Rng;
using jiif::Tensor;
using Catch::Matchers::WithinAbs;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

// Straightforward reference product, no tiling, used as the oracle.
void naive_gemm(int64_t M, int64_t N, int64_t K, const double* A, const double* B,
                double* Y, bool ta, bool tb) {
    for (int64_t i = 0; i < M; ++i)
        for (int64_t j = 0; j < N; ++j) {
            double acc = 0.0;
            for (int64_t k = 0; k < K; ++k) {
                double a = ta ? A[k * M + i] : A[i * K + k];
                double b = tb ? B[j * K + k] : B[k * N + j];
                acc += a * b;
            }
            Y[i * N + j] += acc;
        }
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4});
    REQUIRE(t.numel() == 24);
    REQUIRE(t.ndim() == 3);
    REQUIRE(t.dim(0) == 2);
    REQUIRE(t.dim(2) == 4);
    for (int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == 0.0);
}

TEST_CASE("tensor 2d and 3d indexing is row-major") {
    Tensor m({2, 3});
    m.at(1, 2) = 7.0;
    REQUIRE(m[5] == 7.0);
    Tensor v({2, 2, 3});
    v.at(1, 0, 2) = 9.0;
    REQUIRE(v[8] == 9.0);
}

TEST_CASE("tensor scalar and from helpers") {
    Tensor s = Tensor::scalar(3.5);
    REQUIRE(s.numel() == 1);
    REQUIRE(s[0] == 3.5);
    Tensor f = Tensor::from({2, 2}, {1, 2, 3, 4});
    REQUIRE(f.at(1, 0) == 3.0);
}

TEST_CASE("reshape preserves data and rejects bad sizes") {
    Tensor f = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = f.reshaped({3, 2});
    REQUIRE(r.at(2, 1) == 6.0);
    REQUIRE_THROWS_AS(f.reshaped({4, 2}), std::invalid_argument);
}

TEST_CASE("gemm_nn matches a hand-computed product") {
    // [1 2; 3 4] x [5 6; 7 8] = [19 22; 43 50]
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
    Tensor y({2, 2});
    jiif::detail::gemm_nn(2, 2, 2, a.data(), b.data(), y.data());
    REQUIRE(y.at(0, 0) == 19.0);
    REQUIRE(y.at(0, 1) == 22.0);
    REQUIRE(y.at(1, 0) == 43.0);
    REQUIRE(y.at(1, 1) == 50.0);
}

TEST_CASE("gemm_nn accumulates into the output") {
    Tensor a = Tensor::from({1, 1}, {2});
    Tensor b = Tensor::from({1, 1}, {3});
    Tensor y({1, 1});
    y[0] = 10.0;
    jiif::detail::gemm_nn(1, 1, 1, a.data(), b.data(), y.data());
    REQUIRE(y[0] == 16.0);
}

TEST_CASE("gemm kernels agree with the naive oracle on awkward sizes") {
    Rng rng(31);
    // Sizes straddle the row-tile width and exercise remainder paths.
    for (auto [M, N, K] : {std::tuple<int64_t, int64_t, int64_t>{1, 1, 1},
                           {3, 5, 7},
                           {4, 4, 4},
                           {5, 2, 9},
                           {8, 17, 3},
                           {13, 1, 13}}) {
        Tensor A = random_tensor({M, K}, rng);
        Tensor B = random_tensor({K, N}, rng);
        Tensor y({M, N}), ref({M, N});
        jiif::detail::gemm_nn(M, N, K, A.data(), B.data(), y.data());
        naive_gemm(M, N, K, A.data(), B.data(), ref.data(), false, false);
        for (int64_t i = 0; i < y.numel(); ++i) REQUIRE_THAT(y[i], WithinAbs(ref[i], 1e-12));

        Tensor At = random_tensor({K, M}, rng);
        Tensor y2({M, N}), ref2({M, N});
        jiif::detail::gemm_tn(M, N, K, At.data(), B.data(), y2.data());
        naive_gemm(M, N, K, At.data(), B.data(), ref2.data(), true, false);
        for (int64_t i = 0; i < y2.numel(); ++i) REQUIRE_THAT(y2[i], WithinAbs(ref2[i], 1e-12));

        Tensor Bt = random_tensor({N, K}, rng);
        Tensor y3({M, N}), ref3({M, N});
        jiif::detail::gemm_nt(M, N, K, A.data(), Bt.data(), y3.data());
        naive_gemm(M, N, K, A.data(), Bt.data(), ref3.data(), false, true);
        for (int64_t i = 0; i < y3.numel(); ++i) REQUIRE_THAT(y3[i], WithinAbs(ref3[i], 1e-12));
    }
}

TEST_CASE("gemm_nn result does not depend on how rows are batched") {
    // Computing a tall product in one call must equal computing it in
    // arbitrary horizontal slices; full-resolution decoding relies on this.
    Rng rng(37);
    const int64_t M = 23, N = 6, K = 11;
    Tensor A = random_tensor({M, K}, rng);
    Tensor B = random_tensor({K, N}, rng);
    Tensor whole({M, N});
    jiif::detail::gemm_nn(M, N, K, A.data(), B.data(), whole.data());
    for (int64_t chunk : {1, 2, 5, 7, 23}) {
        Tensor pieces({M, N});
        for (int64_t r0 = 0; r0 < M; r0 += chunk) {
            const int64_t rows = std::min(chunk, M - r0);
            jiif::detail::gemm_nn(rows, N, K, A.data() + r0 * K, B.data(),
                                  pieces.data() + r0 * N);
        }
        for (int64_t i = 0; i < whole.numel(); ++i) REQUIRE(whole[i] == pieces[i]);
    }
}

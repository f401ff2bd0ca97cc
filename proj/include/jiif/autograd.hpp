#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "jiif/errors.hpp"
#include "jiif/tensor.hpp"

namespace jiif::ag {

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in the computation graph. Backward functions read this node's
/// gradient and accumulate into the parents' gradients.
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.numel() == 0) grad = Tensor(value.shape());
    }
    void accumulate(const Tensor& g) {
        ensure_grad();
        double* dst = grad.data();
        const double* src = g.data();
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
    }
};

namespace detail_ag {
inline bool& no_grad_flag() {
    thread_local bool flag = false;
    return flag;
}
}  // namespace detail_ag

/// Scope that suppresses graph construction (inference mode).
struct NoGradGuard {
    NoGradGuard() : prev_(detail_ag::no_grad_flag()) { detail_ag::no_grad_flag() = true; }
    ~NoGradGuard() { detail_ag::no_grad_flag() = prev_; }

private:
    bool prev_;
};

inline Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && !detail_ag::no_grad_flag();
    return n;
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }
inline Var parameter(Tensor value) { return leaf(std::move(value), true); }

namespace detail_ag {

inline Var make_result(Tensor value, std::vector<Var> parents,
                       std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool rg = false;
    if (!no_grad_flag())
        for (const Var& p : parents) rg = rg || p->requires_grad;
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

}  // namespace detail_ag

// ---------------------------------------------------------------------------
// Elementwise ops

inline Var add(const Var& a, const Var& b) {
    require(a->value.same_shape(b->value), "ag::add: shape mismatch");
    Tensor out = a->value;
    const double* bp = b->value.data();
    double* op = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) op[i] += bp[i];
    return detail_ag::make_result(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad);
    });
}

inline Var sub(const Var& a, const Var& b) {
    require(a->value.same_shape(b->value), "ag::sub: shape mismatch");
    Tensor out = a->value;
    const double* bp = b->value.data();
    double* op = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) op[i] -= bp[i];
    return detail_ag::make_result(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            Node& p = *n.parents[1];
            p.ensure_grad();
            double* dst = p.grad.data();
            const double* g = n.grad.data();
            for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] -= g[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    require(a->value.same_shape(b->value), "ag::mul: shape mismatch");
    Tensor out = a->value;
    const double* bp = b->value.data();
    double* op = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) op[i] *= bp[i];
    return detail_ag::make_result(std::move(out), {a, b}, [](Node& n) {
        const double* g = n.grad.data();
        if (n.parents[0]->requires_grad) {
            Node& p = *n.parents[0];
            p.ensure_grad();
            double* dst = p.grad.data();
            const double* other = n.parents[1]->value.data();
            for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += g[i] * other[i];
        }
        if (n.parents[1]->requires_grad) {
            Node& p = *n.parents[1];
            p.ensure_grad();
            double* dst = p.grad.data();
            const double* other = n.parents[0]->value.data();
            for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += g[i] * other[i];
        }
    });
}

inline Var scale(const Var& a, double s) {
    Tensor out = a->value;
    double* op = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) op[i] *= s;
    return detail_ag::make_result(std::move(out), {a}, [s](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = n.grad.data();
        for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += s * g[i];
    });
}

inline Var relu(const Var& a) {
    Tensor out = a->value;
    double* op = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) op[i] = op[i] > 0.0 ? op[i] : 0.0;
    return detail_ag::make_result(std::move(out), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = n.grad.data();
        const double* x = p.value.data();
        for (int64_t i = 0; i < n.grad.numel(); ++i)
            if (x[i] > 0.0) dst[i] += g[i];
    });
}

// ---------------------------------------------------------------------------
// Matrix ops

/// [M,K] x [K,N] -> [M,N]
inline Var matmul(const Var& a, const Var& b) {
    require(a->value.ndim() == 2 && b->value.ndim() == 2 && a->value.dim(1) == b->value.dim(0),
            "ag::matmul: incompatible shapes " + a->value.shape_str() + " x " + b->value.shape_str());
    const int64_t M = a->value.dim(0), K = a->value.dim(1), N = b->value.dim(1);
    Tensor out({M, N});
    detail::gemm_nn(M, N, K, a->value.data(), b->value.data(), out.data());
    return detail_ag::make_result(std::move(out), {a, b}, [M, K, N](Node& n) {
        if (n.parents[0]->requires_grad) {
            Node& p = *n.parents[0];
            p.ensure_grad();
            // dA += dY * B^T
            detail::gemm_nt(M, K, N, n.grad.data(), n.parents[1]->value.data(), p.grad.data());
        }
        if (n.parents[1]->requires_grad) {
            Node& p = *n.parents[1];
            p.ensure_grad();
            // dB += A^T * dY
            detail::gemm_tn(K, N, M, n.parents[0]->value.data(), n.grad.data(), p.grad.data());
        }
    });
}

/// Add vector v[C] to every row of m[N,C] (linear-layer bias).
inline Var add_rowvec(const Var& m, const Var& v) {
    require(m->value.ndim() == 2 && v->value.numel() == m->value.dim(1),
            "ag::add_rowvec: shape mismatch");
    const int64_t N = m->value.dim(0), C = m->value.dim(1);
    Tensor out = m->value;
    double* op = out.data();
    const double* vp = v->value.data();
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < C; ++j) op[i * C + j] += vp[j];
    return detail_ag::make_result(std::move(out), {m, v}, [N, C](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            Node& p = *n.parents[1];
            p.ensure_grad();
            double* dst = p.grad.data();
            const double* g = n.grad.data();
            for (int64_t i = 0; i < N; ++i)
                for (int64_t j = 0; j < C; ++j) dst[j] += g[i * C + j];
        }
    });
}

/// Add b[R] to every element of row r of m[R,C] (conv bias over a plane).
inline Var add_bias_rows(const Var& m, const Var& b) {
    require(m->value.ndim() == 2 && b->value.numel() == m->value.dim(0),
            "ag::add_bias_rows: shape mismatch");
    const int64_t R = m->value.dim(0), C = m->value.dim(1);
    Tensor out = m->value;
    double* op = out.data();
    const double* bp = b->value.data();
    for (int64_t r = 0; r < R; ++r) {
        const double bv = bp[r];
        for (int64_t j = 0; j < C; ++j) op[r * C + j] += bv;
    }
    return detail_ag::make_result(std::move(out), {m, b}, [R, C](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            Node& p = *n.parents[1];
            p.ensure_grad();
            double* dst = p.grad.data();
            const double* g = n.grad.data();
            for (int64_t r = 0; r < R; ++r) {
                double s = 0.0;
                for (int64_t j = 0; j < C; ++j) s += g[r * C + j];
                dst[r] += s;
            }
        }
    });
}

inline Var transpose(const Var& a) {
    require(a->value.ndim() == 2, "ag::transpose: expected a matrix");
    const int64_t R = a->value.dim(0), C = a->value.dim(1);
    Tensor out({C, R});
    const double* ap = a->value.data();
    double* op = out.data();
    for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c) op[c * R + r] = ap[r * C + c];
    return detail_ag::make_result(std::move(out), {a}, [R, C](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = n.grad.data();
        for (int64_t r = 0; r < R; ++r)
            for (int64_t c = 0; c < C; ++c) dst[r * C + c] += g[c * R + r];
    });
}

inline Var reshape(const Var& a, std::vector<int64_t> shape) {
    Tensor out = a->value.reshaped(std::move(shape));
    return detail_ag::make_result(std::move(out), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = n.grad.data();
        for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += g[i];
    });
}

inline Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "ag::concat_cols: no inputs");
    const int64_t N = parts[0]->value.dim(0);
    int64_t F = 0;
    for (const Var& p : parts) {
        require(p->value.ndim() == 2 && p->value.dim(0) == N, "ag::concat_cols: row mismatch");
        F += p->value.dim(1);
    }
    Tensor out({N, F});
    double* op = out.data();
    int64_t off = 0;
    for (const Var& p : parts) {
        const int64_t Fi = p->value.dim(1);
        const double* src = p->value.data();
        for (int64_t i = 0; i < N; ++i)
            std::copy(src + i * Fi, src + (i + 1) * Fi, op + i * F + off);
        off += Fi;
    }
    return detail_ag::make_result(std::move(out), parts, [N, F](Node& n) {
        int64_t off = 0;
        const double* g = n.grad.data();
        for (const Var& p : n.parents) {
            const int64_t Fi = p->value.dim(1);
            if (p->requires_grad) {
                p->ensure_grad();
                double* dst = p->grad.data();
                for (int64_t i = 0; i < N; ++i)
                    for (int64_t j = 0; j < Fi; ++j) dst[i * Fi + j] += g[i * F + off + j];
            }
            off += Fi;
        }
    });
}

inline Var slice_cols(const Var& a, int64_t lo, int64_t hi) {
    require(a->value.ndim() == 2 && lo >= 0 && hi <= a->value.dim(1) && lo < hi,
            "ag::slice_cols: bad range");
    const int64_t N = a->value.dim(0), F = a->value.dim(1), W = hi - lo;
    Tensor out({N, W});
    const double* ap = a->value.data();
    double* op = out.data();
    for (int64_t i = 0; i < N; ++i)
        std::copy(ap + i * F + lo, ap + i * F + hi, op + i * W);
    return detail_ag::make_result(std::move(out), {a}, [N, F, W, lo](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = n.grad.data();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t j = 0; j < W; ++j) dst[i * F + lo + j] += g[i * W + j];
    });
}

// ---------------------------------------------------------------------------
// Gather ops (map is [C, K]; the gathered axis is flattened space)

inline Var gather_cols(const Var& map, std::vector<int64_t> idx) {
    require(map->value.ndim() >= 2, "ag::gather_cols: expected [C,...]");
    const int64_t C = map->value.dim(0);
    const int64_t K = map->value.numel() / C;
    const int64_t n = static_cast<int64_t>(idx.size());
    Tensor out({n, C});
    const double* mp = map->value.data();
    double* op = out.data();
    for (int64_t i = 0; i < n; ++i) {
        const int64_t f = idx[static_cast<size_t>(i)];
        JIIF_DASSERT(f >= 0 && f < K, "gather_cols: index out of range");
        for (int64_t c = 0; c < C; ++c) op[i * C + c] = mp[c * K + f];
    }
    return detail_ag::make_result(std::move(out), {map}, [C, K, n, idx = std::move(idx)](Node& nn) {
        Node& p = *nn.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = nn.grad.data();
        for (int64_t i = 0; i < n; ++i) {
            const int64_t f = idx[static_cast<size_t>(i)];
            for (int64_t c = 0; c < C; ++c) dst[c * K + f] += g[i * C + c];
        }
    });
}

/// out[i,:] = sum_t w[i,t] * map[:, idx[i,t]] — a fixed-weight sparse sample
/// (bicubic feature lookup). Weights are constants, not graph inputs.
inline Var weighted_gather_cols(const Var& map, std::vector<int64_t> idx, Tensor w) {
    require(map->value.ndim() >= 2, "ag::weighted_gather_cols: expected [C,...]");
    require(w.ndim() == 2 && static_cast<int64_t>(idx.size()) == w.numel(),
            "ag::weighted_gather_cols: index/weight mismatch");
    const int64_t C = map->value.dim(0);
    const int64_t K = map->value.numel() / C;
    const int64_t n = w.dim(0), T = w.dim(1);
    Tensor out({n, C});
    const double* mp = map->value.data();
    const double* wp = w.data();
    double* op = out.data();
    for (int64_t i = 0; i < n; ++i) {
        double* dst = op + i * C;
        for (int64_t t = 0; t < T; ++t) {
            const int64_t f = idx[static_cast<size_t>(i * T + t)];
            JIIF_DASSERT(f >= 0 && f < K, "weighted_gather_cols: index out of range");
            const double wv = wp[i * T + t];
            const double* src = mp;
            for (int64_t c = 0; c < C; ++c) dst[c] += wv * src[c * K + f];
        }
    }
    return detail_ag::make_result(
        std::move(out), {map},
        [C, K, n, T, idx = std::move(idx), w = std::move(w)](Node& nn) {
            Node& p = *nn.parents[0];
            p.ensure_grad();
            double* dst = p.grad.data();
            const double* g = nn.grad.data();
            const double* wp = w.data();
            for (int64_t i = 0; i < n; ++i) {
                const double* gi = g + i * C;
                for (int64_t t = 0; t < T; ++t) {
                    const int64_t f = idx[static_cast<size_t>(i * T + t)];
                    const double wv = wp[i * T + t];
                    for (int64_t c = 0; c < C; ++c) dst[c * K + f] += wv * gi[c];
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Reductions and row-wise ops

/// Row-wise softmax of [N,M], stabilized by the row maximum.
inline Var softmax_rows(const Var& a) {
    require(a->value.ndim() == 2, "ag::softmax_rows: expected a matrix");
    const int64_t N = a->value.dim(0), M = a->value.dim(1);
    Tensor out = a->value;
    double* op = out.data();
    for (int64_t i = 0; i < N; ++i) {
        double* row = op + i * M;
        double mx = row[0];
        for (int64_t j = 1; j < M; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < M; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        require(std::isfinite(sum) && sum > 0.0, "softmax: non-finite logit row");
        for (int64_t j = 0; j < M; ++j) row[j] /= sum;
    }
    return detail_ag::make_result(std::move(out), {a}, [N, M](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = n.grad.data();
        const double* y = n.value.data();
        for (int64_t i = 0; i < N; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < M; ++j) dot += g[i * M + j] * y[i * M + j];
            for (int64_t j = 0; j < M; ++j)
                dst[i * M + j] += y[i * M + j] * (g[i * M + j] - dot);
        }
    });
}

/// [N,M] -> [N,1]
inline Var row_sum(const Var& a) {
    require(a->value.ndim() == 2, "ag::row_sum: expected a matrix");
    const int64_t N = a->value.dim(0), M = a->value.dim(1);
    Tensor out({N, 1});
    const double* ap = a->value.data();
    double* op = out.data();
    for (int64_t i = 0; i < N; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < M; ++j) s += ap[i * M + j];
        op[i] = s;
    }
    return detail_ag::make_result(std::move(out), {a}, [N, M](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* g = n.grad.data();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t j = 0; j < M; ++j) dst[i * M + j] += g[i];
    });
}

/// Mean absolute value, the L1 objective. Subgradient 0 at exact zeros.
inline Var mean_abs(const Var& a) {
    const int64_t n = a->value.numel();
    require(n > 0, "ag::mean_abs: empty input");
    double s = 0.0;
    const double* ap = a->value.data();
    for (int64_t i = 0; i < n; ++i) s += std::fabs(ap[i]);
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    return detail_ag::make_result(std::move(out), {a}, [n](Node& nn) {
        Node& p = *nn.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double* x = p.value.data();
        const double g = nn.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i)
            dst[i] += x[i] > 0.0 ? g : (x[i] < 0.0 ? -g : 0.0);
    });
}

inline Var sum(const Var& a) {
    double s = 0.0;
    const double* ap = a->value.data();
    for (int64_t i = 0; i < a->value.numel(); ++i) s += ap[i];
    return detail_ag::make_result(Tensor::scalar(s), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        double* dst = p.grad.data();
        const double g = n.grad[0];
        for (int64_t i = 0; i < p.grad.numel(); ++i) dst[i] += g;
    });
}

// ---------------------------------------------------------------------------
// Convolution

namespace detail_ag {

inline void im2col(const double* x, int64_t C, int64_t H, int64_t W, int64_t k,
                   int64_t pad, double* cols) {
    const int64_t HW = H * W;
    int64_t r = 0;
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ky = 0; ky < k; ++ky) {
            for (int64_t kx = 0; kx < k; ++kx, ++r) {
                double* dst = cols + r * HW;
                for (int64_t y = 0; y < H; ++y) {
                    const int64_t iy = y + ky - pad;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst + y * W, dst + (y + 1) * W, 0.0);
                        continue;
                    }
                    const double* src = x + (c * H + iy) * W;
                    for (int64_t xx = 0; xx < W; ++xx) {
                        const int64_t ix = xx + kx - pad;
                        dst[y * W + xx] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

inline void col2im_add(const double* cols, int64_t C, int64_t H, int64_t W, int64_t k,
                       int64_t pad, double* dx) {
    const int64_t HW = H * W;
    int64_t r = 0;
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ky = 0; ky < k; ++ky) {
            for (int64_t kx = 0; kx < k; ++kx, ++r) {
                const double* src = cols + r * HW;
                for (int64_t y = 0; y < H; ++y) {
                    const int64_t iy = y + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    double* dst = dx + (c * H + iy) * W;
                    for (int64_t xx = 0; xx < W; ++xx) {
                        const int64_t ix = xx + kx - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[y * W + xx];
                    }
                }
            }
        }
    }
}

}  // namespace detail_ag

/// Same-size 2-D convolution: x [Cin,H,W], w [Cout, Cin*k*k], b [Cout],
/// stride 1, zero padding k/2. The im2col buffer is rebuilt in the backward
/// pass instead of being cached across the step.
inline Var conv2d(const Var& x, const Var& w, const Var& b, int64_t k) {
    require(x->value.ndim() == 3, "ag::conv2d: input must be [C,H,W]");
    const int64_t Cin = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
    require(w->value.ndim() == 2 && w->value.dim(1) == Cin * k * k,
            "ag::conv2d: weight must be [Cout, Cin*k*k]");
    const int64_t Cout = w->value.dim(0);
    require(b->value.numel() == Cout, "ag::conv2d: bias size mismatch");
    require(k % 2 == 1, "ag::conv2d: kernel size must be odd");
    const int64_t pad = k / 2;
    const int64_t HW = H * W;

    Tensor cols({Cin * k * k, HW});
    detail_ag::im2col(x->value.data(), Cin, H, W, k, pad, cols.data());
    Tensor out({Cout, H, W});
    detail::gemm_nn(Cout, HW, Cin * k * k, w->value.data(), cols.data(), out.data());
    double* op = out.data();
    const double* bp = b->value.data();
    for (int64_t co = 0; co < Cout; ++co) {
        const double bv = bp[co];
        for (int64_t p = 0; p < HW; ++p) op[co * HW + p] += bv;
    }

    return detail_ag::make_result(
        std::move(out), {x, w, b}, [Cin, Cout, H, W, k, pad, HW](Node& n) {
            const Var& x = n.parents[0];
            const Var& w = n.parents[1];
            const Var& b = n.parents[2];
            Tensor cols({Cin * k * k, HW});
            detail_ag::im2col(x->value.data(), Cin, H, W, k, pad, cols.data());
            if (w->requires_grad) {
                w->ensure_grad();
                detail::gemm_nt(Cout, Cin * k * k, HW, n.grad.data(), cols.data(),
                                w->grad.data());
            }
            if (b->requires_grad) {
                b->ensure_grad();
                double* dst = b->grad.data();
                const double* g = n.grad.data();
                for (int64_t co = 0; co < Cout; ++co) {
                    double s = 0.0;
                    for (int64_t p = 0; p < HW; ++p) s += g[co * HW + p];
                    dst[co] += s;
                }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                Tensor dcols({Cin * k * k, HW});
                detail::gemm_tn(Cin * k * k, HW, Cout, w->value.data(), n.grad.data(),
                                dcols.data());
                detail_ag::col2im_add(dcols.data(), Cin, H, W, k, pad, x->grad.data());
            }
        });
}

// ---------------------------------------------------------------------------
// Backward pass

/// Reverse-mode sweep from a scalar root. Gradients accumulate into each
/// reachable node's `grad`; call `zero_grad` on parameters between steps.
inline void backward(const Var& root) {
    require(root->value.numel() == 1, "ag::backward: root must be scalar");
    if (!root->requires_grad) return;

    // Iterative post-order DFS for the topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    // Interior grads are scratch for this sweep only; leaf grads accumulate
    // across sweeps until zero_grad.
    for (Node* n : order)
        if (n->backward_fn && n->grad.numel() > 0) n->grad.fill(0.0);

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.numel() > 0) n->backward_fn(*n);
    }
}

inline void zero_grad(const std::vector<Var>& params) {
    for (const Var& p : params)
        if (p->grad.numel() > 0) p->grad.fill(0.0);
}

}  // namespace jiif::ag

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "fstack/rng.hpp"
#include "fstack/tensor.hpp"

namespace fstack::nn {

// ---------------------------------------------------------------------------
// GEMM kernels. Plain row-major loops with light register blocking; the
// compiler vectorizes the contiguous inner loops.

namespace detail {

/// C[M,N] += A[M,K] * B[K,N]. Four C rows stay hot per pass over a B row;
/// the contiguous inner loop auto-vectorizes.
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C) {
    constexpr int MR = 4;
    int m = 0;
    for (; m + MR <= M; m += MR) {
        for (int k = 0; k < K; ++k) {
            const T a0 = A[static_cast<std::size_t>(m + 0) * K + k];
            const T a1 = A[static_cast<std::size_t>(m + 1) * K + k];
            const T a2 = A[static_cast<std::size_t>(m + 2) * K + k];
            const T a3 = A[static_cast<std::size_t>(m + 3) * K + k];
            const T* __restrict__ b = B + static_cast<std::size_t>(k) * N;
            T* __restrict__ c0 = C + static_cast<std::size_t>(m + 0) * N;
            T* __restrict__ c1 = C + static_cast<std::size_t>(m + 1) * N;
            T* __restrict__ c2 = C + static_cast<std::size_t>(m + 2) * N;
            T* __restrict__ c3 = C + static_cast<std::size_t>(m + 3) * N;
            for (int n = 0; n < N; ++n) {
                c0[n] += a0 * b[n];
                c1[n] += a1 * b[n];
                c2[n] += a2 * b[n];
                c3[n] += a3 * b[n];
            }
        }
    }
    for (; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            const T a = A[static_cast<std::size_t>(m) * K + k];
            const T* __restrict__ b = B + static_cast<std::size_t>(k) * N;
            T* __restrict__ c = C + static_cast<std::size_t>(m) * N;
            for (int n = 0; n < N; ++n) c[n] += a * b[n];
        }
    }
}

/// out[N,M] = in[M,N]^T
template <typename T>
void transpose(int M, int N, const T* in, T* out) {
    constexpr int B = 32;
    for (int mb = 0; mb < M; mb += B) {
        const int me = std::min(M, mb + B);
        for (int nb = 0; nb < N; nb += B) {
            const int ne = std::min(N, nb + B);
            for (int m = mb; m < me; ++m) {
                for (int n = nb; n < ne; ++n) {
                    out[static_cast<std::size_t>(n) * M + m] =
                        in[static_cast<std::size_t>(m) * N + n];
                }
            }
        }
    }
}

/// Unfolds x[C,H,W] into col[C*9, H*W] for a 3x3 kernel with zero padding 1.
template <typename T>
void im2col3x3(const TensorT<T>& x, std::vector<T>& col) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    col.assign(static_cast<std::size_t>(C) * 9 * H * W, T{0});
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const std::size_t row =
                    (static_cast<std::size_t>(c) * 3 + ky) * 3 + kx;
                T* dst_base = col.data() + row * H * W;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;  // stays zero
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(W, W + 1 - kx);
                    if (x0 >= x1) continue;
                    const T* src =
                        x.data.data() +
                        (static_cast<std::size_t>(c) * H + sy) * W + (x0 + kx - 1);
                    std::memcpy(dst_base + static_cast<std::size_t>(y) * W + x0,
                                src, static_cast<std::size_t>(x1 - x0) * sizeof(T));
                }
            }
        }
    }
}

/// Scatter-add of col gradients back into dx[C,H,W]; inverse of im2col3x3.
template <typename T>
void col2im3x3(const std::vector<T>& col, TensorT<T>& dx) {
    const int C = dx.dim(0), H = dx.dim(1), W = dx.dim(2);
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const std::size_t row =
                    (static_cast<std::size_t>(c) * 3 + ky) * 3 + kx;
                const T* src_base = col.data() + row * H * W;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(W, W + 1 - kx);
                    T* dst = dx.data.data() +
                             (static_cast<std::size_t>(c) * H + sy) * W + (kx - 1);
                    const T* src = src_base + static_cast<std::size_t>(y) * W;
                    for (int xx = x0; xx < x1; ++xx) dst[xx] += src[xx];
                }
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Layer primitives

/// 3x3 cross-correlation, zero padding 1, stride 1; spatial size preserved.
/// x: [C,H,W], w: [F,C,3,3], b: [F] -> [F,H,W]. col_out, when given, keeps
/// the unfolded input for the backward pass.
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w,
                          const TensorT<T>& b,
                          std::vector<T>* col_out = nullptr) {
    if (x.shape.size() != 3 || w.shape.size() != 4 || w.dim(2) != 3 ||
        w.dim(3) != 3) {
        throw ShapeError("conv2d expects x[C,H,W] and w[F,C,3,3]");
    }
    if (w.dim(1) != x.dim(0)) {
        throw ShapeError("conv2d channel mismatch: x has " +
                         std::to_string(x.dim(0)) + ", w expects " +
                         std::to_string(w.dim(1)));
    }
    if (b.numel() != static_cast<std::size_t>(w.dim(0))) {
        throw ShapeError("conv2d bias length must equal filter count");
    }
    const int F = w.dim(0), H = x.dim(1), W = x.dim(2);
    const int K = x.dim(0) * 9;
    std::vector<T> local_col;
    std::vector<T>& col = col_out ? *col_out : local_col;
    detail::im2col3x3(x, col);
    TensorT<T> y = TensorT<T>::zeros({F, H, W});
    detail::gemm_nn(F, H * W, K, w.data.data(), col.data(), y.data.data());
    for (int f = 0; f < F; ++f) {
        T* __restrict__ row = y.data.data() + static_cast<std::size_t>(f) * H * W;
        const T bias = b.data[static_cast<std::size_t>(f)];
        for (int i = 0; i < H * W; ++i) row[i] += bias;
    }
    return y;
}

/// Reverse-mode conv gradients. dx is overwritten; dw and db accumulate so a
/// batch can sum gradients in example order. cached_col, when given, must be
/// the unfold of x from the forward pass.
template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w,
                     const TensorT<T>& dy, TensorT<T>* dx, TensorT<T>* dw,
                     TensorT<T>* db, const std::vector<T>* cached_col = nullptr) {
    const int F = w.dim(0), C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int K = C * 9;
    const int HW = H * W;

    if (db) {
        for (int f = 0; f < F; ++f) {
            const T* row = dy.data.data() + static_cast<std::size_t>(f) * HW;
            T acc{0};
            for (int i = 0; i < HW; ++i) acc += row[i];
            db->data[static_cast<std::size_t>(f)] += acc;
        }
    }
    std::vector<T> col;
    if (dw) {
        if (!cached_col) detail::im2col3x3(x, col);
        const std::vector<T>& unfold = cached_col ? *cached_col : col;
        // dw = dy * col^T, run as gemm_nn on the transposed unfold so the
        // inner loop stays contiguous (a plain dot-product reduction does not
        // vectorize under strict FP rules).
        std::vector<T> colt(unfold.size());
        detail::transpose(K, HW, unfold.data(), colt.data());
        detail::gemm_nn(F, K, HW, dy.data.data(), colt.data(), dw->data.data());
    }
    if (dx) {
        // W^T [K,F], then dcol = W^T * dy
        std::vector<T> wt(static_cast<std::size_t>(K) * F);
        for (int f = 0; f < F; ++f) {
            for (int k = 0; k < K; ++k) {
                wt[static_cast<std::size_t>(k) * F + f] =
                    w.data[static_cast<std::size_t>(f) * K + k];
            }
        }
        std::vector<T> dcol(static_cast<std::size_t>(K) * HW, T{0});
        detail::gemm_nn(K, HW, F, wt.data(), dy.data.data(), dcol.data());
        *dx = TensorT<T>::zeros({C, H, W});
        detail::col2im3x3(dcol, *dx);
    }
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (T& v : y.data) v = v > T{0} ? v : T{0};
    return y;
}

/// dx from the post-activation value: the subgradient at 0 is 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& y_post, const TensorT<T>& dy) {
    TensorT<T> dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        if (!(y_post.data[i] > T{0})) dx.data[i] = T{0};
    }
    return dx;
}

/// 2x2 max pooling, stride 2. Requires even spatial dims. argmax records the
/// winning offset (0..3, row-major within the window; ties keep the first).
template <typename T>
TensorT<T> maxpool2x2_forward(const TensorT<T>& x,
                              std::vector<std::uint8_t>* argmax) {
    if (x.shape.size() != 3 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
        throw ShapeError("maxpool2x2 needs even spatial dims, got " +
                         x.shape_str());
    }
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    TensorT<T> y = TensorT<T>::zeros({C, H / 2, W / 2});
    if (argmax) argmax->assign(y.numel(), 0);
    std::size_t oi = 0;
    for (int c = 0; c < C; ++c) {
        const T* plane = x.data.data() + static_cast<std::size_t>(c) * H * W;
        for (int y0 = 0; y0 < H; y0 += 2) {
            for (int x0 = 0; x0 < W; x0 += 2, ++oi) {
                T best = plane[static_cast<std::size_t>(y0) * W + x0];
                int best_k = 0;
                const T cands[3] = {
                    plane[static_cast<std::size_t>(y0) * W + x0 + 1],
                    plane[static_cast<std::size_t>(y0 + 1) * W + x0],
                    plane[static_cast<std::size_t>(y0 + 1) * W + x0 + 1]};
                for (int k = 0; k < 3; ++k) {
                    if (cands[k] > best) {
                        best = cands[k];
                        best_k = k + 1;
                    }
                }
                y.data[oi] = best;
                if (argmax) (*argmax)[oi] = static_cast<std::uint8_t>(best_k);
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> maxpool2x2_backward(const TensorT<T>& dy,
                               const std::vector<std::uint8_t>& argmax,
                               const std::vector<int>& input_shape) {
    TensorT<T> dx = TensorT<T>::zeros(input_shape);
    const int H = input_shape[1], W = input_shape[2];
    std::size_t oi = 0;
    for (int c = 0; c < input_shape[0]; ++c) {
        T* plane = dx.data.data() + static_cast<std::size_t>(c) * H * W;
        for (int y0 = 0; y0 < H; y0 += 2) {
            for (int x0 = 0; x0 < W; x0 += 2, ++oi) {
                const int k = argmax[oi];
                const int yy = y0 + (k >> 1);
                const int xx = x0 + (k & 1);
                plane[static_cast<std::size_t>(yy) * W + xx] += dy.data[oi];
            }
        }
    }
    return dx;
}

/// y = W x + b with x: [Din], W: [Dout, Din], b: [Dout].
template <typename T>
TensorT<T> dense_forward(const TensorT<T>& x, const TensorT<T>& w,
                         const TensorT<T>& b) {
    if (w.shape.size() != 2 ||
        static_cast<std::size_t>(w.dim(1)) != x.numel()) {
        throw ShapeError("dense shape mismatch: w " + w.shape_str() + ", x " +
                         x.shape_str());
    }
    const int dout = w.dim(0), din = w.dim(1);
    TensorT<T> y = TensorT<T>::zeros({dout});
    for (int o = 0; o < dout; ++o) {
        const T* __restrict__ row = w.data.data() + static_cast<std::size_t>(o) * din;
        T acc = b.data[static_cast<std::size_t>(o)];
        for (int i = 0; i < din; ++i) acc += row[i] * x.data[static_cast<std::size_t>(i)];
        y.data[static_cast<std::size_t>(o)] = acc;
    }
    return y;
}

template <typename T>
void dense_backward(const TensorT<T>& x, const TensorT<T>& w,
                    const TensorT<T>& dy, TensorT<T>* dx, TensorT<T>* dw,
                    TensorT<T>* db) {
    const int dout = w.dim(0), din = w.dim(1);
    if (dw) {
        for (int o = 0; o < dout; ++o) {
            const T g = dy.data[static_cast<std::size_t>(o)];
            T* __restrict__ row = dw->data.data() + static_cast<std::size_t>(o) * din;
            const T* __restrict__ xv = x.data.data();
            for (int i = 0; i < din; ++i) row[i] += g * xv[i];
        }
    }
    if (db) {
        for (int o = 0; o < dout; ++o) {
            db->data[static_cast<std::size_t>(o)] += dy.data[static_cast<std::size_t>(o)];
        }
    }
    if (dx) {
        *dx = TensorT<T>::zeros({din});
        for (int o = 0; o < dout; ++o) {
            const T g = dy.data[static_cast<std::size_t>(o)];
            const T* __restrict__ row = w.data.data() + static_cast<std::size_t>(o) * din;
            T* __restrict__ out = dx->data.data();
            for (int i = 0; i < din; ++i) out[i] += g * row[i];
        }
    }
}

/// Mean squared error over equal-length vectors; accumulated in double.
template <typename T>
double mse_loss(std::span<const T> predicted, std::span<const T> target) {
    if (predicted.size() != target.size()) {
        throw ShapeError("mse_loss length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = static_cast<double>(predicted[i]) - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predicted.size());
}

/// d(mse)/d(predicted) = (2/D) (predicted - target).
template <typename T>
TensorT<T> mse_grad(const TensorT<T>& predicted, std::span<const T> target) {
    if (predicted.numel() != target.size()) {
        throw ShapeError("mse_grad length mismatch");
    }
    TensorT<T> g = TensorT<T>::zeros(predicted.shape);
    const T scale = T{2} / static_cast<T>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        g.data[i] = scale * (predicted.data[i] - target[i]);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Model description

struct LayerDesc {
    enum class Kind { Conv, Pool, Flatten, Dense };
    Kind kind = Kind::Conv;
    int out = 0;        // channels (conv) or units (dense)
    bool relu = false;  // activation after the layer
};

struct ModelSpec {
    std::vector<LayerDesc> layers;
    int input_channels = 0;
    int input_height = 0;
    int input_width = 0;
    // Initial bias of the final layer. Regression targets far from zero need
    // the output to start at their scale or plain SGD spends the whole run
    // closing the offset through D-normalized gradients.
    double output_bias = 0.0;

    /// Walks the shape chain; throws ShapeError on any inconsistency (odd
    /// dims into a pool, dense before flatten, ...). Returns the output
    /// length.
    int validate() const;

    /// The 6-conv / 4-pool / 2-dense architecture: conv-conv-pool repeated to
    /// place four pools among six convs, then flatten and two dense layers
    /// (hidden ReLU, linear output). Spatial dims must be divisible by 16.
    static ModelSpec cnn6(int input_channels, int input_height, int input_width,
                          int output_dim,
                          std::array<int, 6> conv_channels = {16, 16, 32, 32, 64, 64},
                          int hidden = 256);

    std::string layer_name(std::size_t index) const;
};

// ---------------------------------------------------------------------------
// Model: parameters + forward/backward

template <typename T>
struct ModelT {
    ModelSpec spec;
    std::vector<TensorT<T>> weights;  // empty for non-parameter layers
    std::vector<TensorT<T>> biases;
    std::uint64_t rng_seed = 0;

    struct Cache {
        std::vector<TensorT<T>> inputs;   // input of each layer
        std::vector<TensorT<T>> outputs;  // post-activation output
        std::vector<std::vector<std::uint8_t>> pool_argmax;
        std::vector<std::vector<T>> conv_cols;  // unfolded conv inputs
    };

    struct Gradients {
        std::vector<TensorT<T>> weights;
        std::vector<TensorT<T>> biases;
    };

    static ModelT init(const ModelSpec& spec, std::uint64_t seed);

    Gradients zero_gradients() const;

    TensorT<T> forward(const TensorT<T>& x, Cache* cache = nullptr) const;

    /// Accumulates parameter gradients into *grads (fixed layer order), so
    /// batches sum per-example gradients by example index.
    void backward(const Cache& cache, const TensorT<T>& output_grad,
                  Gradients* grads) const;
};

/// w <- w - lr * g for every parameter.
template <typename T>
void sgd_step(ModelT<T>& model, const typename ModelT<T>::Gradients& grads,
              T lr);

using Model = ModelT<float>;

// ---------------------------------------------------------------------------
// Implementation

namespace detail {

template <typename T>
void check_finite(const TensorT<T>& t, const std::string& layer,
                  const char* direction) {
    for (const T& v : t.data) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw NumericError("non-finite value in " + layer + " during " +
                               direction);
        }
    }
}

}  // namespace detail

template <typename T>
ModelT<T> ModelT<T>::init(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelT<T> model;
    model.spec = spec;
    model.rng_seed = seed;
    Rng rng(seed);

    int c = spec.input_channels, h = spec.input_height, w = spec.input_width;
    int flat = 0;
    for (const LayerDesc& l : spec.layers) {
        TensorT<T> wt, bt;
        switch (l.kind) {
            case LayerDesc::Kind::Conv: {
                wt = TensorT<T>::zeros({l.out, c, 3, 3});
                bt = TensorT<T>::zeros({l.out});
                // ReLU layers use the fan-in rule: fan-average init shrinks
                // the signal by sqrt(2) per rectified layer, and after six of
                // them the feature pathway is too quiet to train.
                const double fan_in = c * 9, fan_out = l.out * 9;
                const double limit = l.relu
                                         ? std::sqrt(6.0 / fan_in)
                                         : std::sqrt(6.0 / (fan_in + fan_out));
                for (T& v : wt.data) v = static_cast<T>(rng.uniform(-limit, limit));
                c = l.out;
                break;
            }
            case LayerDesc::Kind::Pool:
                h /= 2;
                w /= 2;
                break;
            case LayerDesc::Kind::Flatten:
                flat = c * h * w;
                break;
            case LayerDesc::Kind::Dense: {
                wt = TensorT<T>::zeros({l.out, flat});
                bt = TensorT<T>::zeros({l.out});
                const double limit = l.relu
                                         ? std::sqrt(6.0 / flat)
                                         : std::sqrt(6.0 / (flat + l.out));
                for (T& v : wt.data) v = static_cast<T>(rng.uniform(-limit, limit));
                flat = l.out;
                break;
            }
        }
        model.weights.push_back(std::move(wt));
        model.biases.push_back(std::move(bt));
    }
    if (spec.output_bias != 0.0 && !model.biases.empty() &&
        spec.layers.back().kind == LayerDesc::Kind::Dense) {
        for (T& v : model.biases.back().data) {
            v = static_cast<T>(spec.output_bias);
        }
    }
    return model;
}

template <typename T>
typename ModelT<T>::Gradients ModelT<T>::zero_gradients() const {
    Gradients g;
    g.weights.reserve(weights.size());
    g.biases.reserve(biases.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        g.weights.push_back(weights[i].numel()
                                ? TensorT<T>::zeros(weights[i].shape)
                                : TensorT<T>{});
        g.biases.push_back(biases[i].numel() ? TensorT<T>::zeros(biases[i].shape)
                                             : TensorT<T>{});
    }
    return g;
}

template <typename T>
TensorT<T> ModelT<T>::forward(const TensorT<T>& x, Cache* cache) const {
    TensorT<T> cur = x;
    if (cache) {
        cache->inputs.clear();
        cache->outputs.clear();
        cache->pool_argmax.assign(spec.layers.size(), {});
        cache->conv_cols.assign(spec.layers.size(), {});
    }
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        if (cache) cache->inputs.push_back(cur);
        TensorT<T> next;
        switch (l.kind) {
            case LayerDesc::Kind::Conv:
                next = conv2d_forward(cur, weights[i], biases[i],
                                      cache ? &cache->conv_cols[i] : nullptr);
                // checked pre-activation: relu would mask NaN to 0
                detail::check_finite(next, spec.layer_name(i), "forward");
                if (l.relu) next = relu(next);
                break;
            case LayerDesc::Kind::Pool: {
                std::vector<std::uint8_t> argmax;
                next = maxpool2x2_forward(cur, cache ? &argmax : nullptr);
                if (cache) cache->pool_argmax[i] = std::move(argmax);
                break;
            }
            case LayerDesc::Kind::Flatten:
                next = cur;
                next.shape = {static_cast<int>(cur.numel())};
                break;
            case LayerDesc::Kind::Dense:
                next = dense_forward(cur, weights[i], biases[i]);
                detail::check_finite(next, spec.layer_name(i), "forward");
                if (l.relu) next = relu(next);
                break;
        }
        if (cache) cache->outputs.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

template <typename T>
void ModelT<T>::backward(const Cache& cache, const TensorT<T>& output_grad,
                         Gradients* grads) const {
    TensorT<T> d = output_grad;
    for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
        const LayerDesc& l = spec.layers[ii];
        const TensorT<T>& input = cache.inputs[ii];
        const TensorT<T>& output = cache.outputs[ii];
        const bool need_dx = ii > 0;  // nothing consumes the input gradient
        TensorT<T> dx;
        switch (l.kind) {
            case LayerDesc::Kind::Conv: {
                TensorT<T> dpre = l.relu ? relu_backward(output, d) : d;
                conv2d_backward(input, weights[ii], dpre, need_dx ? &dx : nullptr,
                                grads ? &grads->weights[ii] : nullptr,
                                grads ? &grads->biases[ii] : nullptr,
                                cache.conv_cols[ii].empty() ? nullptr
                                                            : &cache.conv_cols[ii]);
                break;
            }
            case LayerDesc::Kind::Pool:
                dx = maxpool2x2_backward(d, cache.pool_argmax[ii], input.shape);
                break;
            case LayerDesc::Kind::Flatten:
                dx = d;
                dx.shape = input.shape;
                break;
            case LayerDesc::Kind::Dense: {
                TensorT<T> dpre = l.relu ? relu_backward(output, d) : d;
                dense_backward(input, weights[ii], dpre, need_dx ? &dx : nullptr,
                               grads ? &grads->weights[ii] : nullptr,
                               grads ? &grads->biases[ii] : nullptr);
                break;
            }
        }
        if (!need_dx) break;
        detail::check_finite(dx, spec.layer_name(ii), "backward");
        d = std::move(dx);
    }
}

template <typename T>
void sgd_step(ModelT<T>& model, const typename ModelT<T>::Gradients& grads,
              T lr) {
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        for (std::size_t j = 0; j < model.weights[i].data.size(); ++j) {
            model.weights[i].data[j] -= lr * grads.weights[i].data[j];
        }
        for (std::size_t j = 0; j < model.biases[i].data.size(); ++j) {
            model.biases[i].data[j] -= lr * grads.biases[i].data[j];
        }
    }
}

}  // namespace fstack::nn

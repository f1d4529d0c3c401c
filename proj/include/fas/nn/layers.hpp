#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fas/tensor.hpp"

namespace fas::nn {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<MatRM<S>>;
template <typename S>
using CMapRM = Eigen::Map<const MatRM<S>>;

/// Learnable array plus its gradient and Adam moments.
template <typename S>
struct Param {
    std::string name;
    Tensor<S> value;
    Tensor<S> grad;
    Tensor<S> m;
    Tensor<S> v;

    void init_shape(std::vector<std::size_t> shape) {
        value = Tensor<S>(shape);
        grad = Tensor<S>(shape);
        m = Tensor<S>(shape);
        v = Tensor<S>(shape);
    }
    void zero_grad() { grad.zero(); }
};

template <typename S>
void he_normal_init(Tensor<S>& t, std::size_t fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
    for (auto& x : t.data) x = S(dist(rng));
}

// ---------------------------------------------------------------------------
// Conv2d: im2col + GEMM. Padding may be asymmetric (the decoder's 2x2 conv
// pads 0 top/left, 1 bottom/right to preserve spatial size after upsampling).
// ---------------------------------------------------------------------------
template <typename S>
struct Conv2d {
    std::size_t in_c = 0, out_c = 0, kh = 0, kw = 0, stride = 1;
    std::size_t pad_t = 0, pad_l = 0, pad_b = 0, pad_r = 0;
    bool has_bias = false;
    Param<S> weight;  // (out_c, in_c*kh*kw)
    Param<S> bias;    // (out_c)

    Tensor<S> x_cache;

    void init(const std::string& name, std::size_t ic, std::size_t oc, std::size_t k,
              std::size_t str, std::size_t pad, bool with_bias, std::mt19937_64& rng) {
        init_asym(name, ic, oc, k, k, str, pad, pad, pad, pad, with_bias, rng);
    }
    void init_asym(const std::string& name, std::size_t ic, std::size_t oc,
                   std::size_t kh_, std::size_t kw_, std::size_t str, std::size_t pt,
                   std::size_t pl, std::size_t pb, std::size_t pr, bool with_bias,
                   std::mt19937_64& rng) {
        in_c = ic; out_c = oc; kh = kh_; kw = kw_; stride = str;
        pad_t = pt; pad_l = pl; pad_b = pb; pad_r = pr;
        has_bias = with_bias;
        weight.name = name + ".weight";
        weight.init_shape({out_c, in_c * kh * kw});
        he_normal_init(weight.value, in_c * kh * kw, rng);
        if (has_bias) {
            bias.name = name + ".bias";
            bias.init_shape({out_c});
        }
    }

    std::size_t out_h(std::size_t h) const { return (h + pad_t + pad_b - kh) / stride + 1; }
    std::size_t out_w(std::size_t w) const { return (w + pad_l + pad_r - kw) / stride + 1; }

    std::size_t param_count() const {
        return weight.value.numel() + (has_bias ? bias.value.numel() : 0);
    }

    void im2col(const Tensor<S>& x, std::size_t n, std::vector<S>& col,
                std::size_t oh, std::size_t ow) const {
        const std::size_t h = x.shape[2], w = x.shape[3];
        const std::size_t ohw = oh * ow;
        for (std::size_t c = 0; c < in_c; ++c) {
            for (std::size_t ki = 0; ki < kh; ++ki) {
                for (std::size_t kj = 0; kj < kw; ++kj) {
                    const std::size_t row = (c * kh + ki) * kw + kj;
                    S* dst = col.data() + row * ohw;
                    for (std::size_t i = 0; i < oh; ++i) {
                        const long ih = long(i * stride + ki) - long(pad_t);
                        if (ih < 0 || ih >= long(h)) {
                            for (std::size_t j = 0; j < ow; ++j) dst[i * ow + j] = S(0);
                            continue;
                        }
                        const S* src = &x.data[((n * in_c + c) * h + std::size_t(ih)) * w];
                        for (std::size_t j = 0; j < ow; ++j) {
                            const long iw = long(j * stride + kj) - long(pad_l);
                            dst[i * ow + j] = (iw < 0 || iw >= long(w)) ? S(0) : src[iw];
                        }
                    }
                }
            }
        }
    }

    Tensor<S> forward(const Tensor<S>& x) {
        if (x.shape[1] != in_c)
            throw std::invalid_argument("conv: channel mismatch, got " + x.shape_str());
        x_cache = x;
        const std::size_t n_batch = x.shape[0];
        const std::size_t oh = out_h(x.shape[2]), ow = out_w(x.shape[3]);
        const std::size_t k = in_c * kh * kw, ohw = oh * ow;
        Tensor<S> y({n_batch, out_c, oh, ow});
        std::vector<S> col(k * ohw);
        CMapRM<S> wm(weight.value.ptr(), out_c, k);
        for (std::size_t n = 0; n < n_batch; ++n) {
            im2col(x, n, col, oh, ow);
            CMapRM<S> cm(col.data(), k, ohw);
            MapRM<S> ym(y.ptr() + n * out_c * ohw, out_c, ohw);
            ym.noalias() = wm * cm;
            if (has_bias)
                for (std::size_t c = 0; c < out_c; ++c)
                    ym.row(c).array() += bias.value.data[c];
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const Tensor<S>& x = x_cache;
        const std::size_t n_batch = x.shape[0];
        const std::size_t h = x.shape[2], w = x.shape[3];
        const std::size_t oh = dy.shape[2], ow = dy.shape[3];
        const std::size_t k = in_c * kh * kw, ohw = oh * ow;
        Tensor<S> dx(x.shape);
        std::vector<S> col(k * ohw), dcol(k * ohw);
        CMapRM<S> wm(weight.value.ptr(), out_c, k);
        MapRM<S> dwm(weight.grad.ptr(), out_c, k);
        for (std::size_t n = 0; n < n_batch; ++n) {
            im2col(x, n, col, oh, ow);
            CMapRM<S> cm(col.data(), k, ohw);
            CMapRM<S> dym(dy.ptr() + n * out_c * ohw, out_c, ohw);
            dwm.noalias() += dym * cm.transpose();
            if (has_bias)
                for (std::size_t c = 0; c < out_c; ++c)
                    bias.grad.data[c] += dym.row(c).sum();
            MapRM<S> dcm(dcol.data(), k, ohw);
            dcm.noalias() = wm.transpose() * dym;
            // col2im (scatter-add)
            for (std::size_t c = 0; c < in_c; ++c) {
                for (std::size_t ki = 0; ki < kh; ++ki) {
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const std::size_t row = (c * kh + ki) * kw + kj;
                        const S* src = dcol.data() + row * ohw;
                        for (std::size_t i = 0; i < oh; ++i) {
                            const long ih = long(i * stride + ki) - long(pad_t);
                            if (ih < 0 || ih >= long(h)) continue;
                            S* dst = &dx.data[((n * in_c + c) * h + std::size_t(ih)) * w];
                            for (std::size_t j = 0; j < ow; ++j) {
                                const long iw = long(j * stride + kj) - long(pad_l);
                                if (iw >= 0 && iw < long(w)) dst[iw] += src[i * ow + j];
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&weight);
        if (has_bias) out.push_back(&bias);
    }
};

// ---------------------------------------------------------------------------
// BatchNorm2d. Training mode uses biased batch statistics; running stats are
// updated with momentum 0.1 (unbiased variance) for inference.
// ---------------------------------------------------------------------------
template <typename S>
struct BatchNorm2d {
    std::size_t channels = 0;
    S eps = S(1e-5);
    S momentum = S(0.1);
    Param<S> gamma, beta;
    Tensor<S> running_mean, running_var;

    // caches
    Tensor<S> xhat_cache;
    std::vector<S> invstd_cache;

    void init(const std::string& name, std::size_t c) {
        channels = c;
        gamma.name = name + ".gamma";
        gamma.init_shape({c});
        gamma.value.fill(S(1));
        beta.name = name + ".beta";
        beta.init_shape({c});
        running_mean = Tensor<S>({c});
        running_var = Tensor<S>({c});
        running_var.fill(S(1));
    }

    std::size_t param_count() const { return 2 * channels; }

    Tensor<S> forward(const Tensor<S>& x, bool training) {
        const std::size_t n = x.shape[0], c_n = x.shape[1], hw = x.shape[2] * x.shape[3];
        Tensor<S> y(x.shape);
        xhat_cache = Tensor<S>(x.shape);
        invstd_cache.assign(c_n, S(0));
        for (std::size_t c = 0; c < c_n; ++c) {
            S mean, var;
            const std::size_t m = n * hw;
            if (training) {
                S sum = 0, sq = 0;
                for (std::size_t b = 0; b < n; ++b) {
                    const S* p = &x.data[(b * c_n + c) * hw];
                    for (std::size_t i = 0; i < hw; ++i) {
                        sum += p[i];
                        sq += p[i] * p[i];
                    }
                }
                mean = sum / S(m);
                var = sq / S(m) - mean * mean;
                if (var < S(0)) var = S(0);
                const S unbiased = m > 1 ? var * S(m) / S(m - 1) : var;
                running_mean.data[c] = (S(1) - momentum) * running_mean.data[c] + momentum * mean;
                running_var.data[c] = (S(1) - momentum) * running_var.data[c] + momentum * unbiased;
            } else {
                mean = running_mean.data[c];
                var = running_var.data[c];
            }
            const S invstd = S(1) / std::sqrt(var + eps);
            invstd_cache[c] = invstd;
            const S g = gamma.value.data[c], bt = beta.value.data[c];
            for (std::size_t b = 0; b < n; ++b) {
                const S* p = &x.data[(b * c_n + c) * hw];
                S* xh = &xhat_cache.data[(b * c_n + c) * hw];
                S* yo = &y.data[(b * c_n + c) * hw];
                for (std::size_t i = 0; i < hw; ++i) {
                    xh[i] = (p[i] - mean) * invstd;
                    yo[i] = g * xh[i] + bt;
                }
            }
        }
        train_cache = training;
        return y;
    }

    bool train_cache = true;

    Tensor<S> backward(const Tensor<S>& dy) {
        const std::size_t n = dy.shape[0], c_n = dy.shape[1], hw = dy.shape[2] * dy.shape[3];
        const std::size_t m = n * hw;
        Tensor<S> dx(dy.shape);
        for (std::size_t c = 0; c < c_n; ++c) {
            const S g = gamma.value.data[c];
            const S invstd = invstd_cache[c];
            S sum_dy = 0, sum_dy_xhat = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const S* dyp = &dy.data[(b * c_n + c) * hw];
                const S* xh = &xhat_cache.data[(b * c_n + c) * hw];
                for (std::size_t i = 0; i < hw; ++i) {
                    sum_dy += dyp[i];
                    sum_dy_xhat += dyp[i] * xh[i];
                }
            }
            gamma.grad.data[c] += sum_dy_xhat;
            beta.grad.data[c] += sum_dy;
            for (std::size_t b = 0; b < n; ++b) {
                const S* dyp = &dy.data[(b * c_n + c) * hw];
                const S* xh = &xhat_cache.data[(b * c_n + c) * hw];
                S* dxp = &dx.data[(b * c_n + c) * hw];
                if (train_cache) {
                    for (std::size_t i = 0; i < hw; ++i)
                        dxp[i] = g * invstd / S(m) *
                                 (S(m) * dyp[i] - sum_dy - xh[i] * sum_dy_xhat);
                } else {
                    for (std::size_t i = 0; i < hw; ++i) dxp[i] = g * invstd * dyp[i];
                }
            }
        }
        return dx;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// ---------------------------------------------------------------------------
template <typename S>
struct ReLU {
    Tensor<S> y_cache;
    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> y(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i)
            y.data[i] = x.data[i] > S(0) ? x.data[i] : S(0);
        y_cache = y;
        return y;
    }
    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx(dy.shape);
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx.data[i] = y_cache.data[i] > S(0) ? dy.data[i] : S(0);
        return dx;
    }
};

template <typename S>
struct TanhLayer {
    Tensor<S> y_cache;
    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> y(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = std::tanh(x.data[i]);
        y_cache = y;
        return y;
    }
    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx(dy.shape);
        for (std::size_t i = 0; i < dy.numel(); ++i) {
            const S t = y_cache.data[i];
            dx.data[i] = dy.data[i] * (S(1) - t * t);
        }
        return dx;
    }
};

// 3x3 stride-2 max pooling with pad 1 (the ResNet stem pool).
template <typename S>
struct MaxPool2d {
    std::size_t k = 3, stride = 2, pad = 1;
    std::vector<std::size_t> argmax_cache;
    std::vector<std::size_t> in_shape_cache;

    Tensor<S> forward(const Tensor<S>& x) {
        const std::size_t n = x.shape[0], c_n = x.shape[1], h = x.shape[2], w = x.shape[3];
        const std::size_t oh = (h + 2 * pad - k) / stride + 1;
        const std::size_t ow = (w + 2 * pad - k) / stride + 1;
        Tensor<S> y({n, c_n, oh, ow});
        argmax_cache.assign(y.numel(), 0);
        in_shape_cache = x.shape;
        std::size_t out_idx = 0;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j, ++out_idx) {
                        S best = -std::numeric_limits<S>::infinity();
                        std::size_t best_idx = 0;
                        for (std::size_t ki = 0; ki < k; ++ki) {
                            const long ih = long(i * stride + ki) - long(pad);
                            if (ih < 0 || ih >= long(h)) continue;
                            for (std::size_t kj = 0; kj < k; ++kj) {
                                const long iw = long(j * stride + kj) - long(pad);
                                if (iw < 0 || iw >= long(w)) continue;
                                const std::size_t idx =
                                    ((b * c_n + c) * h + std::size_t(ih)) * w + std::size_t(iw);
                                if (x.data[idx] > best) {
                                    best = x.data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        y.data[out_idx] = best;
                        argmax_cache[out_idx] = best_idx;
                    }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx(in_shape_cache);
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx.data[argmax_cache[i]] += dy.data[i];
        return dx;
    }
};

// Nearest-neighbor 2x upsampling.
template <typename S>
struct Upsample2x {
    static Tensor<S> forward(const Tensor<S>& x) {
        const std::size_t n = x.shape[0], c_n = x.shape[1], h = x.shape[2], w = x.shape[3];
        Tensor<S> y({n, c_n, 2 * h, 2 * w});
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j) {
                        const S v = x.at4(b, c, i, j);
                        y.at4(b, c, 2 * i, 2 * j) = v;
                        y.at4(b, c, 2 * i, 2 * j + 1) = v;
                        y.at4(b, c, 2 * i + 1, 2 * j) = v;
                        y.at4(b, c, 2 * i + 1, 2 * j + 1) = v;
                    }
        return y;
    }
    static Tensor<S> backward(const Tensor<S>& dy) {
        const std::size_t n = dy.shape[0], c_n = dy.shape[1];
        const std::size_t h = dy.shape[2] / 2, w = dy.shape[3] / 2;
        Tensor<S> dx({n, c_n, h, w});
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        dx.at4(b, c, i, j) = dy.at4(b, c, 2 * i, 2 * j) +
                                             dy.at4(b, c, 2 * i, 2 * j + 1) +
                                             dy.at4(b, c, 2 * i + 1, 2 * j) +
                                             dy.at4(b, c, 2 * i + 1, 2 * j + 1);
        return dx;
    }
};

template <typename S>
struct Linear {
    std::size_t in_f = 0, out_f = 0;
    Param<S> weight;  // (out, in)
    Param<S> bias;    // (out)
    Tensor<S> x_cache;

    void init(const std::string& name, std::size_t in, std::size_t out,
              std::mt19937_64& rng, bool zero_init = false) {
        in_f = in; out_f = out;
        weight.name = name + ".weight";
        weight.init_shape({out, in});
        if (!zero_init) he_normal_init(weight.value, in, rng);
        bias.name = name + ".bias";
        bias.init_shape({out});
    }

    std::size_t param_count() const { return weight.value.numel() + bias.value.numel(); }

    Tensor<S> forward(const Tensor<S>& x) {
        x_cache = x;
        const std::size_t n = x.shape[0];
        Tensor<S> y({n, out_f});
        CMapRM<S> wm(weight.value.ptr(), out_f, in_f);
        CMapRM<S> xm(x.ptr(), n, in_f);
        MapRM<S> ym(y.ptr(), n, out_f);
        ym.noalias() = xm * wm.transpose();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_f; ++o) y.at2(b, o) += bias.value.data[o];
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const std::size_t n = dy.shape[0];
        Tensor<S> dx(x_cache.shape);
        CMapRM<S> wm(weight.value.ptr(), out_f, in_f);
        CMapRM<S> xm(x_cache.ptr(), n, in_f);
        CMapRM<S> dym(dy.ptr(), n, out_f);
        MapRM<S> dwm(weight.grad.ptr(), out_f, in_f);
        MapRM<S> dxm(dx.ptr(), n, in_f);
        dwm.noalias() += dym.transpose() * xm;
        dxm.noalias() = dym * wm;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_f; ++o) bias.grad.data[o] += dy.at2(b, o);
        return dx;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// Global average pooling: (N, C, H, W) -> (N, C).
template <typename S>
inline Tensor<S> gap_forward(const Tensor<S>& x) {
    const std::size_t n = x.shape[0], c_n = x.shape[1], hw = x.shape[2] * x.shape[3];
    Tensor<S> y({n, c_n});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < c_n; ++c) {
            S sum = 0;
            const S* p = &x.data[(b * c_n + c) * hw];
            for (std::size_t i = 0; i < hw; ++i) sum += p[i];
            y.at2(b, c) = sum / S(hw);
        }
    return y;
}

template <typename S>
inline Tensor<S> gap_backward(const Tensor<S>& dy, const std::vector<std::size_t>& x_shape) {
    const std::size_t n = x_shape[0], c_n = x_shape[1], hw = x_shape[2] * x_shape[3];
    Tensor<S> dx(x_shape);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < c_n; ++c) {
            const S g = dy.at2(b, c) / S(hw);
            S* p = &dx.data[(b * c_n + c) * hw];
            for (std::size_t i = 0; i < hw; ++i) p[i] = g;
        }
    return dx;
}

template <typename S>
inline Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape[0] != b.shape[0] || a.shape[2] != b.shape[2] || a.shape[3] != b.shape[3])
        throw std::invalid_argument("concat: shape mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    const std::size_t n = a.shape[0], ca = a.shape[1], cb = b.shape[1];
    const std::size_t hw = a.shape[2] * a.shape[3];
    Tensor<S> y({n, ca + cb, a.shape[2], a.shape[3]});
    for (std::size_t bi = 0; bi < n; ++bi) {
        std::copy(&a.data[bi * ca * hw], &a.data[(bi + 1) * ca * hw],
                  &y.data[bi * (ca + cb) * hw]);
        std::copy(&b.data[bi * cb * hw], &b.data[(bi + 1) * cb * hw],
                  &y.data[bi * (ca + cb) * hw + ca * hw]);
    }
    return y;
}

template <typename S>
inline void split_channels(const Tensor<S>& dy, Tensor<S>& da, Tensor<S>& db,
                           std::size_t ca, std::size_t cb) {
    const std::size_t n = dy.shape[0], hw = dy.shape[2] * dy.shape[3];
    da = Tensor<S>({n, ca, dy.shape[2], dy.shape[3]});
    db = Tensor<S>({n, cb, dy.shape[2], dy.shape[3]});
    for (std::size_t bi = 0; bi < n; ++bi) {
        std::copy(&dy.data[bi * (ca + cb) * hw], &dy.data[bi * (ca + cb) * hw + ca * hw],
                  &da.data[bi * ca * hw]);
        std::copy(&dy.data[bi * (ca + cb) * hw + ca * hw], &dy.data[(bi + 1) * (ca + cb) * hw],
                  &db.data[bi * cb * hw]);
    }
}

}  // namespace fas::nn

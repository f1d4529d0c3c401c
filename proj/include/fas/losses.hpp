#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fas/tensor.hpp"

namespace fas {

struct TripletConfig {
    double margin = 0.5;  // mining is fixed to online batch-all
    void validate() const {
        if (margin <= 0) throw std::invalid_argument("triplet: margin must be > 0");
    }
};

struct LossWeights {
    double alpha1 = 5.0;  // regression
    double alpha2 = 1.0;  // triplet (summed over tap layers)
    double alpha3 = 5.0;  // auxiliary classification
    void validate() const {
        if (alpha1 < 0 || alpha2 < 0 || alpha3 < 0)
            throw std::invalid_argument("loss weights must be nonnegative");
        if (alpha1 == 0 && alpha2 == 0 && alpha3 == 0)
            throw std::invalid_argument("at least one loss weight must be positive");
    }
};

struct LossBreakdown {
    double lr = 0;
    std::map<std::string, double> lt_per_tap;
    std::map<std::string, std::size_t> triplet_count_per_tap;
    double la = 0;
    double total = 0;
};

inline constexpr double kNormEps = 1e-12;
inline constexpr double kProbEps = 1e-7;

// ---------------------------------------------------------------------------
// Regression loss: mean over live samples of the per-element mean absolute
// cue value. Spoof samples contribute nothing; zero when no live samples.
// ---------------------------------------------------------------------------
template <typename S>
S regression_loss(const Tensor<S>& cue_maps, const std::vector<int>& labels) {
    if (cue_maps.shape.empty() || cue_maps.shape[0] == 0)
        throw std::invalid_argument("regression_loss: empty batch");
    const std::size_t n = cue_maps.shape[0];
    if (labels.size() != n)
        throw std::invalid_argument("regression_loss: label count mismatch");
    const std::size_t per = cue_maps.numel() / n;
    S acc = 0;
    std::size_t n_live = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0) continue;  // 0 = live
        ++n_live;
        S s = 0;
        const S* p = &cue_maps.data[i * per];
        for (std::size_t j = 0; j < per; ++j) s += std::abs(p[j]);
        acc += s / S(per);
    }
    return n_live == 0 ? S(0) : acc / S(n_live);
}

template <typename S>
Tensor<S> regression_loss_grad(const Tensor<S>& cue_maps, const std::vector<int>& labels) {
    const std::size_t n = cue_maps.shape[0];
    const std::size_t per = cue_maps.numel() / n;
    Tensor<S> g(cue_maps.shape);
    std::size_t n_live = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == 0) ++n_live;
    if (n_live == 0) return g;
    const S w = S(1) / (S(n_live) * S(per));
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0) continue;
        const S* p = &cue_maps.data[i * per];
        S* gp = &g.data[i * per];
        for (std::size_t j = 0; j < per; ++j)
            gp[j] = p[j] > S(0) ? w : (p[j] < S(0) ? -w : S(0));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Pairwise distances between L2-normalized feature vectors.
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> normalize_rows(const Tensor<S>& features, std::vector<S>* norms_out = nullptr) {
    const std::size_t n = features.shape[0], d = features.shape[1];
    Tensor<S> u(features.shape);
    if (norms_out) norms_out->assign(n, S(0));
    for (std::size_t i = 0; i < n; ++i) {
        S sq = 0;
        for (std::size_t j = 0; j < d; ++j) sq += features.at2(i, j) * features.at2(i, j);
        const S norm = std::sqrt(sq);
        if (norms_out) (*norms_out)[i] = norm;
        const S inv = S(1) / (norm + S(kNormEps));
        for (std::size_t j = 0; j < d; ++j) u.at2(i, j) = features.at2(i, j) * inv;
    }
    return u;
}

template <typename S>
Tensor<S> pairwise_distances(const Tensor<S>& features) {
    const std::size_t n = features.shape[0], d = features.shape[1];
    Tensor<S> u = normalize_rows(features);
    Tensor<S> dist({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            S sq = 0;
            for (std::size_t k = 0; k < d; ++k) {
                const S diff = u.at2(i, k) - u.at2(j, k);
                sq += diff * diff;
            }
            const S dd = std::sqrt(sq);
            dist.at2(i, j) = dd;
            dist.at2(j, i) = dd;
        }
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Batch-all triplet mining: anchors and positives live, negatives spoof,
// keep exactly the triplets with a positive hinge d(a,p) - d(a,n) + m > 0.
// ---------------------------------------------------------------------------
struct TripletIndex {
    std::size_t a, p, n;
    bool operator==(const TripletIndex& o) const = default;
};

template <typename S>
std::vector<TripletIndex> mine_triplets(const std::vector<int>& labels,
                                        const Tensor<S>& distances, double margin) {
    const std::size_t n = labels.size();
    std::vector<TripletIndex> out;
    for (std::size_t a = 0; a < n; ++a) {
        if (labels[a] != 0) continue;
        for (std::size_t p = 0; p < n; ++p) {
            if (p == a || labels[p] != 0) continue;
            for (std::size_t neg = 0; neg < n; ++neg) {
                if (labels[neg] == 0) continue;
                if (double(distances.at2(a, p)) - double(distances.at2(a, neg)) + margin > 0)
                    out.push_back({a, p, neg});
            }
        }
    }
    return out;
}

template <typename S>
struct TripletResult {
    S loss = 0;
    std::size_t count = 0;
};

template <typename S>
TripletResult<S> triplet_loss(const Tensor<S>& features, const std::vector<int>& labels,
                              double margin) {
    Tensor<S> dist = pairwise_distances(features);
    auto triplets = mine_triplets(labels, dist, margin);
    TripletResult<S> r;
    r.count = triplets.size();
    if (triplets.empty()) return r;
    S acc = 0;
    for (const auto& t : triplets) {
        const S h = dist.at2(t.a, t.p) - dist.at2(t.a, t.n) + S(margin);
        acc += std::max(h, S(0));
    }
    r.loss = acc / S(triplets.size());
    return r;
}

/// Analytic gradient of triplet_loss w.r.t. the raw (unnormalized) features.
template <typename S>
Tensor<S> triplet_loss_grad(const Tensor<S>& features, const std::vector<int>& labels,
                            double margin) {
    const std::size_t n = features.shape[0], d = features.shape[1];
    std::vector<S> norms;
    Tensor<S> u = normalize_rows(features, &norms);
    Tensor<S> dist = pairwise_distances(features);
    auto triplets = mine_triplets(labels, dist, margin);
    Tensor<S> grad(features.shape);
    if (triplets.empty()) return grad;

    // gradient w.r.t. the normalized vectors
    Tensor<S> gu({n, d});
    const S w = S(1) / S(triplets.size());
    auto add_pair = [&](std::size_t i, std::size_t j, S coeff) {
        // coeff * d||u_i - u_j|| contribution
        const S dd = dist.at2(i, j);
        if (dd <= S(0)) return;  // subgradient 0 at coincident points
        const S c = coeff / dd;
        for (std::size_t k = 0; k < d; ++k) {
            const S diff = u.at2(i, k) - u.at2(j, k);
            gu.at2(i, k) += c * diff;
            gu.at2(j, k) -= c * diff;
        }
    };
    for (const auto& t : triplets) {
        const S h = dist.at2(t.a, t.p) - dist.at2(t.a, t.n) + S(margin);
        if (h <= S(0)) continue;
        add_pair(t.a, t.p, w);
        add_pair(t.a, t.n, -w);
    }

    // chain through u = v / (||v|| + eps)
    for (std::size_t i = 0; i < n; ++i) {
        const S norm = norms[i];
        const S s = norm + S(kNormEps);
        if (norm <= S(0)) continue;
        S dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += features.at2(i, k) * gu.at2(i, k);
        for (std::size_t k = 0; k < d; ++k)
            grad.at2(i, k) = gu.at2(i, k) / s - features.at2(i, k) * dot / (s * s * norm);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Auxiliary classification loss: mean negative log-likelihood over the batch,
// probabilities clamped to [kProbEps, 1 - kProbEps].
// ---------------------------------------------------------------------------
template <typename S>
S classification_loss(const Tensor<S>& probs, const std::vector<int>& labels) {
    const std::size_t n = probs.numel();
    if (n == 0) throw std::invalid_argument("classification_loss: empty batch");
    if (labels.size() != n)
        throw std::invalid_argument("classification_loss: label count mismatch");
    S acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const S q = std::clamp(probs.data[i], S(kProbEps), S(1) - S(kProbEps));
        const S z = labels[i] != 0 ? S(1) : S(0);
        acc += -(z * std::log(q) + (S(1) - z) * std::log(S(1) - q));
    }
    return acc / S(n);
}

template <typename S>
Tensor<S> classification_loss_grad(const Tensor<S>& probs, const std::vector<int>& labels) {
    const std::size_t n = probs.numel();
    Tensor<S> g(probs.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const S q = probs.data[i];
        if (q <= S(kProbEps) || q >= S(1) - S(kProbEps)) continue;  // clamp region
        const S z = labels[i] != 0 ? S(1) : S(0);
        g.data[i] = -(z / q - (S(1) - z) / (S(1) - q)) / S(n);
    }
    return g;
}

// ---------------------------------------------------------------------------
template <typename S>
S total_loss(S lr, const std::map<std::string, S>& lt_per_tap, S la,
             const LossWeights& w) {
    S lt_sum = 0;
    for (const auto& [k, v] : lt_per_tap) {
        if (!std::isfinite(double(v)))
            throw std::invalid_argument("total_loss: non-finite triplet loss at tap " + k);
        lt_sum += v;
    }
    if (!std::isfinite(double(lr)) || !std::isfinite(double(la)))
        throw std::invalid_argument("total_loss: non-finite component");
    return S(w.alpha1) * lr + S(w.alpha2) * lt_sum + S(w.alpha3) * la;
}

}  // namespace fas

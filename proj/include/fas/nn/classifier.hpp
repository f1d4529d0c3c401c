#pragma once

#include <array>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fas/nn/layers.hpp"

namespace fas {

struct ClassifierConfig {
    enum class InputMode { overlay, cue_only };
    InputMode input_mode = InputMode::overlay;
    std::array<std::size_t, 4> backbone_widths{32, 64, 128, 256};
};

inline std::string to_string(ClassifierConfig::InputMode m) {
    return m == ClassifierConfig::InputMode::overlay ? "overlay" : "cue_only";
}
inline ClassifierConfig::InputMode classifier_input_mode_from_string(const std::string& s) {
    if (s == "overlay") return ClassifierConfig::InputMode::overlay;
    if (s == "cue_only") return ClassifierConfig::InputMode::cue_only;
    throw std::invalid_argument("classifier: unknown input_mode " + s);
}

/// Elementwise overlay S = I + C. No clamping; range is [-2, 2] by contract.
template <typename S>
Tensor<S> overlay(const Tensor<S>& image, const Tensor<S>& cue) {
    if (!image.same_shape(cue))
        throw std::invalid_argument("overlay: shape mismatch " + image.shape_str() + " vs " +
                                    cue.shape_str());
    Tensor<S> out = image;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += cue.data[i];
    return out;
}

}  // namespace fas

namespace fas::nn {

/// Auxiliary classifier: four strided conv stages, GAP, one logit.
/// Training-time amplifier only; never used for test-time scoring.
template <typename S>
struct Classifier {
    ClassifierConfig cfg;
    std::vector<Conv2d<S>> convs;
    std::vector<BatchNorm2d<S>> bns;
    std::vector<ReLU<S>> relus;
    Linear<S> head;
    std::vector<std::size_t> gap_in_shape;
    Tensor<S> prob_cache;

    Classifier(const ClassifierConfig& config, std::uint64_t seed) : cfg(config) {
        std::mt19937_64 rng(seed);
        convs.resize(4);
        bns.resize(4);
        relus.resize(4);
        std::size_t in_c = 3;
        for (std::size_t i = 0; i < 4; ++i) {
            const std::size_t out_c = cfg.backbone_widths[i];
            convs[i].init("clf.stage" + std::to_string(i) + ".conv", in_c, out_c, 3, 2, 1,
                          false, rng);
            bns[i].init("clf.stage" + std::to_string(i) + ".bn", out_c);
            in_c = out_c;
        }
        head.init("clf.head", in_c, 1, rng);
    }

    /// Returns per-sample spoof probabilities q in (0, 1).
    Tensor<S> forward(const Tensor<S>& inputs, bool training) {
        Tensor<S> x = inputs;
        for (std::size_t i = 0; i < 4; ++i)
            x = relus[i].forward(bns[i].forward(convs[i].forward(x), training));
        gap_in_shape = x.shape;
        Tensor<S> logit = head.forward(gap_forward(x));
        Tensor<S> prob({logit.shape[0], std::size_t(1)});
        for (std::size_t n = 0; n < prob.shape[0]; ++n)
            prob.data[n] = S(1) / (S(1) + std::exp(-logit.data[n]));
        prob_cache = prob;
        return prob;
    }

    /// d_prob: gradient w.r.t. probabilities. Returns gradient w.r.t. inputs.
    Tensor<S> backward(const Tensor<S>& d_prob) {
        Tensor<S> d_logit(d_prob.shape);
        for (std::size_t n = 0; n < d_prob.numel(); ++n) {
            const S q = prob_cache.data[n];
            d_logit.data[n] = d_prob.data[n] * q * (S(1) - q);
        }
        Tensor<S> dx = gap_backward(head.backward(d_logit), gap_in_shape);
        for (std::size_t i = 4; i-- > 0;)
            dx = convs[i].backward(bns[i].backward(relus[i].backward(dx)));
        return dx;
    }

    std::size_t param_count() const {
        std::size_t p = head.param_count();
        for (const auto& c : convs) p += c.param_count();
        for (const auto& b : bns) p += b.param_count();
        return p;
    }

    void collect(std::vector<Param<S>*>& out) {
        for (std::size_t i = 0; i < 4; ++i) {
            convs[i].collect(out);
            bns[i].collect(out);
        }
        head.collect(out);
    }
    void collect_buffers(std::vector<std::pair<std::string, Tensor<S>*>>& out) {
        for (auto& b : bns) {
            out.emplace_back(b.gamma.name + ".running_mean", &b.running_mean);
            out.emplace_back(b.gamma.name + ".running_var", &b.running_var);
        }
    }
    void zero_grad() {
        std::vector<Param<S>*> ps;
        collect(ps);
        for (auto* p : ps) p->zero_grad();
    }
};

}  // namespace fas::nn

#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fas/nn/layers.hpp"

namespace fas {

/// Architecture knobs for the spoof cue generator.
struct GeneratorConfig {
    std::size_t input_size = 224;
    // stem + four encoder residual stages
    std::array<std::size_t, 5> encoder_stage_widths{64, 64, 128, 256, 512};
    std::array<std::size_t, 5> decoder_stage_widths{256, 128, 64, 64, 64};
    bool use_pretrained_encoder = false;
    std::string pretrained_path;
    std::vector<std::string> tap_layers{"E5", "D1", "D2", "D3", "D4"};

    void validate() const {
        if (input_size % 32 != 0)
            throw std::invalid_argument("generator: input_size must be divisible by 32");
        if (tap_layers.empty())
            throw std::invalid_argument("generator: tap_layers must be non-empty");
        for (const auto& t : tap_layers)
            if (t != "E5" && t != "D1" && t != "D2" && t != "D3" && t != "D4" && t != "SC")
                throw std::invalid_argument("generator: unknown tap layer " + t);
    }
};

}  // namespace fas

namespace fas::nn {

// Encoder residual block: two 3x3 convs with batch norm, projection shortcut
// when the shape changes.
template <typename S>
struct BasicBlock {
    Conv2d<S> conv1, conv2, conv_sc;
    BatchNorm2d<S> bn1, bn2, bn_sc;
    ReLU<S> relu1, relu_out;
    bool has_proj = false;

    void init(const std::string& name, std::size_t in_c, std::size_t out_c,
              std::size_t stride, std::mt19937_64& rng) {
        conv1.init(name + ".conv1", in_c, out_c, 3, stride, 1, false, rng);
        bn1.init(name + ".bn1", out_c);
        conv2.init(name + ".conv2", out_c, out_c, 3, 1, 1, false, rng);
        bn2.init(name + ".bn2", out_c);
        has_proj = (in_c != out_c) || (stride != 1);
        if (has_proj) {
            conv_sc.init(name + ".downsample.conv", in_c, out_c, 1, stride, 0, false, rng);
            bn_sc.init(name + ".downsample.bn", out_c);
        }
    }

    Tensor<S> forward(const Tensor<S>& x, bool training) {
        Tensor<S> f = bn2.forward(conv2.forward(relu1.forward(bn1.forward(
                          conv1.forward(x), training))), training);
        Tensor<S> sc = has_proj ? bn_sc.forward(conv_sc.forward(x), training) : x;
        f += sc;
        return relu_out.forward(f);
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dsum = relu_out.backward(dy);
        Tensor<S> t = conv1.backward(bn1.backward(relu1.backward(
            conv2.backward(bn2.backward(dsum)))));
        if (has_proj) {
            Tensor<S> dsc = conv_sc.backward(bn_sc.backward(dsum));
            t += dsc;
        } else {
            t += dsum;
        }
        return t;
    }

    std::size_t param_count() const {
        std::size_t p = conv1.param_count() + conv2.param_count() + bn1.param_count() +
                        bn2.param_count();
        if (has_proj) p += conv_sc.param_count() + bn_sc.param_count();
        return p;
    }

    void collect(std::vector<Param<S>*>& out) {
        conv1.collect(out);
        bn1.collect(out);
        conv2.collect(out);
        bn2.collect(out);
        if (has_proj) {
            conv_sc.collect(out);
            bn_sc.collect(out);
        }
    }
    void collect_buffers(std::vector<std::pair<std::string, Tensor<S>*>>& out) {
        out.emplace_back(bn1.gamma.name + ".running_mean", &bn1.running_mean);
        out.emplace_back(bn1.gamma.name + ".running_var", &bn1.running_var);
        out.emplace_back(bn2.gamma.name + ".running_mean", &bn2.running_mean);
        out.emplace_back(bn2.gamma.name + ".running_var", &bn2.running_var);
        if (has_proj) {
            out.emplace_back(bn_sc.gamma.name + ".running_mean", &bn_sc.running_mean);
            out.emplace_back(bn_sc.gamma.name + ".running_var", &bn_sc.running_var);
        }
    }
};

// Decoder residual block: nearest 2x upsample, a size-preserving 2x2 conv
// (pad 0 top/left, 1 bottom/right), optional skip concatenation, then a
// residual body with a 1x1 convolution shortcut.
template <typename S>
struct DecoderBlock {
    std::size_t out_c = 0, skip_c = 0;
    Conv2d<S> conv_up, conv1, conv2, conv_sc;
    BatchNorm2d<S> bn_up, bn1, bn2, bn_sc;
    ReLU<S> relu_up, relu1, relu_out;

    void init(const std::string& name, std::size_t in_c, std::size_t out,
              std::size_t skip, std::mt19937_64& rng) {
        out_c = out;
        skip_c = skip;
        conv_up.init_asym(name + ".up_conv", in_c, out_c, 2, 2, 1, 0, 0, 1, 1, false, rng);
        bn_up.init(name + ".up_bn", out_c);
        const std::size_t body_in = out_c + skip_c;
        conv1.init(name + ".conv1", body_in, out_c, 3, 1, 1, false, rng);
        bn1.init(name + ".bn1", out_c);
        conv2.init(name + ".conv2", out_c, out_c, 3, 1, 1, false, rng);
        bn2.init(name + ".bn2", out_c);
        conv_sc.init(name + ".shortcut.conv", body_in, out_c, 1, 1, 0, false, rng);
        bn_sc.init(name + ".shortcut.bn", out_c);
    }

    Tensor<S> forward(const Tensor<S>& x, const Tensor<S>* skip, bool training) {
        Tensor<S> c = relu_up.forward(
            bn_up.forward(conv_up.forward(Upsample2x<S>::forward(x)), training));
        Tensor<S> z = skip ? concat_channels(c, *skip) : std::move(c);
        Tensor<S> f = bn2.forward(conv2.forward(relu1.forward(bn1.forward(
                          conv1.forward(z), training))), training);
        Tensor<S> s = bn_sc.forward(conv_sc.forward(z), training);
        f += s;
        return relu_out.forward(f);
    }

    // Returns gradient w.r.t. x; writes gradient w.r.t. the skip input (if any).
    Tensor<S> backward(const Tensor<S>& dy, Tensor<S>* dskip) {
        Tensor<S> dsum = relu_out.backward(dy);
        Tensor<S> dz = conv1.backward(bn1.backward(relu1.backward(
            conv2.backward(bn2.backward(dsum)))));
        Tensor<S> dz_sc = conv_sc.backward(bn_sc.backward(dsum));
        dz += dz_sc;
        Tensor<S> dc;
        if (skip_c > 0) {
            Tensor<S> ds;
            split_channels(dz, dc, ds, out_c, skip_c);
            if (dskip) *dskip = std::move(ds);
        } else {
            dc = std::move(dz);
        }
        return Upsample2x<S>::backward(
            conv_up.backward(bn_up.backward(relu_up.backward(dc))));
    }

    std::size_t param_count() const {
        return conv_up.param_count() + bn_up.param_count() + conv1.param_count() +
               bn1.param_count() + conv2.param_count() + bn2.param_count() +
               conv_sc.param_count() + bn_sc.param_count();
    }

    void collect(std::vector<Param<S>*>& out) {
        conv_up.collect(out);
        bn_up.collect(out);
        conv1.collect(out);
        bn1.collect(out);
        conv2.collect(out);
        bn2.collect(out);
        conv_sc.collect(out);
        bn_sc.collect(out);
    }
    void collect_buffers(std::vector<std::pair<std::string, Tensor<S>*>>& out) {
        for (BatchNorm2d<S>* bn : {&bn_up, &bn1, &bn2, &bn_sc}) {
            out.emplace_back(bn->gamma.name + ".running_mean", &bn->running_mean);
            out.emplace_back(bn->gamma.name + ".running_var", &bn->running_var);
        }
    }
};

template <typename S>
struct GeneratorOutput {
    Tensor<S> cue_map;                       // (N, 3, H, W), entries in [-1, 1]
    std::map<std::string, Tensor<S>> taps;   // tap layer -> (N, C) GAP vectors
};

/// Spoof cue generator: ResNet-style encoder with a five-stage decoder that
/// concatenates the symmetric encoder features (D1..D4) and ends in Tanh.
template <typename S>
struct Generator {
    GeneratorConfig cfg;

    Conv2d<S> stem_conv;
    BatchNorm2d<S> stem_bn;
    ReLU<S> stem_relu;
    MaxPool2d<S> pool;
    BasicBlock<S> e2a, e2b, e3a, e3b, e4a, e4b, e5a, e5b;
    DecoderBlock<S> d1, d2, d3, d4, d5;
    Conv2d<S> head_conv;
    TanhLayer<S> head_tanh;

    // forward caches needed for tap gradient injection
    std::map<std::string, std::vector<std::size_t>> tap_src_shapes;

    explicit Generator(const GeneratorConfig& config, std::uint64_t seed) : cfg(config) {
        cfg.validate();
        std::mt19937_64 rng(seed);
        const auto& ew = cfg.encoder_stage_widths;
        const auto& dw = cfg.decoder_stage_widths;
        stem_conv.init("gen.stem.conv", 3, ew[0], 7, 2, 3, false, rng);
        stem_bn.init("gen.stem.bn", ew[0]);
        e2a.init("gen.e2a", ew[0], ew[1], 1, rng);
        e2b.init("gen.e2b", ew[1], ew[1], 1, rng);
        e3a.init("gen.e3a", ew[1], ew[2], 2, rng);
        e3b.init("gen.e3b", ew[2], ew[2], 1, rng);
        e4a.init("gen.e4a", ew[2], ew[3], 2, rng);
        e4b.init("gen.e4b", ew[3], ew[3], 1, rng);
        e5a.init("gen.e5a", ew[3], ew[4], 2, rng);
        e5b.init("gen.e5b", ew[4], ew[4], 1, rng);
        d1.init("gen.d1", ew[4], dw[0], ew[3], rng);
        d2.init("gen.d2", dw[0], dw[1], ew[2], rng);
        d3.init("gen.d3", dw[1], dw[2], ew[1], rng);
        d4.init("gen.d4", dw[2], dw[3], ew[0], rng);
        d5.init("gen.d5", dw[3], dw[4], 0, rng);
        head_conv.init("gen.head.conv", dw[4], 3, 3, 1, 1, true, rng);
    }

    bool has_tap(const std::string& t) const {
        for (const auto& x : cfg.tap_layers)
            if (x == t) return true;
        return false;
    }

    GeneratorOutput<S> forward(const Tensor<S>& images, bool training) {
        if (images.shape[2] % 32 != 0 || images.shape[3] % 32 != 0)
            throw std::invalid_argument("generator: spatial size must be divisible by 32, got " +
                                        images.shape_str());
        GeneratorOutput<S> out;
        tap_src_shapes.clear();

        Tensor<S> stem = stem_relu.forward(
            stem_bn.forward(stem_conv.forward(images), training));
        Tensor<S> p = pool.forward(stem);
        Tensor<S> e2 = e2b.forward(e2a.forward(p, training), training);
        Tensor<S> e3 = e3b.forward(e3a.forward(e2, training), training);
        Tensor<S> e4 = e4b.forward(e4a.forward(e3, training), training);
        Tensor<S> e5 = e5b.forward(e5a.forward(e4, training), training);

        auto maybe_tap = [&](const std::string& name, const Tensor<S>& t) {
            if (has_tap(name)) {
                out.taps[name] = gap_forward(t);
                tap_src_shapes[name] = t.shape;
            }
        };
        maybe_tap("E5", e5);

        Tensor<S> y = d1.forward(e5, &e4, training);
        maybe_tap("D1", y);
        y = d2.forward(y, &e3, training);
        maybe_tap("D2", y);
        y = d3.forward(y, &e2, training);
        maybe_tap("D3", y);
        y = d4.forward(y, &stem, training);
        maybe_tap("D4", y);
        y = d5.forward(y, nullptr, training);
        out.cue_map = head_tanh.forward(head_conv.forward(y));
        maybe_tap("SC", out.cue_map);
        return out;
    }

    /// Backward pass: d_cue is the gradient w.r.t. the cue map, d_taps the
    /// gradients w.r.t. each GAP tap vector. Accumulates parameter grads and
    /// returns the gradient w.r.t. the input images.
    Tensor<S> backward(const Tensor<S>& d_cue,
                       const std::map<std::string, Tensor<S>>& d_taps) {
        auto tap_grad = [&](const std::string& name, Tensor<S>& acc) {
            auto it = d_taps.find(name);
            if (it == d_taps.end()) return;
            Tensor<S> g = gap_backward(it->second, tap_src_shapes.at(name));
            acc += g;
        };

        Tensor<S> dc = d_cue;
        tap_grad("SC", dc);
        Tensor<S> d = head_conv.backward(head_tanh.backward(dc));
        d = d5.backward(d, nullptr);
        tap_grad("D4", d);
        Tensor<S> dskip_stem;
        d = d4.backward(d, &dskip_stem);
        tap_grad("D3", d);
        Tensor<S> dskip_e2;
        d = d3.backward(d, &dskip_e2);
        tap_grad("D2", d);
        Tensor<S> dskip_e3;
        d = d2.backward(d, &dskip_e3);
        tap_grad("D1", d);
        Tensor<S> dskip_e4;
        Tensor<S> d_e5 = d1.backward(d, &dskip_e4);
        tap_grad("E5", d_e5);

        Tensor<S> d_e4 = e5a.backward(e5b.backward(d_e5));
        d_e4 += dskip_e4;
        Tensor<S> d_e3 = e4a.backward(e4b.backward(d_e4));
        d_e3 += dskip_e3;
        Tensor<S> d_e2 = e3a.backward(e3b.backward(d_e3));
        d_e2 += dskip_e2;
        Tensor<S> d_pool = e2a.backward(e2b.backward(d_e2));
        Tensor<S> d_stem = pool.backward(d_pool);
        d_stem += dskip_stem;
        return stem_conv.backward(stem_bn.backward(stem_relu.backward(d_stem)));
    }

    std::size_t param_count() const {
        std::size_t p = stem_conv.param_count() + stem_bn.param_count();
        for (const BasicBlock<S>* b : {&e2a, &e2b, &e3a, &e3b, &e4a, &e4b, &e5a, &e5b})
            p += b->param_count();
        for (const DecoderBlock<S>* b : {&d1, &d2, &d3, &d4, &d5}) p += b->param_count();
        return p + head_conv.param_count();
    }

    void collect(std::vector<Param<S>*>& out) {
        stem_conv.collect(out);
        stem_bn.collect(out);
        for (BasicBlock<S>* b : {&e2a, &e2b, &e3a, &e3b, &e4a, &e4b, &e5a, &e5b})
            b->collect(out);
        for (DecoderBlock<S>* b : {&d1, &d2, &d3, &d4, &d5}) b->collect(out);
        head_conv.collect(out);
    }

    void collect_buffers(std::vector<std::pair<std::string, Tensor<S>*>>& out) {
        out.emplace_back("gen.stem.bn.gamma.running_mean", &stem_bn.running_mean);
        out.emplace_back("gen.stem.bn.gamma.running_var", &stem_bn.running_var);
        for (BasicBlock<S>* b : {&e2a, &e2b, &e3a, &e3b, &e4a, &e4b, &e5a, &e5b})
            b->collect_buffers(out);
        for (DecoderBlock<S>* b : {&d1, &d2, &d3, &d4, &d5}) b->collect_buffers(out);
    }

    void zero_grad() {
        std::vector<Param<S>*> ps;
        collect(ps);
        for (auto* p : ps) p->zero_grad();
    }
};

}  // namespace fas::nn

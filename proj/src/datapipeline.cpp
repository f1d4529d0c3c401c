#include "fas/datapipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>

namespace fs = std::filesystem;

namespace fas {

std::string to_string(PipelineConfig::InputMode m) {
    return m == PipelineConfig::InputMode::patched ? "patched" : "resized";
}
PipelineConfig::InputMode input_mode_from_string(const std::string& s) {
    if (s == "patched") return PipelineConfig::InputMode::patched;
    if (s == "resized") return PipelineConfig::InputMode::resized;
    throw std::invalid_argument("pipeline: unknown input_mode " + s);
}

ImageTensor normalize_image(const ImageU8& raw) {
    if (raw.pixels.size() != raw.width * raw.height * 3)
        throw std::invalid_argument("normalize_image: expected 3-channel 8-bit input");
    ImageTensor t({3, raw.height, raw.width});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < raw.height; ++y)
            for (std::size_t x = 0; x < raw.width; ++x)
                t.data[(c * raw.height + y) * raw.width + x] =
                    float(raw.at(y, x, c)) / 127.5f - 1.0f;
    return t;
}

ImageU8 denormalize_image(const ImageTensor& t) {
    ImageU8 img;
    img.height = t.shape[1];
    img.width = t.shape[2];
    img.pixels.resize(img.width * img.height * 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                const float v = (t.data[(c * img.height + y) * img.width + x] + 1.0f) * 127.5f;
                img.at(y, x, c) = std::uint8_t(std::clamp(std::lround(v), 0l, 255l));
            }
    return img;
}

ImageU8 cue_to_image(const ImageTensor& cue) { return denormalize_image(cue); }

ImageTensor bilinear_resize(const ImageTensor& img, std::size_t out_h, std::size_t out_w) {
    const std::size_t h = img.shape[1], w = img.shape[2];
    ImageTensor out({3, out_h, out_w});
    const float sy = float(h) / float(out_h);
    const float sx = float(w) / float(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        float fy = (float(y) + 0.5f) * sy - 0.5f;
        fy = std::clamp(fy, 0.0f, float(h - 1));
        const std::size_t y0 = std::size_t(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const float wy = fy - float(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            float fx = (float(x) + 0.5f) * sx - 0.5f;
            fx = std::clamp(fx, 0.0f, float(w - 1));
            const std::size_t x0 = std::size_t(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const float wx = fx - float(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const float v00 = img.data[(c * h + y0) * w + x0];
                const float v01 = img.data[(c * h + y0) * w + x1];
                const float v10 = img.data[(c * h + y1) * w + x0];
                const float v11 = img.data[(c * h + y1) * w + x1];
                out.data[(c * out_h + y) * out_w + x] =
                    (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                    wy * ((1 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

ImageTensor resize_face(const ImageTensor& img, std::size_t size) {
    return bilinear_resize(img, size, size);
}

namespace {
ImageTensor upscale_short_side(const ImageTensor& img, std::size_t size) {
    const std::size_t h = img.shape[1], w = img.shape[2];
    if (h >= size && w >= size) return img;
    const double scale = double(size) / double(std::min(h, w));
    const std::size_t nh = std::max(size, std::size_t(std::lround(double(h) * scale)));
    const std::size_t nw = std::max(size, std::size_t(std::lround(double(w) * scale)));
    return bilinear_resize(img, nh, nw);
}

ImageTensor crop(const ImageTensor& img, std::size_t y0, std::size_t x0, std::size_t size) {
    const std::size_t h = img.shape[1], w = img.shape[2];
    ImageTensor out({3, size, size});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < size; ++y)
            std::copy(&img.data[(c * h + y0 + y) * w + x0],
                      &img.data[(c * h + y0 + y) * w + x0 + size],
                      &out.data[(c * size + y) * size]);
    return out;
}
}  // namespace

ImageTensor sample_patch(const ImageTensor& img, std::size_t size, std::mt19937_64& rng) {
    ImageTensor src = upscale_short_side(img, size);
    const std::size_t h = src.shape[1], w = src.shape[2];
    std::uniform_int_distribution<std::size_t> dy(0, h - size), dx(0, w - size);
    const std::size_t y0 = dy(rng);
    const std::size_t x0 = dx(rng);
    return crop(src, y0, x0, size);
}

ImageTensor center_crop(const ImageTensor& img, std::size_t size) {
    ImageTensor src = upscale_short_side(img, size);
    return crop(src, (src.shape[1] - size) / 2, (src.shape[2] - size) / 2, size);
}

ImageTensor apply_crop_box(const ImageTensor& img, const CropBox& box) {
    const std::size_t h = img.shape[1], w = img.shape[2];
    if (box.x + box.w > int(w) || box.y + box.h > int(h))
        throw std::invalid_argument("crop_box lies outside image bounds");
    ImageTensor out({3, std::size_t(box.h), std::size_t(box.w)});
    for (std::size_t c = 0; c < 3; ++c)
        for (int y = 0; y < box.h; ++y)
            std::copy(&img.data[(c * h + box.y + y) * w + box.x],
                      &img.data[(c * h + box.y + y) * w + box.x + box.w],
                      &out.data[(c * box.h + y) * box.w]);
    return out;
}

// ---------------------------------------------------------------------------
BalancedSampler::BalancedSampler(std::vector<std::size_t> live_indices,
                                 std::vector<std::size_t> spoof_indices,
                                 std::size_t batch_size, std::uint64_t seed)
    : live_(std::move(live_indices)), spoof_(std::move(spoof_indices)),
      batch_(batch_size), seed_(seed) {
    if (batch_ % 2 != 0) throw std::invalid_argument("sampler: batch_size must be even");
    if (live_.empty() || spoof_.empty())
        throw std::invalid_argument("sampler: both classes must be present");
    const std::size_t half = batch_ / 2;
    const std::size_t max_class = std::max(live_.size(), spoof_.size());
    steps_ = (max_class + half - 1) / half;
}

std::vector<std::size_t> BalancedSampler::epoch_slots(const std::vector<std::size_t>& pool,
                                                      std::mt19937_64& rng) const {
    const std::size_t need = steps_ * (batch_ / 2);
    std::vector<std::size_t> slots;
    slots.reserve(need);
    const std::size_t max_class = std::max(live_.size(), spoof_.size());
    if (pool.size() == max_class) {
        // majority class: full permutation, extras resampled with replacement
        std::vector<std::size_t> perm = pool;
        std::shuffle(perm.begin(), perm.end(), rng);
        slots = perm;
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        while (slots.size() < need) slots.push_back(pool[pick(rng)]);
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t i = 0; i < need; ++i) slots.push_back(pool[pick(rng)]);
    }
    return slots;
}

std::vector<std::size_t> BalancedSampler::batch(std::size_t epoch, std::size_t step) const {
    if (step >= steps_) throw std::out_of_range("sampler: step out of range");
    if (epoch != cached_epoch_) {
        std::mt19937_64 rng(seed_ * 0x9E3779B97F4A7C15ull + epoch + 1);
        cached_live_slots_ = epoch_slots(live_, rng);
        cached_spoof_slots_ = epoch_slots(spoof_, rng);
        cached_epoch_ = epoch;
    }
    const std::size_t half = batch_ / 2;
    std::vector<std::size_t> out;
    out.reserve(batch_);
    for (std::size_t i = 0; i < half; ++i) out.push_back(cached_live_slots_[step * half + i]);
    for (std::size_t i = 0; i < half; ++i) out.push_back(cached_spoof_slots_[step * half + i]);
    return out;
}

// ---------------------------------------------------------------------------
void SynthConfig::validate() const {
    if (count_per_class < 1) throw std::invalid_argument("synth: count must be >= 1");
    if (artifact_types.empty())
        throw std::invalid_argument("synth: at least one artifact type required");
    for (const auto& a : artifact_types)
        if (!kKnownArtifacts.count(a)) {
            std::string valid;
            for (const auto& k : kKnownArtifacts) valid += (valid.empty() ? "" : ", ") + k;
            throw std::invalid_argument("synth: unknown artifact '" + a + "' (valid: " + valid +
                                        ")");
        }
    if (artifact_strength <= 0.0 || artifact_strength > 1.0)
        throw std::invalid_argument("synth: artifact_strength must be in (0, 1]");
}

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

struct FloatImage {
    std::size_t size;
    std::vector<double> v;  // (3, size, size)
    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return v[(c * size + y) * size + x];
    }
};

double uni(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Smooth low-frequency random texture with an elliptical face-like region.
FloatImage live_base(std::size_t size, std::mt19937_64& rng) {
    FloatImage img{size, std::vector<double>(3 * size * size, 0.0)};
    // channels share a luminance so a color cast falls outside the live range
    const double lum = uni(rng, 100, 160);
    double base[3];
    for (auto& b : base) b = lum + uni(rng, -8, 8);
    struct Wave { double fx, fy, ph, amp[3]; };
    std::vector<Wave> waves(3);
    for (auto& wv : waves) {
        wv.fx = uni(rng, 0.3, 2.5) / double(size);
        wv.fy = uni(rng, 0.3, 2.5) / double(size);
        wv.ph = uni(rng, 0, kTau);
        for (auto& a : wv.amp) a = uni(rng, 6, 18);
    }
    const double cx = size * uni(rng, 0.42, 0.58);
    const double cy = size * uni(rng, 0.42, 0.58);
    const double ax = size * uni(rng, 0.26, 0.38);
    const double ay = size * uni(rng, 0.32, 0.44);
    const double face[3] = {uni(rng, 22, 46), uni(rng, 6, 24), uni(rng, -10, 10)};
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double ex = (double(x) - cx) / ax;
            const double ey = (double(y) - cy) / ay;
            const double e = ex * ex + ey * ey;
            // soft ellipse edge between e = 0.85 and 1.15
            double wgt = (1.15 - e) / 0.30;
            wgt = std::clamp(wgt, 0.0, 1.0);
            wgt = wgt * wgt * (3 - 2 * wgt);
            for (std::size_t c = 0; c < 3; ++c) {
                double val = base[c] + wgt * face[c];
                for (const auto& wv : waves)
                    val += wv.amp[c] *
                           std::cos(kTau * (wv.fx * double(x) + wv.fy * double(y)) + wv.ph);
                img.at(c, y, x) = val;
            }
        }
    return img;
}

void apply_artifact(FloatImage& img, const std::string& type, double strength,
                    std::mt19937_64& rng) {
    const std::size_t size = img.size;
    if (type == "moire") {
        const double fx = uni(rng, 0.18, 0.45);
        const double fy = uni(rng, 0.18, 0.45);
        const double ph = uni(rng, 0, kTau);
        const double amp = strength * 80.0;
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double d = amp * std::sin(kTau * (fx * double(x) + fy * double(y)) + ph);
                for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) += d;
            }
    } else if (type == "color_cast") {
        const std::size_t c1 = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
        const double sign = std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0;
        const double delta = sign * strength * 90.0;
        const std::size_t c2 = (c1 + 1) % 3;
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                img.at(c1, y, x) += delta;
                img.at(c2, y, x) -= delta * 0.5;
            }
    } else if (type == "banding") {
        const std::size_t period = std::uniform_int_distribution<std::size_t>(6, 14)(rng);
        const double ph = uni(rng, 0, kTau);
        const double amp = strength * 70.0;
        for (std::size_t y = 0; y < size; ++y) {
            const double d = amp * (std::sin(kTau * double(y) / double(period) + ph) > 0 ? 1 : -1);
            for (std::size_t x = 0; x < size; ++x)
                for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) += d;
        }
    } else {
        throw std::invalid_argument("synth: unknown artifact '" + type + "'");
    }
}

ImageU8 quantize(const FloatImage& f) {
    ImageU8 img;
    img.width = img.height = f.size;
    img.pixels.resize(f.size * f.size * 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < f.size; ++y)
            for (std::size_t x = 0; x < f.size; ++x) {
                const double v = f.v[(c * f.size + y) * f.size + x];
                img.at(y, x, c) = std::uint8_t(std::clamp(std::lround(v), 0l, 255l));
            }
    return img;
}

Split split_for_index(std::size_t i, std::size_t count) {
    if (i * 10 < count * 6) return Split::train;
    if (i * 10 < count * 8) return Split::dev;
    return Split::test;
}

}  // namespace

DatasetManifest synth_dataset(const SynthConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(fs::path(out_dir) / "images");

    std::vector<std::string> artifacts(config.artifact_types.begin(),
                                       config.artifact_types.end());
    std::mt19937_64 rng(config.seed);
    DatasetManifest m;
    m.root = fs::absolute(out_dir).string();

    char name[64];
    for (std::size_t i = 0; i < config.count_per_class; ++i) {
        FloatImage f = live_base(config.image_size, rng);
        std::snprintf(name, sizeof name, "images/live_%05zu.ppm", i);
        write_ppm((fs::path(m.root) / name).string(), quantize(f));
        LabeledSample s;
        s.image_path = name;
        s.label = 0;
        s.attack_type = kLiveTag;
        s.subject_id = "live_" + std::to_string(i);
        s.split = split_for_index(i, config.count_per_class);
        m.samples.push_back(s);
    }
    for (std::size_t i = 0; i < config.count_per_class; ++i) {
        FloatImage f = live_base(config.image_size, rng);
        const std::string& art = artifacts[i % artifacts.size()];
        apply_artifact(f, art, config.artifact_strength, rng);
        std::snprintf(name, sizeof name, "images/spoof_%05zu.ppm", i);
        write_ppm((fs::path(m.root) / name).string(), quantize(f));
        LabeledSample s;
        s.image_path = name;
        s.label = 1;
        s.attack_type = art;
        s.subject_id = "spoof_" + std::to_string(i);
        s.split = split_for_index(i, config.count_per_class);
        m.samples.push_back(s);
    }

    const std::string manifest_path = (fs::path(m.root) / "manifest.jsonl").string();
    write_manifest(manifest_path, m);
    // return with resolved absolute paths, matching load_manifest
    return load_manifest(manifest_path);
}

// ---------------------------------------------------------------------------
namespace {
ImageTensor load_and_crop(const LabeledSample& s) {
    ImageTensor t = normalize_image(read_ppm(s.image_path));
    if (s.crop_box) t = apply_crop_box(t, *s.crop_box);
    return t;
}
}  // namespace

ImageTensor prepare_train_image(const LabeledSample& s, const PipelineConfig& cfg,
                                std::mt19937_64& rng) {
    ImageTensor t = load_and_crop(s);
    if (cfg.input_mode == PipelineConfig::InputMode::patched)
        return sample_patch(t, cfg.patch_size, rng);
    return resize_face(t, cfg.patch_size);
}

ImageTensor prepare_eval_image(const LabeledSample& s, const PipelineConfig& cfg) {
    ImageTensor t = load_and_crop(s);
    if (cfg.input_mode == PipelineConfig::InputMode::patched)
        return center_crop(t, cfg.patch_size);
    return resize_face(t, cfg.patch_size);
}

}  // namespace fas

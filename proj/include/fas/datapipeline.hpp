#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "fas/datamodel.hpp"
#include "fas/image.hpp"
#include "fas/tensor.hpp"

namespace fas {

using ImageTensor = Tensor<float>;  // (3, H, W), values in [-1, 1]

struct PipelineConfig {
    enum class InputMode { patched, resized };
    InputMode input_mode = InputMode::patched;
    std::size_t patch_size = 224;
    std::size_t eval_patches = 1;  // patched-mode eval: 1 = center crop, k>1 = random patches
    std::uint64_t seed = 0;

    void validate() const {
        if (patch_size % 32 != 0)
            throw std::invalid_argument("pipeline: patch_size must be divisible by 32");
    }
};

std::string to_string(PipelineConfig::InputMode m);
PipelineConfig::InputMode input_mode_from_string(const std::string& s);

/// x -> x / 127.5 - 1, channel-planar output.
ImageTensor normalize_image(const ImageU8& raw);
/// Inverse map back to 8-bit; exact round trip on normalized 8-bit values.
ImageU8 denormalize_image(const ImageTensor& t);
/// Cue map [-1, 1] -> 8-bit via x -> round((x + 1) * 127.5).
ImageU8 cue_to_image(const ImageTensor& cue);

ImageTensor bilinear_resize(const ImageTensor& img, std::size_t out_h, std::size_t out_w);
ImageTensor resize_face(const ImageTensor& img, std::size_t size);

/// Random size x size crop; images smaller than size are first upscaled so the
/// short side equals size.
ImageTensor sample_patch(const ImageTensor& img, std::size_t size, std::mt19937_64& rng);
ImageTensor center_crop(const ImageTensor& img, std::size_t size);
ImageTensor apply_crop_box(const ImageTensor& img, const CropBox& box);

/// 1:1 live/spoof batches. Every epoch covers each majority-class sample at
/// least once; the minority class is resampled with replacement.
class BalancedSampler {
public:
    BalancedSampler(std::vector<std::size_t> live_indices,
                    std::vector<std::size_t> spoof_indices, std::size_t batch_size,
                    std::uint64_t seed);

    std::size_t steps_per_epoch() const { return steps_; }
    /// Deterministic batch: first half live indices, second half spoof.
    std::vector<std::size_t> batch(std::size_t epoch, std::size_t step) const;
    std::size_t batch_size() const { return batch_; }

private:
    std::vector<std::size_t> live_, spoof_;
    std::size_t batch_ = 0, steps_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<std::size_t> epoch_slots(const std::vector<std::size_t>& pool,
                                         std::mt19937_64& rng) const;
    mutable std::size_t cached_epoch_ = std::size_t(-1);
    mutable std::vector<std::size_t> cached_live_slots_, cached_spoof_slots_;
};

struct SynthConfig {
    std::size_t count_per_class = 100;
    std::size_t image_size = 96;
    std::set<std::string> artifact_types{"moire", "color_cast", "banding"};
    double artifact_strength = 0.35;
    std::uint64_t seed = 0;

    void validate() const;
};

inline const std::set<std::string> kKnownArtifacts{"moire", "color_cast", "banding"};

/// Writes live/spoof PPM images plus a manifest (60/20/20 train/dev/test by
/// generation index). Fully deterministic under seed.
DatasetManifest synth_dataset(const SynthConfig& config, const std::string& out_dir);

/// Loads a sample's image, applies the optional crop box, normalizes and
/// prepares it per the pipeline config (training draws a random patch).
ImageTensor prepare_train_image(const LabeledSample& s, const PipelineConfig& cfg,
                                std::mt19937_64& rng);
ImageTensor prepare_eval_image(const LabeledSample& s, const PipelineConfig& cfg);

}  // namespace fas

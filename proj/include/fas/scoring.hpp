#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fas/tensor.hpp"

namespace fas {

struct ScoreRecord {
    std::string sample_id;
    double score = 0;       // mean |cue| magnitude, in [0, 1]
    int label = 0;          // 0 = live, 1 = spoof
    std::string attack_type = "live";
    std::string group;      // optional video/group id for frame aggregation
};

/// Spoof score: mean over all channels and pixels of |cue|.
template <typename S>
double spoof_score(const Tensor<S>& cue) {
    if (cue.numel() == 0) throw std::invalid_argument("spoof_score: empty cue map");
    double acc = 0;
    for (const auto& x : cue.data) acc += std::abs(double(x));
    return acc / double(cue.numel());
}

/// Per-sample spoof scores for a batch of cue maps (N, C, H, W).
template <typename S>
std::vector<double> spoof_scores(const Tensor<S>& cue_batch) {
    const std::size_t n = cue_batch.shape[0];
    const std::size_t per = cue_batch.numel() / n;
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0;
        const S* p = &cue_batch.data[i * per];
        for (std::size_t j = 0; j < per; ++j) acc += std::abs(double(p[j]));
        out[i] = acc / double(per);
    }
    return out;
}

/// Decision rule: spoof iff score >= threshold (ties classified spoof).
inline bool decide_spoof(double score, double threshold) {
    if (threshold <= 0) throw std::invalid_argument("decide: threshold must be > 0");
    return score >= threshold;
}

enum class VideoAggregation { mean, max };

inline double aggregate_video(const std::vector<double>& frame_scores,
                              VideoAggregation mode = VideoAggregation::mean) {
    if (frame_scores.empty())
        throw std::invalid_argument("aggregate_video: empty frame score list");
    if (mode == VideoAggregation::max) {
        double best = frame_scores[0];
        for (double s : frame_scores) best = std::max(best, s);
        return best;
    }
    double acc = 0;
    for (double s : frame_scores) acc += s;
    return acc / double(frame_scores.size());
}

// Score file I/O (line-delimited JSON records) lives in scoring.cpp.
void write_score_file(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_score_file(const std::string& path);

}  // namespace fas

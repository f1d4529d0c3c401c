#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fas/checkpoint.hpp"
#include "fas/config.hpp"
#include "fas/datamodel.hpp"
#include "fas/datapipeline.hpp"
#include "fas/losses.hpp"
#include "fas/metrics.hpp"
#include "fas/nn/classifier.hpp"
#include "fas/nn/generator.hpp"
#include "fas/scoring.hpp"

namespace fas {

/// Piecewise schedule: linear warm-up over epoch 0 to base_lr, then stepwise
/// decay by decay_factor every decay_every_steps post-warm-up steps.
double lr_at(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& config);

/// Per-component cue-map/tap gradients captured inside a train step, before
/// loss-weight scaling.
struct TrainStepDiag {
    Tensor<float> d_cue_regression;
    Tensor<float> d_cue_classifier;
    std::map<std::string, Tensor<float>> d_taps;
};

class Trainer {
public:
    Trainer(TrainConfig train, PipelineConfig pipeline, GeneratorConfig gen,
            ClassifierConfig clf);

    /// One optimizer update on generator and classifier jointly.
    LossBreakdown train_step(const Tensor<float>& images, const std::vector<int>& labels,
                             TrainStepDiag* diag = nullptr);

    /// Full training loop over the resolved protocol's train set. Returns the
    /// final checkpoint path. Writes a line-delimited step log next to it.
    std::string fit(const DatasetManifest& manifest, const EvalProtocol& protocol);

    void save(const std::string& path) const;
    static Trainer load(const std::string& path);

    nn::Generator<float>& generator() { return *gen_; }
    nn::Classifier<float>& classifier() { return *clf_; }
    const TrainConfig& train_config() const { return train_; }
    const PipelineConfig& pipeline_config() const { return pipeline_; }
    const GeneratorConfig& generator_config() const { return gen_cfg_; }
    std::size_t global_step() const { return global_step_; }
    std::size_t epoch() const { return epoch_; }
    std::size_t steps_per_epoch_hint() const { return steps_per_epoch_; }
    void set_steps_per_epoch_hint(std::size_t s) { steps_per_epoch_ = s; }

private:
    TrainConfig train_;
    PipelineConfig pipeline_;
    GeneratorConfig gen_cfg_;
    ClassifierConfig clf_cfg_;
    std::unique_ptr<nn::Generator<float>> gen_;
    std::unique_ptr<nn::Classifier<float>> clf_;
    std::size_t global_step_ = 0;
    std::size_t epoch_ = 0;
    std::size_t steps_per_epoch_ = 0;
    std::mt19937_64 data_rng_;

    void adam_step(double lr);
    void collect_all(std::vector<nn::Param<float>*>& out);
    friend struct TrainerAccess;
};

struct EvalOptions {
    double threshold = 0.01;
    bool use_dev_eer = false;
    VideoAggregation aggregation = VideoAggregation::mean;
};

struct EvalResult {
    MetricsReport report;
    std::vector<ScoreRecord> records;               // aggregated (per group)
    std::vector<ScoreRecord> frame_records;         // per sample
    std::map<std::string, std::vector<float>> embeddings;  // sample_id -> D4 tap
    double threshold_used = 0;
};

/// Scores the protocol's test set with the spoof-cue map (never the
/// classifier), optionally selecting the threshold at the dev EER point.
EvalResult evaluate(Trainer& trainer, const DatasetManifest& manifest,
                    const EvalProtocol& protocol, const EvalOptions& options);

}  // namespace fas

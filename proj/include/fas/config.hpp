#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "fas/losses.hpp"
#include "fas/nn/classifier.hpp"
#include "fas/nn/generator.hpp"
#include "fas/datapipeline.hpp"

namespace fas {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 20;
    double base_lr = 1e-3;
    double decay_factor = 0.95;
    std::size_t decay_every_steps = 600;
    LossWeights weights;
    TripletConfig triplet;
    std::uint64_t seed = 0;
    std::string checkpoint_dir = ".";
    std::size_t checkpoint_every_epochs = 0;  // 0 = final checkpoint only

    void validate() const {
        if (base_lr <= 0) throw std::invalid_argument("train: base_lr must be > 0");
        if (decay_factor <= 0 || decay_factor > 1)
            throw std::invalid_argument("train: decay_factor must be in (0, 1]");
        if (decay_every_steps < 1)
            throw std::invalid_argument("train: decay_every_steps must be >= 1");
        if (batch_size < 2 || batch_size % 2 != 0)
            throw std::invalid_argument("train: batch_size must be even and >= 2");
        weights.validate();
        triplet.validate();
    }
};

nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const ClassifierConfig& c);
nlohmann::json to_json(const PipelineConfig& c);
nlohmann::json to_json(const TrainConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct ExperimentConfig {
    TrainConfig train;
    PipelineConfig pipeline;
    GeneratorConfig generator;
    ClassifierConfig classifier;
};

/// Flat key=value config file ('#' comments). CLI flags override file values.
std::map<std::string, std::string> read_kv_file(const std::string& path);
ExperimentConfig experiment_from_kv(const std::map<std::string, std::string>& kv);

}  // namespace fas

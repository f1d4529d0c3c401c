#include "fas/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace fas {

double lr_at(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& config) {
    if (steps_per_epoch == 0) throw std::invalid_argument("lr_at: steps_per_epoch must be > 0");
    if (step < steps_per_epoch)  // linear warm-up over epoch 0
        return config.base_lr * double(step + 1) / double(steps_per_epoch);
    const std::size_t post = step - steps_per_epoch;
    return config.base_lr * std::pow(config.decay_factor, double(post / config.decay_every_steps));
}

namespace {

void load_pretrained_encoder(nn::Generator<float>& gen, const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    std::vector<nn::Param<float>*> params;
    gen.collect(params);
    std::vector<std::pair<std::string, Tensor<float>*>> buffers;
    gen.collect_buffers(buffers);
    auto is_encoder = [](const std::string& name) {
        return name.rfind("gen.stem.", 0) == 0 || name.rfind("gen.e", 0) == 0;
    };
    auto copy_into = [&](const std::string& name, Tensor<float>& dst) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end())
            throw std::runtime_error("pretrained encoder: missing tensor '" + name + "' in " +
                                     path);
        if (it->second.shape != dst.shape)
            throw std::runtime_error("pretrained encoder: shape mismatch for '" + name + "': " +
                                     it->second.shape_str() + " vs " + dst.shape_str());
        dst = it->second;
    };
    for (auto* p : params)
        if (is_encoder(p->name)) copy_into(p->name, p->value);
    for (auto& [name, t] : buffers)
        if (is_encoder(name)) copy_into(name, *t);
}

}  // namespace

Trainer::Trainer(TrainConfig train, PipelineConfig pipeline, GeneratorConfig gen,
                 ClassifierConfig clf)
    : train_(std::move(train)), pipeline_(std::move(pipeline)), gen_cfg_(std::move(gen)),
      clf_cfg_(clf) {
    train_.validate();
    pipeline_.validate();
    gen_cfg_.validate();
    gen_ = std::make_unique<nn::Generator<float>>(gen_cfg_, train_.seed);
    clf_ = std::make_unique<nn::Classifier<float>>(clf_cfg_, train_.seed + 1);
    data_rng_.seed(train_.seed ^ 0xD1B54A32D192ED03ull);
    if (gen_cfg_.use_pretrained_encoder)
        load_pretrained_encoder(*gen_, gen_cfg_.pretrained_path);
}

void Trainer::collect_all(std::vector<nn::Param<float>*>& out) {
    gen_->collect(out);
    clf_->collect(out);
}

void Trainer::adam_step(double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double t = double(global_step_ + 1);
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc2 = 1.0 - std::pow(b2, t);
    std::vector<nn::Param<float>*> params;
    collect_all(params);
    for (auto* p : params) {
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad.data[i];
            const double m = b1 * p->m.data[i] + (1 - b1) * g;
            const double v = b2 * p->v.data[i] + (1 - b2) * g * g;
            p->m.data[i] = float(m);
            p->v.data[i] = float(v);
            p->value.data[i] -= float(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
        }
    }
}

LossBreakdown Trainer::train_step(const Tensor<float>& images, const std::vector<int>& labels,
                                  TrainStepDiag* diag) {
    gen_->zero_grad();
    clf_->zero_grad();

    nn::GeneratorOutput<float> out = gen_->forward(images, /*training=*/true);

    LossBreakdown bd;
    bd.lr = regression_loss(out.cue_map, labels);
    Tensor<float> d_cue_r = regression_loss_grad(out.cue_map, labels);

    const bool use_overlay = clf_cfg_.input_mode == ClassifierConfig::InputMode::overlay;
    Tensor<float> clf_in = use_overlay ? overlay(images, out.cue_map) : out.cue_map;
    Tensor<float> probs = clf_->forward(clf_in, /*training=*/true);
    bd.la = classification_loss(probs, labels);
    Tensor<float> d_prob = classification_loss_grad(probs, labels);
    Tensor<float> d_cue_a = clf_->backward(d_prob);  // dS/dC = I in overlay mode

    std::map<std::string, Tensor<float>> d_taps;
    for (const auto& [tap, feats] : out.taps) {
        auto res = triplet_loss(feats, labels, train_.triplet.margin);
        bd.lt_per_tap[tap] = res.loss;
        bd.triplet_count_per_tap[tap] = res.count;
        d_taps[tap] = triplet_loss_grad(feats, labels, train_.triplet.margin);
    }

    std::map<std::string, float> lt_f;
    for (const auto& [k, v] : bd.lt_per_tap) lt_f[k] = float(v);
    bd.total = total_loss(float(bd.lr), lt_f, float(bd.la), train_.weights);
    if (!std::isfinite(bd.total)) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss at step " << global_step_ << ": Lr=" << bd.lr
            << " La=" << bd.la;
        for (const auto& [k, v] : bd.lt_per_tap) msg << " Lt[" << k << "]=" << v;
        throw std::runtime_error(msg.str());
    }

    if (diag) {
        diag->d_cue_regression = d_cue_r;
        diag->d_cue_classifier = d_cue_a;
        diag->d_taps = d_taps;
    }

    Tensor<float> d_cue = d_cue_r;
    d_cue.scale(float(train_.weights.alpha1));
    for (std::size_t i = 0; i < d_cue.numel(); ++i)
        d_cue.data[i] += float(train_.weights.alpha3) * d_cue_a.data[i];
    for (auto& [tap, g] : d_taps) g.scale(float(train_.weights.alpha2));

    gen_->backward(d_cue, d_taps);

    const std::size_t spe = steps_per_epoch_ ? steps_per_epoch_ : 1;
    adam_step(lr_at(global_step_, spe, train_));
    ++global_step_;
    return bd;
}

std::string Trainer::fit(const DatasetManifest& manifest, const EvalProtocol& protocol) {
    ResolvedProtocol rp = resolve_protocol(manifest, protocol);
    std::vector<std::size_t> live_idx, spoof_idx;
    for (std::size_t i = 0; i < rp.train_set.size(); ++i)
        (rp.train_set[i].is_live() ? live_idx : spoof_idx).push_back(i);
    BalancedSampler sampler(live_idx, spoof_idx, train_.batch_size, train_.seed);
    steps_per_epoch_ = sampler.steps_per_epoch();

    fs::create_directories(train_.checkpoint_dir);
    const std::string log_path = (fs::path(train_.checkpoint_dir) / "train_log.jsonl").string();
    std::ofstream log(log_path, epoch_ > 0 ? std::ios::app : std::ios::trunc);

    const std::size_t ps = pipeline_.patch_size;
    while (epoch_ < train_.epochs) {
        for (std::size_t step = 0; step < steps_per_epoch_; ++step) {
            const auto idx = sampler.batch(epoch_, step);
            Tensor<float> batch({idx.size(), 3, ps, ps});
            std::vector<int> labels(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const LabeledSample& s = rp.train_set[idx[i]];
                ImageTensor img = prepare_train_image(s, pipeline_, data_rng_);
                std::copy(img.data.begin(), img.data.end(),
                          batch.data.begin() + long(i * img.numel()));
                labels[i] = s.label;
            }
            const double lr = lr_at(global_step_, steps_per_epoch_, train_);
            LossBreakdown bd = train_step(batch, labels);
            nlohmann::json rec{{"step", global_step_ - 1}, {"epoch", epoch_},
                               {"lr", lr},             {"Lr", bd.lr},
                               {"La", bd.la},          {"total", bd.total}};
            for (const auto& [k, v] : bd.lt_per_tap) rec["Lt_" + k] = v;
            log << rec.dump() << "\n";
        }
        log.flush();
        ++epoch_;  // checkpoints count completed epochs
        if (train_.checkpoint_every_epochs && epoch_ % train_.checkpoint_every_epochs == 0 &&
            epoch_ < train_.epochs) {
            save((fs::path(train_.checkpoint_dir) /
                  ("checkpoint_epoch_" + std::to_string(epoch_) + ".ckpt")).string());
        }
    }
    const std::string final_path =
        (fs::path(train_.checkpoint_dir) / "checkpoint_final.ckpt").string();
    save(final_path);
    return final_path;
}

void Trainer::save(const std::string& path) const {
    Checkpoint ckpt;
    ckpt.meta["train_config"] = to_json(train_);
    ckpt.meta["pipeline_config"] = to_json(pipeline_);
    ckpt.meta["generator_config"] = to_json(gen_cfg_);
    ckpt.meta["classifier_config"] = to_json(clf_cfg_);
    ckpt.meta["global_step"] = global_step_;
    ckpt.meta["epoch"] = epoch_;
    ckpt.meta["steps_per_epoch"] = steps_per_epoch_;
    std::ostringstream rng_state;
    rng_state << data_rng_;
    ckpt.meta["data_rng"] = rng_state.str();

    std::vector<nn::Param<float>*> params;
    const_cast<Trainer*>(this)->collect_all(params);
    for (auto* p : params) {
        ckpt.tensors[p->name] = p->value;
        ckpt.tensors[p->name + ".adam_m"] = p->m;
        ckpt.tensors[p->name + ".adam_v"] = p->v;
    }
    std::vector<std::pair<std::string, Tensor<float>*>> buffers;
    gen_->collect_buffers(buffers);
    clf_->collect_buffers(buffers);
    for (auto& [name, t] : buffers) ckpt.tensors[name] = *t;

    save_checkpoint(path, ckpt);
}

Trainer Trainer::load(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    Trainer tr(train_config_from_json(ckpt.meta.at("train_config")),
               pipeline_config_from_json(ckpt.meta.at("pipeline_config")),
               generator_config_from_json(ckpt.meta.at("generator_config")),
               classifier_config_from_json(ckpt.meta.at("classifier_config")));
    tr.global_step_ = ckpt.meta.value("global_step", 0);
    tr.epoch_ = ckpt.meta.value("epoch", 0);
    tr.steps_per_epoch_ = ckpt.meta.value("steps_per_epoch", 0);
    if (ckpt.meta.contains("data_rng")) {
        std::istringstream in(ckpt.meta["data_rng"].get<std::string>());
        in >> tr.data_rng_;
    }
    std::vector<nn::Param<float>*> params;
    tr.collect_all(params);
    auto restore = [&](const std::string& name, Tensor<float>& dst) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end())
            throw std::runtime_error(path + ": checkpoint missing tensor '" + name + "'");
        if (it->second.shape != dst.shape)
            throw std::runtime_error(path + ": tensor shape mismatch for '" + name + "'");
        dst = it->second;
    };
    for (auto* p : params) {
        restore(p->name, p->value);
        restore(p->name + ".adam_m", p->m);
        restore(p->name + ".adam_v", p->v);
    }
    std::vector<std::pair<std::string, Tensor<float>*>> buffers;
    tr.gen_->collect_buffers(buffers);
    tr.clf_->collect_buffers(buffers);
    for (auto& [name, t] : buffers) restore(name, *t);
    return tr;
}

// ---------------------------------------------------------------------------
namespace {

struct ScoredSet {
    std::vector<ScoreRecord> frames;
    std::map<std::string, std::vector<float>> embeddings;
};

ScoredSet score_samples(Trainer& trainer, const std::vector<LabeledSample>& samples,
                        const PipelineConfig& pipeline) {
    ScoredSet out;
    nn::Generator<float>& gen = trainer.generator();
    const std::size_t ps = pipeline.patch_size;
    const bool want_d4 = gen.has_tap("D4");
    constexpr std::size_t kEvalBatch = 16;
    for (std::size_t start = 0; start < samples.size(); start += kEvalBatch) {
        const std::size_t n = std::min(kEvalBatch, samples.size() - start);
        Tensor<float> batch({n, 3, ps, ps});
        for (std::size_t i = 0; i < n; ++i) {
            ImageTensor img = prepare_eval_image(samples[start + i], pipeline);
            std::copy(img.data.begin(), img.data.end(),
                      batch.data.begin() + long(i * img.numel()));
        }
        nn::GeneratorOutput<float> go = gen.forward(batch, /*training=*/false);
        std::vector<double> scores = spoof_scores(go.cue_map);

        // extra random patches averaged into the score (patched mode, k > 1)
        if (pipeline.input_mode == PipelineConfig::InputMode::patched &&
            pipeline.eval_patches > 1) {
            for (std::size_t i = 0; i < n; ++i) {
                std::mt19937_64 rng(pipeline.seed ^ (0x9E3779B97F4A7C15ull * (start + i + 1)));
                ImageTensor full =
                    normalize_image(read_ppm(samples[start + i].image_path));
                double acc = scores[i];
                for (std::size_t k = 1; k < pipeline.eval_patches; ++k) {
                    ImageTensor patch = sample_patch(full, ps, rng);
                    Tensor<float> one({1, 3, ps, ps}, patch.data);
                    acc += spoof_score(gen.forward(one, false).cue_map);
                }
                scores[i] = acc / double(pipeline.eval_patches);
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            const LabeledSample& s = samples[start + i];
            ScoreRecord r;
            r.sample_id = fs::path(s.image_path).filename().string();
            r.score = scores[i];
            r.label = s.label;
            r.attack_type = s.attack_type;
            r.group = s.group;
            out.frames.push_back(std::move(r));
            if (want_d4) {
                const Tensor<float>& d4 = go.taps.at("D4");
                std::vector<float> emb(d4.shape[1]);
                for (std::size_t c = 0; c < emb.size(); ++c) emb[c] = d4.at2(i, c);
                out.embeddings[out.frames.back().sample_id] = std::move(emb);
            }
        }
    }
    return out;
}

std::vector<ScoreRecord> aggregate_groups(const std::vector<ScoreRecord>& frames,
                                          VideoAggregation agg) {
    std::map<std::string, std::vector<const ScoreRecord*>> groups;
    std::vector<ScoreRecord> out;
    for (const auto& r : frames) {
        if (r.group.empty()) {
            out.push_back(r);
        } else {
            groups[r.group].push_back(&r);
        }
    }
    for (const auto& [gid, members] : groups) {
        std::vector<double> scores;
        for (const auto* m : members) scores.push_back(m->score);
        ScoreRecord r = *members.front();
        r.sample_id = gid;
        r.score = aggregate_video(scores, agg);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

EvalResult evaluate(Trainer& trainer, const DatasetManifest& manifest,
                    const EvalProtocol& protocol, const EvalOptions& options) {
    ResolvedProtocol rp = resolve_protocol(manifest, protocol);
    bool has_live = false, has_spoof = false;
    for (const auto& s : rp.test_set) (s.is_live() ? has_live : has_spoof) = true;
    if (!has_live || !has_spoof)
        throw std::runtime_error("evaluate: test set must contain both classes");

    EvalResult res;
    ScoredSet scored = score_samples(trainer, rp.test_set, trainer.pipeline_config());
    res.frame_records = scored.frames;
    res.embeddings = std::move(scored.embeddings);
    res.records = aggregate_groups(res.frame_records, options.aggregation);

    double threshold = options.threshold;
    if (options.use_dev_eer) {
        if (rp.dev_set.empty())
            throw std::runtime_error("evaluate: dev-EER threshold requested but dev set is empty");
        ScoredSet dev = score_samples(trainer, rp.dev_set, trainer.pipeline_config());
        threshold = select_threshold(aggregate_groups(dev.frames, options.aggregation));
    }
    res.threshold_used = threshold;
    res.report = compute_acer_report(res.records, threshold);
    res.report.hter = compute_hter(res.records, threshold);
    return res;
}

}  // namespace fas

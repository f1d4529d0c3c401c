// fascue: spoof-cue training and evaluation command line.
//
// Subcommands: train, eval, score, synth-data, export-cues.
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fas/config.hpp"
#include "fas/datamodel.hpp"
#include "fas/datapipeline.hpp"
#include "fas/metrics.hpp"
#include "fas/scoring.hpp"
#include "fas/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
    std::string config_path, manifest_path, protocol = "default", out = "out", resume;
    std::int64_t seed = -1, epochs = -1, batch_size = -1;
    double base_lr = -1;
};

int cmd_train(const TrainArgs& a) {
    fas::ExperimentConfig cfg;
    if (!a.config_path.empty()) cfg = fas::experiment_from_kv(fas::read_kv_file(a.config_path));
    // flags override config-file values
    if (a.seed >= 0) {
        cfg.train.seed = std::uint64_t(a.seed);
        cfg.pipeline.seed = std::uint64_t(a.seed);
    }
    if (a.epochs >= 0) cfg.train.epochs = std::size_t(a.epochs);
    if (a.batch_size >= 0) cfg.train.batch_size = std::size_t(a.batch_size);
    if (a.base_lr > 0) cfg.train.base_lr = a.base_lr;
    cfg.train.checkpoint_dir = a.out;
    cfg.generator.input_size = cfg.pipeline.patch_size;
    cfg.train.validate();

    fas::DatasetManifest manifest = fas::load_manifest(a.manifest_path);
    fas::EvalProtocol protocol = fas::load_protocol(a.protocol);

    if (!a.resume.empty()) {
        fas::Trainer trainer = fas::Trainer::load(a.resume);
        const std::string path = trainer.fit(manifest, protocol);
        std::cout << "checkpoint: " << path << "\n";
        return 0;
    }
    fas::Trainer trainer(cfg.train, cfg.pipeline, cfg.generator, cfg.classifier);
    const std::string path = trainer.fit(manifest, protocol);
    std::cout << "checkpoint: " << path << "\n";
    return 0;
}

void write_embeddings(const std::string& path,
                      const std::map<std::string, std::vector<float>>& embeddings) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embeddings: " + path);
    for (const auto& [id, vec] : embeddings)
        out << nlohmann::json{{"sample_id", id}, {"embedding", vec}}.dump() << "\n";
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest_path,
             const std::string& protocol_path, double threshold, bool dev_eer,
             const std::string& out_dir) {
    fas::Trainer trainer = fas::Trainer::load(checkpoint);
    fas::DatasetManifest manifest = fas::load_manifest(manifest_path);
    fas::EvalProtocol protocol = fas::load_protocol(protocol_path);
    fas::EvalOptions opts;
    opts.threshold = threshold;
    opts.use_dev_eer = dev_eer;
    fas::EvalResult res = fas::evaluate(trainer, manifest, protocol, opts);

    fs::create_directories(out_dir);
    fas::write_score_file((fs::path(out_dir) / "scores.jsonl").string(), res.frame_records);
    write_embeddings((fs::path(out_dir) / "embeddings.jsonl").string(), res.embeddings);
    fas::write_report_json((fs::path(out_dir) / "report.json").string(), res.report);
    std::ofstream rep((fs::path(out_dir) / "report.txt").string());
    rep << fas::format_report(res.report);
    std::cout << fas::format_report(res.report);
    return 0;
}

int cmd_score(const std::string& scores_path, double threshold,
              const std::string& eer_from, const std::string& report_path) {
    auto records = fas::read_score_file(scores_path);
    if (!eer_from.empty()) threshold = fas::select_threshold(fas::read_score_file(eer_from));
    fas::MetricsReport report = fas::compute_acer_report(records, threshold);
    report.hter = fas::compute_hter(records, threshold);
    std::cout << fas::format_report(report);
    if (!report_path.empty()) fas::write_report_json(report_path, report);
    return 0;
}

int cmd_synth_data(std::size_t count, std::size_t size, const std::string& artifacts,
                   double strength, std::uint64_t seed, const std::string& out) {
    fas::SynthConfig cfg;
    cfg.count_per_class = count;
    cfg.image_size = size;
    cfg.artifact_strength = strength;
    cfg.seed = seed;
    if (!artifacts.empty()) {
        cfg.artifact_types.clear();
        std::stringstream ss(artifacts);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.artifact_types.insert(item);
    }
    fas::DatasetManifest m = fas::synth_dataset(cfg, out);
    std::cout << "wrote " << m.samples.size() << " samples under " << m.root << "\n";
    std::cout << "manifest: " << (fs::path(m.root) / "manifest.jsonl").string() << "\n";
    return 0;
}

int cmd_export_cues(const std::string& checkpoint, const std::vector<std::string>& images,
                    const std::string& out_dir) {
    fas::Trainer trainer = fas::Trainer::load(checkpoint);
    fs::create_directories(out_dir);
    std::vector<fas::ScoreRecord> records;
    for (const auto& img_path : images) {
        fas::LabeledSample s;
        s.image_path = img_path;
        fas::ImageTensor img = fas::prepare_eval_image(s, trainer.pipeline_config());
        fas::Tensor<float> one({1, img.shape[0], img.shape[1], img.shape[2]}, img.data);
        auto go = trainer.generator().forward(one, /*training=*/false);
        fas::ImageTensor cue({go.cue_map.shape[1], go.cue_map.shape[2], go.cue_map.shape[3]},
                             go.cue_map.data);
        const std::string stem = fs::path(img_path).stem().string();
        fas::write_ppm((fs::path(out_dir) / (stem + "_cue.ppm")).string(),
                       fas::cue_to_image(cue));
        fas::ScoreRecord r;
        r.sample_id = fs::path(img_path).filename().string();
        r.score = fas::spoof_score(cue);
        records.push_back(std::move(r));
    }
    fas::write_score_file((fs::path(out_dir) / "scores.jsonl").string(), records);
    for (const auto& r : records) std::cout << r.sample_id << " " << r.score << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spoof-cue learning framework for face anti-spoofing"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train generator and classifier end-to-end");
    train->add_option("--config", train_args.config_path, "Flat key=value config file");
    train->add_option("--manifest", train_args.manifest_path, "Dataset manifest")->required();
    train->add_option("--protocol", train_args.protocol,
                      "Protocol JSON file or 'default' (split-based)");
    train->add_option("--out", train_args.out, "Output directory for checkpoints and logs");
    train->add_option("--seed", train_args.seed, "Seed override");
    train->add_option("--epochs", train_args.epochs, "Epoch count override (default 20)");
    train->add_option("--batch-size", train_args.batch_size,
                      "Batch size override (default 32)");
    train->add_option("--base-lr", train_args.base_lr,
                      "Initial learning rate override (default 1e-3)");
    train->add_option("--resume", train_args.resume, "Resume from a checkpoint");

    std::string eval_ckpt, eval_manifest, eval_protocol = "default", eval_out = "eval_out";
    double eval_threshold = 0.01;  // recommended spoof-score threshold
    bool eval_dev_eer = false;
    auto* eval = app.add_subcommand("eval", "Score a test set with the spoof cue map");
    eval->add_option("--checkpoint", eval_ckpt, "Trained checkpoint")->required();
    eval->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    eval->add_option("--protocol", eval_protocol, "Protocol JSON file or 'default'");
    eval->add_option("--threshold", eval_threshold, "Decision threshold (default 0.01)");
    eval->add_flag("--dev-eer", eval_dev_eer, "Select threshold at the dev-set EER point");
    eval->add_option("--report", eval_out, "Output directory (report, scores, embeddings)");

    std::string score_file, score_eer_from, score_report;
    double score_threshold = 0.01;
    auto* score = app.add_subcommand("score", "Recompute metrics from a score file");
    score->add_option("--scores", score_file, "Score file (jsonl)")->required();
    score->add_option("--threshold", score_threshold, "Decision threshold (default 0.01)");
    score->add_option("--eer-from", score_eer_from, "Select threshold from this dev score file");
    score->add_option("--report", score_report, "Optional JSON report output path");

    std::size_t synth_count = 100, synth_size = 96;
    std::string synth_artifacts, synth_out = "synth";
    double synth_strength = 0.35;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth-data", "Generate a synthetic dataset");
    synth->add_option("--count", synth_count, "Images per class");
    synth->add_option("--size", synth_size, "Image size in pixels");
    synth->add_option("--artifacts", synth_artifacts,
                      "Comma list from {moire, color_cast, banding}");
    synth->add_option("--strength", synth_strength, "Artifact strength in (0, 1]");
    synth->add_option("--seed", synth_seed, "Generation seed");
    synth->add_option("--out", synth_out, "Output directory")->required();

    std::string export_ckpt, export_out = "cues";
    std::vector<std::string> export_images;
    auto* exp = app.add_subcommand("export-cues", "Write cue maps as 8-bit images");
    exp->add_option("--checkpoint", export_ckpt, "Trained checkpoint")->required();
    exp->add_option("--images", export_images, "Input images (PPM)")->required();
    exp->add_option("--out", export_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (*train) return cmd_train(train_args);
        if (*eval)
            return cmd_eval(eval_ckpt, eval_manifest, eval_protocol, eval_threshold,
                            eval_dev_eer, eval_out);
        if (*score) return cmd_score(score_file, score_threshold, score_eer_from, score_report);
        if (*synth)
            return cmd_synth_data(synth_count, synth_size, synth_artifacts, synth_strength,
                                  synth_seed, synth_out);
        if (*exp) return cmd_export_cues(export_ckpt, export_images, export_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fas/trainer.hpp"

namespace fs = std::filesystem;
using fas::Tensor;

namespace fas {
// Test hook declared as a friend of Trainer.
struct TrainerAccess {
    static void adam_step(Trainer& t, double lr) { t.adam_step(lr); }
    static void collect(Trainer& t, std::vector<nn::Param<float>*>& out) {
        t.collect_all(out);
    }
};
}  // namespace fas

namespace {

fas::TrainConfig small_train(std::uint64_t seed) {
    fas::TrainConfig t;
    t.batch_size = 4;
    t.epochs = 1;
    t.seed = seed;
    return t;
}

fas::PipelineConfig small_pipeline(std::uint64_t seed) {
    fas::PipelineConfig p;
    p.patch_size = 32;
    p.seed = seed;
    return p;
}

fas::GeneratorConfig small_generator() {
    fas::GeneratorConfig g;
    g.input_size = 32;
    g.encoder_stage_widths = {4, 4, 8, 8, 8};
    g.decoder_stage_widths = {8, 8, 4, 4, 4};
    return g;
}

fas::ClassifierConfig small_classifier() {
    fas::ClassifierConfig c;
    c.backbone_widths = {4, 4, 8, 8};
    return c;
}

fas::Trainer make_trainer(std::uint64_t seed, fas::TrainConfig t) {
    return fas::Trainer(std::move(t), small_pipeline(seed), small_generator(),
                        small_classifier());
}

fas::Trainer make_trainer(std::uint64_t seed) { return make_trainer(seed, small_train(seed)); }

Tensor<float> random_batch(std::size_t n, std::mt19937_64& rng) {
    Tensor<float> t({n, 3, 32, 32});
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (auto& x : t.data) x = u(rng);
    return t;
}

std::vector<float> all_params(fas::Trainer& t) {
    std::vector<fas::nn::Param<float>*> ps;
    fas::TrainerAccess::collect(t, ps);
    std::vector<float> out;
    for (auto* p : ps) out.insert(out.end(), p->value.data.begin(), p->value.data.end());
    return out;
}

fs::path temp_dir(const std::string& leaf) {
    fs::path p = fs::temp_directory_path() / "fas_trainer_tests" / leaf;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fas::DatasetManifest tiny_dataset(const std::string& leaf, std::size_t count = 12) {
    fas::SynthConfig cfg;
    cfg.count_per_class = count;
    cfg.image_size = 40;
    cfg.seed = 77;
    return fas::synth_dataset(cfg, temp_dir(leaf).string());
}

}  // namespace

TEST_CASE("learning rate schedule hits the documented values") {
    fas::TrainConfig cfg;  // base 1e-3, decay 0.95 every 600
    const std::size_t spe = 100;
    CHECK(fas::lr_at(spe - 1, spe, cfg) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(fas::lr_at(spe + 600, spe, cfg) == doctest::Approx(9.5e-4).epsilon(1e-12));
    CHECK(fas::lr_at(spe + 1200, spe, cfg) == doctest::Approx(9.025e-4).epsilon(1e-12));
    // warm-up ramps linearly from base/spe
    CHECK(fas::lr_at(0, spe, cfg) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(fas::lr_at(49, spe, cfg) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK_THROWS(fas::lr_at(0, 0, cfg));
}

TEST_CASE("learning rate is nonincreasing after warm-up") {
    fas::TrainConfig cfg;
    cfg.decay_every_steps = 7;
    double prev = cfg.base_lr;
    for (std::size_t step = 10; step < 200; ++step) {
        const double lr = fas::lr_at(step, 10, cfg);
        CHECK(lr <= prev + 1e-15);
        prev = lr;
    }
}

TEST_CASE("train config validation") {
    fas::TrainConfig cfg;
    cfg.base_lr = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.decay_factor = 1.5;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.decay_every_steps = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.batch_size = 5;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("train steps are bitwise deterministic under a fixed seed") {
    fas::Trainer a = make_trainer(9);
    fas::Trainer b = make_trainer(9);
    std::mt19937_64 rng(1);
    Tensor<float> batch = random_batch(4, rng);
    std::vector<int> labels{0, 0, 1, 1};
    for (int step = 0; step < 3; ++step) {
        fas::LossBreakdown la = a.train_step(batch, labels);
        fas::LossBreakdown lb = b.train_step(batch, labels);
        CHECK(la.total == lb.total);
        CHECK(la.lr == lb.lr);
        CHECK(la.la == lb.la);
        CHECK(la.lt_per_tap == lb.lt_per_tap);
    }
    CHECK(all_params(a) == all_params(b));
}

TEST_CASE("regression gradient never touches spoof cue maps in a real step") {
    fas::Trainer t = make_trainer(3);
    std::mt19937_64 rng(2);
    Tensor<float> batch = random_batch(4, rng);
    std::vector<int> labels{0, 1, 0, 1};
    fas::TrainStepDiag diag;
    t.train_step(batch, labels, &diag);
    const std::size_t per = diag.d_cue_regression.numel() / 4;
    for (std::size_t i = 0; i < 4; ++i) {
        double reg = 0, clf = 0;
        for (std::size_t j = 0; j < per; ++j) {
            reg += std::abs(double(diag.d_cue_regression.data[i * per + j]));
            clf += std::abs(double(diag.d_cue_classifier.data[i * per + j]));
        }
        if (labels[i] != 0) {
            CHECK(reg == 0.0);
            CHECK(clf > 0.0);
        } else {
            CHECK(reg > 0.0);
        }
    }
    // some spoof sample receives a nonzero triplet gradient
    double spoof_tap_mass = 0;
    for (const auto& [tap, g] : diag.d_taps)
        for (std::size_t i = 0; i < 4; ++i)
            if (labels[i] != 0)
                for (std::size_t c = 0; c < g.shape[1]; ++c)
                    spoof_tap_mass += std::abs(double(g.at2(i, c)));
    CHECK(spoof_tap_mass > 0.0);
}

TEST_CASE("overlay path alone still trains the generator") {
    fas::TrainConfig cfg = small_train(5);
    cfg.weights.alpha1 = 0;
    cfg.weights.alpha2 = 0;
    cfg.weights.alpha3 = 1;
    fas::Trainer t = make_trainer(5, cfg);
    std::mt19937_64 rng(4);
    Tensor<float> batch = random_batch(4, rng);
    std::vector<int> labels{0, 0, 1, 1};
    const std::vector<float> before = all_params(t);
    t.train_step(batch, labels);
    CHECK(all_params(t) != before);
}

TEST_CASE("a zero learning rate leaves parameters unchanged") {
    fas::Trainer t = make_trainer(6);
    std::mt19937_64 rng(5);
    Tensor<float> batch = random_batch(4, rng);
    t.generator().forward(batch, true);  // populate some caches
    std::vector<fas::nn::Param<float>*> ps;
    fas::TrainerAccess::collect(t, ps);
    for (auto* p : ps) p->grad.fill(0.25f);
    const std::vector<float> before = all_params(t);
    fas::TrainerAccess::adam_step(t, 0.0);
    CHECK(all_params(t) == before);
}

TEST_CASE("non-finite losses abort with a diagnostic") {
    fas::Trainer t = make_trainer(7);
    std::mt19937_64 rng(6);
    Tensor<float> batch = random_batch(4, rng);
    std::vector<fas::nn::Param<float>*> ps;
    fas::TrainerAccess::collect(t, ps);
    for (auto* p : ps)
        if (p->name == "gen.head.conv.bias")
            p->value.fill(std::numeric_limits<float>::quiet_NaN());
    CHECK_THROWS(t.train_step(batch, std::vector<int>{0, 0, 1, 1}));
}

TEST_CASE("checkpoints restore the exact trainer state") {
    fas::Trainer t = make_trainer(11);
    std::mt19937_64 rng(7);
    Tensor<float> batch = random_batch(4, rng);
    std::vector<int> labels{0, 0, 1, 1};
    t.train_step(batch, labels);
    t.train_step(batch, labels);
    const std::string path = (temp_dir("ckpt") / "state.ckpt").string();
    t.save(path);
    fas::Trainer back = fas::Trainer::load(path);
    CHECK(back.global_step() == t.global_step());
    CHECK(all_params(back) == all_params(t));
    // identical continuation
    fas::LossBreakdown x = t.train_step(batch, labels);
    fas::LossBreakdown y = back.train_step(batch, labels);
    CHECK(x.total == y.total);

    CHECK_THROWS(fas::Trainer::load((temp_dir("ckpt2") / "missing.ckpt").string()));
    const std::string garbage = (temp_dir("ckpt3") / "garbage.ckpt").string();
    std::ofstream(garbage) << "not a checkpoint";
    CHECK_THROWS(fas::Trainer::load(garbage));
}

TEST_CASE("raw checkpoint container round-trips tensors and metadata") {
    fas::Checkpoint c;
    c.meta["note"] = "x";
    c.tensors["w"] = Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6});
    const std::string path = (temp_dir("rawckpt") / "c.ckpt").string();
    fas::save_checkpoint(path, c);
    fas::Checkpoint back = fas::load_checkpoint(path);
    CHECK(back.meta["note"] == "x");
    REQUIRE(back.tensors.count("w") == 1);
    CHECK(back.tensors["w"].shape == std::vector<std::size_t>{2, 3});
    CHECK(back.tensors["w"].data == c.tensors["w"].data);
}

TEST_CASE("fit with zero epochs checkpoints the initialization") {
    fas::DatasetManifest m = tiny_dataset("fit0");
    fas::TrainConfig cfg = small_train(13);
    cfg.epochs = 0;
    cfg.checkpoint_dir = temp_dir("fit0_out").string();
    fas::Trainer t = make_trainer(13, cfg);
    const std::vector<float> init = all_params(t);
    const std::string path = t.fit(m, fas::EvalProtocol{});
    fas::Trainer back = fas::Trainer::load(path);
    CHECK(all_params(back) == init);
    CHECK(back.global_step() == 0);
}

TEST_CASE("fit writes a step log with loss components") {
    fas::DatasetManifest m = tiny_dataset("fitlog");
    fas::TrainConfig cfg = small_train(17);
    cfg.epochs = 1;
    cfg.checkpoint_dir = temp_dir("fitlog_out").string();
    fas::Trainer t = make_trainer(17, cfg);
    t.fit(m, fas::EvalProtocol{});
    std::ifstream log(fs::path(cfg.checkpoint_dir) / "train_log.jsonl");
    REQUIRE(log.good());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) {
        ++lines;
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("step"));
        CHECK(j.contains("lr"));
        CHECK(j.contains("Lr"));
        CHECK(j.contains("La"));
        CHECK(j.contains("total"));
        CHECK(j.contains("Lt_E5"));
    }
    CHECK(lines == t.steps_per_epoch_hint());
}

TEST_CASE("resuming from a mid-run checkpoint matches the uninterrupted run") {
    fas::DatasetManifest m = tiny_dataset("resume");

    fas::TrainConfig cfg = small_train(19);
    cfg.epochs = 3;
    cfg.checkpoint_dir = temp_dir("resume_full").string();
    fas::Trainer full = make_trainer(19, cfg);
    const std::string full_path = full.fit(m, fas::EvalProtocol{});

    fas::TrainConfig cfg2 = cfg;
    cfg2.checkpoint_dir = temp_dir("resume_split").string();
    cfg2.checkpoint_every_epochs = 2;
    fas::Trainer first = make_trainer(19, cfg2);
    first.fit(m, fas::EvalProtocol{});
    const std::string mid =
        (fs::path(cfg2.checkpoint_dir) / "checkpoint_epoch_2.ckpt").string();
    REQUIRE(fs::exists(mid));
    fas::Trainer resumed = fas::Trainer::load(mid);
    CHECK(resumed.epoch() == 2);
    resumed.fit(m, fas::EvalProtocol{});

    fas::Trainer a = fas::Trainer::load(full_path);
    fas::Trainer b = fas::Trainer::load(
        (fs::path(cfg2.checkpoint_dir) / "checkpoint_final.ckpt").string());
    CHECK(all_params(a) == all_params(b));
    CHECK(a.global_step() == b.global_step());
}

TEST_CASE("an untrained generator scores at chance level") {
    fas::DatasetManifest m = tiny_dataset("chance", 60);
    fas::Trainer t = make_trainer(23);
    fas::EvalOptions opts;
    opts.use_dev_eer = true;
    fas::EvalResult res = fas::evaluate(t, m, fas::EvalProtocol{}, opts);
    CHECK(res.report.acer >= 0.35);
    CHECK(res.report.acer <= 0.65);
}

TEST_CASE("offline metric recomputation matches the evaluation report") {
    fas::DatasetManifest m = tiny_dataset("offline", 20);
    fas::Trainer t = make_trainer(29);
    fas::EvalOptions opts;
    opts.threshold = 0.01;
    fas::EvalResult res = fas::evaluate(t, m, fas::EvalProtocol{}, opts);
    const std::string path = (temp_dir("offline_scores") / "scores.jsonl").string();
    fas::write_score_file(path, res.frame_records);
    auto back = fas::read_score_file(path);
    fas::MetricsReport again = fas::compute_acer_report(back, opts.threshold);
    CHECK(again.acer == res.report.acer);
    CHECK(again.apcer == res.report.apcer);
    CHECK(again.bpcer == res.report.bpcer);
    CHECK(again.apcer_per_pai == res.report.apcer_per_pai);
    // per-artifact rates are present for every artifact in the test split
    CHECK(res.report.apcer_per_pai.size() == 3);
    // embeddings carry the D4 tap for every test sample
    CHECK(res.embeddings.size() == res.frame_records.size());
    for (const auto& [id, emb] : res.embeddings)
        CHECK(emb.size() == small_generator().decoder_stage_widths[3]);
}

TEST_CASE("evaluation requires both classes in the test set") {
    fas::DatasetManifest m = tiny_dataset("oneclass", 10);
    // drop spoof test samples
    fas::DatasetManifest lop = m;
    lop.samples.clear();
    for (const auto& s : m.samples)
        if (s.split != fas::Split::test || s.is_live()) lop.samples.push_back(s);
    fas::Trainer t = make_trainer(31);
    fas::EvalOptions opts;
    CHECK_THROWS(fas::evaluate(t, lop, fas::EvalProtocol{}, opts));
}

TEST_CASE("flat config files parse with overrides and reject unknown keys") {
    const fs::path dir = temp_dir("cfg");
    const std::string path = (dir / "train.cfg").string();
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "batch_size = 8\n";
        out << "epochs = 2\n";
        out << "base_lr = 0.0005  # inline comment\n";
        out << "margin = 0.4\n";
        out << "encoder_widths = 4, 4, 8, 8, 8\n";
        out << "tap_layers = E5, D4\n";
        out << "seed = 5\n";
    }
    fas::ExperimentConfig cfg = fas::experiment_from_kv(fas::read_kv_file(path));
    CHECK(cfg.train.batch_size == 8);
    CHECK(cfg.train.epochs == 2);
    CHECK(cfg.train.base_lr == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(cfg.train.triplet.margin == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(cfg.generator.encoder_stage_widths[0] == 4);
    CHECK(cfg.generator.tap_layers == std::vector<std::string>{"E5", "D4"});
    CHECK(cfg.train.seed == 5);
    CHECK(cfg.pipeline.seed == 5);  // pipeline seed follows the training seed

    const std::string bad = (dir / "bad.cfg").string();
    std::ofstream(bad) << "no_such_key = 1\n";
    CHECK_THROWS(fas::experiment_from_kv(fas::read_kv_file(bad)));
    const std::string noeq = (dir / "noeq.cfg").string();
    std::ofstream(noeq) << "just words\n";
    CHECK_THROWS(fas::read_kv_file(noeq));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "fas/datapipeline.hpp"

namespace fs = std::filesystem;
using fas::ImageTensor;
using fas::ImageU8;

namespace {

fs::path temp_dir(const std::string& leaf) {
    fs::path p = fs::temp_directory_path() / "fas_pipeline_tests" / leaf;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ImageU8 gradient_image(std::size_t w, std::size_t h) {
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.pixels.resize(w * h * 3);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img.at(y, x, c) = std::uint8_t((x * 7 + y * 13 + c * 31) % 256);
    return img;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("normalization maps 8-bit endpoints and midpoint as specified") {
    ImageU8 img;
    img.width = 3;
    img.height = 1;
    img.pixels = {0, 0, 0, 128, 128, 128, 255, 255, 255};
    ImageTensor t = fas::normalize_image(img);
    CHECK(t.data[0] == -1.0f);
    CHECK(t.data[1] == doctest::Approx(128.0 / 127.5 - 1.0).epsilon(1e-6));
    CHECK(t.data[1] == doctest::Approx(0.00392157).epsilon(1e-4));
    CHECK(t.data[2] == 1.0f);
}

TEST_CASE("normalize and denormalize round-trip every 8-bit value exactly") {
    ImageU8 img;
    img.width = 256;
    img.height = 1;
    img.pixels.resize(256 * 3);
    for (std::size_t i = 0; i < 256; ++i)
        for (std::size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = std::uint8_t(i);
    ImageU8 back = fas::denormalize_image(fas::normalize_image(img));
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("cue maps render to 8-bit with the documented endpoints") {
    ImageTensor cue({3, 1, 1});
    cue.data = {-1.0f, 0.0f, 1.0f};
    ImageU8 img = fas::cue_to_image(cue);
    CHECK(img.at(0, 0, 0) == 0);
    CHECK(img.at(0, 0, 1) == 128);  // round(127.5), half away from zero
    CHECK(img.at(0, 0, 2) == 255);
}

TEST_CASE("bilinear resize preserves constants and averages on full reduction") {
    ImageTensor flat({3, 4, 6});
    flat.fill(0.25f);
    ImageTensor up = fas::bilinear_resize(flat, 9, 5);
    for (float v : up.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));

    ImageTensor quad({3, 2, 2});
    for (std::size_t c = 0; c < 3; ++c) {
        quad.data[c * 4 + 0] = 0.0f;
        quad.data[c * 4 + 1] = 1.0f;
        quad.data[c * 4 + 2] = 2.0f;
        quad.data[c * 4 + 3] = 3.0f;
    }
    ImageTensor one = fas::bilinear_resize(quad, 1, 1);
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(one.data[c] == doctest::Approx(1.5).epsilon(1e-6));

    ImageTensor same = fas::bilinear_resize(quad, 2, 2);
    CHECK(same.data == quad.data);
}

TEST_CASE("patch sampling replays deterministically and yields true subregions") {
    ImageTensor src = fas::normalize_image(gradient_image(40, 50));
    std::mt19937_64 a(9), b(9);
    ImageTensor p1 = fas::sample_patch(src, 32, a);
    ImageTensor p2 = fas::sample_patch(src, 32, b);
    CHECK(p1.shape == std::vector<std::size_t>{3, 32, 32});
    CHECK(p1.data == p2.data);

    // the patch occurs verbatim somewhere in the source
    bool found = false;
    for (std::size_t y0 = 0; y0 + 32 <= 50 && !found; ++y0)
        for (std::size_t x0 = 0; x0 + 32 <= 40 && !found; ++x0) {
            bool match = true;
            for (std::size_t y = 0; y < 32 && match; ++y)
                for (std::size_t x = 0; x < 32 && match; ++x)
                    match = src.data[(0 * 50 + y0 + y) * 40 + x0 + x] ==
                            p1.data[(0 * 32 + y) * 32 + x];
            found = match;
        }
    CHECK(found);
}

TEST_CASE("small images are upscaled before patching") {
    ImageTensor tiny = fas::normalize_image(gradient_image(10, 12));
    std::mt19937_64 rng(3);
    ImageTensor p = fas::sample_patch(tiny, 32, rng);
    CHECK(p.shape == std::vector<std::size_t>{3, 32, 32});
    ImageTensor c = fas::center_crop(tiny, 32);
    CHECK(c.shape == std::vector<std::size_t>{3, 32, 32});
}

TEST_CASE("center crop extracts the middle of a larger image") {
    ImageTensor src = fas::normalize_image(gradient_image(6, 6));
    ImageTensor c = fas::center_crop(src, 2);
    // offset (2, 2)
    CHECK(c.data[0] == src.data[2 * 6 + 2]);
    CHECK(c.data[1] == src.data[2 * 6 + 3]);
    CHECK(c.data[2] == src.data[3 * 6 + 2]);
}

TEST_CASE("crop boxes outside the image are rejected") {
    ImageTensor src = fas::normalize_image(gradient_image(8, 8));
    CHECK_THROWS(fas::apply_crop_box(src, fas::CropBox{4, 4, 8, 8}));
    ImageTensor ok = fas::apply_crop_box(src, fas::CropBox{2, 3, 4, 5});
    CHECK(ok.shape == std::vector<std::size_t>{3, 5, 4});
    CHECK(ok.data[0] == src.data[3 * 8 + 2]);
}

TEST_CASE("balanced sampler emits half live, half spoof batches") {
    std::vector<std::size_t> live(10), spoof(90);
    for (std::size_t i = 0; i < live.size(); ++i) live[i] = i;
    for (std::size_t i = 0; i < spoof.size(); ++i) spoof[i] = 100 + i;
    fas::BalancedSampler sampler(live, spoof, 32, 7);
    CHECK(sampler.steps_per_epoch() == 6);  // ceil(2 * 90 / 32)
    for (std::size_t step = 0; step < sampler.steps_per_epoch(); ++step) {
        auto idx = sampler.batch(0, step);
        REQUIRE(idx.size() == 32);
        for (std::size_t i = 0; i < 16; ++i) CHECK(idx[i] < 10);
        for (std::size_t i = 16; i < 32; ++i) CHECK(idx[i] >= 100);
    }
}

TEST_CASE("every majority-class sample appears at least once per epoch") {
    std::vector<std::size_t> live(25), spoof(60);
    for (std::size_t i = 0; i < live.size(); ++i) live[i] = i;
    for (std::size_t i = 0; i < spoof.size(); ++i) spoof[i] = 1000 + i;
    fas::BalancedSampler sampler(live, spoof, 8, 11);
    for (std::size_t epoch = 0; epoch < 3; ++epoch) {
        std::set<std::size_t> seen;
        for (std::size_t step = 0; step < sampler.steps_per_epoch(); ++step)
            for (std::size_t v : sampler.batch(epoch, step))
                if (v >= 1000) seen.insert(v);
        CHECK(seen.size() == spoof.size());
    }
}

TEST_CASE("sampler schedules are deterministic and vary across epochs") {
    std::vector<std::size_t> live{0, 1, 2, 3, 4}, spoof{10, 11, 12, 13, 14, 15};
    fas::BalancedSampler a(live, spoof, 4, 5), b(live, spoof, 4, 5);
    CHECK(a.batch(0, 0) == b.batch(0, 0));
    CHECK(a.batch(2, 1) == b.batch(2, 1));
    bool differs = false;
    for (std::size_t step = 0; step < a.steps_per_epoch(); ++step)
        differs |= a.batch(0, step) != a.batch(1, step);
    CHECK(differs);
    CHECK_THROWS(a.batch(0, a.steps_per_epoch()));
    CHECK_THROWS(fas::BalancedSampler({}, spoof, 4, 5));
    CHECK_THROWS(fas::BalancedSampler(live, spoof, 5, 5));
}

TEST_CASE("synthetic datasets are deterministic under a fixed seed") {
    fas::SynthConfig cfg;
    cfg.count_per_class = 6;
    cfg.image_size = 48;
    cfg.seed = 21;
    const fs::path d1 = temp_dir("synth_a");
    const fs::path d2 = temp_dir("synth_b");
    fas::DatasetManifest m1 = fas::synth_dataset(cfg, d1.string());
    fas::DatasetManifest m2 = fas::synth_dataset(cfg, d2.string());
    REQUIRE(m1.samples.size() == m2.samples.size());
    for (std::size_t i = 0; i < m1.samples.size(); ++i) {
        CHECK(fs::path(m1.samples[i].image_path).filename() ==
              fs::path(m2.samples[i].image_path).filename());
        CHECK(slurp(m1.samples[i].image_path) == slurp(m2.samples[i].image_path));
    }
    cfg.seed = 22;
    const fs::path d3 = temp_dir("synth_c");
    fas::DatasetManifest m3 = fas::synth_dataset(cfg, d3.string());
    CHECK(slurp(m1.samples[0].image_path) != slurp(m3.samples[0].image_path));
}

TEST_CASE("synthetic split and class arithmetic") {
    fas::SynthConfig cfg;
    cfg.count_per_class = 10;
    cfg.image_size = 32;
    cfg.artifact_types = {"moire", "color_cast"};
    const fs::path dir = temp_dir("synth_counts");
    fas::DatasetManifest m = fas::synth_dataset(cfg, dir.string());
    REQUIRE(m.samples.size() == 20);
    std::map<fas::Split, std::size_t> live_splits, spoof_splits;
    std::map<std::string, std::size_t> attacks;
    for (const auto& s : m.samples) {
        (s.is_live() ? live_splits : spoof_splits)[s.split]++;
        if (!s.is_live()) attacks[s.attack_type]++;
    }
    CHECK(live_splits[fas::Split::train] == 6);
    CHECK(live_splits[fas::Split::dev] == 2);
    CHECK(live_splits[fas::Split::test] == 2);
    CHECK(spoof_splits[fas::Split::train] == 6);
    CHECK(attacks["moire"] == 5);  // round-robin over two artifact types
    CHECK(attacks["color_cast"] == 5);

    // images decode to the configured size and the pipeline accepts them
    fas::ImageU8 img = fas::read_ppm(m.samples[0].image_path);
    CHECK(img.width == 32);
    CHECK(img.height == 32);
    fas::PipelineConfig pc;
    pc.patch_size = 32;
    ImageTensor t = fas::prepare_eval_image(m.samples[0], pc);
    CHECK(t.shape == std::vector<std::size_t>{3, 32, 32});
}

TEST_CASE("synthetic config validation") {
    fas::SynthConfig cfg;
    cfg.artifact_strength = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg.artifact_strength = 1.5;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.artifact_types = {"sparkles"};
    try {
        cfg.validate();
        FAIL("expected unknown artifact error");
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        CHECK(msg.find("sparkles") != std::string::npos);
        CHECK(msg.find("moire") != std::string::npos);  // lists the valid set
    }
    cfg = {};
    cfg.artifact_types.clear();
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.count_per_class = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("ppm io round-trips and rejects malformed files") {
    const fs::path dir = temp_dir("ppm");
    ImageU8 img = gradient_image(17, 9);
    const std::string path = (dir / "img.ppm").string();
    fas::write_ppm(path, img);
    ImageU8 back = fas::read_ppm(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);

    const std::string trunc = (dir / "trunc.ppm").string();
    {
        std::ofstream out(trunc, std::ios::binary);
        out << "P6\n17 9\n255\n";  // header only, no pixel payload
    }
    CHECK_THROWS(fas::read_ppm(trunc));
    const std::string bad = (dir / "bad.ppm").string();
    {
        std::ofstream out(bad, std::ios::binary);
        out << "P5\n2 2\n255\n....";
    }
    CHECK_THROWS(fas::read_ppm(bad));
    CHECK_THROWS(fas::read_ppm((dir / "missing.ppm").string()));
}

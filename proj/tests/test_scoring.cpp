#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "fas/scoring.hpp"

using fas::Tensor;

TEST_CASE("spoof score is the mean absolute cue value") {
    Tensor<float> cue({1, 3, 2, 2});
    cue.fill(0.3f);
    CHECK(fas::spoof_score(cue) == doctest::Approx(0.3).epsilon(1e-6));

    // mixed signs with mean |cue| = 0.3
    Tensor<float> mixed({1, 1, 2, 2}, {0.1f, -0.5f, 0.2f, -0.4f});
    CHECK(fas::spoof_score(mixed) == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("zero cue map scores exactly zero") {
    Tensor<float> cue({1, 3, 8, 8});
    CHECK(fas::spoof_score(cue) == 0.0);
}

TEST_CASE("scores of tanh-range cue maps stay in [0, 1]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor<float> cue({2, 3, 4, 4});
    for (auto& x : cue.data) x = u(rng);
    const double s = fas::spoof_score(cue);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
}

TEST_CASE("score is invariant to sign flips and element order") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor<float> cue({1, 3, 4, 4});
    for (auto& x : cue.data) x = u(rng);
    const double base = fas::spoof_score(cue);

    Tensor<float> neg = cue;
    for (auto& x : neg.data) x = -x;
    CHECK(fas::spoof_score(neg) == doctest::Approx(base).epsilon(1e-12));

    Tensor<float> perm = cue;
    std::shuffle(perm.data.begin(), perm.data.end(), rng);
    CHECK(fas::spoof_score(perm) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("score scales linearly with the cue magnitude") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    Tensor<float> cue({1, 3, 4, 4});
    for (auto& x : cue.data) x = u(rng);
    const double base = fas::spoof_score(cue);
    Tensor<float> scaled = cue;
    scaled.scale(2.0f);
    CHECK(fas::spoof_score(scaled) == doctest::Approx(2.0 * base).epsilon(1e-6));
}

TEST_CASE("batched scores agree with per-sample scores") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor<float> batch({3, 3, 4, 4});
    for (auto& x : batch.data) x = u(rng);
    auto scores = fas::spoof_scores(batch);
    REQUIRE(scores.size() == 3);
    const std::size_t per = batch.numel() / 3;
    for (std::size_t i = 0; i < 3; ++i) {
        Tensor<float> one({1, 3, 4, 4},
                          std::vector<float>(batch.data.begin() + long(i * per),
                                             batch.data.begin() + long((i + 1) * per)));
        CHECK(scores[i] == doctest::Approx(fas::spoof_score(one)).epsilon(1e-12));
    }
}

TEST_CASE("decision rule classifies threshold ties as spoof") {
    CHECK(fas::decide_spoof(0.5, 0.5));
    CHECK(fas::decide_spoof(0.6, 0.5));
    CHECK_FALSE(fas::decide_spoof(0.4, 0.5));
    CHECK_THROWS(fas::decide_spoof(0.4, 0.0));
    CHECK_THROWS(fas::decide_spoof(0.4, -1.0));
}

TEST_CASE("video aggregation by mean and max") {
    std::vector<double> frames{0.1, 0.2, 0.6};
    CHECK(fas::aggregate_video(frames, fas::VideoAggregation::mean) ==
          doctest::Approx(0.3).epsilon(1e-12));
    CHECK(fas::aggregate_video(frames, fas::VideoAggregation::max) == 0.6);
    CHECK_THROWS(fas::aggregate_video({}, fas::VideoAggregation::mean));
}

TEST_CASE("score files round-trip") {
    std::vector<fas::ScoreRecord> records(3);
    records[0] = {"a.ppm", 0.125, 0, "live", ""};
    records[1] = {"b.ppm", 0.875, 1, "print", "vid1"};
    records[2] = {"c.ppm", 0.0009765625, 1, "replay", "vid1"};
    const std::string path =
        (std::filesystem::temp_directory_path() / "scores_rt.jsonl").string();
    fas::write_score_file(path, records);
    auto back = fas::read_score_file(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].sample_id == records[i].sample_id);
        CHECK(back[i].score == records[i].score);
        CHECK(back[i].label == records[i].label);
        CHECK(back[i].attack_type == records[i].attack_type);
        CHECK(back[i].group == records[i].group);
    }
}

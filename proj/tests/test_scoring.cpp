#include <catch2/catch.hpp>

#include <map>

#include "corrdetect/scoring.hpp"

using namespace corrdetect;

namespace {

ImageRgb uniform_image(int w, int h, Rgb c) { return ImageRgb(w, h, c); }

SegmentView full_view(const ImageRgb& img) { return {&img, 0, 0, img.width(), img.height()}; }

}  // namespace

TEST_CASE("extract_features on uniform and contrasting segments") {
    const ImageRgb gray = uniform_image(8, 8, {128, 128, 128});
    const auto f = extract_features(full_view(gray));
    REQUIRE(f.size() == kSegmentFeatureDim);
    CHECK(f[0] == f[2]);  // channel means equal
    CHECK(f[2] == f[4]);
    CHECK(f[1] == Approx(0.0).margin(1e-7));  // stds zero up to fp residue
    CHECK(f[3] == Approx(0.0).margin(1e-7));
    CHECK(f[5] == Approx(0.0).margin(1e-7));
    // All histogram mass in bin 4 (128/32) for each channel.
    for (int ch = 0; ch < 3; ++ch)
        for (int b = 0; b < 8; ++b) CHECK(f[6 + ch * 8 + b] == (b == 4 ? 1.0 : 0.0));

    const ImageRgb red = uniform_image(8, 8, {250, 10, 10});
    const ImageRgb blue = uniform_image(8, 8, {10, 10, 250});
    const auto fr = extract_features(full_view(red));
    const auto fb = extract_features(full_view(blue));
    CHECK(fr[0] > fb[0]);  // red channel mean
    CHECK(fr[4] < fb[4]);  // blue channel mean

    CHECK(extract_features(full_view(red)) == fr);  // deterministic
}

TEST_CASE("extract_features handles segments smaller than the downsample grid") {
    const ImageRgb tiny = uniform_image(2, 2, {100, 150, 200});
    const auto f = extract_features(full_view(tiny));
    REQUIRE(f.size() == kSegmentFeatureDim);
    const double gray = (100 + 150 + 200) / (3.0 * 255.0);
    for (std::size_t i = 30; i < 94; ++i) CHECK(f[i] == Approx(gray));
}

TEST_CASE("train_baseline separates rust-red from gray segments") {
    // 200 samples over 50 images: two 8x8 segments each, one red, one gray.
    const GridSpec grid = GridSpec::create(16, 8, 2);  // 2x2 grid of 8x4 segments
    std::map<std::string, ImageRgb> images;
    std::vector<SegmentSample> samples;
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const std::string id = "img" + std::to_string(i);
        ImageRgb img(16, 8, {128, 128, 128});
        // Segments (1,1) and (2,2) painted rust, with jitter.
        for (const SegmentIndex idx : {SegmentIndex{1, 1}, SegmentIndex{2, 2}}) {
            const SegmentView v = segment_view(img, grid, idx);
            const Rgb rust{static_cast<std::uint8_t>(170 + rng.next_int(0, 30)),
                           static_cast<std::uint8_t>(60 + rng.next_int(0, 30)),
                           static_cast<std::uint8_t>(30 + rng.next_int(0, 20))};
            for (int y = 0; y < v.height; ++y)
                for (int x = 0; x < v.width; ++x) img.set(v.x0 + x, v.y0 + y, rust);
        }
        images.emplace(id, std::move(img));
        samples.push_back({id, {1, 1}, 1});
        samples.push_back({id, {2, 2}, 1});
        samples.push_back({id, {1, 2}, 0});
        samples.push_back({id, {2, 1}, 0});
    }

    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 0.5;
    cfg.seed = 11;
    TrainReport report;
    const auto lookup = [&images](const std::string& id) -> const ImageRgb& { return images.at(id); };
    const BaselineScorerParams params = train_baseline(samples, lookup, grid, ModelKind::logistic, cfg, &report);
    CHECK(report.final_loss <= report.initial_loss);

    const BaselineScorer scorer(params);
    long correct = 0;
    for (const auto& s : samples) {
        const double v = scorer.score(segment_view(images.at(s.image_id), grid, s.index));
        if ((v >= 0.5) == (s.label == 1)) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(samples.size()) >= 0.99);
}

TEST_CASE("score_image aggregates exactly like the hand count") {
    const GridSpec grid = GridSpec::create(16, 16, 4);
    const ImageRgb img = uniform_image(16, 16, {50, 50, 50});

    const FunctionScorer zeros("zeros", [](const SegmentView&) { return 0.0; });
    const ImageScoreResult r0 = score_image(zeros, "z", img, grid, 0.5);
    CHECK(r0.conf_c == 0.0);
    CHECK(r0.b_hat.sum() == 0);

    const FunctionScorer ones("ones", [](const SegmentView&) { return 1.0; });
    CHECK(score_image(ones, "o", img, grid, 0.5).conf_c == 1.0);

    // Exactly segments (1,1), (2,3), (4,2) score 0.9; the rest 0.1.
    const FunctionScorer three("three", [&grid](const SegmentView& v) {
        const int x = v.y0 / grid.seg_height_px + 1;
        const int y = v.x0 / grid.seg_width_px + 1;
        const bool hot = (x == 1 && y == 1) || (x == 2 && y == 3) || (x == 4 && y == 2);
        return hot ? 0.9 : 0.1;
    });
    const ImageScoreResult r3 = score_image(three, "t", img, grid, 0.5);
    CHECK(r3.b_hat.sum() == 3);
    CHECK(r3.conf_c == Approx(3.0 / 16.0));
}

TEST_CASE("score_image rejects out-of-range scorer output with context") {
    const GridSpec grid = GridSpec::create(8, 8, 2);
    const ImageRgb img = uniform_image(8, 8, {0, 0, 0});
    const FunctionScorer bad("bad", [](const SegmentView&) { return 1.5; });
    CHECK_THROWS_WITH(score_image(bad, "imgX", img, grid, 0.5),
                      Catch::Contains("imgX") && Catch::Contains("bad"));
}

TEST_CASE("binarize is non-strict and monotone in the threshold") {
    ConfidenceGridMatrix cs(2);
    cs.set(1, 1, 0.5);
    cs.set(1, 2, 0.5);
    cs.set(2, 1, 0.5);
    cs.set(2, 2, 0.5);
    CHECK(binarize(cs, 0.5).sum() == 4);

    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 4;
        std::vector<double> cells(16);
        for (auto& c : cells) c = rng.next_double();
        const auto m = ConfidenceGridMatrix::from_cells(n, cells);
        const double t1 = rng.next_double(), t2 = rng.next_double();
        const double lo = std::min(t1, t2), hi = std::max(t1, t2);
        CHECK(binarize(m, hi).sum() <= binarize(m, lo).sum());
    }
}

TEST_CASE("image_confidence equals the brute-force cell count ratio") {
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = std::array{2, 4, 8, 16}[rng.next_below(4)];
        std::vector<double> cells(static_cast<std::size_t>(n) * n);
        for (auto& c : cells) c = rng.next_double();
        const auto cs = ConfidenceGridMatrix::from_cells(n, cells);
        const double tau = rng.next_double();
        const ImageScoreResult r = make_score_result("p", cs, tau);

        long expect = 0;
        for (double c : cells)
            if (c >= tau) ++expect;
        CHECK(r.b_hat.sum() == expect);
        CHECK(r.conf_c == static_cast<double>(expect) / (n * n));
    }
}

TEST_CASE("external score files load, validate and reject") {
    json scores = json::array();
    for (int i = 0; i < 194; ++i) {
        std::vector<double> cs(256, 0.25);
        scores.push_back({{"image_id", "img" + std::to_string(i)}, {"cs", cs}});
    }
    const json doc{{"version", 1}, {"n", 16}, {"scores", scores}};
    const ExternalScores loaded = load_external_scores(doc, 16);
    CHECK(loaded.per_image.size() == 194);
    CHECK_FALSE(loaded.empty_warning);

    json bad = doc;
    bad["scores"][0]["cs"][7] = 1.2;
    CHECK_THROWS_AS(load_external_scores(bad, 16), Error);

    CHECK_THROWS_AS(load_external_scores(doc, 8), Error);  // n mismatch

    const json empty{{"version", 1}, {"n", 16}, {"scores", json::array()}};
    CHECK(load_external_scores(empty, 16).empty_warning);
}

TEST_CASE("score files round-trip") {
    ConfidenceGridMatrix cs(2);
    cs.set(1, 1, 0.125);
    cs.set(2, 2, 0.875);
    const ImageScoreResult r = make_score_result("rt", cs, 0.5);
    const json doc = serialize_scores({r}, 2, 0.5);
    const ExternalScores back = load_external_scores(doc, 2);
    REQUIRE(back.per_image.size() == 1);
    CHECK(back.per_image[0].first == "rt");
    CHECK(back.per_image[0].second == r.cs);
    REQUIRE(back.tau_s.has_value());
    CHECK(*back.tau_s == 0.5);
}

TEST_CASE("baseline scorer params round-trip through the model file") {
    const Model m = Model::init(ModelKind::logistic, kSegmentFeatureDim, 0, 42);
    const BaselineScorerParams params{m};
    const Model back = parse_model(serialize_model(params.model));
    CHECK(back.theta == m.theta);
    CHECK_THROWS_AS(BaselineScorer(BaselineScorerParams{Model::init(ModelKind::logistic, 5, 0, 1)}), Error);
}

#include <catch2/catch.hpp>

#include <map>
#include <set>

#include "corrdetect/ciss.hpp"

using namespace corrdetect;

namespace {

GridAnnotation make_annotation(const std::string& id, int n, const std::vector<SegmentIndex>& cells) {
    GridAnnotation ann;
    ann.image_id = id;
    ann.n = n;
    for (const auto& c : cells) ann.corroded_cells.insert(c);
    return ann;
}

// Brute-force enumerator oracle: lists every segment of every image with its
// label, independent of the CISS implementation.
struct Enumerated {
    std::set<std::pair<std::string, SegmentIndex>> positives;
    std::set<std::pair<std::string, SegmentIndex>> negatives;
};

Enumerated enumerate_segments(const std::vector<GridAnnotation>& anns, int n) {
    Enumerated e;
    for (const auto& ann : anns)
        for (int x = 1; x <= n; ++x)
            for (int y = 1; y <= n; ++y) {
                const bool pos = ann.corroded_cells.count({x, y}) > 0;
                (pos ? e.positives : e.negatives).insert({ann.image_id, {x, y}});
            }
    return e;
}

}  // namespace

TEST_CASE("ciss on three 4x4 images with five positives, against the enumerator") {
    const GridSpec grid = GridSpec::create(16, 16, 4);
    const std::vector<GridAnnotation> anns{
        make_annotation("a", 4, {{1, 1}, {2, 3}}),
        make_annotation("b", 4, {{4, 4}}),
        make_annotation("c", 4, {{1, 4}, {3, 2}}),
    };
    const Enumerated oracle = enumerate_segments(anns, 4);
    REQUIRE(oracle.positives.size() == 5);
    REQUIRE(oracle.negatives.size() == 43);

    const TrainingSet ts = ciss(anns, grid, 99);
    CHECK(ts.n_pos == 5);
    CHECK(ts.n_neg_selected == 10);
    CHECK_FALSE(ts.imbalance_warning);
    REQUIRE(ts.samples.size() == 15);

    std::set<std::pair<std::string, SegmentIndex>> seen_pos, seen_neg;
    for (const auto& s : ts.samples) {
        const std::pair<std::string, SegmentIndex> key{s.image_id, s.index};
        if (s.label == 1) {
            CHECK(oracle.positives.count(key) == 1);
            CHECK(seen_pos.insert(key).second);
        } else {
            CHECK(oracle.negatives.count(key) == 1);
            CHECK(seen_neg.insert(key).second);
        }
    }
    CHECK(seen_pos == oracle.positives);  // every positive exactly once
    CHECK(seen_neg.size() == 10);
}

TEST_CASE("ciss balances 1:2 at the published scale") {
    // 379 train images at n=16 with 15,863 positives in total.
    const GridSpec grid = GridSpec::create(32, 32, 16);
    std::vector<GridAnnotation> anns;
    long remaining = 15863;
    for (int i = 0; i < 379; ++i) {
        const long want = std::min<long>(remaining, i < 324 ? 42 : 41);
        GridAnnotation ann;
        ann.image_id = "img_" + std::to_string(i);
        ann.n = 16;
        for (long c = 0; c < want; ++c)
            ann.corroded_cells.insert({static_cast<int>(c / 16) + 1, static_cast<int>(c % 16) + 1});
        remaining -= want;
        anns.push_back(std::move(ann));
    }
    REQUIRE(remaining == 0);

    const TrainingSet ts = ciss(anns, grid, 1);
    CHECK(ts.n_pos == 15863);
    CHECK(ts.n_neg_selected == 31726);
    CHECK(ts.samples.size() == 47589);
}

TEST_CASE("ciss with no negatives warns and keeps all positives") {
    const GridSpec grid = GridSpec::create(8, 8, 2);
    std::vector<SegmentIndex> all;
    for (int x = 1; x <= 2; ++x)
        for (int y = 1; y <= 2; ++y) all.push_back({x, y});
    const TrainingSet ts = ciss({make_annotation("solo", 2, all)}, grid, 3);
    CHECK(ts.n_pos == 4);
    CHECK(ts.n_neg_selected == 0);
    CHECK(ts.imbalance_warning);
    CHECK(ts.samples.size() == 4);
}

TEST_CASE("ciss rejects inputs without positives or with grid mismatch") {
    const GridSpec grid = GridSpec::create(8, 8, 2);
    CHECK_THROWS_AS(ciss({make_annotation("none", 2, {})}, grid, 1), Error);
    CHECK_THROWS_AS(ciss({make_annotation("bad", 4, {{1, 1}})}, grid, 1), Error);
    CHECK_THROWS_AS(ciss({}, grid, 1), Error);
}

TEST_CASE("ciss is deterministic per seed and uniform across seeds") {
    const GridSpec grid = GridSpec::create(24, 24, 4);
    std::vector<GridAnnotation> anns;
    for (int i = 0; i < 6; ++i)
        anns.push_back(make_annotation("img" + std::to_string(i), 4, {{1, (i % 4) + 1}, {3, 2}}));

    Rng rng(1234);
    for (int trial = 0; trial < 25; ++trial) {
        const std::uint64_t seed = rng.next_u64();
        const TrainingSet a = ciss(anns, grid, seed);
        const TrainingSet b = ciss(anns, grid, seed);
        CHECK(a.samples == b.samples);

        CHECK(a.n_pos == 12);
        CHECK(a.n_neg_selected == 24);
        std::set<std::pair<std::string, SegmentIndex>> uniq;
        for (const auto& s : a.samples) CHECK(uniq.insert({s.image_id, s.index}).second);
    }
}

TEST_CASE("train_validation_split uses floor sizes") {
    TrainingSet ts;
    ts.n_pos = 1;
    for (int i = 0; i < 10; ++i) ts.samples.push_back({"im", {1, 1}, static_cast<std::uint8_t>(i % 2)});
    const auto split = train_validation_split(ts, 0.8, 5);
    CHECK(split.train.size() == 8);
    CHECK(split.validation.size() == 2);

    const auto again = train_validation_split(ts, 0.8, 5);
    CHECK(again.train == split.train);
    CHECK(again.validation == split.validation);
}

TEST_CASE("train_validation_split at the published scale floors to 38,071/9,518") {
    // The upstream report of 38,701/8,888 for this count is not an 80/20
    // split of 47,589; the exact floor split is what this implements.
    TrainingSet ts;
    ts.samples.resize(47589, SegmentSample{"x", {1, 1}, 0});
    ts.samples[0].label = 1;
    const auto split = train_validation_split(ts, 0.8, 7);
    CHECK(split.train.size() == 38071);
    CHECK(split.validation.size() == 9518);
}

TEST_CASE("train_validation_split validates inputs") {
    TrainingSet empty;
    CHECK_THROWS_AS(train_validation_split(empty, 0.8, 1), Error);
    TrainingSet one;
    one.samples.push_back({"a", {1, 1}, 1});
    CHECK_THROWS_AS(train_validation_split(one, 0.0, 1), Error);
    CHECK_THROWS_AS(train_validation_split(one, 1.0, 1), Error);
}

TEST_CASE("training-set manifest round-trips") {
    const GridSpec grid = GridSpec::create(16, 16, 4);
    const TrainingSet ts = ciss({make_annotation("a", 4, {{2, 2}, {4, 1}})}, grid, 77);
    const std::string csv = training_set_to_csv(ts);
    CHECK(training_set_from_csv(csv) == ts.samples);
    CHECK_THROWS_AS(training_set_from_csv("bogus\n"), Error);
    CHECK_THROWS_AS(training_set_from_csv("image_id,x,y,label\nimg,1,1,7\n"), Error);
}

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "corrdetect/annotation.hpp"
#include "corrdetect/common.hpp"
#include "corrdetect/types.hpp"

namespace corrdetect {

// One training unit: a segment identity plus its corrosion label. Pixels
// are not carried here; crops are materialized on demand from image_id and
// index (tens of thousands of 330x247 crops need not be resident at once).
struct SegmentSample {
    std::string image_id;
    SegmentIndex index;
    std::uint8_t label = 0;  // 1 = corrosion

    friend bool operator==(const SegmentSample&, const SegmentSample&) = default;
};

struct TrainingSet {
    std::vector<SegmentSample> samples;  // seeded-shuffle order
    std::uint64_t seed = 0;
    long n_pos = 0;           // N_c
    long n_neg_selected = 0;  // min(2*N_c, available negatives)
    bool imbalance_warning = false;
};

// Segmentation + separation over the train images: every corrosion segment
// is kept, negatives are drawn 2:1 against positives after a seeded
// shuffle, and the combined set is shuffled again.
inline TrainingSet ciss(const std::vector<GridAnnotation>& train_annotations, const GridSpec& grid,
                        std::uint64_t seed) {
    if (train_annotations.empty()) throw_data("ciss: no training images");

    std::vector<SegmentSample> positives;
    std::vector<SegmentSample> negatives;
    for (const auto& ann : train_annotations) {
        if (ann.n != grid.n)
            throw_data("ciss: annotation '" + ann.image_id + "' has n=" + std::to_string(ann.n) +
                       " but grid has n=" + std::to_string(grid.n));
        const BinaryGridMatrix b = build_label_matrix(ann);
        for (int x = 1; x <= grid.n; ++x) {
            for (int y = 1; y <= grid.n; ++y) {
                SegmentSample s{ann.image_id, {x, y}, b.at(x, y)};
                (s.label ? positives : negatives).push_back(std::move(s));
            }
        }
    }

    const long n_pos = static_cast<long>(positives.size());
    if (n_pos == 0) throw_data("ciss: no positive samples in the training annotations");

    Rng rng(seed);
    rng.shuffle(negatives);
    const long want_neg = 2 * n_pos;
    const long have_neg = static_cast<long>(negatives.size());
    const long take_neg = std::min(want_neg, have_neg);

    TrainingSet ts;
    ts.seed = seed;
    ts.n_pos = n_pos;
    ts.n_neg_selected = take_neg;
    ts.imbalance_warning = take_neg < want_neg;
    ts.samples = std::move(positives);
    ts.samples.insert(ts.samples.end(), negatives.begin(), negatives.begin() + take_neg);
    rng.shuffle(ts.samples);
    return ts;
}

struct TrainValidationSplit {
    std::vector<SegmentSample> train;
    std::vector<SegmentSample> validation;
};

// floor(fraction*N) samples to train, the remainder to validation.
inline TrainValidationSplit train_validation_split(const TrainingSet& ts, double fraction, std::uint64_t seed) {
    if (ts.samples.empty()) throw_data("train_validation_split: empty training set");
    if (!(fraction > 0.0 && fraction < 1.0)) throw_config("train_validation_split: fraction must be in (0,1)");
    std::vector<SegmentSample> shuffled = ts.samples;
    Rng rng(seed);
    rng.shuffle(shuffled);
    const auto n_train =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(shuffled.size())));
    TrainValidationSplit out;
    out.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    return out;
}

// ---- Training-set manifest: ordered CSV records image_id,x,y,label ----

inline std::string training_set_to_csv(const TrainingSet& ts) {
    std::ostringstream out;
    out << "image_id,x,y,label\n";
    for (const auto& s : ts.samples)
        out << s.image_id << "," << s.index.x << "," << s.index.y << "," << int(s.label) << "\n";
    return out.str();
}

inline std::vector<SegmentSample> training_set_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "image_id,x,y,label")
        throw_data("training-set manifest: missing or wrong header row");
    std::vector<SegmentSample> samples;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        SegmentSample s;
        std::string field;
        if (!std::getline(row, s.image_id, ',')) throw_data("training-set manifest: bad row '" + line + "'");
        try {
            if (!std::getline(row, field, ',')) throw std::invalid_argument("x");
            s.index.x = std::stoi(field);
            if (!std::getline(row, field, ',')) throw std::invalid_argument("y");
            s.index.y = std::stoi(field);
            if (!std::getline(row, field, ',')) throw std::invalid_argument("label");
            const int label = std::stoi(field);
            if (label != 0 && label != 1) throw std::invalid_argument("label");
            s.label = static_cast<std::uint8_t>(label);
        } catch (const std::exception&) {
            throw_data("training-set manifest: bad row '" + line + "'");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

// ---- Dataset arithmetic ----

inline long total_segments(long image_count, const GridSpec& grid) {
    return image_count * static_cast<long>(grid.segment_count());
}

}  // namespace corrdetect

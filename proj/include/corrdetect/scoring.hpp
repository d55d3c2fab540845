#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrdetect/ciss.hpp"
#include "corrdetect/features.hpp"
#include "corrdetect/image.hpp"
#include "corrdetect/learners.hpp"

namespace corrdetect {

// The per-segment corrosion scorer role. Implementations must be
// deterministic for fixed parameters and return values in [0,1].
class SegmentScorer {
public:
    virtual ~SegmentScorer() = default;
    virtual double score(const SegmentView& segment) const = 0;
    virtual std::string name() const = 0;
};

// Trainable stand-in for the full segment CNN: engineered color features
// into a shallow learner. Segment crops of a station structure are small
// enough that color statistics carry most of the class signal.
struct BaselineScorerParams {
    Model model;  // input_dim == kSegmentFeatureDim
};

class BaselineScorer : public SegmentScorer {
public:
    explicit BaselineScorer(BaselineScorerParams params) : params_(std::move(params)) {
        if (params_.model.input_dim != kSegmentFeatureDim)
            throw_data("BaselineScorer: model expects dim " + std::to_string(params_.model.input_dim) +
                       ", feature layout provides " + std::to_string(kSegmentFeatureDim));
    }

    double score(const SegmentView& segment) const override {
        return params_.model.score(extract_features(segment));
    }
    std::string name() const override { return "baseline-" + to_string(params_.model.kind); }

    const BaselineScorerParams& params() const { return params_; }

private:
    BaselineScorerParams params_;
};

// Scorer defined by an arbitrary function; used for oracle scorers in
// synthetic end-to-end runs.
class FunctionScorer : public SegmentScorer {
public:
    FunctionScorer(std::string name, std::function<double(const SegmentView&)> fn)
        : name_(std::move(name)), fn_(std::move(fn)) {}
    double score(const SegmentView& segment) const override { return fn_(segment); }
    std::string name() const override { return name_; }

private:
    std::string name_;
    std::function<double(const SegmentView&)> fn_;
};

// Materializes features for the training-set samples and fits the baseline
// learner with minibatch gradient descent on binary cross-entropy.
inline BaselineScorerParams train_baseline(const std::vector<SegmentSample>& samples,
                                           const std::function<const ImageRgb&(const std::string&)>& image_by_id,
                                           const GridSpec& grid, ModelKind kind, const TrainConfig& cfg,
                                           TrainReport* report = nullptr) {
    LabeledData data;
    for (const auto& s : samples) {
        const ImageRgb& img = image_by_id(s.image_id);
        const SegmentView view = segment_view(img, grid, s.index);
        data.add(extract_features(view), s.label);
    }
    return BaselineScorerParams{train_model(kind, data, cfg, report)};
}

// ---- Image scoring: CS matrix, thresholded B-hat, image confidence ----

struct ImageScoreResult {
    std::string image_id;
    ConfidenceGridMatrix cs;
    BinaryGridMatrix b_hat;  // cs >= tau_s
    double conf_c = 0.0;     // sum(b_hat) / n^2
};

// Non-strict threshold: cells exactly at tau count as corrosion.
inline BinaryGridMatrix binarize(const ConfidenceGridMatrix& cs, double tau) {
    BinaryGridMatrix b(cs.n());
    for (int x = 1; x <= cs.n(); ++x)
        for (int y = 1; y <= cs.n(); ++y) b.set(x, y, cs.at(x, y) >= tau ? 1 : 0);
    return b;
}

inline double image_confidence(const BinaryGridMatrix& b_hat) {
    return static_cast<double>(b_hat.sum()) / static_cast<double>(b_hat.n() * b_hat.n());
}

inline ImageScoreResult make_score_result(const std::string& image_id, ConfidenceGridMatrix cs, double tau_s) {
    ImageScoreResult r;
    r.image_id = image_id;
    r.cs = std::move(cs);
    r.b_hat = binarize(r.cs, tau_s);
    r.conf_c = image_confidence(r.b_hat);
    return r;
}

inline ImageScoreResult score_image(const SegmentScorer& scorer, const std::string& image_id,
                                    const ImageRgb& pixels, const GridSpec& grid, double tau_s) {
    if (pixels.width() < grid.covered_width() || pixels.height() < grid.covered_height())
        throw_data("score_image: image '" + image_id + "' smaller than the grid geometry");
    ConfidenceGridMatrix cs(grid.n);
    for (int x = 1; x <= grid.n; ++x) {
        for (int y = 1; y <= grid.n; ++y) {
            const double v = scorer.score(segment_view(pixels, grid, {x, y}));
            if (!(v >= 0.0 && v <= 1.0))
                throw_data("score_image: scorer '" + scorer.name() + "' returned " + std::to_string(v) +
                           " for image '" + image_id + "' segment (" + std::to_string(x) + "," +
                           std::to_string(y) + ")");
            cs.set(x, y, v);
        }
    }
    return make_score_result(image_id, std::move(cs), tau_s);
}

// ---- Score file ----
//
//   { "version": 1, "n": 16, "tau_s": 0.5,
//     "scores": [ { "image_id": "...", "cs": [n^2 values, row-major] }, ... ] }

struct ExternalScores {
    int n = 0;
    std::optional<double> tau_s;
    std::vector<std::pair<std::string, ConfidenceGridMatrix>> per_image;
    bool empty_warning = false;
};

inline ExternalScores load_external_scores(const json& doc, int expected_n) {
    if (!doc.is_object() || doc.value("version", 0) != 1 || !doc.contains("n") || !doc.contains("scores"))
        throw_data("score file: expected {version:1, n, scores[]}");
    ExternalScores out;
    out.n = doc["n"].get<int>();
    if (expected_n > 0 && out.n != expected_n)
        throw_data("score file: n=" + std::to_string(out.n) + " does not match dataset n=" +
                   std::to_string(expected_n));
    if (doc.contains("tau_s")) out.tau_s = doc["tau_s"].get<double>();
    for (const auto& entry : doc["scores"]) {
        if (!entry.contains("image_id") || !entry.contains("cs"))
            throw_data("score file: entry missing image_id or cs");
        const auto id = entry["image_id"].get<std::string>();
        auto values = entry["cs"].get<std::vector<double>>();
        if (values.size() != static_cast<std::size_t>(out.n) * out.n)
            throw_data("score file: image '" + id + "' has " + std::to_string(values.size()) +
                       " values, expected n^2=" + std::to_string(out.n * out.n));
        for (double v : values)
            if (!(v >= 0.0 && v <= 1.0))
                throw_data("score file: image '" + id + "' has confidence " + std::to_string(v) +
                           " outside [0,1]");
        out.per_image.emplace_back(id, ConfidenceGridMatrix::from_cells(out.n, std::move(values)));
    }
    out.empty_warning = out.per_image.empty();
    return out;
}

inline json serialize_scores(const std::vector<ImageScoreResult>& results, int n,
                             std::optional<double> tau_s = std::nullopt) {
    json scores = json::array();
    for (const auto& r : results) scores.push_back({{"image_id", r.image_id}, {"cs", flatten(r.cs)}});
    json doc{{"version", 1}, {"n", n}, {"scores", scores}};
    if (tau_s) doc["tau_s"] = *tau_s;
    return doc;
}

}  // namespace corrdetect

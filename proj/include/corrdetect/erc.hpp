#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "corrdetect/detection.hpp"
#include "corrdetect/learners.hpp"
#include "corrdetect/metrics_counts.hpp"
#include "corrdetect/scoring.hpp"

namespace corrdetect {

constexpr double kDefaultOverlapThreshold = 0.10;

// Object-overlap features of one segment. The comparison is non-strict at
// the threshold; a fully covered segment inherits the object confidence
// unscaled (fraction 1.0 times conf_o).
struct ErcCellFeatures {
    std::uint8_t tB = 0;
    double tI = 0.0;
};

inline ErcCellFeatures erc_rule(double fraction, double conf_o, double overlap_threshold) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw_data("erc_rule: overlap fraction " + std::to_string(fraction) + " outside [0,1]");
    if (!(conf_o >= 0.0 && conf_o <= 1.0))
        throw_data("erc_rule: conf_o " + std::to_string(conf_o) + " outside [0,1]");
    if (fraction >= overlap_threshold) return {1, fraction * conf_o};
    return {0, 0.0};
}

// One fused row per (image, segment).
struct ErcRow {
    std::string image_id;
    SegmentIndex seg;
    double conf_c_seg = 0.0;    // CS cell
    std::uint8_t bhat_seg = 0;  // B-hat cell
    std::uint8_t tB = 0;
    double tI = 0.0;
    std::uint8_t truth = 0;  // B cell
};

enum class FeatureSetKind { FB, FC };

inline std::string to_string(FeatureSetKind k) { return k == FeatureSetKind::FB ? "FB" : "FC"; }

inline FeatureSetKind feature_set_kind_from_string(const std::string& s) {
    if (s == "FB" || s == "fb") return FeatureSetKind::FB;
    if (s == "FC" || s == "fc") return FeatureSetKind::FC;
    throw_config("unknown feature set kind '" + s + "'");
}

// FB projects (bhat, tB); FC projects (conf_c_seg, tI). Both label with truth.
struct EnsembleFeatureSet {
    FeatureSetKind kind = FeatureSetKind::FB;
    std::vector<ErcRow> rows;

    LabeledData to_labeled_data() const {
        LabeledData data;
        for (const auto& r : rows) {
            const double f0 = kind == FeatureSetKind::FB ? double(r.bhat_seg) : r.conf_c_seg;
            const double f1 = kind == FeatureSetKind::FB ? double(r.tB) : r.tI;
            const double x[2] = {f0, f1};
            data.add({x, 2}, r.truth);
        }
        return data;
    }
};

struct ErcInput {
    const ImageScoreResult* score = nullptr;       // required
    const DetectedObject* detection = nullptr;     // nullptr = no detection
    const BinaryGridMatrix* truth = nullptr;       // required
    const ImageDescriptor* descriptor = nullptr;   // required
};

// Fuses scorer output with object-mask geometry into the FB/FC row sets.
// An image with no detection contributes tB=0, tI=0 for every segment.
inline std::pair<EnsembleFeatureSet, EnsembleFeatureSet> erc_features(
    const std::vector<ErcInput>& images, const GridSpec& grid,
    double overlap_threshold = kDefaultOverlapThreshold) {
    EnsembleFeatureSet fc{FeatureSetKind::FC, {}};
    EnsembleFeatureSet fb{FeatureSetKind::FB, {}};
    for (const auto& in : images) {
        if (!in.score || !in.truth || !in.descriptor) throw_data("erc_features: incomplete image input");
        if (in.score->cs.n() != grid.n || in.truth->n() != grid.n)
            throw_data("erc_features: grid mismatch for image '" + in.score->image_id + "'");

        std::optional<PixelMask> raster;
        double conf_o = 0.0;
        if (in.detection) {
            raster = rasterize_mask(in.detection->mask, *in.descriptor);
            conf_o = in.detection->conf_o;
        }

        for (int x = 1; x <= grid.n; ++x) {
            for (int y = 1; y <= grid.n; ++y) {
                ErcCellFeatures cell{0, 0.0};
                if (raster) {
                    const double fraction = intersection_fraction(segment_rect(grid, {x, y}), *raster);
                    cell = erc_rule(fraction, conf_o, overlap_threshold);
                }
                ErcRow row;
                row.image_id = in.score->image_id;
                row.seg = {x, y};
                row.conf_c_seg = in.score->cs.at(x, y);
                row.bhat_seg = in.score->b_hat.at(x, y);
                row.tB = cell.tB;
                row.tI = cell.tI;
                row.truth = in.truth->at(x, y);
                fc.rows.push_back(row);
                fb.rows.push_back(std::move(row));
            }
        }
    }
    return {std::move(fc), std::move(fb)};
}

// ---- Ensemble training / prediction ----

inline Model train_ensemble(const EnsembleFeatureSet& fs, ModelKind kind, const TrainConfig& cfg,
                            TrainReport* report = nullptr) {
    return train_model(kind, fs.to_labeled_data(), cfg, report);
}

struct EnsemblePrediction {
    std::uint8_t decision = 0;  // score >= 0.5
    double confidence = 0.0;
};

inline std::vector<EnsemblePrediction> predict_ensemble(const Model& model, const EnsembleFeatureSet& fs) {
    const LabeledData data = fs.to_labeled_data();
    if (data.size() > 0 && data.dim != model.input_dim)
        throw_data("predict_ensemble: feature layout does not match model");
    std::vector<EnsemblePrediction> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double s = model.score(data.row(i));
        out.push_back({static_cast<std::uint8_t>(s >= 0.5 ? 1 : 0), s});
    }
    return out;
}

// ---- Seeded k-fold validation ----

struct FoldMetrics {
    ClassificationMetrics per_fold_mean;
    std::vector<ClassificationMetrics> folds;
};

inline FoldMetrics evaluate_ensemble(int folds, const EnsembleFeatureSet& fs, ModelKind kind,
                                     const TrainConfig& cfg) {
    if (folds < 2) throw_config("evaluate_ensemble: folds must be >= 2");
    const std::size_t n = fs.rows.size();
    if (n < static_cast<std::size_t>(folds))
        throw_data("evaluate_ensemble: " + std::to_string(n) + " rows cannot fill " + std::to_string(folds) +
                   " folds");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(cfg.seed);
    rng.shuffle(order);

    FoldMetrics out;
    ClassificationMetrics acc_sum{};
    for (int f = 0; f < folds; ++f) {
        const std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(folds);
        const std::size_t hi = n * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(folds);
        EnsembleFeatureSet train_fs{fs.kind, {}};
        EnsembleFeatureSet eval_fs{fs.kind, {}};
        for (std::size_t i = 0; i < n; ++i)
            ((i >= lo && i < hi) ? eval_fs : train_fs).rows.push_back(fs.rows[order[i]]);

        const Model model = train_ensemble(train_fs, kind, cfg);
        const auto preds = predict_ensemble(model, eval_fs);
        ConfusionCounts counts;
        for (std::size_t i = 0; i < preds.size(); ++i)
            counts.add(preds[i].decision != 0, eval_fs.rows[i].truth != 0);
        const ClassificationMetrics m = confusion_metrics(counts);
        out.folds.push_back(m);
        acc_sum.accuracy += m.accuracy;
        acc_sum.precision += m.precision;
        acc_sum.recall += m.recall;
        acc_sum.f1 += m.f1;
    }
    const double k = static_cast<double>(folds);
    out.per_fold_mean = {acc_sum.accuracy / k, acc_sum.precision / k, acc_sum.recall / k, acc_sum.f1 / k, false};
    return out;
}

// ---- Feature-set file: tabular text, one header row ----

inline std::string feature_set_to_csv(const EnsembleFeatureSet& fs) {
    std::ostringstream out;
    out.precision(17);
    out << "image_id,x,y,conf_c_seg,bhat,tB,tI,truth\n";
    for (const auto& r : fs.rows)
        out << r.image_id << "," << r.seg.x << "," << r.seg.y << "," << r.conf_c_seg << "," << int(r.bhat_seg)
            << "," << int(r.tB) << "," << r.tI << "," << int(r.truth) << "\n";
    return out.str();
}

inline EnsembleFeatureSet feature_set_from_csv(const std::string& csv, FeatureSetKind kind) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "image_id,x,y,conf_c_seg,bhat,tB,tI,truth")
        throw_data("feature-set file: missing or wrong header row");
    EnsembleFeatureSet fs{kind, {}};
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        ErcRow r;
        std::string field;
        auto next = [&row, &line](std::string& f) {
            if (!std::getline(row, f, ',')) throw_data("feature-set file: bad row '" + line + "'");
        };
        try {
            next(r.image_id);
            next(field);
            r.seg.x = std::stoi(field);
            next(field);
            r.seg.y = std::stoi(field);
            next(field);
            r.conf_c_seg = std::stod(field);
            next(field);
            r.bhat_seg = static_cast<std::uint8_t>(std::stoi(field));
            next(field);
            r.tB = static_cast<std::uint8_t>(std::stoi(field));
            next(field);
            r.tI = std::stod(field);
            next(field);
            r.truth = static_cast<std::uint8_t>(std::stoi(field));
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw_data("feature-set file: bad row '" + line + "'");
        }
        fs.rows.push_back(std::move(r));
    }
    return fs;
}

}  // namespace corrdetect

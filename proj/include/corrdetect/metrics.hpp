#pragma once

#include <optional>
#include <vector>

#include "corrdetect/detection.hpp"
#include "corrdetect/geometry.hpp"
#include "corrdetect/metrics_counts.hpp"
#include "corrdetect/types.hpp"

namespace corrdetect {

// Decision-layer thresholds. All comparisons downstream are non-strict:
// a value exactly at its threshold satisfies the condition.
struct DecisionConfig {
    double tau_s = 0.5;
    double tau_I = 0.1;
    double tau_o = 0.9;
    std::vector<double> iou_thresholds = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75};

    void validate() const {
        for (double t : {tau_s, tau_I, tau_o})
            if (!(t >= 0.0 && t <= 1.0)) throw_config("DecisionConfig: threshold outside [0,1]");
        if (iou_thresholds.empty()) throw_config("DecisionConfig: empty IoU threshold list");
        for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
            if (!(iou_thresholds[i] >= 0.0 && iou_thresholds[i] <= 1.0))
                throw_config("DecisionConfig: IoU threshold outside [0,1]");
            if (i > 0 && !(iou_thresholds[i] > iou_thresholds[i - 1]))
                throw_config("DecisionConfig: IoU thresholds must be strictly increasing");
        }
    }
};

// ---- Decision rules ----

// Segment-level prediction: elementwise conf >= tau_s.
inline BinaryGridMatrix slp_decide(const ConfidenceGridMatrix& cs, double tau_s) {
    BinaryGridMatrix b(cs.n());
    for (int x = 1; x <= cs.n(); ++x)
        for (int y = 1; y <= cs.n(); ++y) b.set(x, y, cs.at(x, y) >= tau_s ? 1 : 0);
    return b;
}

// Image-level prediction: corroded iff conf_c >= tau_I.
inline bool ilp_decide(double conf_c, double tau_I) {
    if (!(conf_c >= 0.0 && conf_c <= 1.0)) throw_data("ilp_decide: conf_c outside [0,1]");
    return conf_c >= tau_I;
}

// Mean over train images of (corroded cells / n^2).
inline double derive_tau_I(const std::vector<BinaryGridMatrix>& train_truths) {
    if (train_truths.empty()) throw_data("derive_tau_I: empty truth list");
    double acc = 0.0;
    for (const auto& b : train_truths)
        acc += static_cast<double>(b.sum()) / static_cast<double>(b.n() * b.n());
    return acc / static_cast<double>(train_truths.size());
}

// Industrial-object prediction: present iff a detection exists with
// conf_o >= tau_o.
inline bool iop_decide(const std::optional<DetectedObject>& det, double tau_o) {
    return det.has_value() && det->conf_o >= tau_o;
}

// ---- IoU ----

inline double iou_bbox(const BoundingBox& pred, const BoundingBox& truth) {
    if (!pred.valid() || !truth.valid()) throw_data("iou_bbox: invalid box");
    const double ix = std::max(0.0, std::min(pred.x_max, truth.x_max) - std::max(pred.x_min, truth.x_min));
    const double iy = std::max(0.0, std::min(pred.y_max, truth.y_max) - std::max(pred.y_min, truth.y_min));
    const double inter = ix * iy;
    const double uni = pred.area() + truth.area() - inter;
    return inter / uni;
}

inline double iou_mask(const PolygonMask& pred, const PolygonMask& truth, const ImageDescriptor& image) {
    const PixelMask a = rasterize_mask(pred, image);
    const PixelMask b = rasterize_mask(truth, image);
    if (a.area_px == 0 && b.area_px == 0) throw_data("iou_mask: both masks have zero area");
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.inside.size(); ++i) {
        const bool ia = a.inside[i] != 0, ib = b.inside[i] != 0;
        if (ia && ib) ++inter;
        if (ia || ib) ++uni;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---- Detection precision / AP ----

// Among accepted detections: TP where iou >= th, FP otherwise.
inline double precision_at_iou(const std::vector<double>& ious, const std::vector<bool>& accepted, double th) {
    if (ious.size() != accepted.size()) throw_data("precision_at_iou: misaligned lists");
    long tp = 0, fp = 0;
    for (std::size_t i = 0; i < ious.size(); ++i) {
        if (!accepted[i]) continue;
        (ious[i] >= th ? tp : fp)++;
    }
    if (tp + fp == 0) throw_data("precision_at_iou: no accepted detections");
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

// Plain arithmetic mean over the per-threshold precisions.
inline double average_precision(const std::vector<double>& precisions) {
    if (precisions.empty()) throw_data("average_precision: empty precision list");
    double acc = 0.0;
    for (double p : precisions) acc += p;
    return acc / static_cast<double>(precisions.size());
}

}  // namespace corrdetect

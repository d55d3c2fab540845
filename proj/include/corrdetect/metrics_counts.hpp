#pragma once

#include "corrdetect/common.hpp"

namespace corrdetect {

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;

    void add(bool predicted, bool actual) {
        if (predicted && actual) ++tp;
        else if (predicted && !actual) ++fp;
        else if (!predicted && actual) ++fn;
        else ++tn;
    }
    long total() const { return tp + fp + tn + fn; }
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some 0/0 ratio was reported as 0
};

// Standard definitions; 0/0 ratios become 0 with the degenerate flag set so
// aggregation across runs stays comparable.
inline ClassificationMetrics confusion_metrics(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) throw_data("confusion_metrics: negative count");
    if (c.total() == 0) throw_data("confusion_metrics: all counts are zero");
    ClassificationMetrics m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (c.tp + c.fp > 0)
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    else
        m.degenerate = true;
    if (c.tp + c.fn > 0)
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    else
        m.degenerate = true;
    if (m.precision + m.recall > 0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
        m.degenerate = true;
    return m;
}

}  // namespace corrdetect

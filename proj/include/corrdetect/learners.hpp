#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrdetect/common.hpp"

namespace corrdetect {

enum class ModelKind {
    logistic,    // sigmoid linear model, binary cross-entropy
    perceptron,  // one hidden sigmoid layer, binary cross-entropy
    max_margin,  // linear model, hinge loss + L2
};

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::logistic: return "logistic";
        case ModelKind::perceptron: return "perceptron";
        case ModelKind::max_margin: return "max_margin";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "logistic") return ModelKind::logistic;
    if (s == "perceptron") return ModelKind::perceptron;
    if (s == "max_margin") return ModelKind::max_margin;
    throw_config("unknown model kind '" + s + "'");
}

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 1;
    double l2 = 0.0;       // applied to weights, not biases
    int hidden_units = 8;  // perceptron only
};

// Labeled feature rows, densely packed.
struct LabeledData {
    std::size_t dim = 0;
    std::vector<double> features;      // size = rows * dim
    std::vector<std::uint8_t> labels;  // 0/1

    std::size_t size() const { return labels.size(); }

    void add(std::span<const double> x, std::uint8_t y) {
        if (dim == 0) dim = x.size();
        if (x.size() != dim) throw_data("LabeledData: inconsistent feature dimension");
        features.insert(features.end(), x.begin(), x.end());
        labels.push_back(y);
    }

    std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }

    bool has_both_classes() const {
        bool pos = false, neg = false;
        for (auto y : labels) (y ? pos : neg) = true;
        return pos && neg;
    }
};

inline double sigmoid(double z) {
    if (z >= 0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Numerically stable binary cross-entropy of logit z against label y.
inline double bce_from_logit(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

// Flat-parameter model. Layouts:
//   logistic, max_margin: [w_0..w_{d-1}, b]
//   perceptron:           [W1 (h x d, row-major), b1 (h), w2 (h), b2]
struct Model {
    ModelKind kind = ModelKind::logistic;
    std::size_t input_dim = 0;
    int hidden_units = 0;  // 0 for linear kinds
    std::vector<double> theta;

    static std::size_t param_count(ModelKind kind, std::size_t dim, int hidden) {
        if (kind == ModelKind::perceptron)
            return static_cast<std::size_t>(hidden) * dim + static_cast<std::size_t>(hidden) * 2 + 1;
        return dim + 1;
    }

    static Model init(ModelKind kind, std::size_t input_dim, int hidden_units, std::uint64_t seed) {
        Model m;
        m.kind = kind;
        m.input_dim = input_dim;
        m.hidden_units = kind == ModelKind::perceptron ? hidden_units : 0;
        if (kind == ModelKind::perceptron && hidden_units < 1)
            throw_config("perceptron needs at least one hidden unit");
        m.theta.resize(param_count(kind, input_dim, m.hidden_units));
        Rng rng(seed);
        for (auto& t : m.theta) t = rng.next_double(-0.05, 0.05);
        return m;
    }

    // Raw pre-sigmoid output (the margin for max_margin).
    double logit(std::span<const double> x) const {
        if (x.size() != input_dim) throw_data("Model: feature vector has dim " + std::to_string(x.size()) +
                                              ", expected " + std::to_string(input_dim));
        if (kind == ModelKind::perceptron) {
            const std::size_t d = input_dim;
            const std::size_t h = static_cast<std::size_t>(hidden_units);
            const double* w1 = theta.data();
            const double* b1 = w1 + h * d;
            const double* w2 = b1 + h;
            const double b2 = theta[h * d + 2 * h];
            double z2 = b2;
            for (std::size_t j = 0; j < h; ++j) {
                double a = b1[j];
                for (std::size_t i = 0; i < d; ++i) a += w1[j * d + i] * x[i];
                z2 += w2[j] * sigmoid(a);
            }
            return z2;
        }
        double z = theta[input_dim];
        for (std::size_t i = 0; i < input_dim; ++i) z += theta[i] * x[i];
        return z;
    }

    // Confidence in [0,1]; the decision rule downstream is score >= 0.5,
    // which for max_margin coincides with a non-negative margin.
    double score(std::span<const double> x) const { return sigmoid(logit(x)); }

    bool finite() const {
        for (double t : theta)
            if (!std::isfinite(t)) return false;
        return true;
    }
};

// Mean loss and its gradient in theta over the given rows. The same code
// path serves training and the finite-difference checks.
inline double loss_and_gradient(const Model& m, const LabeledData& data, std::span<const std::size_t> rows,
                                double l2, std::vector<double>* grad_out) {
    if (rows.empty()) throw_data("loss_and_gradient: empty batch");
    std::vector<double> grad(m.theta.size(), 0.0);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(rows.size());

    if (m.kind == ModelKind::perceptron) {
        const std::size_t d = m.input_dim;
        const std::size_t h = static_cast<std::size_t>(m.hidden_units);
        const double* w1 = m.theta.data();
        const double* b1 = w1 + h * d;
        const double* w2 = b1 + h;
        const double b2 = m.theta[h * d + 2 * h];
        std::vector<double> act(h);
        for (std::size_t r : rows) {
            const auto x = data.row(r);
            const double y = data.labels[r];
            double z2 = b2;
            for (std::size_t j = 0; j < h; ++j) {
                double a = b1[j];
                for (std::size_t i = 0; i < d; ++i) a += w1[j * d + i] * x[i];
                act[j] = sigmoid(a);
                z2 += w2[j] * act[j];
            }
            loss += bce_from_logit(z2, y) * inv;
            const double delta2 = (sigmoid(z2) - y) * inv;
            grad[h * d + 2 * h] += delta2;  // b2
            for (std::size_t j = 0; j < h; ++j) {
                grad[h * d + h + j] += delta2 * act[j];  // w2
                const double delta1 = delta2 * w2[j] * act[j] * (1.0 - act[j]);
                grad[h * d + j] += delta1;  // b1
                for (std::size_t i = 0; i < d; ++i) grad[j * d + i] += delta1 * x[i];
            }
        }
        // L2 on W1 and w2, not biases.
        if (l2 > 0) {
            for (std::size_t j = 0; j < h; ++j) {
                for (std::size_t i = 0; i < d; ++i) {
                    loss += 0.5 * l2 * w1[j * d + i] * w1[j * d + i];
                    grad[j * d + i] += l2 * w1[j * d + i];
                }
                loss += 0.5 * l2 * w2[j] * w2[j];
                grad[h * d + h + j] += l2 * w2[j];
            }
        }
    } else {
        for (std::size_t r : rows) {
            const auto x = data.row(r);
            double z = m.theta[m.input_dim];
            for (std::size_t i = 0; i < m.input_dim; ++i) z += m.theta[i] * x[i];
            if (m.kind == ModelKind::logistic) {
                const double y = data.labels[r];
                loss += bce_from_logit(z, y) * inv;
                const double delta = (sigmoid(z) - y) * inv;
                for (std::size_t i = 0; i < m.input_dim; ++i) grad[i] += delta * x[i];
                grad[m.input_dim] += delta;
            } else {
                const double ypm = data.labels[r] ? 1.0 : -1.0;
                const double margin = ypm * z;
                if (margin < 1.0) {
                    loss += (1.0 - margin) * inv;
                    for (std::size_t i = 0; i < m.input_dim; ++i) grad[i] += -ypm * x[i] * inv;
                    grad[m.input_dim] += -ypm * inv;
                }
            }
        }
        if (l2 > 0) {
            for (std::size_t i = 0; i < m.input_dim; ++i) {
                loss += 0.5 * l2 * m.theta[i] * m.theta[i];
                grad[i] += l2 * m.theta[i];
            }
        }
    }

    if (grad_out) *grad_out = std::move(grad);
    return loss;
}

struct TrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int epochs_run = 0;
};

// Seeded minibatch (sub)gradient descent. epochs == 0 returns the
// initialized model untouched.
inline Model train_model(ModelKind kind, const LabeledData& data, const TrainConfig& cfg,
                         TrainReport* report = nullptr) {
    if (data.size() == 0) throw_data("train_model: empty training data");
    if (!data.has_both_classes()) throw_data("train_model: training data contains a single class");
    if (cfg.epochs < 0) throw_config("train_model: negative epoch count");
    if (cfg.batch_size < 1) throw_config("train_model: batch_size must be >= 1");
    if (cfg.learning_rate <= 0) throw_config("train_model: learning_rate must be > 0");

    Model m = Model::init(kind, data.dim, cfg.hidden_units, cfg.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const double initial = loss_and_gradient(m, data, order, cfg.l2, nullptr);
    double final_loss = initial;

    Rng rng(cfg.seed ^ 0x5eedb0053ULL);
    std::vector<double> grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            loss_and_gradient(m, data, {order.data() + start, stop - start}, cfg.l2, &grad);
            for (std::size_t i = 0; i < m.theta.size(); ++i) m.theta[i] -= cfg.learning_rate * grad[i];
        }
        final_loss = loss_and_gradient(m, data, order, cfg.l2, nullptr);
        if (!std::isfinite(final_loss) || !m.finite())
            throw_data("train_model: diverged at epoch " + std::to_string(epoch + 1) + " (loss=" +
                       std::to_string(final_loss) + ", lr=" + std::to_string(cfg.learning_rate) + ")");
    }

    if (report) *report = TrainReport{initial, final_loss, cfg.epochs};
    return m;
}

inline double model_accuracy(const Model& m, const LabeledData& data) {
    if (data.size() == 0) throw_data("model_accuracy: empty data");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const bool pred = m.score(data.row(i)) >= 0.5;
        if (pred == (data.labels[i] != 0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---- Parameter (de)serialization; doubles round-trip exactly ----

inline nlohmann::json serialize_model(const Model& m) {
    return nlohmann::json{{"version", 1},
                          {"kind", to_string(m.kind)},
                          {"input_dim", m.input_dim},
                          {"hidden_units", m.hidden_units},
                          {"theta", m.theta}};
}

inline Model parse_model(const nlohmann::json& doc) {
    if (doc.value("version", 0) != 1) throw_data("model file: unsupported version");
    Model m;
    m.kind = model_kind_from_string(doc.at("kind").get<std::string>());
    m.input_dim = doc.at("input_dim").get<std::size_t>();
    m.hidden_units = doc.at("hidden_units").get<int>();
    m.theta = doc.at("theta").get<std::vector<double>>();
    if (m.theta.size() != Model::param_count(m.kind, m.input_dim, m.hidden_units))
        throw_data("model file: parameter count does not match declared architecture");
    if (!m.finite()) throw_data("model file: non-finite parameter");
    return m;
}

}  // namespace corrdetect

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace ablm {

struct MetricsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Seizure is the positive class (label 1) everywhere.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;

    std::size_t total() const { return tp + fn + tn + fp; }
};

// Zero-denominator ratios are absent (nullopt), never coerced to 0 or 1.
struct MetricsReport {
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> precision;
    std::optional<double> f1;
    std::optional<double> accuracy;
    ConfusionMatrix confusion;
};

inline MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw MetricsError("metrics: empty input");
    MetricsReport r;
    r.confusion = cm;
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
    r.specificity = ratio(cm.tn, cm.tn + cm.fp);
    r.precision = ratio(cm.tp, cm.tp + cm.fp);
    r.accuracy = ratio(cm.tp + cm.tn, cm.total());
    if (r.precision && r.sensitivity && (*r.precision + *r.sensitivity) > 0.0)
        r.f1 = 2.0 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
    return r;
}

// predictions/labels: 1 = seizure, 0 = non-seizure
inline MetricsReport compute_metrics(std::span<const std::size_t> predictions,
                                     std::span<const std::size_t> labels) {
    if (predictions.size() != labels.size())
        throw MetricsError("metrics: " + std::to_string(predictions.size()) +
                           " predictions vs " + std::to_string(labels.size()) + " labels");
    if (predictions.empty()) throw MetricsError("metrics: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred = predictions[i] == 1;
        const bool truth = labels[i] == 1;
        if (truth && pred) ++cm.tp;
        else if (truth && !pred) ++cm.fn;
        else if (!truth && !pred) ++cm.tn;
        else ++cm.fp;
    }
    return metrics_from_confusion(cm);
}

}  // namespace ablm

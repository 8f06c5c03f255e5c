#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ablm/dataset.hpp"
#include "ablm/metrics.hpp"
#include "ablm/model.hpp"
#include "ablm/rng.hpp"
#include "ablm/tensor.hpp"

namespace ablm {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 0.0013;
    std::size_t batch_size = 30;
    std::size_t epochs = 35;
    double rho = 0.9;
    double epsilon = 1e-7;
    std::uint64_t seed = 0;
    bool shuffle = true;
    double clip_norm = 0.0;  // global-norm gradient clip; 0 disables

    void validate() const {
        if (learning_rate <= 0.0) throw TrainError("train config: learning rate must be positive");
        if (batch_size < 1) throw TrainError("train config: batch size must be >= 1");
    }
};

// Mean over samples of -log(probability of the true class), clamped away
// from log(0). Labels must be one-hot rows.
inline void check_one_hot(const Tensor& labels) {
    if (labels.rank() != 2) throw ContractError("loss: labels must be rank-2 one-hot");
    const std::size_t B = labels.shape[0], C = labels.shape[1];
    for (std::size_t b = 0; b < B; ++b) {
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double v = labels.data[b * C + c];
            if (v != 0.0 && v != 1.0)
                throw ContractError("loss: label row " + std::to_string(b) + " is not one-hot");
            sum += v;
        }
        if (sum != 1.0)
            throw ContractError("loss: label row " + std::to_string(b) + " is not one-hot");
    }
}

constexpr double kCrossEntropyEps = 1e-12;

inline Var cross_entropy_loss_vars(Tape& tape, Var probs, const Tensor& one_hot) {
    check_one_hot(one_hot);
    const Tensor& pv = tape.value(probs);
    if (pv.shape != one_hot.shape)
        throw DimensionError("loss: probs " + shape_str(pv.shape) + " vs labels " +
                             shape_str(one_hot.shape));
    Var picked = sum_over_axis(elementwise_mul(probs, tape.leaf(one_hot)), 1);
    Var log_p = log_clamped(picked, kCrossEntropyEps);
    return scale(mean_over_axis(log_p, 0), -1.0);
}

inline double cross_entropy_loss(const Tensor& probs, const Tensor& one_hot) {
    Tape tape;
    Var loss = cross_entropy_loss_vars(tape, tape.leaf(probs), one_hot);
    return tape.value(loss).data[0];
}

// RMSprop: s <- rho*s + (1-rho)*g^2; p <- p - lr*g/sqrt(s+eps)
struct OptimizerState {
    std::vector<Tensor> mean_sq;  // aligned with ModelParams::for_each order

    static OptimizerState for_params(const ModelParams& params) {
        OptimizerState st;
        params.for_each([&](const std::string&, const Tensor& t) {
            st.mean_sq.push_back(Tensor::zeros(t.shape));
        });
        return st;
    }
};

inline void rmsprop_step(ModelParams& params, std::span<const Tensor> grads, OptimizerState& state,
                         double lr, double rho, double eps) {
    std::size_t i = 0;
    params.for_each([&](const std::string& name, Tensor& p) {
        if (i >= grads.size() || i >= state.mean_sq.size())
            throw TrainError("rmsprop: gradient list shorter than parameter list");
        const Tensor& g = grads[i];
        Tensor& s = state.mean_sq[i];
        if (g.shape != p.shape || s.shape != p.shape)
            throw DimensionError("rmsprop: shape mismatch at " + name + ": param " +
                                 shape_str(p.shape) + ", grad " + shape_str(g.shape));
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            s.data[k] = rho * s.data[k] + (1.0 - rho) * g.data[k] * g.data[k];
            p.data[k] -= lr * g.data[k] / std::sqrt(s.data[k] + eps);
        }
        ++i;
    });
    if (i != grads.size()) throw TrainError("rmsprop: gradient list longer than parameter list");
}

// --- batching ---------------------------------------------------------------

inline Tensor batch_input(const std::vector<Segment>& corpus, std::span<const std::size_t> ids) {
    if (ids.empty()) throw TrainError("batch: empty id list");
    const Shape& ss = corpus.at(ids[0]).data.shape;
    Tensor x(Shape{ids.size(), ss[0], ss[1]});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Tensor& d = corpus.at(ids[i]).data;
        if (d.shape != ss)
            throw DimensionError("batch: segment shape " + shape_str(d.shape) + " vs " +
                                 shape_str(ss));
        std::copy(d.data.begin(), d.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * d.numel()));
    }
    return x;
}

inline Tensor batch_one_hot(const std::vector<Segment>& corpus, std::span<const std::size_t> ids,
                            std::size_t n_classes) {
    Tensor y(Shape{ids.size(), n_classes});
    for (std::size_t i = 0; i < ids.size(); ++i)
        y.data[i * n_classes + (corpus.at(ids[i]).seizure ? 1 : 0)] = 1.0;
    return y;
}

// Predicted class labels over `ids`, evaluated in batches.
inline std::vector<std::size_t> predict_labels(const ModelParams& params, const ModelConfig& cfg,
                                               const std::vector<Segment>& corpus,
                                               std::span<const std::size_t> ids,
                                               std::size_t batch_size) {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (std::size_t at = 0; at < ids.size(); at += batch_size) {
        const std::size_t n = std::min(batch_size, ids.size() - at);
        Tensor x = batch_input(corpus, ids.subspan(at, n));
        ModelOutput mo = model_forward(x, params, cfg);
        out.insert(out.end(), mo.labels.begin(), mo.labels.end());
    }
    return out;
}

inline std::vector<std::size_t> true_labels(const std::vector<Segment>& corpus,
                                            std::span<const std::size_t> ids) {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (std::size_t id : ids) out.push_back(corpus.at(id).seizure ? 1 : 0);
    return out;
}

// --- training loop ----------------------------------------------------------

struct EpochRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    MetricsReport validation;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochRow> history;
};

// One optimizer step on one mini-batch; returns the batch loss.
inline double train_step(ModelParams& params, OptimizerState& state, const ModelConfig& cfg,
                         const TrainConfig& tc, const Tensor& x, const Tensor& one_hot) {
    Tape tape;
    ModelVars mv = stage_params(tape, params);
    ForwardVars fv = model_forward_vars(tape, tape.leaf(x), mv, cfg);
    Var loss = cross_entropy_loss_vars(tape, fv.probs, one_hot);
    std::vector<Tensor> grads = tape.backward(loss, mv.all);
    if (tc.clip_norm > 0.0) {
        double sq = 0.0;
        for (const Tensor& g : grads)
            for (double v : g.data) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > tc.clip_norm) {
            const double k = tc.clip_norm / norm;
            for (Tensor& g : grads)
                for (double& v : g.data) v *= k;
        }
    }
    rmsprop_step(params, grads, state, tc.learning_rate, tc.rho, tc.epsilon);
    return tape.value(loss).data[0];
}

// Epochs of seeded shuffled mini-batches (the final short batch is kept).
// Deterministic for a fixed seed; returns the final-epoch parameters plus the
// per-epoch loss/validation history.
inline TrainResult train(ModelParams params, const std::vector<Segment>& corpus,
                         std::span<const std::size_t> train_ids,
                         std::span<const std::size_t> val_ids, const ModelConfig& cfg,
                         const TrainConfig& tc) {
    tc.validate();
    if (train_ids.empty()) throw TrainError("train: empty training split");
    for (std::size_t id : train_ids)
        for (std::size_t vid : val_ids)
            if (id == vid) throw TrainError("train: train and validation splits overlap");

    TrainResult result{std::move(params), {}};
    OptimizerState state = OptimizerState::for_params(result.params);
    std::vector<std::size_t> order(train_ids.begin(), train_ids.end());

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        if (tc.shuffle) {
            Rng rng(derive_seed(tc.seed, "shuffle", epoch));
            rng.shuffle(order);
        }
        double loss_sum = 0.0;
        for (std::size_t at = 0; at < order.size(); at += tc.batch_size) {
            const std::size_t n = std::min(tc.batch_size, order.size() - at);
            std::span<const std::size_t> ids(order.data() + at, n);
            Tensor x = batch_input(corpus, ids);
            Tensor y = batch_one_hot(corpus, ids, cfg.n_c);
            loss_sum += train_step(result.params, state, cfg, tc, x, y) * static_cast<double>(n);
        }
        EpochRow row;
        row.epoch = epoch + 1;
        row.train_loss = loss_sum / static_cast<double>(order.size());
        if (!val_ids.empty()) {
            std::vector<std::size_t> preds =
                predict_labels(result.params, cfg, corpus, val_ids, tc.batch_size);
            row.validation = compute_metrics(preds, true_labels(corpus, val_ids));
        }
        result.history.push_back(std::move(row));
    }
    return result;
}

inline std::string format_metric(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

inline void write_history_csv(const std::filesystem::path& path,
                              std::span<const EpochRow> history) {
    std::ofstream os(path);
    if (!os) throw TrainError("history: cannot open " + path.string() + " for writing");
    os << "epoch,train_loss,val_sens,val_spec,val_prec,val_f1,val_acc\n";
    for (const EpochRow& r : history) {
        char loss[32];
        std::snprintf(loss, sizeof(loss), "%.6f", r.train_loss);
        os << r.epoch << ',' << loss << ',' << format_metric(r.validation.sensitivity) << ','
           << format_metric(r.validation.specificity) << ',' << format_metric(r.validation.precision)
           << ',' << format_metric(r.validation.f1) << ',' << format_metric(r.validation.accuracy)
           << "\n";
    }
}

}  // namespace ablm

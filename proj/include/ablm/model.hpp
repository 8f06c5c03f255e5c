#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ablm/dataset.hpp"
#include "ablm/rng.hpp"
#include "ablm/tensor.hpp"

namespace ablm {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Merge { Concat, Sum };
enum class AttnNonlinearity { Softmax, Sigmoid };

struct ModelConfig {
    std::size_t n_ch = 17;    // input channels
    std::size_t n_sp = 5888;  // time steps per segment (23 s at 256 Hz)
    std::size_t n_fe1 = 140;  // LSTM hidden size per direction
    Merge merge = Merge::Concat;
    std::size_t n_fe3 = 70;  // time-distributed feature size
    std::size_t n_c = 2;     // classes
    bool attention_enabled = true;
    bool bidirectional_enabled = true;
    AttnNonlinearity attention_nonlinearity = AttnNonlinearity::Softmax;

    // width of the merged BiLSTM output (n_fe2)
    std::size_t feature_width() const {
        if (!bidirectional_enabled) return n_fe1;
        return merge == Merge::Concat ? 2 * n_fe1 : n_fe1;
    }

    void validate() const {
        if (!n_ch || !n_sp || !n_fe1 || !n_fe3 || !n_c)
            throw ContractError("model config: all sizes must be positive");
    }
};

struct AttentionParams {
    Tensor w_al;  // [n_ch, n_ch]
    Tensor b_al;  // [n_ch], broadcast over rows
};

struct LstmDirectionParams {
    Tensor w_ce, w_ig, w_fg, w_og;  // [n_ch, n_fe1]
    Tensor r_ce, r_ig, r_fg, r_og;  // [n_fe1, n_fe1]
    Tensor b_ce, b_ig, b_fg, b_og;  // [n_fe1]
};

struct HeadParams {
    Tensor w_dl;   // [n_fe2, n_fe3]
    Tensor b_dl;   // [n_fe3]
    Tensor w_fcl;  // [n_fe3, n_c]
    Tensor b_fcl;  // [n_c]
};

struct ModelParams {
    std::optional<AttentionParams> attention;
    LstmDirectionParams forward_lstm;
    std::optional<LstmDirectionParams> backward_lstm;
    HeadParams head;

    // Visits every trainable tensor in a fixed order; the order defines the
    // checkpoint layout and the optimizer state alignment.
    template <typename F>
    void for_each(F&& f) {
        const_cast<const ModelParams*>(this)->for_each(
            [&](const std::string& name, const Tensor& t) { f(name, const_cast<Tensor&>(t)); });
    }

    template <typename F>
    void for_each(F&& f) const {
        if (attention) {
            f("attention.w_al", attention->w_al);
            f("attention.b_al", attention->b_al);
        }
        auto dir = [&](const char* prefix, const LstmDirectionParams& p) {
            const std::string pre(prefix);
            f(pre + ".w_ce", p.w_ce);
            f(pre + ".w_ig", p.w_ig);
            f(pre + ".w_fg", p.w_fg);
            f(pre + ".w_og", p.w_og);
            f(pre + ".r_ce", p.r_ce);
            f(pre + ".r_ig", p.r_ig);
            f(pre + ".r_fg", p.r_fg);
            f(pre + ".r_og", p.r_og);
            f(pre + ".b_ce", p.b_ce);
            f(pre + ".b_ig", p.b_ig);
            f(pre + ".b_fg", p.b_fg);
            f(pre + ".b_og", p.b_og);
        };
        dir("forward_lstm", forward_lstm);
        if (backward_lstm) dir("backward_lstm", *backward_lstm);
        f("head.w_dl", head.w_dl);
        f("head.b_dl", head.b_dl);
        f("head.w_fcl", head.w_fcl);
        f("head.b_fcl", head.b_fcl);
    }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for_each([&](const std::string&, const Tensor& t) { n += t.numel(); });
        return n;
    }
};

// Trainable element count. Biases are per-feature vectors broadcast over
// rows, which is the convention that reproduces the published 197,078 total
// for the default configuration.
inline std::size_t count_parameters(const ModelConfig& cfg) {
    cfg.validate();
    std::size_t n = 0;
    if (cfg.attention_enabled) n += cfg.n_ch * cfg.n_ch + cfg.n_ch;
    const std::size_t per_direction =
        4 * (cfg.n_ch * cfg.n_fe1 + cfg.n_fe1 * cfg.n_fe1 + cfg.n_fe1);
    n += per_direction * (cfg.bidirectional_enabled ? 2 : 1);
    n += cfg.feature_width() * cfg.n_fe3 + cfg.n_fe3;
    n += cfg.n_fe3 * cfg.n_c + cfg.n_c;
    return n;
}

namespace detail {

inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor t(Shape{rows, cols});
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

// random square matrix with orthonormal rows (Gram-Schmidt)
inline Tensor orthogonal(std::size_t n, Rng& rng) {
    Tensor m(Shape{n, n});
    for (double& v : m.data) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        double* vi = m.data.data() + i * n;
        for (std::size_t j = 0; j < i; ++j) {
            const double* vj = m.data.data() + j * n;
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k) dot += vi[k] * vj[k];
            for (std::size_t k = 0; k < n; ++k) vi[k] -= dot * vj[k];
        }
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) norm += vi[k] * vi[k];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // degenerate row: replace and redo this row
            for (std::size_t k = 0; k < n; ++k) vi[k] = rng.normal();
            --i;
            continue;
        }
        for (std::size_t k = 0; k < n; ++k) vi[k] /= norm;
    }
    return m;
}

inline LstmDirectionParams init_direction(const ModelConfig& cfg, Rng& rng) {
    LstmDirectionParams p;
    p.w_ce = glorot_uniform(cfg.n_ch, cfg.n_fe1, rng);
    p.w_ig = glorot_uniform(cfg.n_ch, cfg.n_fe1, rng);
    p.w_fg = glorot_uniform(cfg.n_ch, cfg.n_fe1, rng);
    p.w_og = glorot_uniform(cfg.n_ch, cfg.n_fe1, rng);
    p.r_ce = orthogonal(cfg.n_fe1, rng);
    p.r_ig = orthogonal(cfg.n_fe1, rng);
    p.r_fg = orthogonal(cfg.n_fe1, rng);
    p.r_og = orthogonal(cfg.n_fe1, rng);
    p.b_ce = Tensor::zeros(Shape{cfg.n_fe1});
    p.b_ig = Tensor::zeros(Shape{cfg.n_fe1});
    p.b_fg = Tensor::ones(Shape{cfg.n_fe1});  // open forget gates at the start
    p.b_og = Tensor::zeros(Shape{cfg.n_fe1});
    return p;
}

}  // namespace detail

// Zero-valued parameters with the shapes the configuration dictates.
inline ModelParams make_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    auto direction = [&]() {
        LstmDirectionParams d;
        d.w_ce = d.w_ig = d.w_fg = d.w_og = Tensor::zeros(Shape{cfg.n_ch, cfg.n_fe1});
        d.r_ce = d.r_ig = d.r_fg = d.r_og = Tensor::zeros(Shape{cfg.n_fe1, cfg.n_fe1});
        d.b_ce = d.b_ig = d.b_fg = d.b_og = Tensor::zeros(Shape{cfg.n_fe1});
        return d;
    };
    if (cfg.attention_enabled)
        p.attention = AttentionParams{Tensor::zeros(Shape{cfg.n_ch, cfg.n_ch}),
                                      Tensor::zeros(Shape{cfg.n_ch})};
    p.forward_lstm = direction();
    if (cfg.bidirectional_enabled) p.backward_lstm = direction();
    p.head.w_dl = Tensor::zeros(Shape{cfg.feature_width(), cfg.n_fe3});
    p.head.b_dl = Tensor::zeros(Shape{cfg.n_fe3});
    p.head.w_fcl = Tensor::zeros(Shape{cfg.n_fe3, cfg.n_c});
    p.head.b_fcl = Tensor::zeros(Shape{cfg.n_c});
    return p;
}

inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, "init"));
    ModelParams p;
    if (cfg.attention_enabled) {
        AttentionParams a;
        a.w_al = detail::glorot_uniform(cfg.n_ch, cfg.n_ch, rng);
        a.b_al = Tensor::zeros(Shape{cfg.n_ch});
        p.attention = std::move(a);
    }
    p.forward_lstm = detail::init_direction(cfg, rng);
    if (cfg.bidirectional_enabled) p.backward_lstm = detail::init_direction(cfg, rng);
    p.head.w_dl = detail::glorot_uniform(cfg.feature_width(), cfg.n_fe3, rng);
    p.head.b_dl = Tensor::zeros(Shape{cfg.n_fe3});
    p.head.w_fcl = detail::glorot_uniform(cfg.n_fe3, cfg.n_c, rng);
    p.head.b_fcl = Tensor::zeros(Shape{cfg.n_c});
    return p;
}

// --- taped forward pass --------------------------------------------------------

struct AttentionVars {
    Var w_al, b_al;
};
struct LstmDirectionVars {
    Var w_ce, w_ig, w_fg, w_og, r_ce, r_ig, r_fg, r_og, b_ce, b_ig, b_fg, b_og;
};
struct HeadVars {
    Var w_dl, b_dl, w_fcl, b_fcl;
};

// Parameter leaves staged on one tape. `all` lists them in for_each order so
// that Tape::backward(loss, all) aligns with the optimizer state.
struct ModelVars {
    std::optional<AttentionVars> attention;
    LstmDirectionVars forward_lstm;
    std::optional<LstmDirectionVars> backward_lstm;
    HeadVars head;
    std::vector<Var> all;
};

inline ModelVars stage_params(Tape& tape, const ModelParams& params) {
    ModelVars mv;
    std::vector<Var> order;
    params.for_each([&](const std::string&, const Tensor& t) { order.push_back(tape.leaf(t)); });
    std::size_t i = 0;
    auto next = [&]() { return order[i++]; };
    if (params.attention) mv.attention = AttentionVars{next(), next()};
    auto dir = [&]() {
        LstmDirectionVars d;
        d.w_ce = next(); d.w_ig = next(); d.w_fg = next(); d.w_og = next();
        d.r_ce = next(); d.r_ig = next(); d.r_fg = next(); d.r_og = next();
        d.b_ce = next(); d.b_ig = next(); d.b_fg = next(); d.b_og = next();
        return d;
    };
    mv.forward_lstm = dir();
    if (params.backward_lstm) mv.backward_lstm = dir();
    mv.head = HeadVars{next(), next(), next(), next()};
    mv.all = std::move(order);
    return mv;
}

struct AttentionOut {
    Var y;        // [B,T,C] re-weighted input
    Var weights;  // [B,C] per-sample channel weights, shared across time steps
};

// Channel attention: per-channel scores from a shared affine map, averaged
// over time, copied back to every step, multiplied into the input.
inline AttentionOut attention_forward_vars(Tape& tape, Var x, const AttentionVars& p,
                                           AttnNonlinearity nonlinearity) {
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 3)
        throw DimensionError("attention: want [samples, steps, channels], got " +
                             shape_str(xv.shape));
    const std::size_t B = xv.shape[0], T = xv.shape[1], C = xv.shape[2];
    const Act act = nonlinearity == AttnNonlinearity::Softmax ? Act::Softmax : Act::Sigmoid;
    Var flat = reshape(x, Shape{B * T, C});
    Var bias = broadcast_over_axis(p.b_al, 0, B * T);
    Var scores = activation(add(matmul(flat, p.w_al), bias), act);
    Var per_step = reshape(scores, Shape{B, T, C});
    Var weights = mean_over_axis(per_step, 1);
    Var shared = broadcast_over_axis(weights, 1, T);
    return AttentionOut{elementwise_mul(x, shared), weights};
}

struct LstmState {
    Var y;  // block output [B, n_fe1]
    Var c;  // cell state [B, n_fe1]
};

namespace detail {

struct StagedBiases {
    Var ce, ig, fg, og;  // biases broadcast once to [B, n_fe1]
};

inline StagedBiases broadcast_biases(Tape&, const LstmDirectionVars& p, std::size_t batch) {
    return StagedBiases{broadcast_over_axis(p.b_ce, 0, batch),
                        broadcast_over_axis(p.b_ig, 0, batch),
                        broadcast_over_axis(p.b_fg, 0, batch),
                        broadcast_over_axis(p.b_og, 0, batch)};
}

inline LstmState lstm_cell(Var x_t, const LstmDirectionVars& p, const StagedBiases& b,
                           const LstmState& prev) {
    auto gate = [&](Var w, Var r, Var bias, Act act) {
        return activation(add(add(matmul(x_t, w), matmul(prev.y, r)), bias), act);
    };
    Var block_input = gate(p.w_ce, p.r_ce, b.ce, Act::Tanh);
    Var input_gate = gate(p.w_ig, p.r_ig, b.ig, Act::Sigmoid);
    Var forget_gate = gate(p.w_fg, p.r_fg, b.fg, Act::Sigmoid);
    Var output_gate = gate(p.w_og, p.r_og, b.og, Act::Sigmoid);
    Var cell = add(elementwise_mul(prev.c, forget_gate), elementwise_mul(block_input, input_gate));
    Var out = elementwise_mul(activation(cell, Act::Tanh), output_gate);
    return LstmState{out, cell};
}

// Runs one direction over per-step slices; returns outputs in processing
// order (for reverse=true, out[k] consumed input step T-1-k). Initial states
// are zero.
inline std::vector<Var> run_direction(Tape& tape, std::span<const Var> steps,
                                      const LstmDirectionVars& p, std::size_t batch,
                                      std::size_t hidden, bool reverse) {
    StagedBiases biases = broadcast_biases(tape, p, batch);
    LstmState state{tape.leaf(Tensor::zeros(Shape{batch, hidden})),
                    tape.leaf(Tensor::zeros(Shape{batch, hidden}))};
    std::vector<Var> out;
    out.reserve(steps.size());
    for (std::size_t k = 0; k < steps.size(); ++k) {
        Var x_t = steps[reverse ? steps.size() - 1 - k : k];
        state = lstm_cell(x_t, p, biases, state);
        out.push_back(state.y);
    }
    return out;
}

}  // namespace detail

inline LstmState lstm_step_vars(Tape& tape, Var x_t, Var prev_y, Var prev_c,
                                const LstmDirectionVars& p) {
    const std::size_t batch = tape.value(x_t).shape[0];
    detail::StagedBiases biases = detail::broadcast_biases(tape, p, batch);
    return detail::lstm_cell(x_t, p, biases, LstmState{prev_y, prev_c});
}

// Forward pass over t = 1..T and a pass over the reversed sequence, merged so
// both constituents at output step t correspond to input step t.
inline Var bilstm_forward_vars(Tape& tape, Var seq, const LstmDirectionVars& fwd,
                               const std::optional<LstmDirectionVars>& bwd, Merge merge,
                               std::size_t hidden) {
    const Tensor& sv = tape.value(seq);
    if (sv.rank() != 3)
        throw DimensionError("bilstm: want [samples, steps, features], got " +
                             shape_str(sv.shape));
    const std::size_t B = sv.shape[0], T = sv.shape[1];
    std::vector<Var> steps;
    steps.reserve(T);
    for (std::size_t t = 0; t < T; ++t) steps.push_back(time_slice(seq, t));

    std::vector<Var> fwd_out = detail::run_direction(tape, steps, fwd, B, hidden, false);
    if (!bwd) return stack_time(fwd_out);

    std::vector<Var> bwd_out = detail::run_direction(tape, steps, *bwd, B, hidden, true);
    std::vector<Var> merged;
    merged.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Var b_t = bwd_out[T - 1 - t];
        merged.push_back(merge == Merge::Concat ? concat_features(fwd_out[t], b_t)
                                                : add(fwd_out[t], b_t));
    }
    return stack_time(merged);
}

// Same affine map applied at every time step (linear activation).
inline Var time_distributed_fc_vars(Tape& tape, Var seq, Var w_dl, Var b_dl) {
    const Tensor& sv = tape.value(seq);
    if (sv.rank() != 3)
        throw DimensionError("time-distributed: want rank-3 input, got " + shape_str(sv.shape));
    const std::size_t B = sv.shape[0], T = sv.shape[1], F = sv.shape[2];
    const std::size_t out_f = tape.value(w_dl).shape[1];
    Var flat = reshape(seq, Shape{B * T, F});
    Var bias = broadcast_over_axis(b_dl, 0, B * T);
    Var mapped = add(matmul(flat, w_dl), bias);
    return reshape(mapped, Shape{B, T, out_f});
}

inline Var average_pool_vars(Tape&, Var seq) { return mean_over_axis(seq, 1); }

struct HeadOut {
    Var logits;
    Var probs;
};

inline HeadOut classify_head_vars(Tape& tape, Var features, Var w_fcl, Var b_fcl) {
    const std::size_t B = tape.value(features).shape[0];
    Var bias = broadcast_over_axis(b_fcl, 0, B);
    Var logits = add(matmul(features, w_fcl), bias);
    return HeadOut{logits, activation(logits, Act::Softmax)};
}

struct ForwardVars {
    Var probs;
    Var logits;
    Var attention_weights;  // [B,C]; all ones when attention is bypassed
};

inline ForwardVars model_forward_vars(Tape& tape, Var x, const ModelVars& mv,
                                      const ModelConfig& cfg) {
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 3 || xv.shape[2] != cfg.n_ch)
        throw DimensionError("model: input " + shape_str(xv.shape) + " does not match " +
                             std::to_string(cfg.n_ch) + " channels");
    const std::size_t B = xv.shape[0];

    Var current = x;
    Var weights;
    if (cfg.attention_enabled) {
        if (!mv.attention) throw ContractError("model: attention enabled but no parameters");
        AttentionOut at =
            attention_forward_vars(tape, x, *mv.attention, cfg.attention_nonlinearity);
        current = at.y;
        weights = at.weights;
    } else {
        // bypassed attention acts as the identity (weight 1 on every channel)
        weights = tape.leaf(Tensor::ones(Shape{B, cfg.n_ch}));
    }

    std::optional<LstmDirectionVars> bwd;
    if (cfg.bidirectional_enabled) {
        if (!mv.backward_lstm) throw ContractError("model: bidirectional enabled but no parameters");
        bwd = *mv.backward_lstm;
    }
    Var seq = bilstm_forward_vars(tape, current, mv.forward_lstm, bwd, cfg.merge, cfg.n_fe1);
    Var td = time_distributed_fc_vars(tape, seq, mv.head.w_dl, mv.head.b_dl);
    Var pooled = average_pool_vars(tape, td);
    HeadOut head = classify_head_vars(tape, pooled, mv.head.w_fcl, mv.head.b_fcl);
    return ForwardVars{head.probs, head.logits, weights};
}

// --- eager wrappers ------------------------------------------------------------

inline std::pair<Tensor, Tensor> attention_forward(const Tensor& x, const AttentionParams& p,
                                                   AttnNonlinearity nonlinearity) {
    Tape tape;
    AttentionVars pv{tape.leaf(p.w_al), tape.leaf(p.b_al)};
    AttentionOut out = attention_forward_vars(tape, tape.leaf(x), pv, nonlinearity);
    return {tape.value(out.y), tape.value(out.weights)};
}

inline std::pair<Tensor, Tensor> lstm_step(const Tensor& x_t, const Tensor& prev_y,
                                           const Tensor& prev_c, const LstmDirectionParams& p) {
    Tape tape;
    LstmDirectionVars pv{tape.leaf(p.w_ce), tape.leaf(p.w_ig), tape.leaf(p.w_fg),
                         tape.leaf(p.w_og), tape.leaf(p.r_ce), tape.leaf(p.r_ig),
                         tape.leaf(p.r_fg), tape.leaf(p.r_og), tape.leaf(p.b_ce),
                         tape.leaf(p.b_ig), tape.leaf(p.b_fg), tape.leaf(p.b_og)};
    LstmState s = lstm_step_vars(tape, tape.leaf(x_t), tape.leaf(prev_y), tape.leaf(prev_c), pv);
    return {tape.value(s.y), tape.value(s.c)};
}

namespace detail {

inline LstmDirectionVars stage_direction(Tape& tape, const LstmDirectionParams& p) {
    return LstmDirectionVars{tape.leaf(p.w_ce), tape.leaf(p.w_ig), tape.leaf(p.w_fg),
                             tape.leaf(p.w_og), tape.leaf(p.r_ce), tape.leaf(p.r_ig),
                             tape.leaf(p.r_fg), tape.leaf(p.r_og), tape.leaf(p.b_ce),
                             tape.leaf(p.b_ig), tape.leaf(p.b_fg), tape.leaf(p.b_og)};
}

}  // namespace detail

inline Tensor bilstm_forward(const Tensor& seq, const LstmDirectionParams& fwd,
                             const LstmDirectionParams& bwd, Merge merge) {
    if (merge == Merge::Sum && fwd.b_ce.shape != bwd.b_ce.shape)
        throw DimensionError("bilstm: sum merge needs equal direction sizes");
    Tape tape;
    LstmDirectionVars fv = detail::stage_direction(tape, fwd);
    std::optional<LstmDirectionVars> bv = detail::stage_direction(tape, bwd);
    Var out = bilstm_forward_vars(tape, tape.leaf(seq), fv, bv, merge, fwd.b_ce.shape[0]);
    return tape.value(out);
}

inline Tensor time_distributed_fc(const Tensor& seq, const HeadParams& p) {
    Tape tape;
    Var out = time_distributed_fc_vars(tape, tape.leaf(seq), tape.leaf(p.w_dl), tape.leaf(p.b_dl));
    return tape.value(out);
}

inline Tensor average_pool(const Tensor& seq) {
    Tape tape;
    if (seq.rank() != 3 || seq.shape[1] == 0)
        throw DimensionError("average_pool: want rank-3 with at least one step, got " +
                             shape_str(seq.shape));
    return tape.value(average_pool_vars(tape, tape.leaf(seq)));
}

inline std::pair<Tensor, Tensor> classify_head(const Tensor& features, const HeadParams& p) {
    Tape tape;
    HeadOut out = classify_head_vars(tape, tape.leaf(features), tape.leaf(p.w_fcl),
                                     tape.leaf(p.b_fcl));
    return {tape.value(out.logits), tape.value(out.probs)};
}

// argmax per row; ties break toward the lower class index
inline std::vector<std::size_t> argmax_rows(const Tensor& probs) {
    if (probs.rank() != 2) throw DimensionError("argmax: want rank-2, got " + shape_str(probs.shape));
    const std::size_t B = probs.shape[0], C = probs.shape[1];
    std::vector<std::size_t> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (probs.data[b * C + c] > probs.data[b * C + best]) best = c;
        out[b] = best;
    }
    return out;
}

struct ModelOutput {
    Tensor probs;              // [B, n_c]
    Tensor attention_weights;  // [B, n_ch]
    std::vector<std::size_t> labels;
};

inline ModelOutput model_forward(const Tensor& x, const ModelParams& params,
                                 const ModelConfig& cfg) {
    Tape tape;
    ModelVars mv = stage_params(tape, params);
    ForwardVars out = model_forward_vars(tape, tape.leaf(x), mv, cfg);
    ModelOutput res;
    res.probs = tape.value(out.probs);
    res.attention_weights = tape.value(out.attention_weights);
    res.labels = argmax_rows(res.probs);
    return res;
}

// --- checkpoint ------------------------------------------------------------------
//
// magic "ABLM1"; u32 config fields (n_ch, n_sp, n_fe1, merge, n_fe3, n_c,
// attention, bidirectional, nonlinearity); u32 record count; records of
// u16-length name, u32 rank, u32 dims..., f64 data. Little-endian throughout.

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ModelParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
    os.write("ABLM1", 5);
    auto u32 = [&](std::size_t v) { detail::put_u32(os, static_cast<std::uint32_t>(v)); };
    u32(cfg.n_ch);
    u32(cfg.n_sp);
    u32(cfg.n_fe1);
    u32(cfg.merge == Merge::Concat ? 0 : 1);
    u32(cfg.n_fe3);
    u32(cfg.n_c);
    u32(cfg.attention_enabled ? 1 : 0);
    u32(cfg.bidirectional_enabled ? 1 : 0);
    u32(cfg.attention_nonlinearity == AttnNonlinearity::Softmax ? 0 : 1);
    std::size_t records = 0;
    params.for_each([&](const std::string&, const Tensor&) { ++records; });
    u32(records);
    params.for_each([&](const std::string& name, const Tensor& t) {
        detail::put_string16(os, name);
        u32(t.rank());
        for (std::size_t d : t.shape) u32(d);
        for (double v : t.data) detail::put_f64(os, v);
    });
    if (!os) throw CheckpointError("checkpoint: write failed for " + path.string());
}

inline std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open " + path.string());
    char magic[5];
    if (!is.read(magic, 5) || std::string_view(magic, 5) != "ABLM1")
        throw CheckpointError("checkpoint: bad magic in " + path.string());
    auto u32 = [&]() { return static_cast<std::size_t>(detail::get_u32(is)); };
    ModelConfig cfg;
    cfg.n_ch = u32();
    cfg.n_sp = u32();
    cfg.n_fe1 = u32();
    cfg.merge = u32() == 0 ? Merge::Concat : Merge::Sum;
    cfg.n_fe3 = u32();
    cfg.n_c = u32();
    cfg.attention_enabled = u32() == 1;
    cfg.bidirectional_enabled = u32() == 1;
    cfg.attention_nonlinearity = u32() == 0 ? AttnNonlinearity::Softmax : AttnNonlinearity::Sigmoid;
    cfg.validate();

    const std::size_t records = u32();
    std::vector<std::pair<std::string, Tensor>> loaded;
    loaded.reserve(records);
    std::size_t total = 0;
    for (std::size_t r = 0; r < records; ++r) {
        std::string name = detail::get_string16(is);
        const std::size_t rank = u32();
        Shape shape(rank);
        for (auto& d : shape) d = u32();
        Tensor t(shape);
        for (double& v : t.data) v = detail::get_f64(is);
        total += t.numel();
        loaded.emplace_back(std::move(name), std::move(t));
    }
    if (total != count_parameters(cfg))
        throw CheckpointError("checkpoint: " + std::to_string(total) +
                              " stored elements, config wants " +
                              std::to_string(count_parameters(cfg)));

    ModelParams params = make_params(cfg);
    std::size_t next = 0;
    params.for_each([&](const std::string& name, Tensor& t) {
        if (next >= loaded.size() || loaded[next].first != name)
            throw CheckpointError("checkpoint: unexpected record order at '" + name + "'");
        if (loaded[next].second.shape != t.shape)
            throw CheckpointError("checkpoint: '" + name + "' has shape " +
                                  shape_str(loaded[next].second.shape) + ", want " +
                                  shape_str(t.shape));
        t = std::move(loaded[next].second);
        ++next;
    });
    if (next != loaded.size()) throw CheckpointError("checkpoint: extra parameter records");
    return {cfg, std::move(params)};
}

}  // namespace ablm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ablm/model.hpp"
#include "ablm/rng.hpp"
#include "ablm/tensor.hpp"
#include "ablm/train.hpp"

namespace ablm {

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double max_rel_error = 0.0;
};

namespace detail {

inline double model_loss(const ModelParams& params, const ModelConfig& cfg, const Tensor& x,
                         const Tensor& one_hot) {
    Tape tape;
    ModelVars mv = stage_params(tape, params);
    ForwardVars fv = model_forward_vars(tape, tape.leaf(x), mv, cfg);
    Var loss = cross_entropy_loss_vars(tape, fv.probs, one_hot);
    return tape.value(loss).data[0];
}

inline double rel_error(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / denom;
}

}  // namespace detail

// Central finite differences of the cross-entropy loss against the tape
// gradients, per parameter group. The finite-difference side touches one
// element at a time and only reads forward values.
inline GradCheckReport finite_difference_check(ModelParams params, const ModelConfig& cfg,
                                               const Tensor& x, const Tensor& one_hot,
                                               double h = 1e-5) {
    Tape tape;
    ModelVars mv = stage_params(tape, params);
    ForwardVars fv = model_forward_vars(tape, tape.leaf(x), mv, cfg);
    Var loss = cross_entropy_loss_vars(tape, fv.probs, one_hot);
    std::vector<Tensor> analytic = tape.backward(loss, mv.all);

    GradCheckReport report;
    std::size_t group = 0;
    params.for_each([&](const std::string& name, Tensor& p) {
        GradCheckGroup g{name, 0.0};
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            const double saved = p.data[k];
            p.data[k] = saved + h;
            const double up = detail::model_loss(params, cfg, x, one_hot);
            p.data[k] = saved - h;
            const double down = detail::model_loss(params, cfg, x, one_hot);
            p.data[k] = saved;
            const double fd = (up - down) / (2.0 * h);
            g.max_rel_error = std::max(g.max_rel_error,
                                       detail::rel_error(analytic[group].data[k], fd));
        }
        report.max_rel_error = std::max(report.max_rel_error, g.max_rel_error);
        report.groups.push_back(std::move(g));
        ++group;
    });
    return report;
}

// The standard tiny configuration for gradient verification.
inline ModelConfig gradcheck_config() {
    ModelConfig cfg;
    cfg.n_ch = 3;
    cfg.n_sp = 4;
    cfg.n_fe1 = 5;
    cfg.n_fe3 = 4;
    return cfg;
}

inline GradCheckReport run_gradcheck(std::uint64_t seed = 7, std::size_t batch = 2,
                                     double h = 1e-5) {
    const ModelConfig cfg = gradcheck_config();
    ModelParams params = init_params(cfg, seed);
    Rng rng(derive_seed(seed, "gradcheck-input"));
    Tensor x(Shape{batch, cfg.n_sp, cfg.n_ch});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    Tensor one_hot = Tensor::zeros(Shape{batch, cfg.n_c});
    for (std::size_t b = 0; b < batch; ++b) one_hot.data[b * cfg.n_c + (b % cfg.n_c)] = 1.0;
    return finite_difference_check(std::move(params), cfg, x, one_hot, h);
}

}  // namespace ablm

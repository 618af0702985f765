#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "s2/common.hpp"
#include "s2/rng.hpp"
#include "s2/tensor.hpp"

namespace s2 {

// Named trainable parameter with AdamW moment buffers.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m1, m2;  // first/second moments, same shape as value
};

class ParamStore {
public:
    index_t add(std::string name, Tensor init) {
        Param p;
        p.name = std::move(name);
        p.m1 = Tensor(init.rows, init.cols);
        p.m2 = Tensor(init.rows, init.cols);
        p.grad = Tensor(init.rows, init.cols);
        p.value = std::move(init);
        params_.push_back(std::move(p));
        return static_cast<index_t>(params_.size()) - 1;
    }

    Param& operator[](index_t i) { return params_[i]; }
    const Param& operator[](index_t i) const { return params_[i]; }
    index_t size() const { return static_cast<index_t>(params_.size()); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad() {
        for (auto& p : params_) p.grad.v.assign(p.grad.v.size(), 0.0);
    }

private:
    std::vector<Param> params_;
};

// scaled uniform fan-in init: U(-sqrt(1/fan_in), sqrt(1/fan_in))
inline Tensor fanin_init(index_t rows, index_t cols, Rng& rng, index_t fan_in = -1) {
    if (fan_in <= 0) fan_in = rows;
    const double b = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor t(rows, cols);
    for (auto& x : t.v) x = rng.uniform(-b, b);
    return t;
}

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Optimizer state as step count + per-parameter moments (held in Param).
struct OptimizerState {
    AdamWConfig cfg;
    std::int64_t step = 0;
};

// One decoupled-weight-decay Adam update with bias-corrected moments.
inline void adamw_step(OptimizerState& st, ParamStore& params, double lr) {
    st.step += 1;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (auto& p : params) {
        for (index_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.v[i];
            p.m1.v[i] = b1 * p.m1.v[i] + (1.0 - b1) * g;
            p.m2.v[i] = b2 * p.m2.v[i] + (1.0 - b2) * g * g;
            const double mhat = p.m1.v[i] / bc1;
            const double vhat = p.m2.v[i] / bc2;
            p.value.v[i] -= lr * (mhat / (std::sqrt(vhat) + st.cfg.eps) + st.cfg.weight_decay * p.value.v[i]);
        }
    }
}

// Single-tensor variant used by unit tests.
inline void adamw_step_single(Tensor& param, const Tensor& grad, Tensor& m1, Tensor& m2,
                              std::int64_t step_after, double lr, const AdamWConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_after));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_after));
    for (index_t i = 0; i < param.size(); ++i) {
        const double g = grad.v[i];
        m1.v[i] = cfg.beta1 * m1.v[i] + (1.0 - cfg.beta1) * g;
        m2.v[i] = cfg.beta2 * m2.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m1.v[i] / bc1;
        const double vhat = m2.v[i] / bc2;
        param.v[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * param.v[i]);
    }
}

// Linear ramp to `base` over `warmup` steps, then cosine decay to 0 at `total`.
inline double cosine_warmup_lr(std::int64_t step, std::int64_t total, std::int64_t warmup, double base) {
    require(step >= 0 && step <= total, "schedule step outside [0, total]");
    if (warmup > 0 && step < warmup) return base * static_cast<double>(step) / static_cast<double>(warmup);
    if (total <= warmup) return base;
    const double prog = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
    return base * 0.5 * (1.0 + std::cos(3.14159265358979323846 * prog));
}

} // namespace s2

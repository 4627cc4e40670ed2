#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ttt/model.hpp"
#include "ttt/render.hpp"

namespace ttt::testing {

// d_model 8, one layer each side, 11-token vocabulary.
inline ModelConfig probe_config() {
    ModelConfig c;
    c.tier = "probe";
    c.d_model = 8;
    c.n_heads = 2;
    c.n_enc_layers = 1;
    c.n_dec_layers = 1;
    c.d_ff = 32;
    c.vocab_size = 11;
    return c;
}

struct TensorError {
    std::string name;
    double relative = 0.0;
};

struct GradCheckResult {
    std::vector<TensorError> tensors;
    double worst = 0.0;
    std::string worst_name;
};

// Central differences with step 1e-4 on every scalar of every tensor. Per tensor the error is
// |analytic - numeric| / max(|analytic| + |numeric|, 1e-6) in the L2 sense; the floor only matters for
// tensors whose true gradient is identically zero (key biases under softmax shift invariance).
inline GradCheckResult run_gradient_check(std::uint64_t seed = 7) {
    Model<double> m(probe_config(), seed);
    // Move norm scales and biases off their trivial init so their gradients are exercised.
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> nd(0.0, 0.15);
    for (auto& v : m.values()) v += nd(rng);

    static const auto img1 = image_to_model_input(render(Board::parse("XO_X__O__")));
    static const auto img2 = image_to_model_input(render(Board::parse("_X_OO_X__")));
    static const std::vector<TokenId> ids1{1, 5, 6, 7, 2, 8, 9, 3};
    static const std::vector<std::uint8_t> m1{0, 0, 0, 0, 1, 1, 1, 0};
    static const std::vector<TokenId> ids2{1, 10, 5, 2, 6, 3};
    static const std::vector<std::uint8_t> m2{0, 0, 0, 1, 1, 0};
    const std::vector<Example> batch{{ids1, m1, img1}, {ids2, m2, img2}};

    std::vector<double> grad;
    m.loss_and_gradient(batch, grad);
    const double h = 1e-4;
    GradCheckResult out;
    for (const auto& t : m.layout().tensors) {
        double diff2 = 0, an2 = 0, num2 = 0;
        for (std::size_t i = 0; i < t.size; ++i) {
            double& p = m.values()[t.offset + i];
            const double orig = p;
            p = orig + h;
            const double up = m.loss(batch).mean();
            p = orig - h;
            const double down = m.loss(batch).mean();
            p = orig;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grad[t.offset + i];
            diff2 += (analytic - numeric) * (analytic - numeric);
            an2 += analytic * analytic;
            num2 += numeric * numeric;
        }
        const double rel = std::sqrt(diff2) / std::max(std::sqrt(an2) + std::sqrt(num2), 1e-6);
        out.tensors.push_back({t.name, rel});
        if (rel >= out.worst) {
            out.worst = rel;
            out.worst_name = t.name;
        }
    }
    return out;
}

// Closed-form parameter count from the config, written independently of ParamLayout.
inline std::size_t expected_parameter_count(const ModelConfig& c) {
    const std::size_t d = c.d_model, f = c.d_ff, v = c.vocab_size;
    const std::size_t linear_dd = d * d + d;
    const std::size_t mlp = (d * f + f) + (f * d + d);
    const std::size_t enc_layer = 2 * (2 * d) + 4 * linear_dd + mlp;
    const std::size_t dec_layer = 3 * (2 * d) + 8 * linear_dd + mlp;
    const std::size_t patch = static_cast<std::size_t>(c.patch_dim()) * d + d;
    return patch + static_cast<std::size_t>(c.num_patches()) * d + c.n_enc_layers * enc_layer + 2 * d + v * d +
           static_cast<std::size_t>(c.max_seq_len) * d + c.n_dec_layers * dec_layer + 2 * d + d * v;
}

}  // namespace ttt::testing

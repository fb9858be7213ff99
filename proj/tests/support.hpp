#pragma once

// Fixtures and oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "crowdrank/hybrid_loss.hpp"
#include "crowdrank/rating_data.hpp"
#include "crowdrank/rng.hpp"
#include "crowdrank/score_net.hpp"

namespace crowdrank::testing {

/// Random probability vector; with `sparse`, some entries are exactly zero.
inline std::vector<double> random_probs(Rng& rng, std::size_t n, bool sparse = false) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (auto& v : p) {
        v = -std::log(1.0 - rng.uniform());
        if (sparse && rng.uniform() < 0.3) v = 0.0;
        sum += v;
    }
    if (sum == 0.0) {
        p[rng.below(n)] = 1.0;
        return p;
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline RatingDistribution random_global(Rng& rng, bool sparse = false) {
    return RatingDistribution::global(random_probs(rng, kGlobalLevels, sparse));
}

inline RatingDistribution random_pairwise(Rng& rng, bool sparse = false) {
    return RatingDistribution::pairwise(random_probs(rng, kPairwiseLevels, sparse));
}

inline StandardScores random_standard(Rng& rng) {
    StandardScores s;
    for (auto& a : s.global_anchors) a = rng.uniform(-3.0, 5.0);
    std::sort(s.global_anchors.begin(), s.global_anchors.end());
    s.relative_log_gaps = {rng.uniform(-1.5, 1.0), rng.uniform(-1.5, 1.0)};
    return s;
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
/// to rounding from dividing noise by noise.
inline double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline ItemRecord feature_item(std::string id, std::vector<double> features, GlobalVotes votes,
                               Split split = Split::Train) {
    return {std::move(id), ItemInput::features(std::move(features)), votes, split};
}

/// Linear scorer on D-dimensional features: score = w . x + b.
inline ScoreNetwork linear_network(const std::vector<double>& w, double b) {
    NetworkPlan plan;
    plan.input_kind = InputKind::FeatureVector;
    plan.input_shape = {1, 1, static_cast<int>(w.size())};
    plan.layers = {LayerSpec::affine(1)};
    ScoreNetwork net(plan);
    net.mutable_layer(0).weights = w;
    net.mutable_layer(0).bias = {b};
    return net;
}

/// True when two forward passes took the same piecewise-linear branch: equal
/// relu on/off masks and equal max-pool argmax positions.
inline bool same_branch(const ForwardCache& a, const ForwardCache& b, const NetworkPlan& plan) {
    for (std::size_t k = 0; k < plan.layers.size(); ++k) {
        if (plan.layers[k].kind != LayerKind::Relu) continue;
        const auto& x = a.activations[k].data;
        const auto& y = b.activations[k].data;
        for (std::size_t i = 0; i < x.size(); ++i)
            if ((x[i] > 0.0) != (y[i] > 0.0)) return false;
    }
    return a.argmax == b.argmax;
}

struct GradientCheck {
    double worst = 0.0;  ///< largest relative error over checked coordinates
    std::size_t checked = 0;
    std::size_t skipped = 0;  ///< coordinates whose +-h probes crossed a relu or argmax switch
};

/// Central differences of the score with respect to every parameter.
inline GradientCheck check_network_gradients(ScoreNetwork net, const Tensor& input, double h, double floor) {
    ForwardCache base;
    net.forward(input, &base);
    const auto grads = net.backward(base, 1.0);
    GradientCheck out;
    auto probe = [&](std::size_t k, bool bias, std::size_t i, double analytic) {
        auto slot = [&]() -> double& {
            auto& p = net.mutable_layer(k);
            return bias ? p.bias[i] : p.weights[i];
        };
        const double orig = slot();
        ForwardCache up, down;
        slot() = orig + h;
        const double fp = net.forward(input, &up);
        slot() = orig - h;
        const double fm = net.forward(input, &down);
        slot() = orig;
        if (!same_branch(up, base, net.plan()) || !same_branch(down, base, net.plan())) {
            ++out.skipped;
            return;
        }
        ++out.checked;
        out.worst = std::max(out.worst, relative_error(analytic, (fp - fm) / (2 * h), floor));
    };
    for (std::size_t k = 0; k < grads.size(); ++k) {
        for (std::size_t i = 0; i < grads[k].weights.size(); ++i) probe(k, false, i, grads[k].weights[i]);
        for (std::size_t i = 0; i < grads[k].bias.size(); ++i) probe(k, true, i, grads[k].bias[i]);
    }
    return out;
}

/// Small random plan with every layer kind: image input, convolutions of
/// kernel 1 and 3, strides 1 and 2, an inner affine, one pool, affine(1).
inline NetworkPlan random_small_plan(Rng& rng) {
    NetworkPlan plan;
    plan.input_kind = InputKind::Image;
    plan.input_shape = {3 + static_cast<int>(rng.below(5)), 3 + static_cast<int>(rng.below(5)),
                        1 + static_cast<int>(rng.below(3))};
    plan.layers.push_back(LayerSpec::convolution(3, 2 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(2))));
    plan.layers.push_back(LayerSpec::relu());
    if (rng.uniform() < 0.5) {
        plan.layers.push_back(LayerSpec::convolution(1 + 2 * static_cast<int>(rng.below(2)), 2 + static_cast<int>(rng.below(4))));
        plan.layers.push_back(LayerSpec::relu());
    }
    if (rng.uniform() < 0.3) {
        plan.layers.push_back(LayerSpec::affine(3 + static_cast<int>(rng.below(4))));
        plan.layers.push_back(LayerSpec::relu());
    }
    plan.layers.push_back(LayerSpec::spatial_max_pool());
    plan.layers.push_back(LayerSpec::affine(1));
    plan.backbone_layers = 2;
    return plan;
}

inline Tensor random_tensor(Rng& rng, Shape shape) {
    Tensor t(shape);
    for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace crowdrank::testing

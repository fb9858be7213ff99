#include "crowdrank/score_net.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "crowdrank/rng.hpp"

namespace crowdrank {

namespace {

std::uint64_t next_revision() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

int padding_for(int kernel) { return (kernel - 1) / 2; }

std::string layer_name(const NetworkPlan& plan, std::size_t k) {
    return "layer " + std::to_string(k) + " (" + plan.layers[k].describe() + ")";
}

std::size_t fan_in(const LayerSpec& spec, const Shape& in) {
    if (spec.kind == LayerKind::Convolution)
        return static_cast<std::size_t>(spec.kernel) * static_cast<std::size_t>(spec.kernel) *
               static_cast<std::size_t>(in.channels);
    return in.size();
}

std::pair<std::size_t, std::size_t> param_sizes(const LayerSpec& spec, const Shape& in) {
    switch (spec.kind) {
        case LayerKind::Convolution:
            return {static_cast<std::size_t>(spec.channels) * fan_in(spec, in), static_cast<std::size_t>(spec.channels)};
        case LayerKind::Affine:
            return {static_cast<std::size_t>(spec.out_dim) * in.size(), static_cast<std::size_t>(spec.out_dim)};
        default:
            return {0, 0};
    }
}

void conv_forward(const LayerSpec& spec, const LayerParams& p, const Tensor& in, Tensor& out) {
    const int k = spec.kernel, pad = padding_for(k), stride = spec.stride;
    const int in_c = in.shape.channels;
    const std::size_t per_filter = static_cast<std::size_t>(k * k * in_c);
    for (int oy = 0; oy < out.shape.height; ++oy) {
        for (int ox = 0; ox < out.shape.width; ++ox) {
            for (int oc = 0; oc < out.shape.channels; ++oc) {
                const double* w = p.weights.data() + static_cast<std::size_t>(oc) * per_filter;
                double acc = p.bias[static_cast<std::size_t>(oc)];
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= in.shape.height) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= in.shape.width) continue;
                        const double* x = in.data.data() + in.index(iy, ix, 0);
                        const double* wk = w + static_cast<std::size_t>((ky * k + kx) * in_c);
                        for (int ic = 0; ic < in_c; ++ic) acc += wk[ic] * x[ic];
                    }
                }
                out.at(oy, ox, oc) = acc;
            }
        }
    }
}

void conv_backward(const LayerSpec& spec, const LayerParams& p, const Tensor& in, const Tensor& grad_out,
                   LayerParams* grad_params, Tensor* grad_in) {
    const int k = spec.kernel, pad = padding_for(k), stride = spec.stride;
    const int in_c = in.shape.channels;
    const std::size_t per_filter = static_cast<std::size_t>(k * k * in_c);
    for (int oy = 0; oy < grad_out.shape.height; ++oy) {
        for (int ox = 0; ox < grad_out.shape.width; ++ox) {
            for (int oc = 0; oc < grad_out.shape.channels; ++oc) {
                const double g = grad_out.at(oy, ox, oc);
                if (g == 0.0) continue;
                const std::size_t base = static_cast<std::size_t>(oc) * per_filter;
                if (grad_params) grad_params->bias[static_cast<std::size_t>(oc)] += g;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= in.shape.height) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= in.shape.width) continue;
                        const std::size_t xi = in.index(iy, ix, 0);
                        const std::size_t wi = base + static_cast<std::size_t>((ky * k + kx) * in_c);
                        for (int ic = 0; ic < in_c; ++ic) {
                            if (grad_params) grad_params->weights[wi + ic] += g * in.data[xi + ic];
                            if (grad_in) grad_in->data[xi + ic] += g * p.weights[wi + ic];
                        }
                    }
                }
            }
        }
    }
}

void affine_forward(const LayerParams& p, const Tensor& in, Tensor& out) {
    const std::size_t n = in.data.size();
    for (std::size_t o = 0; o < out.data.size(); ++o) {
        const double* w = p.weights.data() + o * n;
        double acc = p.bias[o];
        for (std::size_t i = 0; i < n; ++i) acc += w[i] * in.data[i];
        out.data[o] = acc;
    }
}

void affine_backward(const LayerParams& p, const Tensor& in, const Tensor& grad_out, LayerParams* grad_params,
                     Tensor* grad_in) {
    const std::size_t n = in.data.size();
    for (std::size_t o = 0; o < grad_out.data.size(); ++o) {
        const double g = grad_out.data[o];
        if (g == 0.0) continue;
        const double* w = p.weights.data() + o * n;
        if (grad_params) {
            grad_params->bias[o] += g;
            double* gw = grad_params->weights.data() + o * n;
            for (std::size_t i = 0; i < n; ++i) gw[i] += g * in.data[i];
        }
        if (grad_in)
            for (std::size_t i = 0; i < n; ++i) grad_in->data[i] += g * w[i];
    }
}

}  // namespace

LayerSpec LayerSpec::convolution(int kernel, int channels, int stride) {
    LayerSpec s;
    s.kind = LayerKind::Convolution;
    s.kernel = kernel;
    s.channels = channels;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::spatial_max_pool() {
    LayerSpec s;
    s.kind = LayerKind::SpatialMaxPool;
    return s;
}

LayerSpec LayerSpec::affine(int out_dim) {
    LayerSpec s;
    s.kind = LayerKind::Affine;
    s.out_dim = out_dim;
    return s;
}

std::string LayerSpec::describe() const {
    std::ostringstream out;
    switch (kind) {
        case LayerKind::Convolution:
            out << "convolution " << kernel << "x" << kernel << "/" << stride << " -> " << channels;
            break;
        case LayerKind::Relu: out << "relu"; break;
        case LayerKind::SpatialMaxPool: out << "spatial_max_pool"; break;
        case LayerKind::Affine: out << "affine -> " << out_dim; break;
    }
    return out.str();
}

NetworkPlan NetworkPlan::default_image(Shape input) {
    NetworkPlan plan;
    plan.input_kind = InputKind::Image;
    plan.input_shape = input;
    plan.layers = {
        LayerSpec::convolution(3, 16, 2), LayerSpec::relu(),
        LayerSpec::convolution(3, 32, 2), LayerSpec::relu(),
        LayerSpec::convolution(3, 64, 2), LayerSpec::relu(),
        LayerSpec::convolution(3, 128, 1), LayerSpec::convolution(1, 128, 1), LayerSpec::relu(),
        LayerSpec::spatial_max_pool(), LayerSpec::affine(1),
    };
    plan.backbone_layers = 6;
    return plan;
}

NetworkPlan NetworkPlan::default_features(int dim) {
    NetworkPlan plan;
    plan.input_kind = InputKind::FeatureVector;
    plan.input_shape = {1, 1, dim};
    plan.layers = {
        LayerSpec::affine(32), LayerSpec::relu(),
        LayerSpec::affine(32), LayerSpec::relu(), LayerSpec::spatial_max_pool(), LayerSpec::affine(1),
    };
    plan.backbone_layers = 2;
    return plan;
}

std::vector<Shape> NetworkPlan::layer_shapes() const {
    if (input_shape.height < 1 || input_shape.width < 1 || input_shape.channels < 1)
        throw ShapeError("network input shape " + input_shape.to_string() + " is empty");
    if (input_kind == InputKind::FeatureVector && (input_shape.height != 1 || input_shape.width != 1))
        throw ShapeError("feature-vector plans take 1x1xD inputs, got " + input_shape.to_string());
    std::vector<Shape> shapes;
    Shape cur = input_shape;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& spec = layers[k];
        switch (spec.kind) {
            case LayerKind::Convolution: {
                if (spec.kernel < 1 || spec.channels < 1 || spec.stride < 1)
                    throw ShapeError(layer_name(*this, k) + " needs positive kernel, channels and stride");
                const int pad = padding_for(spec.kernel);
                const int h = (cur.height + 2 * pad - spec.kernel) / spec.stride + 1;
                const int w = (cur.width + 2 * pad - spec.kernel) / spec.stride + 1;
                if (cur.height + 2 * pad < spec.kernel || cur.width + 2 * pad < spec.kernel)
                    throw ShapeError(layer_name(*this, k) + " kernel larger than padded input " + cur.to_string());
                cur = {h, w, spec.channels};
                break;
            }
            case LayerKind::Relu: break;
            case LayerKind::SpatialMaxPool: cur = {1, 1, cur.channels}; break;
            case LayerKind::Affine:
                if (spec.out_dim < 1) throw ShapeError(layer_name(*this, k) + " needs out_dim >= 1");
                cur = {1, 1, spec.out_dim};
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

void NetworkPlan::validate() const {
    const std::size_t n = layers.size();
    if (n < 1 || layers[n - 1].kind != LayerKind::Affine || layers[n - 1].out_dim != 1)
        throw ShapeError("network plan must end with affine(1)");
    std::size_t pools = 0;
    for (const auto& spec : layers) pools += spec.kind == LayerKind::SpatialMaxPool ? 1 : 0;
    if (input_kind == InputKind::Image) {
        if (n < 3 || layers[n - 2].kind != LayerKind::SpatialMaxPool || layers[n - 3].kind != LayerKind::Relu)
            throw ShapeError("image plans must end with relu -> spatial_max_pool -> affine(1)");
        if (pools != 1) throw ShapeError("image plans must contain exactly one spatial_max_pool");
    } else if (pools > 1) {
        throw ShapeError("network plan may contain at most one spatial_max_pool");
    }
    if (backbone_layers > n - 1) throw ShapeError("backbone cannot include the final affine layer");
    layer_shapes();
}

ScoreNetwork::ScoreNetwork(NetworkPlan plan) : plan_(std::move(plan)) {
    plan_.validate();
    shapes_ = plan_.layer_shapes();
    Shape in = plan_.input_shape;
    for (std::size_t k = 0; k < plan_.layers.size(); ++k) {
        const auto [nw, nb] = param_sizes(plan_.layers[k], in);
        layers_.push_back({std::vector<double>(nw, 0.0), std::vector<double>(nb, 0.0)});
        in = shapes_[k];
    }
    frozen_.assign(plan_.layers.size(), false);
    touch();
}

ScoreNetwork ScoreNetwork::initialized(NetworkPlan plan, std::uint64_t seed) {
    ScoreNetwork net(std::move(plan));
    net.seed_ = seed;
    Rng rng(seed);
    Shape in = net.plan_.input_shape;
    for (std::size_t k = 0; k < net.layers_.size(); ++k) {
        const auto& spec = net.plan_.layers[k];
        if (spec.has_params()) {
            const double limit = std::sqrt(3.0 / static_cast<double>(fan_in(spec, in)));
            for (double& w : net.layers_[k].weights) w = rng.uniform(-limit, limit);
        }
        in = net.shapes_[k];
    }
    net.touch();
    return net;
}

LayerParams& ScoreNetwork::mutable_layer(std::size_t k) {
    touch();
    return layers_.at(k);
}

std::size_t ScoreNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

void ScoreNetwork::set_frozen(std::size_t layer, bool frozen) { frozen_.at(layer) = frozen; }

void ScoreNetwork::freeze_backbone(bool frozen) {
    for (std::size_t k = 0; k < plan_.backbone_layers; ++k) frozen_[k] = frozen;
}

void ScoreNetwork::touch() { revision_ = next_revision(); }

double ScoreNetwork::forward(const Tensor& input, ForwardCache* cache) const {
    if (input.shape != plan_.input_shape || input.data.size() != plan_.input_shape.size())
        throw ShapeError("input shape " + input.shape.to_string() + " does not match " + layer_name(plan_, 0) +
                         ", expected " + plan_.input_shape.to_string());
    std::vector<Tensor> local;
    std::vector<Tensor>& acts = cache ? cache->activations : local;
    acts.clear();
    acts.reserve(plan_.layers.size() + 1);
    acts.push_back(input);
    if (cache) cache->argmax.assign(plan_.layers.size(), {});

    for (std::size_t k = 0; k < plan_.layers.size(); ++k) {
        const auto& spec = plan_.layers[k];
        const Tensor& in = acts.back();
        Tensor out(shapes_[k]);
        switch (spec.kind) {
            case LayerKind::Convolution: conv_forward(spec, layers_[k], in, out); break;
            case LayerKind::Affine: affine_forward(layers_[k], in, out); break;
            case LayerKind::Relu:
                for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
                break;
            case LayerKind::SpatialMaxPool: {
                const int c = in.shape.channels;
                std::vector<std::size_t> arg(static_cast<std::size_t>(c), 0);
                for (int ch = 0; ch < c; ++ch) {
                    std::size_t best = static_cast<std::size_t>(ch);
                    for (std::size_t pos = static_cast<std::size_t>(ch); pos < in.data.size();
                         pos += static_cast<std::size_t>(c))
                        if (in.data[pos] > in.data[best]) best = pos;  // ties keep the lowest position
                    arg[static_cast<std::size_t>(ch)] = best;
                    out.data[static_cast<std::size_t>(ch)] = in.data[best];
                }
                if (cache) cache->argmax[k] = std::move(arg);
                break;
            }
        }
        if (!cache && k > 0) acts[k] = Tensor{};  // keep only what the next layer reads
        acts.push_back(std::move(out));
    }
    if (cache) cache->revision = revision_;
    return acts.back().data[0];
}

NetworkGradients ScoreNetwork::backward(const ForwardCache& cache, double d_score) const {
    if (cache.revision != revision_ || cache.activations.size() != plan_.layers.size() + 1)
        throw ShapeError("stale forward cache: parameters changed since forward()");
    NetworkGradients grads = zero_gradients();

    // Nothing below the first trainable layer needs an input gradient.
    std::size_t first_trainable = plan_.layers.size();
    for (std::size_t k = 0; k < plan_.layers.size(); ++k)
        if (plan_.layers[k].has_params() && !frozen_[k]) {
            first_trainable = k;
            break;
        }

    Tensor grad(shapes_.back());
    grad.data[0] = d_score;
    for (std::size_t k = plan_.layers.size(); k-- > 0;) {
        if (k < first_trainable) break;
        const auto& spec = plan_.layers[k];
        const Tensor& in = cache.activations[k];
        const bool need_input_grad = k > first_trainable;
        Tensor grad_in(in.shape);
        LayerParams* gp = frozen_[k] ? nullptr : &grads[k];
        switch (spec.kind) {
            case LayerKind::Convolution:
                conv_backward(spec, layers_[k], in, grad, gp, need_input_grad ? &grad_in : nullptr);
                break;
            case LayerKind::Affine:
                affine_backward(layers_[k], in, grad, gp, need_input_grad ? &grad_in : nullptr);
                break;
            case LayerKind::Relu:
                for (std::size_t i = 0; i < in.data.size(); ++i) grad_in.data[i] = in.data[i] > 0.0 ? grad.data[i] : 0.0;
                break;
            case LayerKind::SpatialMaxPool:
                for (std::size_t ch = 0; ch < cache.argmax[k].size(); ++ch) grad_in.data[cache.argmax[k][ch]] += grad.data[ch];
                break;
        }
        grad = std::move(grad_in);
    }
    return grads;
}

ScorePair ScoreNetwork::siamese_forward(const Tensor& first, const Tensor& second) const {
    return {forward(first), forward(second)};
}

NetworkGradients ScoreNetwork::zero_gradients() const {
    NetworkGradients g(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        g[k].weights.assign(layers_[k].weights.size(), 0.0);
        g[k].bias.assign(layers_[k].bias.size(), 0.0);
    }
    return g;
}

void ScoreNetwork::apply_update(const NetworkGradients& grads, double lr) {
    if (grads.size() != layers_.size()) throw ShapeError("gradient layout does not match the network");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        if (frozen_[k]) continue;
        auto& p = layers_[k];
        if (grads[k].weights.size() != p.weights.size() || grads[k].bias.size() != p.bias.size())
            throw ShapeError("gradient shape mismatch at " + layer_name(plan_, k));
        for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= lr * grads[k].weights[i];
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= lr * grads[k].bias[i];
    }
    touch();
}

void accumulate(NetworkGradients& grads, const NetworkGradients& other, double scale) {
    if (grads.size() != other.size()) throw ShapeError("gradient layouts differ");
    for (std::size_t k = 0; k < grads.size(); ++k) {
        for (std::size_t i = 0; i < grads[k].weights.size(); ++i) grads[k].weights[i] += scale * other[k].weights[i];
        for (std::size_t i = 0; i < grads[k].bias.size(); ++i) grads[k].bias[i] += scale * other[k].bias[i];
    }
}

}  // namespace crowdrank

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "crowdrank/hybrid_loss.hpp"
#include "crowdrank/rating_data.hpp"
#include "crowdrank/tensor.hpp"

namespace crowdrank {

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LayerKind { Convolution, Relu, SpatialMaxPool, Affine };

/// One layer of a score network.
///
/// Convolutions use zero padding (kernel - 1) / 2 and output
/// floor((H + 2p - kernel) / stride) + 1 rows. Affine layers flatten their input.
/// Spatial max pooling reduces H x W x C to 1 x 1 x C.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int kernel = 0;
    int channels = 0;
    int stride = 1;
    int out_dim = 0;

    static LayerSpec convolution(int kernel, int channels, int stride = 1);
    static LayerSpec relu();
    static LayerSpec spatial_max_pool();
    static LayerSpec affine(int out_dim);

    bool has_params() const { return kind == LayerKind::Convolution || kind == LayerKind::Affine; }
    std::string describe() const;
};

/// Layer sequence mapping one input to one score. Every plan ends in affine(1).
/// Image plans end relu -> spatial_max_pool -> affine(1) with exactly one pool;
/// feature-vector plans may be any stack (a lone affine(1) is a linear scorer)
/// with at most one pool. The first `backbone_layers` layers form the backbone
/// that the first training stage keeps frozen.
struct NetworkPlan {
    InputKind input_kind = InputKind::FeatureVector;
    Shape input_shape;
    std::vector<LayerSpec> layers;
    std::size_t backbone_layers = 0;

    /// 32x32x3 images: three stride-2 3x3 conv+relu blocks (16, 32, 64 channels)
    /// as the backbone, then conv 3x3 -> 128, conv 1x1 -> 128, relu, spatial max
    /// pool and affine(1).
    static NetworkPlan default_image(Shape input = {32, 32, 3});

    /// Feature vectors of length `dim`: affine(32)+relu backbone, then
    /// affine(32), relu, spatial max pool (identity on 1x1) and affine(1).
    static NetworkPlan default_features(int dim);

    /// Output shape of every layer. Throws ShapeError on an inconsistent plan.
    std::vector<Shape> layer_shapes() const;
    void validate() const;
};

struct LayerParams {
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Gradients share the parameter layout, one entry per layer.
using NetworkGradients = std::vector<LayerParams>;

/// Activations and max-pool argmax indices recorded by forward().
struct ForwardCache {
    std::vector<Tensor> activations;  ///< [0] is the input, [k + 1] the output of layer k
    std::vector<std::vector<std::size_t>> argmax;  ///< per pool layer, flat input index per channel
    std::uint64_t revision = 0;
};

/// Score network: plan, parameters and the frozen mask in one object, so both
/// branches of a Siamese pair always read the same parameter set.
class ScoreNetwork {
public:
    /// All parameters zero.
    explicit ScoreNetwork(NetworkPlan plan);

    /// Weights uniform in +-sqrt(3 / fan_in), biases zero; deterministic in seed.
    static ScoreNetwork initialized(NetworkPlan plan, std::uint64_t seed);

    const NetworkPlan& plan() const { return plan_; }
    const std::vector<LayerParams>& layers() const { return layers_; }
    /// Writable parameters of one layer. Invalidates outstanding caches.
    LayerParams& mutable_layer(std::size_t k);
    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    std::size_t parameter_count() const;

    const std::vector<bool>& frozen() const { return frozen_; }
    void set_frozen(std::size_t layer, bool frozen);
    void freeze_backbone(bool frozen);

    double forward(const Tensor& input, ForwardCache* cache = nullptr) const;

    /// d score / d params scaled by d_score. Frozen layers get exact zeros.
    /// Throws ShapeError if the cache was produced before the last parameter change.
    NetworkGradients backward(const ForwardCache& cache, double d_score) const;

    /// Both members scored with this one parameter set.
    ScorePair siamese_forward(const Tensor& first, const Tensor& second) const;

    NetworkGradients zero_gradients() const;
    /// params -= lr * grads on unfrozen layers.
    void apply_update(const NetworkGradients& grads, double lr);

private:
    void touch();

    NetworkPlan plan_;
    std::vector<Shape> shapes_;
    std::vector<LayerParams> layers_;
    std::vector<bool> frozen_;
    std::uint64_t seed_ = 0;
    std::uint64_t revision_ = 0;
};

/// grads += scale * other
void accumulate(NetworkGradients& grads, const NetworkGradients& other, double scale = 1.0);

}  // namespace crowdrank

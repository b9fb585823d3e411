#pragma once

#include <string>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn {

enum class LayerKind { conv, maxpool, avgpool, dense, relu, softmax };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// One layer of an architecture. kernel/stride apply to conv and pool layers,
/// out_channels to conv (filters) and dense (units).
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int out_channels = 0;

    static LayerSpec conv(int kernel, int out_channels, int stride = 1);
    static LayerSpec maxpool(int kernel, int stride);
    static LayerSpec avgpool(int kernel, int stride);
    static LayerSpec dense(int units);
    static LayerSpec relu();
    static LayerSpec softmax();

    bool has_weights() const { return kind == LayerKind::conv || kind == LayerKind::dense; }
    bool is_pool() const { return kind == LayerKind::maxpool || kind == LayerKind::avgpool; }
};

/// A network architecture: fixed input extents plus the layer stack.
struct Architecture {
    int in_channels = 1;
    int in_height = 0;
    int in_width = 0;
    std::vector<LayerSpec> layers;

    /// Index of the final dense layer (the output classifier).
    int output_layer_index() const;
    int output_classes() const;

    /// Structural validation: kernel fits, final dense present, softmax only
    /// trailing. Throws DimensionError / ArgumentError.
    void validate() const;
};

// Table-derived presets. lenet expects 28x28x1 input; convnets 32x32x3;
// alexnet needs at least 43x43 spatial input for valid (no padding) shapes.
Architecture lenet_arch();
Architecture convnets_arch();
Architecture alexnet_arch();
Architecture arch_preset(const std::string& name);

// ---------------------------------------------------------------------------
// Layer primitives. Forward passes validate shapes and reject non-finite
// inputs; loop order is fixed so results are bit-deterministic.
// ---------------------------------------------------------------------------

/// Valid (no padding) convolution. input [Cin,H,W], weights [Cout,Cin,kh,kw],
/// bias [Cout]; output [Cout,H',W'] with H' = floor((H-kh)/stride)+1.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride);

struct ConvGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

/// Exact gradients of conv2d_forward under sum(grad_out * output) weighting.
ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          int stride);

enum class PoolKind { max, avg };

Tensor pool_forward(const Tensor& input, PoolKind kind, int kernel, int stride);

/// Max routes the gradient to the first (row-major) argmax of each window;
/// avg spreads it uniformly.
Tensor pool_backward(const Tensor& input, PoolKind kind, int kernel, int stride,
                     const Tensor& grad_out);

/// input [n] (or any shape, flattened), weights [m,n], bias [m] -> [m].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out);

Tensor relu_forward(const Tensor& input);

/// Gradient passes where input > 0; a tie at exactly 0 passes 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

/// Numerically stable softmax (max subtraction), float path.
Tensor softmax(const Tensor& scores);

struct XentResult {
    float loss = 0.0f;
    Tensor grad_scores;
};

/// loss = -log softmax(scores)[label]; grad = softmax(scores) - onehot(label).
XentResult softmax_xent(const Tensor& scores, int label);

// Bounded variants used by the sliced network: they read/write only the
// leading out_ch x in_ch channel block of weight tensors allocated at full
// width. The spec-shaped ops above are the full-bounds case.
Tensor conv2d_forward_bounded(const Tensor& input, const Tensor& weights, const Tensor& bias,
                              int stride, int out_ch, int in_ch);
void conv2d_backward_bounded(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                             int stride, int out_ch, int in_ch, Tensor* grad_input,
                             Tensor* grad_weights_acc, Tensor* grad_bias_acc);
Tensor dense_forward_bounded(const Tensor& input, const Tensor& weights, const Tensor& bias,
                             int out_units, int in_units);
void dense_backward_bounded(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                            int out_units, int in_units, Tensor* grad_input,
                            Tensor* grad_weights_acc, Tensor* grad_bias_acc);

}  // namespace icnn

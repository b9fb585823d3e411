#include "icnn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace icnn {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::avgpool: return "avgpool";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "conv") return LayerKind::conv;
    if (name == "maxpool") return LayerKind::maxpool;
    if (name == "avgpool") return LayerKind::avgpool;
    if (name == "dense") return LayerKind::dense;
    if (name == "relu") return LayerKind::relu;
    if (name == "softmax") return LayerKind::softmax;
    throw ArgumentError("unknown layer kind: " + name);
}

LayerSpec LayerSpec::conv(int kernel, int out_channels, int stride) {
    if (kernel < 1 || out_channels < 1 || stride < 1) {
        throw ArgumentError("conv layer needs kernel, out_channels, stride >= 1");
    }
    return {LayerKind::conv, kernel, kernel, stride, out_channels};
}

LayerSpec LayerSpec::maxpool(int kernel, int stride) {
    if (kernel < 1 || stride < 1) throw ArgumentError("pool layer needs kernel, stride >= 1");
    return {LayerKind::maxpool, kernel, kernel, stride, 0};
}

LayerSpec LayerSpec::avgpool(int kernel, int stride) {
    if (kernel < 1 || stride < 1) throw ArgumentError("pool layer needs kernel, stride >= 1");
    return {LayerKind::avgpool, kernel, kernel, stride, 0};
}

LayerSpec LayerSpec::dense(int units) {
    if (units < 1) throw ArgumentError("dense layer needs out_channels >= 1");
    return {LayerKind::dense, 0, 0, 1, units};
}

LayerSpec LayerSpec::relu() { return {LayerKind::relu, 0, 0, 1, 0}; }
LayerSpec LayerSpec::softmax() { return {LayerKind::softmax, 0, 0, 1, 0}; }

int Architecture::output_layer_index() const {
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        if (layers[static_cast<std::size_t>(i)].kind == LayerKind::dense) return i;
    }
    throw ArgumentError("architecture has no dense output layer");
}

int Architecture::output_classes() const {
    return layers[static_cast<std::size_t>(output_layer_index())].out_channels;
}

void Architecture::validate() const {
    if (in_channels < 1 || in_height < 1 || in_width < 1) {
        throw DimensionError("architecture input extents must be positive");
    }
    if (layers.empty()) throw ArgumentError("architecture has no layers");
    int out_idx = output_layer_index();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.kind == LayerKind::softmax && static_cast<int>(i) <= out_idx) {
            throw ArgumentError("softmax is only supported after the output layer");
        }
        if (static_cast<int>(i) > out_idx && l.kind != LayerKind::softmax) {
            throw ArgumentError("only softmax may follow the output layer");
        }
    }
    // Shape feasibility at full width.
    bool spatial = true;
    int c = in_channels, h = in_height, w = in_width;
    for (const LayerSpec& l : layers) {
        switch (l.kind) {
            case LayerKind::conv:
                if (!spatial) throw DimensionError("conv after flatten");
                if (h < l.kernel_h || w < l.kernel_w) {
                    throw DimensionError("conv kernel larger than its input");
                }
                c = l.out_channels;
                h = (h - l.kernel_h) / l.stride + 1;
                w = (w - l.kernel_w) / l.stride + 1;
                break;
            case LayerKind::maxpool:
            case LayerKind::avgpool:
                if (!spatial) throw DimensionError("pool after flatten");
                if (h < l.kernel_h || w < l.kernel_w) {
                    throw DimensionError("pool kernel larger than its input");
                }
                h = (h - l.kernel_h) / l.stride + 1;
                w = (w - l.kernel_w) / l.stride + 1;
                break;
            case LayerKind::dense:
                spatial = false;
                c = l.out_channels;
                h = w = 1;
                break;
            case LayerKind::relu:
            case LayerKind::softmax:
                break;
        }
    }
}

Architecture lenet_arch() {
    Architecture a;
    a.in_channels = 1;
    a.in_height = 28;
    a.in_width = 28;
    a.layers = {LayerSpec::conv(5, 20), LayerSpec::relu(),    LayerSpec::maxpool(2, 2),
                LayerSpec::conv(5, 50), LayerSpec::relu(),    LayerSpec::maxpool(2, 2),
                LayerSpec::dense(500),  LayerSpec::relu(),    LayerSpec::dense(10)};
    return a;
}

Architecture convnets_arch() {
    Architecture a;
    a.in_channels = 3;
    a.in_height = 32;
    a.in_width = 32;
    a.layers = {LayerSpec::conv(5, 16),  LayerSpec::relu(), LayerSpec::avgpool(2, 2),
                LayerSpec::conv(7, 512), LayerSpec::relu(), LayerSpec::conv(5, 20),
                LayerSpec::relu(),       LayerSpec::avgpool(2, 2),
                LayerSpec::dense(20),    LayerSpec::relu(), LayerSpec::dense(10)};
    return a;
}

Architecture alexnet_arch() {
    Architecture a;
    a.in_channels = 3;
    a.in_height = 48;  // valid-convolution shapes need >= 43x43
    a.in_width = 48;
    a.layers = {LayerSpec::conv(5, 32), LayerSpec::relu(), LayerSpec::maxpool(3, 2),
                LayerSpec::conv(5, 32), LayerSpec::relu(), LayerSpec::avgpool(3, 2),
                LayerSpec::conv(5, 64), LayerSpec::relu(), LayerSpec::avgpool(3, 2),
                LayerSpec::dense(10)};
    return a;
}

Architecture arch_preset(const std::string& name) {
    if (name == "lenet") return lenet_arch();
    if (name == "convnets") return convnets_arch();
    if (name == "alexnet") return alexnet_arch();
    throw ArgumentError("unknown architecture preset: " + name);
}

namespace {

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw ArgumentError(std::string("non-finite values in ") + what);
}

void require(bool cond, const char* msg) {
    if (!cond) throw DimensionError(msg);
}

}  // namespace

Tensor conv2d_forward_bounded(const Tensor& input, const Tensor& weights, const Tensor& bias,
                              int stride, int out_ch, int in_ch) {
    require(input.rank() == 3, "conv input must be [C,H,W]");
    require(weights.rank() == 4, "conv weights must be [Cout,Cin,kh,kw]");
    require(bias.rank() == 1, "conv bias must be [Cout]");
    require(stride >= 1, "conv stride must be >= 1");
    const int H = input.dim(1), W = input.dim(2);
    const int cin_full = weights.dim(1);
    const int kh = weights.dim(2), kw = weights.dim(3);
    require(input.dim(0) == in_ch, "conv input channels disagree with bound");
    require(in_ch <= cin_full && out_ch <= weights.dim(0), "conv bounds exceed weight extent");
    require(out_ch <= bias.dim(0), "conv bias shorter than output channels");
    require(H >= kh && W >= kw, "conv kernel larger than its input");
    require_finite(input, "conv input");

    const int oh = (H - kh) / stride + 1;
    const int ow = (W - kw) / stride + 1;
    Tensor out({out_ch, oh, ow});
    const float* in = input.data();
    const float* wts = weights.data();
    float* o = out.data();
    for (int c = 0; c < out_ch; ++c) {
        float* oc = o + static_cast<std::size_t>(c) * oh * ow;
        const float bc = bias[static_cast<std::size_t>(c)];
        for (int i = 0; i < oh * ow; ++i) oc[i] = bc;
        for (int d = 0; d < in_ch; ++d) {
            const float* ind = in + static_cast<std::size_t>(d) * H * W;
            const float* wcd =
                wts + (static_cast<std::size_t>(c) * cin_full + d) * kh * kw;
            for (int ki = 0; ki < kh; ++ki) {
                for (int kj = 0; kj < kw; ++kj) {
                    const float wv = wcd[ki * kw + kj];
                    for (int y = 0; y < oh; ++y) {
                        const float* row = ind + (y * stride + ki) * W + kj;
                        float* orow = oc + y * ow;
                        if (stride == 1) {
                            for (int x = 0; x < ow; ++x) orow[x] += wv * row[x];
                        } else {
                            for (int x = 0; x < ow; ++x) orow[x] += wv * row[x * stride];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      int stride) {
    require(weights.rank() == 4, "conv weights must be [Cout,Cin,kh,kw]");
    require(input.rank() == 3 && input.dim(0) == weights.dim(1),
            "conv input channels disagree with weights");
    require(bias.rank() == 1 && bias.dim(0) == weights.dim(0),
            "conv bias length disagrees with weights");
    return conv2d_forward_bounded(input, weights, bias, stride, weights.dim(0), weights.dim(1));
}

void conv2d_backward_bounded(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                             int stride, int out_ch, int in_ch, Tensor* grad_input,
                             Tensor* grad_weights_acc, Tensor* grad_bias_acc) {
    const int H = input.dim(1), W = input.dim(2);
    const int cin_full = weights.dim(1);
    const int kh = weights.dim(2), kw = weights.dim(3);
    const int oh = grad_out.dim(1), ow = grad_out.dim(2);
    require(grad_out.rank() == 3 && grad_out.dim(0) == out_ch, "conv grad_out shape mismatch");
    require(oh == (H - kh) / stride + 1 && ow == (W - kw) / stride + 1,
            "conv grad_out spatial extents mismatch");
    require(input.dim(0) == in_ch, "conv input channels disagree with bound");
    require(grad_weights_acc->shape() == std::vector<int>({out_ch, in_ch, kh, kw}),
            "conv grad_weights accumulator shape mismatch");
    require(grad_bias_acc->shape() == std::vector<int>({out_ch}),
            "conv grad_bias accumulator shape mismatch");

    const float* in = input.data();
    const float* wts = weights.data();
    const float* go = grad_out.data();
    float* gw = grad_weights_acc->data();
    float* gb = grad_bias_acc->data();

    if (grad_input != nullptr) {
        *grad_input = Tensor({in_ch, H, W});
    }
    float* gin = grad_input != nullptr ? grad_input->data() : nullptr;

    for (int c = 0; c < out_ch; ++c) {
        const float* goc = go + static_cast<std::size_t>(c) * oh * ow;
        double bsum = 0.0;
        for (int i = 0; i < oh * ow; ++i) bsum += goc[i];
        gb[c] += static_cast<float>(bsum);
        for (int d = 0; d < in_ch; ++d) {
            const float* ind = in + static_cast<std::size_t>(d) * H * W;
            float* gind = gin != nullptr ? gin + static_cast<std::size_t>(d) * H * W : nullptr;
            const float* wcd = wts + (static_cast<std::size_t>(c) * cin_full + d) * kh * kw;
            float* gwcd = gw + (static_cast<std::size_t>(c) * in_ch + d) * kh * kw;
            for (int ki = 0; ki < kh; ++ki) {
                for (int kj = 0; kj < kw; ++kj) {
                    const float wv = wcd[ki * kw + kj];
                    float acc = 0.0f;
                    for (int y = 0; y < oh; ++y) {
                        const float* row = ind + (y * stride + ki) * W + kj;
                        const float* gorow = goc + y * ow;
                        float* ginrow =
                            gind != nullptr ? gind + (y * stride + ki) * W + kj : nullptr;
                        if (stride == 1) {
                            for (int x = 0; x < ow; ++x) acc += row[x] * gorow[x];
                            if (ginrow != nullptr) {
                                for (int x = 0; x < ow; ++x) ginrow[x] += wv * gorow[x];
                            }
                        } else {
                            for (int x = 0; x < ow; ++x) acc += row[x * stride] * gorow[x];
                            if (ginrow != nullptr) {
                                for (int x = 0; x < ow; ++x) ginrow[x * stride] += wv * gorow[x];
                            }
                        }
                    }
                    gwcd[ki * kw + kj] += acc;
                }
            }
        }
    }
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          int stride) {
    ConvGrads g;
    g.weights = Tensor({weights.dim(0), weights.dim(1), weights.dim(2), weights.dim(3)});
    g.bias = Tensor({weights.dim(0)});
    conv2d_backward_bounded(input, weights, grad_out, stride, weights.dim(0), weights.dim(1),
                            &g.input, &g.weights, &g.bias);
    return g;
}

Tensor pool_forward(const Tensor& input, PoolKind kind, int kernel, int stride) {
    require(input.rank() == 3, "pool input must be [C,H,W]");
    require(kernel >= 1 && stride >= 1, "pool kernel and stride must be >= 1");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    require(H >= kernel && W >= kernel, "pool kernel larger than its input");
    require_finite(input, "pool input");
    const int oh = (H - kernel) / stride + 1;
    const int ow = (W - kernel) / stride + 1;
    Tensor out({C, oh, ow});
    const float inv_area = 1.0f / static_cast<float>(kernel * kernel);
    for (int c = 0; c < C; ++c) {
        const float* in = input.data() + static_cast<std::size_t>(c) * H * W;
        float* o = out.data() + static_cast<std::size_t>(c) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const int y0 = y * stride, x0 = x * stride;
                if (kind == PoolKind::max) {
                    float best = in[y0 * W + x0];
                    for (int i = 0; i < kernel; ++i) {
                        for (int j = 0; j < kernel; ++j) {
                            const float v = in[(y0 + i) * W + x0 + j];
                            if (v > best) best = v;
                        }
                    }
                    o[y * ow + x] = best;
                } else {
                    float sum = 0.0f;
                    for (int i = 0; i < kernel; ++i) {
                        for (int j = 0; j < kernel; ++j) sum += in[(y0 + i) * W + x0 + j];
                    }
                    o[y * ow + x] = sum * inv_area;
                }
            }
        }
    }
    return out;
}

Tensor pool_backward(const Tensor& input, PoolKind kind, int kernel, int stride,
                     const Tensor& grad_out) {
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    const int oh = (H - kernel) / stride + 1;
    const int ow = (W - kernel) / stride + 1;
    require(grad_out.rank() == 3 && grad_out.dim(0) == C && grad_out.dim(1) == oh &&
                grad_out.dim(2) == ow,
            "pool grad_out shape mismatch");
    Tensor gin({C, H, W});
    const float inv_area = 1.0f / static_cast<float>(kernel * kernel);
    for (int c = 0; c < C; ++c) {
        const float* in = input.data() + static_cast<std::size_t>(c) * H * W;
        const float* go = grad_out.data() + static_cast<std::size_t>(c) * oh * ow;
        float* g = gin.data() + static_cast<std::size_t>(c) * H * W;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const int y0 = y * stride, x0 = x * stride;
                const float gv = go[y * ow + x];
                if (kind == PoolKind::max) {
                    // first row-major maximum, matching the forward pass
                    int bi = 0, bj = 0;
                    float best = in[y0 * W + x0];
                    for (int i = 0; i < kernel; ++i) {
                        for (int j = 0; j < kernel; ++j) {
                            const float v = in[(y0 + i) * W + x0 + j];
                            if (v > best) {
                                best = v;
                                bi = i;
                                bj = j;
                            }
                        }
                    }
                    g[(y0 + bi) * W + x0 + bj] += gv;
                } else {
                    const float gs = gv * inv_area;
                    for (int i = 0; i < kernel; ++i) {
                        for (int j = 0; j < kernel; ++j) g[(y0 + i) * W + x0 + j] += gs;
                    }
                }
            }
        }
    }
    return gin;
}

Tensor dense_forward_bounded(const Tensor& input, const Tensor& weights, const Tensor& bias,
                             int out_units, int in_units) {
    require(weights.rank() == 2, "dense weights must be [m,n]");
    require(static_cast<std::size_t>(in_units) == input.size(),
            "dense input length disagrees with bound");
    require(in_units <= weights.dim(1) && out_units <= weights.dim(0),
            "dense bounds exceed weight extent");
    require(bias.rank() == 1 && out_units <= bias.dim(0), "dense bias shorter than outputs");
    require_finite(input, "dense input");
    const int n_full = weights.dim(1);
    Tensor out({out_units});
    const float* x = input.data();
    for (int m = 0; m < out_units; ++m) {
        const float* wm = weights.data() + static_cast<std::size_t>(m) * n_full;
        float acc = bias[static_cast<std::size_t>(m)];
        for (int n = 0; n < in_units; ++n) acc += wm[n] * x[n];
        out[static_cast<std::size_t>(m)] = acc;
    }
    return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require(weights.rank() == 2, "dense weights must be [m,n]");
    require(input.size() == static_cast<std::size_t>(weights.dim(1)),
            "dense input length disagrees with weights");
    require(bias.rank() == 1 && bias.dim(0) == weights.dim(0),
            "dense bias length disagrees with weights");
    return dense_forward_bounded(input, weights, bias, weights.dim(0), weights.dim(1));
}

void dense_backward_bounded(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                            int out_units, int in_units, Tensor* grad_input,
                            Tensor* grad_weights_acc, Tensor* grad_bias_acc) {
    require(grad_out.rank() == 1 && grad_out.dim(0) == out_units, "dense grad_out shape mismatch");
    require(static_cast<std::size_t>(in_units) == input.size(),
            "dense input length disagrees with bound");
    require(grad_weights_acc->shape() == std::vector<int>({out_units, in_units}),
            "dense grad_weights accumulator shape mismatch");
    require(grad_bias_acc->shape() == std::vector<int>({out_units}),
            "dense grad_bias accumulator shape mismatch");
    const int n_full = weights.dim(1);
    const float* x = input.data();
    const float* go = grad_out.data();
    if (grad_input != nullptr) *grad_input = Tensor({in_units});
    float* gin = grad_input != nullptr ? grad_input->data() : nullptr;
    float* gw = grad_weights_acc->data();
    float* gb = grad_bias_acc->data();
    for (int m = 0; m < out_units; ++m) {
        const float g = go[m];
        gb[m] += g;
        float* gwm = gw + static_cast<std::size_t>(m) * in_units;
        for (int n = 0; n < in_units; ++n) gwm[n] += g * x[n];
        if (gin != nullptr) {
            const float* wm = weights.data() + static_cast<std::size_t>(m) * n_full;
            for (int n = 0; n < in_units; ++n) gin[n] += wm[n] * g;
        }
    }
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out) {
    DenseGrads g;
    g.weights = Tensor({weights.dim(0), weights.dim(1)});
    g.bias = Tensor({weights.dim(0)});
    dense_backward_bounded(input, weights, grad_out, weights.dim(0), weights.dim(1), &g.input,
                           &g.weights, &g.bias);
    return g;
}

Tensor relu_forward(const Tensor& input) {
    require_finite(input, "relu input");
    Tensor out = input;
    float* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) p[i] = p[i] > 0.0f ? p[i] : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require(input.same_shape(grad_out), "relu grad_out shape mismatch");
    Tensor gin(input.shape());
    const float* x = input.data();
    const float* go = grad_out.data();
    float* g = gin.data();
    for (std::size_t i = 0; i < gin.size(); ++i) g[i] = x[i] > 0.0f ? go[i] : 0.0f;
    return gin;
}

Tensor softmax(const Tensor& scores) {
    require(scores.size() >= 2, "softmax needs at least two scores");
    require_finite(scores, "softmax input");
    Tensor out(scores.shape());
    const float* s = scores.data();
    float mx = s[0];
    for (std::size_t i = 1; i < scores.size(); ++i) mx = std::max(mx, s[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double e = std::exp(static_cast<double>(s[i]) - mx);
        out[i] = static_cast<float>(e);
        z += e;
    }
    const double inv = 1.0 / z;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = static_cast<float>(out[i] * inv);
    }
    return out;
}

XentResult softmax_xent(const Tensor& scores, int label) {
    const int k = static_cast<int>(scores.size());
    if (k < 2) throw DimensionError("softmax_xent needs at least two scores");
    if (label < 0 || label >= k) throw ArgumentError("label out of range");
    require_finite(scores, "softmax_xent input");
    const float* s = scores.data();
    float mx = s[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, s[i]);
    double z = 0.0;
    for (int i = 0; i < k; ++i) z += std::exp(static_cast<double>(s[i]) - mx);
    XentResult r;
    r.loss = static_cast<float>(std::log(z) - (static_cast<double>(s[label]) - mx));
    r.grad_scores = Tensor(scores.shape());
    for (int i = 0; i < k; ++i) {
        const double p = std::exp(static_cast<double>(s[i]) - mx) / z;
        r.grad_scores[static_cast<std::size_t>(i)] =
            static_cast<float>(p - (i == label ? 1.0 : 0.0));
    }
    return r;
}

}  // namespace icnn

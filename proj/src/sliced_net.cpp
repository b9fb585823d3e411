#include "icnn/sliced_net.hpp"

#include <cstring>

namespace icnn {

Tensor SubNetworkView::forward(const Tensor& input) const {
    return parent->forward(increment, input);
}

std::int64_t SubNetworkView::mac_count() const { return parent->mac_count(increment); }

SlicedNetwork SlicedNetwork::allocate(const Architecture& arch, const IncrementPlan& plan) {
    arch.validate();
    plan.validate(arch);

    SlicedNetwork net;
    net.arch_ = arch;
    net.plan_ = plan;
    const int n_incr = plan.num_increments;
    const int out_idx = arch.output_layer_index();

    // Walk the stack tracking, per increment, the channel/feature width of the
    // activation entering each layer.
    std::vector<int> cur_c(static_cast<std::size_t>(n_incr), arch.in_channels);
    int h = arch.in_height, w = arch.in_width;
    bool spatial = true;
    int sliced = 0;
    for (int li = 0; li < static_cast<int>(arch.layers.size()); ++li) {
        const LayerSpec& l = arch.layers[static_cast<std::size_t>(li)];
        switch (l.kind) {
            case LayerKind::conv: {
                Slot s;
                s.arch_index = li;
                s.spec = l;
                s.in_at = cur_c;
                for (int i = 1; i <= n_incr; ++i) {
                    s.out_at.push_back(plan.cumulative(sliced, i));
                    cur_c[static_cast<std::size_t>(i - 1)] = plan.cumulative(sliced, i);
                }
                h = (h - l.kernel_h) / l.stride + 1;
                w = (w - l.kernel_w) / l.stride + 1;
                s.out_h = h;
                s.out_w = w;
                s.weights = Tensor({l.out_channels, s.in_at.back(), l.kernel_h, l.kernel_w});
                s.bias = Tensor({l.out_channels});
                net.slots_.push_back(std::move(s));
                ++sliced;
                break;
            }
            case LayerKind::maxpool:
            case LayerKind::avgpool:
                h = (h - l.kernel_h) / l.stride + 1;
                w = (w - l.kernel_w) / l.stride + 1;
                break;
            case LayerKind::dense: {
                std::vector<int> in_feats(static_cast<std::size_t>(n_incr));
                for (int i = 0; i < n_incr; ++i) {
                    in_feats[static_cast<std::size_t>(i)] =
                        cur_c[static_cast<std::size_t>(i)] * (spatial ? h * w : 1);
                }
                if (li == out_idx) {
                    net.output_in_at_ = in_feats;
                    for (int i = 0; i < n_incr; ++i) {
                        cur_c[static_cast<std::size_t>(i)] = l.out_channels;
                    }
                } else {
                    Slot s;
                    s.arch_index = li;
                    s.spec = l;
                    s.in_at = in_feats;
                    for (int i = 1; i <= n_incr; ++i) {
                        s.out_at.push_back(plan.cumulative(sliced, i));
                        cur_c[static_cast<std::size_t>(i - 1)] = plan.cumulative(sliced, i);
                    }
                    s.weights = Tensor({l.out_channels, in_feats.back()});
                    s.bias = Tensor({l.out_channels});
                    net.slots_.push_back(std::move(s));
                    ++sliced;
                }
                spatial = false;
                h = w = 1;
                break;
            }
            case LayerKind::relu:
            case LayerKind::softmax:
                break;
        }
    }
    return net;
}

SlicedNetwork SlicedNetwork::assemble(const Architecture& arch, const IncrementPlan& plan,
                                      std::uint64_t seed) {
    SlicedNetwork net = allocate(arch, plan);
    std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
    net.init_stage(1, rng);
    return net;
}

void SlicedNetwork::init_stage(int increment, std::mt19937& rng) {
    for (Slot& s : slots_) {
        const bool is_conv = s.spec.kind == LayerKind::conv;
        const int ksz = is_conv ? s.spec.kernel_h * s.spec.kernel_w : 1;
        const int in_i = s.in_at[static_cast<std::size_t>(increment - 1)];
        const float stddev = std::sqrt(2.0f / static_cast<float>(in_i * ksz));
        std::normal_distribution<float> dist(0.0f, stddev);
        const int in_prev = increment > 1 ? s.in_at[static_cast<std::size_t>(increment - 2)] : 0;
        const int out_prev =
            increment > 1 ? s.out_at[static_cast<std::size_t>(increment - 2)] : 0;
        const int out_i = s.out_at[static_cast<std::size_t>(increment - 1)];
        const int n_full = s.weights.dim(1);
        float* wp = s.weights.data();
        // New out rows over all in columns of this increment, then old rows
        // over the new in columns: everything with train_stage == increment.
        for (int r = 0; r < out_i; ++r) {
            const int c0 = r < out_prev ? in_prev : 0;
            if (c0 >= in_i) continue;
            for (int c = c0; c < in_i; ++c) {
                float* cell = wp + (static_cast<std::size_t>(r) * n_full + c) * ksz;
                for (int k = 0; k < ksz; ++k) cell[k] = dist(rng);
            }
        }
        for (int r = out_prev; r < out_i; ++r) s.bias[static_cast<std::size_t>(r)] = 0.0f;
    }
}

void SlicedNetwork::begin_increment(int increment, std::mt19937& rng) {
    if (increment != trained_up_to_ + 1 || increment > num_increments()) {
        throw IncrementError("begin_increment out of order");
    }
    init_stage(increment, rng);
    const int in_feats = head_in_features(increment);
    OutputHead h;
    h.weights = Tensor({output_classes(), in_feats});
    h.bias = Tensor({output_classes()});
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(in_feats)));
    for (std::size_t i = 0; i < h.weights.size(); ++i) h.weights[i] = dist(rng);
    heads_.push_back(std::move(h));
}

void SlicedNetwork::finish_increment(int increment) {
    if (increment != trained_up_to_ + 1 || head_count() != increment) {
        throw IncrementError("finish_increment out of order");
    }
    trained_up_to_ = increment;
}

SubNetworkView SlicedNetwork::view(int increment) const {
    if (increment < 1 || increment > trained_up_to_) {
        throw IncrementError("sub-network increment " + std::to_string(increment) +
                             " outside [1, " + std::to_string(trained_up_to_) + "]");
    }
    return SubNetworkView{this, increment};
}

Tensor SlicedNetwork::forward(int increment, const Tensor& input) const {
    if (increment < 1 || increment > trained_up_to_) {
        throw IncrementError("sub-network increment " + std::to_string(increment) +
                             " outside [1, " + std::to_string(trained_up_to_) + "]");
    }
    return forward_internal(increment, input, nullptr, false);
}

Tensor SlicedNetwork::forward_internal(int increment, const Tensor& input, ForwardTrace* trace,
                                       bool allow_untrained) const {
    if (increment < 1 || increment > num_increments() ||
        (!allow_untrained && increment > trained_up_to_)) {
        throw IncrementError("increment out of range");
    }
    if (increment > head_count()) throw IncrementError("no output head for increment");
    if (input.rank() != 3 || input.dim(0) != arch_.in_channels ||
        input.dim(1) != arch_.in_height || input.dim(2) != arch_.in_width) {
        throw DimensionError("input shape disagrees with architecture");
    }
    if (trace != nullptr) trace->layer_inputs.resize(arch_.layers.size());

    const int ii = increment - 1;
    const int out_idx = arch_.output_layer_index();
    Tensor act = input;
    int slot_i = 0;
    for (int li = 0; li < static_cast<int>(arch_.layers.size()); ++li) {
        const LayerSpec& l = arch_.layers[static_cast<std::size_t>(li)];
        switch (l.kind) {
            case LayerKind::conv: {
                const Slot& s = slots_[static_cast<std::size_t>(slot_i)];
                if (trace != nullptr) {
                    trace->layer_inputs[static_cast<std::size_t>(li)] = act;
                }
                act = conv2d_forward_bounded(act, s.weights, s.bias, l.stride,
                                             s.out_at[static_cast<std::size_t>(ii)],
                                             s.in_at[static_cast<std::size_t>(ii)]);
                ++slot_i;
                break;
            }
            case LayerKind::maxpool:
            case LayerKind::avgpool: {
                if (trace != nullptr) {
                    trace->layer_inputs[static_cast<std::size_t>(li)] = act;
                }
                act = pool_forward(act,
                                   l.kind == LayerKind::maxpool ? PoolKind::max : PoolKind::avg,
                                   l.kernel_h, l.stride);
                break;
            }
            case LayerKind::relu: {
                if (trace != nullptr) {
                    trace->layer_inputs[static_cast<std::size_t>(li)] = act;
                }
                act = relu_forward(act);
                break;
            }
            case LayerKind::dense: {
                Tensor flat = act.reshaped({static_cast<int>(act.size())});
                if (li == out_idx) {
                    const OutputHead& h = heads_[static_cast<std::size_t>(ii)];
                    if (trace != nullptr) trace->head_input = flat;
                    act = dense_forward(flat, h.weights, h.bias);
                } else {
                    const Slot& s = slots_[static_cast<std::size_t>(slot_i)];
                    if (trace != nullptr) {
                        trace->layer_inputs[static_cast<std::size_t>(li)] = flat;
                    }
                    act = dense_forward_bounded(flat, s.weights, s.bias,
                                                s.out_at[static_cast<std::size_t>(ii)],
                                                s.in_at[static_cast<std::size_t>(ii)]);
                    ++slot_i;
                }
                break;
            }
            case LayerKind::softmax:
                act = softmax(act);
                break;
        }
    }
    if (trace != nullptr) trace->scores = act;
    return act;
}

std::int64_t SlicedNetwork::mac_count(int increment) const {
    if (increment < 1 || increment > num_increments()) {
        throw IncrementError("increment out of range");
    }
    const std::size_t ii = static_cast<std::size_t>(increment - 1);
    std::int64_t macs = 0;
    for (const Slot& s : slots_) {
        if (s.spec.kind == LayerKind::conv) {
            macs += static_cast<std::int64_t>(s.out_h) * s.out_w * s.spec.kernel_h *
                    s.spec.kernel_w * s.in_at[ii] * s.out_at[ii];
        } else {
            macs += static_cast<std::int64_t>(s.out_at[ii]) * s.in_at[ii];
        }
    }
    macs += static_cast<std::int64_t>(output_classes()) * output_in_at_[ii];
    return macs;
}

std::int64_t SlicedNetwork::parameter_count() const {
    std::int64_t n = 0;
    for (const Slot& s : slots_) {
        n += static_cast<std::int64_t>(s.weights.size()) + static_cast<std::int64_t>(s.bias.size());
    }
    for (const OutputHead& h : heads_) {
        n += static_cast<std::int64_t>(h.weights.size()) + static_cast<std::int64_t>(h.bias.size());
    }
    return n;
}

std::vector<int> SlicedNetwork::block_shape(const BlockId& id) const {
    const Slot& s = slots_[static_cast<std::size_t>(id.slot)];
    const auto at = [](const std::vector<int>& v, int i) {
        return i == 0 ? 0 : v[static_cast<std::size_t>(i - 1)];
    };
    const int r0 = at(s.out_at, id.out_inc - 1), r1 = at(s.out_at, id.out_inc);
    if (id.in_inc == 0) return {r1 - r0};
    const int c0 = at(s.in_at, id.in_inc - 1), c1 = at(s.in_at, id.in_inc);
    if (s.spec.kind == LayerKind::conv) {
        return {r1 - r0, c1 - c0, s.spec.kernel_h, s.spec.kernel_w};
    }
    return {r1 - r0, c1 - c0};
}

std::vector<BlockInfo> SlicedNetwork::blocks() const {
    std::vector<BlockInfo> out;
    for (int si = 0; si < slot_count(); ++si) {
        for (int a = 1; a <= num_increments(); ++a) {
            for (int b = 0; b <= num_increments(); ++b) {
                BlockId id{si, a, b};
                std::vector<int> shape = block_shape(id);
                bool empty = false;
                for (int e : shape) empty = empty || e == 0;
                if (empty) continue;
                out.push_back(BlockInfo{id, std::max(a, b), std::move(shape)});
            }
        }
    }
    return out;
}

Tensor SlicedNetwork::block_values(const BlockId& id) const {
    const Slot& s = slots_[static_cast<std::size_t>(id.slot)];
    const auto at = [](const std::vector<int>& v, int i) {
        return i == 0 ? 0 : v[static_cast<std::size_t>(i - 1)];
    };
    const int r0 = at(s.out_at, id.out_inc - 1), r1 = at(s.out_at, id.out_inc);
    std::vector<int> shape = block_shape(id);
    for (int e : shape) {
        if (e == 0) throw ArgumentError("empty block");
    }
    Tensor t(shape);
    if (id.in_inc == 0) {
        for (int r = r0; r < r1; ++r) t[static_cast<std::size_t>(r - r0)] = s.bias[static_cast<std::size_t>(r)];
        return t;
    }
    const int c0 = at(s.in_at, id.in_inc - 1), c1 = at(s.in_at, id.in_inc);
    const int ksz = s.spec.kind == LayerKind::conv ? s.spec.kernel_h * s.spec.kernel_w : 1;
    const int n_full = s.weights.dim(1);
    const float* wp = s.weights.data();
    float* tp = t.data();
    for (int r = r0; r < r1; ++r) {
        const float* src = wp + (static_cast<std::size_t>(r) * n_full + c0) * ksz;
        std::memcpy(tp, src, static_cast<std::size_t>(c1 - c0) * ksz * sizeof(float));
        tp += static_cast<std::size_t>(c1 - c0) * ksz;
    }
    return t;
}

void SlicedNetwork::set_block_values(const BlockId& id, const Tensor& values) {
    Slot& s = slots_[static_cast<std::size_t>(id.slot)];
    if (values.shape() != block_shape(id)) throw DimensionError("block values shape mismatch");
    const auto at = [](const std::vector<int>& v, int i) {
        return i == 0 ? 0 : v[static_cast<std::size_t>(i - 1)];
    };
    const int r0 = at(s.out_at, id.out_inc - 1), r1 = at(s.out_at, id.out_inc);
    if (id.in_inc == 0) {
        for (int r = r0; r < r1; ++r) s.bias[static_cast<std::size_t>(r)] = values[static_cast<std::size_t>(r - r0)];
        return;
    }
    const int c0 = at(s.in_at, id.in_inc - 1), c1 = at(s.in_at, id.in_inc);
    const int ksz = s.spec.kind == LayerKind::conv ? s.spec.kernel_h * s.spec.kernel_w : 1;
    const int n_full = s.weights.dim(1);
    float* wp = s.weights.data();
    const float* tp = values.data();
    for (int r = r0; r < r1; ++r) {
        float* dst = wp + (static_cast<std::size_t>(r) * n_full + c0) * ksz;
        std::memcpy(dst, tp, static_cast<std::size_t>(c1 - c0) * ksz * sizeof(float));
        tp += static_cast<std::size_t>(c1 - c0) * ksz;
    }
}

namespace {

bool bits_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

bool networks_bit_identical(const SlicedNetwork& a, const SlicedNetwork& b) {
    if (a.slot_count() != b.slot_count() || a.head_count() != b.head_count() ||
        a.trained_up_to() != b.trained_up_to()) {
        return false;
    }
    for (int i = 0; i < a.slot_count(); ++i) {
        if (!bits_equal(a.slot(i).weights, b.slot(i).weights) ||
            !bits_equal(a.slot(i).bias, b.slot(i).bias)) {
            return false;
        }
    }
    for (int i = 1; i <= a.head_count(); ++i) {
        if (!bits_equal(a.head(i).weights, b.head(i).weights) ||
            !bits_equal(a.head(i).bias, b.head(i).bias)) {
            return false;
        }
    }
    return true;
}

}  // namespace icnn

#include "icnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace icnn {

void HyperParams::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ArgumentError("learning rate must be finite and >= 0");
    }
    if (!(momentum >= 0.0) || momentum >= 1.0) throw ArgumentError("momentum must lie in [0,1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw ArgumentError("weight decay must be finite and >= 0");
    }
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    if (!(schedule.factor > 0.0) || schedule.factor > 1.0) {
        throw ArgumentError("lr schedule factor must lie in (0,1]");
    }
    if (schedule.every_epochs < 1) throw ArgumentError("lr schedule period must be >= 1");
}

double HyperParams::lr_at_epoch(int epoch) const {
    const int steps = (epoch - 1) / schedule.every_epochs;
    return learning_rate * std::pow(schedule.factor, steps);
}

FreezeMask FreezeMask::for_increment(const SlicedNetwork& net, int increment) {
    if (increment < 1 || increment > net.num_increments()) {
        throw IncrementError("freeze mask increment out of range");
    }
    FreezeMask m;
    m.increment_ = increment;
    m.head_ = true;
    return m;
}

FreezeMask FreezeMask::all_frozen(const SlicedNetwork&) { return FreezeMask{}; }

bool FreezeMask::trainable(int, int out_inc, int in_inc) const {
    if (increment_ == 0) return false;
    const int stage = std::max(out_inc, in_inc);  // bias blocks carry in_inc = 0
    return stage == increment_;
}

SgdState SgdState::create(const SlicedNetwork& net, int increment) {
    SgdState s;
    for (int i = 0; i < net.slot_count(); ++i) {
        s.vel_w.emplace_back(net.slot(i).weights.shape());
        s.vel_b.emplace_back(net.slot(i).bias.shape());
    }
    const auto& head = net.head(increment);
    s.head_vel_w = Tensor(head.weights.shape());
    s.head_vel_b = Tensor(head.bias.shape());
    return s;
}

void momentum_update(std::span<float> weights, std::span<float> velocity,
                     std::span<const float> gradient, double lr, double momentum,
                     double weight_decay) {
    const float lrf = static_cast<float>(lr);
    const float mu = static_cast<float>(momentum);
    const float wd = static_cast<float>(weight_decay);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const float g = gradient[i] + wd * weights[i];
        velocity[i] = mu * velocity[i] - lrf * g;
        weights[i] += velocity[i];
    }
}

namespace {

struct GradAccum {
    std::vector<Tensor> w, b;  // per slot, sized to the increment's sub-network
    Tensor head_w, head_b;
};

GradAccum make_accum(const SlicedNetwork& net, int increment) {
    GradAccum a;
    const std::size_t ii = static_cast<std::size_t>(increment - 1);
    for (int i = 0; i < net.slot_count(); ++i) {
        const auto& s = net.slot(i);
        if (s.spec.kind == LayerKind::conv) {
            a.w.emplace_back(std::vector<int>{s.out_at[ii], s.in_at[ii], s.spec.kernel_h,
                                              s.spec.kernel_w});
        } else {
            a.w.emplace_back(std::vector<int>{s.out_at[ii], s.in_at[ii]});
        }
        a.b.emplace_back(std::vector<int>{s.out_at[ii]});
    }
    const auto& head = net.head(increment);
    a.head_w = Tensor(head.weights.shape());
    a.head_b = Tensor(head.bias.shape());
    return a;
}

float backprop_sample(const SlicedNetwork& net, int increment, const Tensor& x, int label,
                      GradAccum& acc) {
    SlicedNetwork::ForwardTrace tr;
    net.forward_internal(increment, x, &tr, true);
    XentResult xe = softmax_xent(tr.scores, label);

    const Architecture& arch = net.arch();
    const int out_idx = arch.output_layer_index();
    const std::size_t ii = static_cast<std::size_t>(increment - 1);

    Tensor g;
    const auto& head = net.head(increment);
    dense_backward_bounded(tr.head_input, head.weights, xe.grad_scores, net.output_classes(),
                           net.head_in_features(increment), &g, &acc.head_w, &acc.head_b);

    // Map arch layer index -> slot index for the weighted non-output layers.
    int slot_i = net.slot_count() - 1;
    for (int li = out_idx - 1; li >= 0; --li) {
        const LayerSpec& l = arch.layers[static_cast<std::size_t>(li)];
        const Tensor& input = tr.layer_inputs[static_cast<std::size_t>(li)];
        switch (l.kind) {
            case LayerKind::relu:
                if (!g.same_shape(input)) g = g.reshaped(input.shape());
                g = relu_backward(input, g);
                break;
            case LayerKind::maxpool:
            case LayerKind::avgpool: {
                const int oh = (input.dim(1) - l.kernel_h) / l.stride + 1;
                const int ow = (input.dim(2) - l.kernel_w) / l.stride + 1;
                const std::vector<int> oshape{input.dim(0), oh, ow};
                if (g.shape() != oshape) g = g.reshaped(oshape);
                g = pool_backward(input,
                                  l.kind == LayerKind::maxpool ? PoolKind::max : PoolKind::avg,
                                  l.kernel_h, l.stride, g);
                break;
            }
            case LayerKind::conv: {
                const auto& s = net.slot(slot_i);
                const std::vector<int> oshape{s.out_at[ii], s.out_h, s.out_w};
                if (g.shape() != oshape) g = g.reshaped(oshape);
                Tensor gin;
                conv2d_backward_bounded(input, s.weights, g, l.stride, s.out_at[ii], s.in_at[ii],
                                        &gin, &acc.w[static_cast<std::size_t>(slot_i)],
                                        &acc.b[static_cast<std::size_t>(slot_i)]);
                g = std::move(gin);
                --slot_i;
                break;
            }
            case LayerKind::dense: {
                const auto& s = net.slot(slot_i);
                Tensor gin;
                dense_backward_bounded(input, s.weights, g, s.out_at[ii], s.in_at[ii], &gin,
                                       &acc.w[static_cast<std::size_t>(slot_i)],
                                       &acc.b[static_cast<std::size_t>(slot_i)]);
                g = std::move(gin);
                --slot_i;
                break;
            }
            case LayerKind::softmax:
                throw ArgumentError("softmax before the output layer");
        }
    }
    return xe.loss;
}

// Applies the accumulated batch gradient to every trainable block region.
void apply_update(SlicedNetwork& net, const FreezeMask& mask, const GradAccum& acc,
                  int batch_size, double lr, const HyperParams& hp, SgdState& state) {
    const int increment = mask.increment();
    if (increment == 0) return;
    const std::size_t ii = static_cast<std::size_t>(increment - 1);
    const float inv_b = 1.0f / static_cast<float>(batch_size);
    const float lrf = static_cast<float>(lr);
    const float mu = static_cast<float>(hp.momentum);
    const float wd = static_cast<float>(hp.weight_decay);

    const auto update_cell = [&](float& w, float& v, float g_sum) {
        const float g = g_sum * inv_b + wd * w;
        v = mu * v - lrf * g;
        w += v;
    };

    for (int si = 0; si < net.slot_count(); ++si) {
        auto& s = net.slot(si);
        auto& vw = state.vel_w[static_cast<std::size_t>(si)];
        auto& vb = state.vel_b[static_cast<std::size_t>(si)];
        const auto& gw = acc.w[static_cast<std::size_t>(si)];
        const auto& gb = acc.b[static_cast<std::size_t>(si)];
        const int in_i = s.in_at[ii], out_i = s.out_at[ii];
        const int n_full = s.weights.dim(1);
        const bool is_conv = s.spec.kind == LayerKind::conv;
        const int ksz = is_conv ? s.spec.kernel_h * s.spec.kernel_w : 1;

        const auto bound = [&](const std::vector<int>& v_, int inc) {
            return inc == 0 ? 0 : v_[static_cast<std::size_t>(inc - 1)];
        };
        for (int a = 1; a <= increment; ++a) {
            const int r0 = bound(s.out_at, a - 1), r1 = bound(s.out_at, a);
            // bias block (in_inc = 0)
            if (mask.trainable(si, a, 0)) {
                for (int r = r0; r < r1; ++r) {
                    update_cell(s.bias[static_cast<std::size_t>(r)],
                                vb[static_cast<std::size_t>(r)],
                                gb[static_cast<std::size_t>(r)]);
                }
            }
            for (int b = 1; b <= increment; ++b) {
                if (!mask.trainable(si, a, b)) continue;
                const int c0 = bound(s.in_at, b - 1), c1 = bound(s.in_at, b);
                for (int r = r0; r < r1; ++r) {
                    float* wrow = s.weights.data() + static_cast<std::size_t>(r) * n_full * ksz;
                    float* vrow = vw.data() + static_cast<std::size_t>(r) * n_full * ksz;
                    const float* grow = gw.data() + static_cast<std::size_t>(r) * in_i * ksz;
                    for (int c = c0 * ksz; c < c1 * ksz; ++c) {
                        update_cell(wrow[c], vrow[c], grow[c]);
                    }
                }
            }
        }
    }
    if (mask.head_trainable()) {
        auto& head = net.head(increment);
        for (std::size_t i = 0; i < head.weights.size(); ++i) {
            update_cell(head.weights[i], state.head_vel_w[i], acc.head_w[i]);
        }
        for (std::size_t i = 0; i < head.bias.size(); ++i) {
            update_cell(head.bias[i], state.head_vel_b[i], acc.head_b[i]);
        }
    }
}

}  // namespace

float sgd_step(SlicedNetwork& net, const Dataset& data, std::span<const int> batch_indices,
               const FreezeMask& mask, const HyperParams& hp, double lr, SgdState& state) {
    if (batch_indices.empty()) throw ArgumentError("empty batch");
    if (net.head_count() == 0) throw IncrementError("network has no output head to train");
    const int increment = mask.increment() == 0 ? net.head_count() : mask.increment();
    GradAccum acc = make_accum(net, increment);
    double loss_sum = 0.0;
    for (int idx : batch_indices) {
        loss_sum += backprop_sample(net, increment, data.sample(idx), data.label(idx), acc);
    }
    const float mean_loss = static_cast<float>(loss_sum / static_cast<double>(batch_indices.size()));
    if (!std::isfinite(mean_loss)) {
        throw DivergenceError("non-finite batch loss", -1);
    }
    apply_update(net, mask, acc, static_cast<int>(batch_indices.size()), lr, hp, state);
    return mean_loss;
}

int argmax(const Tensor& scores) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
        if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) {
            best = i;
        }
    }
    return best;
}

EvalResult evaluate(const SlicedNetwork& net, int increment, const Dataset& ds,
                    bool allow_untrained) {
    double loss_sum = 0.0;
    int correct = 0;
    for (int i = 0; i < ds.size(); ++i) {
        SlicedNetwork::ForwardTrace tr;
        net.forward_internal(increment, ds.sample(i), &tr, allow_untrained);
        loss_sum += softmax_xent(tr.scores, ds.label(i)).loss;
        if (argmax(tr.scores) == ds.label(i)) ++correct;
    }
    return {loss_sum / std::max(1, ds.size()),
            static_cast<double>(correct) / std::max(1, ds.size())};
}

namespace {

// Shared epoch loop for golden and incremental training. Returns the best
// validation accuracy seen; appends log rows with the given increment tag.
double run_epochs(SlicedNetwork& net, int increment, const FreezeMask& mask, const Dataset& train,
                  const Dataset& val, const HyperParams& hp, std::mt19937& rng, TrainLog* log,
                  int* global_epoch) {
    SgdState state = SgdState::create(net, increment);
    std::vector<int> order(static_cast<std::size_t>(train.size()));
    std::iota(order.begin(), order.end(), 0);
    double best_val = 0.0;
    double prev_epoch_loss = -1.0;
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = hp.lr_at_epoch(epoch);
        double loss_sum = 0.0;
        int batches = 0;
        for (int start = 0; start < train.size(); start += hp.batch_size) {
            const int count = std::min(hp.batch_size, train.size() - start);
            std::span<const int> batch(order.data() + start, static_cast<std::size_t>(count));
            try {
                loss_sum += sgd_step(net, train, batch, mask, hp, lr, state);
            } catch (const DivergenceError&) {
                throw DivergenceError("non-finite batch loss", *global_epoch + epoch);
            }
            ++batches;
        }
        const double epoch_loss = loss_sum / std::max(1, batches);
        if (!std::isfinite(epoch_loss) ||
            (prev_epoch_loss > 1e-12 && epoch_loss > 10.0 * prev_epoch_loss)) {
            throw DivergenceError("training loss diverged", *global_epoch + epoch);
        }
        prev_epoch_loss = epoch_loss;

        const EvalResult tr = evaluate(net, increment, train, true);
        const EvalResult va = evaluate(net, increment, val, true);
        best_val = std::max(best_val, va.accuracy);
        if (log != nullptr) {
            log->push_back({increment, *global_epoch + epoch, "train", tr.loss, tr.accuracy});
            log->push_back({increment, *global_epoch + epoch, "val", va.loss, va.accuracy});
        }
    }
    *global_epoch += hp.epochs;
    return best_val;
}

}  // namespace

GoldenModel train_golden(const Architecture& arch, double fraction, const Dataset& train,
                         const Dataset& val, const HyperParams& hp, TrainLog* log) {
    hp.validate();
    if (train.size() == 0 || val.size() == 0) throw ArgumentError("empty training or val split");
    const Architecture scaled = scaled_arch(arch, fraction);
    const IncrementPlan plan = IncrementPlan::uniform(scaled, {1.0});
    SlicedNetwork net = SlicedNetwork::assemble(scaled, plan, hp.seed);
    std::mt19937 rng(static_cast<std::mt19937::result_type>(hp.seed));
    net.begin_increment(1, rng);
    int global_epoch = 0;
    const double best_val = run_epochs(net, 1, FreezeMask::for_increment(net, 1), train, val, hp,
                                       rng, log, &global_epoch);
    net.finish_increment(1);
    return GoldenModel{fraction, std::move(net), best_val};
}

void init_from_golden(SlicedNetwork& net, const GoldenModel& golden, int increment) {
    const SlicedNetwork& g = golden.network;
    if (g.slot_count() != net.slot_count() || g.num_increments() != 1) {
        throw PlanError("golden model structure disagrees with the network");
    }
    const std::size_t ii = static_cast<std::size_t>(increment - 1);
    for (int si = 0; si < net.slot_count(); ++si) {
        auto& s = net.slot(si);
        const auto& gs = g.slot(si);
        const int out_i = s.out_at[ii], in_i = s.in_at[ii];
        if (gs.spec.kind != s.spec.kind || gs.out_at[0] != out_i || gs.in_at[0] != in_i) {
            throw PlanError("golden model for increment " + std::to_string(increment) +
                            " has mismatched layer sizes");
        }
        const int out_prev = increment > 1 ? s.out_at[ii - 1] : 0;
        const int in_prev = increment > 1 ? s.in_at[ii - 1] : 0;
        const bool is_conv = s.spec.kind == LayerKind::conv;
        const int ksz = is_conv ? s.spec.kernel_h * s.spec.kernel_w : 1;
        const int n_full = s.weights.dim(1);
        const int gn_full = gs.weights.dim(1);
        for (int r = 0; r < out_i; ++r) {
            const int c0 = r < out_prev ? in_prev : 0;
            if (c0 >= in_i) continue;
            float* dst = s.weights.data() + (static_cast<std::size_t>(r) * n_full + c0) * ksz;
            const float* src =
                gs.weights.data() + (static_cast<std::size_t>(r) * gn_full + c0) * ksz;
            std::copy(src, src + static_cast<std::size_t>(in_i - c0) * ksz, dst);
        }
        for (int r = out_prev; r < out_i; ++r) {
            s.bias[static_cast<std::size_t>(r)] = gs.bias[static_cast<std::size_t>(r)];
        }
    }
    if (g.head_count() != 1 || g.head(1).weights.dim(1) != net.head_in_features(increment)) {
        throw PlanError("golden output head size disagrees with the network");
    }
    net.head(increment).weights = g.head(1).weights;
    net.head(increment).bias = g.head(1).bias;
}

SlicedNetwork incremental_train(const Architecture& arch, const IncrementPlan& plan,
                                const std::vector<GoldenModel>& goldens, const Dataset& train,
                                const Dataset& val, const HyperParams& hp, TrainLog* log,
                                std::vector<IncrementSummary>* summaries) {
    hp.validate();
    if (!goldens.empty() && static_cast<int>(goldens.size()) != plan.num_increments) {
        throw PlanError("golden-model initialization needs one golden per increment");
    }
    SlicedNetwork net = SlicedNetwork::assemble(arch, plan, hp.seed);
    std::mt19937 rng(static_cast<std::mt19937::result_type>(hp.seed));
    int global_epoch = 0;
    const std::int64_t full_macs = net.mac_count(net.num_increments());
    for (int i = 1; i <= plan.num_increments; ++i) {
        net.begin_increment(i, rng);
        if (!goldens.empty()) {
            init_from_golden(net, goldens[static_cast<std::size_t>(i - 1)], i);
        }
        run_epochs(net, i, FreezeMask::for_increment(net, i), train, val, hp, rng, log,
                   &global_epoch);
        net.finish_increment(i);
        if (summaries != nullptr) {
            IncrementSummary s;
            s.increment = i;
            s.channel_fraction = i <= static_cast<int>(plan.channel_fractions.size())
                                     ? plan.channel_fractions[static_cast<std::size_t>(i - 1)]
                                     : 0.0;
            s.compute_fraction =
                static_cast<double>(net.mac_count(i)) / static_cast<double>(full_macs);
            s.val_accuracy = evaluate(net, i, val).accuracy;
            summaries->push_back(s);
        }
    }
    return net;
}

}  // namespace icnn

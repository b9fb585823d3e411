#include "icnn/plan.hpp"

#include <cmath>
#include <string>

namespace icnn {

int scaled_channels(double fraction, int full) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ArgumentError("channel fraction must lie in (0, 1]");
    }
    const int c = static_cast<int>(std::floor(fraction * full));
    return c < 1 ? 1 : c;
}

Architecture scaled_arch(const Architecture& arch, double fraction) {
    Architecture out = arch;
    const int out_idx = arch.output_layer_index();
    for (int i = 0; i < static_cast<int>(out.layers.size()); ++i) {
        LayerSpec& l = out.layers[static_cast<std::size_t>(i)];
        if (l.has_weights() && i != out_idx) {
            l.out_channels = scaled_channels(fraction, l.out_channels);
        }
    }
    return out;
}

std::int64_t arch_mac_count(const Architecture& arch) {
    arch.validate();
    std::int64_t macs = 0;
    bool spatial = true;
    int c = arch.in_channels, h = arch.in_height, w = arch.in_width;
    for (const LayerSpec& l : arch.layers) {
        switch (l.kind) {
            case LayerKind::conv: {
                const int oh = (h - l.kernel_h) / l.stride + 1;
                const int ow = (w - l.kernel_w) / l.stride + 1;
                macs += static_cast<std::int64_t>(oh) * ow * l.kernel_h * l.kernel_w * c *
                        l.out_channels;
                c = l.out_channels;
                h = oh;
                w = ow;
                break;
            }
            case LayerKind::maxpool:
            case LayerKind::avgpool:
                h = (h - l.kernel_h) / l.stride + 1;
                w = (w - l.kernel_w) / l.stride + 1;
                break;
            case LayerKind::dense:
                macs += static_cast<std::int64_t>(l.out_channels) * c * (spatial ? h * w : 1);
                c = l.out_channels;
                spatial = false;
                h = w = 1;
                break;
            case LayerKind::relu:
            case LayerKind::softmax:
                break;
        }
    }
    return macs;
}

double compute_fraction_of(const Architecture& arch, double channel_fraction) {
    return static_cast<double>(arch_mac_count(scaled_arch(arch, channel_fraction))) /
           static_cast<double>(arch_mac_count(arch));
}

IncrementPlan IncrementPlan::uniform(const Architecture& arch,
                                     const std::vector<double>& fractions) {
    arch.validate();
    if (fractions.empty()) throw PlanError("plan needs at least one fraction");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0) || fractions[i] > 1.0) {
            throw PlanError("plan fractions must lie in (0, 1]");
        }
        if (i > 0 && fractions[i] <= fractions[i - 1]) {
            throw PlanError("plan fractions must be strictly increasing");
        }
    }
    if (fractions.back() != 1.0) throw PlanError("last plan fraction must be 1.0");

    IncrementPlan plan;
    plan.num_increments = static_cast<int>(fractions.size());
    plan.output_classes = arch.output_classes();
    plan.channel_fractions = fractions;
    const int out_idx = arch.output_layer_index();
    for (int li = 0; li < static_cast<int>(arch.layers.size()); ++li) {
        const LayerSpec& l = arch.layers[static_cast<std::size_t>(li)];
        if (!l.has_weights() || li == out_idx) continue;
        std::vector<int> row(fractions.size());
        int prev = 0;
        for (int i = 0; i < plan.num_increments; ++i) {
            const int cum = (i == plan.num_increments - 1)
                                ? l.out_channels
                                : scaled_channels(fractions[static_cast<std::size_t>(i)],
                                                  l.out_channels);
            row[static_cast<std::size_t>(i)] = cum - prev;
            prev = cum;
        }
        plan.added.push_back(std::move(row));
    }
    plan.validate(arch);
    return plan;
}

int IncrementPlan::cumulative(int layer, int increment) const {
    int c = 0;
    for (int i = 0; i < increment; ++i) {
        c += added[static_cast<std::size_t>(layer)][static_cast<std::size_t>(i)];
    }
    return c;
}

void IncrementPlan::validate(const Architecture& arch) const {
    if (num_increments < 1) throw PlanError("plan needs at least one increment");
    if (output_classes != arch.output_classes()) {
        throw PlanError("plan output classes disagree with architecture");
    }
    const int out_idx = arch.output_layer_index();
    std::vector<int> full;
    for (int li = 0; li < static_cast<int>(arch.layers.size()); ++li) {
        const LayerSpec& l = arch.layers[static_cast<std::size_t>(li)];
        if (l.has_weights() && li != out_idx) full.push_back(l.out_channels);
    }
    if (static_cast<int>(full.size()) != sliced_layer_count()) {
        throw PlanError("plan covers " + std::to_string(sliced_layer_count()) +
                        " layers but the architecture has " + std::to_string(full.size()) +
                        " weighted non-output layers");
    }
    for (int l = 0; l < sliced_layer_count(); ++l) {
        const auto& row = added[static_cast<std::size_t>(l)];
        if (static_cast<int>(row.size()) != num_increments) {
            throw PlanError("plan row length disagrees with increment count");
        }
        if (row[0] < 1) throw PlanError("increment 1 must add at least one channel per layer");
        int sum = 0;
        for (int a : row) {
            if (a < 0) throw PlanError("added channel counts must be non-negative");
            sum += a;
        }
        if (sum != full[static_cast<std::size_t>(l)]) {
            throw PlanError("per-layer added channels must total the full width");
        }
    }
    for (int i = 1; i < num_increments; ++i) {
        int grown = 0;
        for (int l = 0; l < sliced_layer_count(); ++l) {
            grown += added[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
        }
        if (grown < 1) {
            throw PlanError("increment " + std::to_string(i + 1) + " adds no channels");
        }
    }
    // Uniform cumulative fraction across layers, up to one channel of rounding.
    for (int i = 0; i < num_increments; ++i) {
        for (int l = 1; l < sliced_layer_count(); ++l) {
            const double fa = static_cast<double>(cumulative(0, i + 1)) / full[0];
            const double fb = static_cast<double>(cumulative(l, i + 1)) /
                              full[static_cast<std::size_t>(l)];
            const double tol = 1.0 / full[0] + 1.0 / full[static_cast<std::size_t>(l)];
            if (std::abs(fa - fb) > tol) {
                throw PlanError("cumulative channel fraction is not uniform across layers");
            }
        }
    }
}

}  // namespace icnn

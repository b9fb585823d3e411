#pragma once

#include <vector>

#include "icnn/layers.hpp"

namespace icnn {

/// Per-layer channel counts added at each training increment. Rows cover the
/// weighted non-output layers of the architecture, in layer order.
struct IncrementPlan {
    int num_increments = 1;
    int output_classes = 0;
    std::vector<std::vector<int>> added;     // [sliced layer][increment]
    std::vector<double> channel_fractions;   // cumulative, informational

    /// Uniform-fraction plan: cumulative channels per layer at increment i are
    /// max(1, floor(fraction[i] * full)), the last increment absorbing the
    /// remainder. Fractions must be strictly increasing and end at 1.0.
    static IncrementPlan uniform(const Architecture& arch, const std::vector<double>& fractions);

    int sliced_layer_count() const { return static_cast<int>(added.size()); }

    /// Cumulative channel count of sliced layer `layer` after increment i (1-based).
    int cumulative(int layer, int increment) const;

    /// Consistency with an architecture: row per weighted non-output layer,
    /// totals equal full widths, every layer present from increment 1, each
    /// later increment adds at least one channel somewhere, and cumulative
    /// fractions agree across layers up to rounding.
    void validate(const Architecture& arch) const;
};

/// Channel count of a fraction-sized layer: max(1, floor(fraction * full)).
int scaled_channels(double fraction, int full);

/// The architecture of the sub-network at a cumulative channel fraction
/// (weighted non-output layers scaled, output layer untouched).
Architecture scaled_arch(const Architecture& arch, double fraction);

/// Multiply-accumulates of one forward pass at full width.
std::int64_t arch_mac_count(const Architecture& arch);

/// MAC ratio of the channel-fraction-scaled architecture to the full one.
double compute_fraction_of(const Architecture& arch, double channel_fraction);

}  // namespace icnn

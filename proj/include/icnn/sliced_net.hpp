#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "icnn/plan.hpp"

namespace icnn {

class SlicedNetwork;

/// Read-only handle onto the sub-network formed by increments 1..increment.
struct SubNetworkView {
    const SlicedNetwork* parent = nullptr;
    int increment = 0;

    Tensor forward(const Tensor& input) const;
    std::int64_t mac_count() const;
};

/// Identifies one weight block: (slot, out-increment a, in-increment b).
/// in_inc == 0 names the bias block of out-increment a.
struct BlockId {
    int slot = 0;
    int out_inc = 0;
    int in_inc = 0;
};

struct BlockInfo {
    BlockId id;
    int train_stage = 0;  // max(a, b); the only increment allowed to write it
    std::vector<int> shape;
};

/// One shared weight store partitioned into increment-indexed blocks, plus a
/// snapshot of the output layer per trained increment. Sub-network i reads
/// only blocks with train_stage <= i and output head i.
class SlicedNetwork {
public:
    struct Slot {
        int arch_index = 0;
        LayerSpec spec;
        Tensor weights;            // full width
        Tensor bias;               // full width
        std::vector<int> out_at;   // cumulative out channels/units per increment
        std::vector<int> in_at;    // in channels (conv) / flat in features (dense)
        int out_h = 1, out_w = 1;  // conv output extents
    };

    struct OutputHead {
        Tensor weights;  // [classes, in features at its increment]
        Tensor bias;     // [classes]
    };

    static SlicedNetwork assemble(const Architecture& arch, const IncrementPlan& plan,
                                  std::uint64_t seed);

    const Architecture& arch() const { return arch_; }
    const IncrementPlan& plan() const { return plan_; }
    int num_increments() const { return plan_.num_increments; }
    int trained_up_to() const { return trained_up_to_; }
    int output_classes() const { return plan_.output_classes; }

    SubNetworkView view(int increment) const;
    Tensor forward(int increment, const Tensor& input) const;

    /// Multiply-accumulates of one forward pass of sub-network `increment`.
    std::int64_t mac_count(int increment) const;

    /// Floats stored across all weight blocks, biases and output heads.
    std::int64_t parameter_count() const;

    // -- training-facing surface ------------------------------------------
    struct ForwardTrace {
        std::vector<Tensor> layer_inputs;  // indexed by arch layer; dense entries flattened
        Tensor head_input;
        Tensor scores;
    };

    /// Forward through increments 1..increment. Training passes
    /// allow_untrained to run the increment currently being trained.
    Tensor forward_internal(int increment, const Tensor& input, ForwardTrace* trace,
                            bool allow_untrained) const;

    /// Overwrites stage-`increment` blocks with fan-in-scaled Gaussian values
    /// and appends a fresh output head. Requires increment == trained_up_to + 1.
    void begin_increment(int increment, std::mt19937& rng);
    void finish_increment(int increment);

    int slot_count() const { return static_cast<int>(slots_.size()); }
    Slot& slot(int i) { return slots_[static_cast<std::size_t>(i)]; }
    const Slot& slot(int i) const { return slots_[static_cast<std::size_t>(i)]; }
    OutputHead& head(int increment) { return heads_[static_cast<std::size_t>(increment - 1)]; }
    const OutputHead& head(int increment) const {
        return heads_[static_cast<std::size_t>(increment - 1)];
    }
    int head_count() const { return static_cast<int>(heads_.size()); }
    int head_in_features(int increment) const {
        return output_in_at_[static_cast<std::size_t>(increment - 1)];
    }

    // -- block surface ------------------------------------------------------
    /// All non-empty blocks in canonical order (slot, a, b; bias rows as b=0).
    std::vector<BlockInfo> blocks() const;
    Tensor block_values(const BlockId& id) const;
    void set_block_values(const BlockId& id, const Tensor& values);

    // Serialization helpers (see container.hpp).
    void set_trained_up_to(int t) { trained_up_to_ = t; }
    void push_head(OutputHead h) { heads_.push_back(std::move(h)); }
    const std::string& meta() const { return meta_; }
    void set_meta(std::string m) { meta_ = std::move(m); }

private:
    friend class ContainerCodec;
    static SlicedNetwork allocate(const Architecture& arch, const IncrementPlan& plan);
    void init_stage(int increment, std::mt19937& rng);
    std::vector<int> block_shape(const BlockId& id) const;

    Architecture arch_;
    IncrementPlan plan_;
    std::vector<Slot> slots_;
    std::vector<int> output_in_at_;  // output-layer in features per increment
    std::vector<OutputHead> heads_;
    int trained_up_to_ = 0;
    std::string meta_;
};

/// Bitwise comparison of all stored weights, heads and counters.
bool networks_bit_identical(const SlicedNetwork& a, const SlicedNetwork& b);

}  // namespace icnn

#pragma once

#include <span>
#include <string>
#include <vector>

#include "icnn/dataset.hpp"
#include "icnn/sliced_net.hpp"

namespace icnn {

struct LrSchedule {
    double factor = 0.5;  // multiplied in every `every_epochs` epochs
    int every_epochs = 5;
};

struct HyperParams {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int epochs = 5;
    int batch_size = 32;
    LrSchedule schedule;
    std::uint64_t seed = 1;

    void validate() const;
    double lr_at_epoch(int epoch) const;  // 1-based
};

/// A conventionally trained network at one channel fraction: accuracy upper
/// bound for that size and weight initializer for incremental training.
struct GoldenModel {
    double fraction = 1.0;
    SlicedNetwork network;
    double val_accuracy = 0.0;
};

struct TrainLogRow {
    int increment = 1;
    int epoch = 1;  // cumulative across increments
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
};
using TrainLog = std::vector<TrainLogRow>;

/// Which blocks an SGD step may touch. During increment i exactly the blocks
/// with train_stage == i and output head i are trainable.
class FreezeMask {
public:
    static FreezeMask for_increment(const SlicedNetwork& net, int increment);
    static FreezeMask all_frozen(const SlicedNetwork& net);

    bool trainable(int slot, int out_inc, int in_inc) const;  // in_inc 0 = bias block
    bool head_trainable() const { return head_; }
    int increment() const { return increment_; }

private:
    int increment_ = 0;  // 0 = nothing trainable
    bool head_ = false;
};

/// Momentum buffers for one training increment.
struct SgdState {
    std::vector<Tensor> vel_w, vel_b;  // per slot, full-size
    Tensor head_vel_w, head_vel_b;

    static SgdState create(const SlicedNetwork& net, int increment);
};

/// Momentum SGD with weight decay: v <- mu*v - lr*(g + wd*w); w <- w + v.
void momentum_update(std::span<float> weights, std::span<float> velocity,
                     std::span<const float> gradient, double lr, double momentum,
                     double weight_decay);

/// One mini-batch step on the sub-network of mask.increment(). Frozen blocks
/// receive no update of any kind. Returns the mean batch loss.
float sgd_step(SlicedNetwork& net, const Dataset& data, std::span<const int> batch_indices,
               const FreezeMask& mask, const HyperParams& hp, double lr, SgdState& state);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalResult evaluate(const SlicedNetwork& net, int increment, const Dataset& ds,
                    bool allow_untrained = false);

int argmax(const Tensor& scores);

/// Ordinary training of the fraction-sized architecture; all weights free.
/// val_accuracy records the best epoch.
GoldenModel train_golden(const Architecture& arch, double fraction, const Dataset& train,
                         const Dataset& val, const HyperParams& hp, TrainLog* log = nullptr);

/// Copies the stage-`increment` blocks and output head from the golden model
/// trained at the matching fraction; earlier blocks keep their frozen values.
void init_from_golden(SlicedNetwork& net, const GoldenModel& golden, int increment);

struct IncrementSummary {
    int increment = 0;
    double channel_fraction = 0.0;
    double compute_fraction = 0.0;
    double val_accuracy = 0.0;
};

/// Algorithm: train increment 1, then repeatedly expand by one increment,
/// initialize the new blocks (from goldens when provided, fan-in-scaled
/// random otherwise), and train with everything earlier kept fixed.
SlicedNetwork incremental_train(const Architecture& arch, const IncrementPlan& plan,
                                const std::vector<GoldenModel>& goldens, const Dataset& train,
                                const Dataset& val, const HyperParams& hp,
                                TrainLog* log = nullptr,
                                std::vector<IncrementSummary>* summaries = nullptr);

}  // namespace icnn

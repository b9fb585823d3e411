#pragma once

#include "icnn/cost_model.hpp"
#include "icnn/dataset.hpp"

namespace icnn {

/// Margins are softmax-probability gaps by default so thresholds live in
/// [0,1]; the raw mode uses the absolute score gap instead.
enum class MarginMode { softmax_probs, raw_scores };

/// Top-1 minus top-2 of the softmaxed scores (or |s1 - s2| raw), computed in
/// double precision.
double score_margin(const Tensor& scores, MarginMode mode = MarginMode::softmax_probs);

/// Per-increment score-margin thresholds; theta[N-1] is defined as 0.
struct ThresholdSet {
    std::vector<double> theta;

    /// Builds from the N-1 leading thresholds, appending the final 0.
    static ThresholdSet of(std::vector<double> leading, int num_increments);
    static ThresholdSet uniform(double value, int num_increments);

    int increments() const { return static_cast<int>(theta.size()); }
    double at(int increment) const { return theta[static_cast<std::size_t>(increment - 1)]; }
    void validate() const;
};

/// Stop rule shared by inference, calibration and the closed forms. A
/// threshold of exactly 1 always escalates: float32 softmax saturates to a
/// margin of 1.0 for large score gaps, so "margin >= 1" would otherwise
/// swallow confident inputs that the all-ones endpoint contract sends to the
/// full network.
inline bool margin_clears(double margin, double theta) {
    return theta < 1.0 && margin >= theta;
}

struct CascadeResult {
    int predicted_class = -1;
    int stop_increment = 0;
    std::vector<double> margins_seen;
    std::int64_t macs_spent = 0;
    double energy_spent_uJ = 0.0;
};

/// Runs increments 1,2,... until the margin clears its threshold or the full
/// network is reached; the returned prediction is the last increment's.
/// Cost is cumulative (each escalation reruns from scratch); with
/// reuse_features the later stages are charged only their cost delta.
CascadeResult cascade_infer(const SlicedNetwork& net, const Tensor& input,
                            const ThresholdSet& thresholds, const CostModel& cost,
                            MarginMode mode = MarginMode::softmax_probs,
                            bool reuse_features = false);

/// Margins, predictions and correctness of every increment on every sample;
/// measured once, reused by calibration and the closed-form checks.
struct MarginTable {
    int n = 0;
    int increments = 0;
    std::vector<double> margins;     // [sample * increments + (i-1)]
    std::vector<std::uint8_t> right;  // same layout
    std::vector<int> predicted;       // same layout

    double margin(int sample, int increment) const {
        return margins[static_cast<std::size_t>(sample) * increments + increment - 1];
    }
    bool correct(int sample, int increment) const {
        return right[static_cast<std::size_t>(sample) * increments + increment - 1] != 0;
    }
    int prediction(int sample, int increment) const {
        return predicted[static_cast<std::size_t>(sample) * increments + increment - 1];
    }

    /// First increment whose margin clears its threshold (N if none).
    int stop_increment(int sample, const ThresholdSet& thresholds) const;

    static MarginTable measure(const SlicedNetwork& net, const Dataset& ds,
                               MarginMode mode = MarginMode::softmax_probs);
};

/// Greedy per-increment grid search maximizing energy-saving x accuracy on
/// the validation set, later increments held at the escalate sentinel.
/// Ties resolve to the smallest threshold.
ThresholdSet calibrate_thresholds(const SlicedNetwork& net, const Dataset& val,
                                  const CostModel& cost, double grid_step = 0.05,
                                  MarginMode mode = MarginMode::softmax_probs);

struct MarginHistogram {
    std::vector<std::int64_t> correct_counts;
    std::vector<std::int64_t> wrong_counts;
};

/// Margin histograms over [0,1] conditioned on sub-network-i correctness.
MarginHistogram margin_histograms(const SlicedNetwork& net, const Dataset& ds, int increment,
                                  int bins, MarginMode mode = MarginMode::softmax_probs);

struct CascadeEvalRow {
    int index = 0;
    int stop_increment = 0;
    double margin = 0.0;
    bool correct = false;
    std::int64_t macs = 0;
    double energy_uJ = 0.0;
};

struct CascadeSummary {
    int n = 0;
    double accuracy = 0.0;
    double mean_energy_uJ = 0.0;
    double full_energy_uJ = 0.0;
    double energy_savings = 0.0;  // 1 - mean/full
    double mean_macs = 0.0;
    double full_macs = 0.0;
    double mac_savings = 0.0;
    double mean_deployed_fraction = 0.0;  // mean_macs / full_macs
};

struct CascadeEvaluation {
    std::vector<CascadeEvalRow> rows;
    CascadeSummary summary;
};

CascadeEvaluation evaluate_cascade(const SlicedNetwork& net, const Dataset& ds,
                                   const ThresholdSet& thresholds, const CostModel& cost,
                                   MarginMode mode = MarginMode::softmax_probs);

}  // namespace icnn

#pragma once

#include <memory>
#include <utility>

#include "icnn/cascade.hpp"
#include "icnn/training.hpp"

namespace icnn {

/// Validation accuracy as a function of deployed compute fraction
/// (MAC ratio), interpolated monotone piecewise-linearly with clamped
/// extrapolation.
struct AccuracyCurve {
    std::vector<std::pair<double, double>> samples;  // (fraction, accuracy), sorted

    double eval(double fraction) const;
    static AccuracyCurve from_samples(std::vector<std::pair<double, double>> samples);
};

/// Pool-adjacent-violators projection onto non-decreasing sequences
/// (least squares).
std::vector<double> isotonic_increasing(std::vector<double> values);

/// Builds the curve from golden models: channel fractions map to compute
/// fractions through the MAC ratio, accuracies are isotonically projected.
AccuracyCurve fit_accuracy_curve(const std::vector<GoldenModel>& goldens,
                                 const Architecture& arch);

/// P(margin clears the threshold at increment i), p[N-1] == 1 by definition.
struct StopProbabilities {
    std::vector<double> p;

    void validate() const;  // in [0,1], non-decreasing, last == 1
};

/// Expected deployed compute fraction per input:
/// E = sum_i (sum_{j<=i} f_j) * (p_i - p_{i-1}) with p_0 = 0.
double expected_fraction(const std::vector<double>& compute_fractions,
                         const StopProbabilities& p);

/// Conditional probabilities of the margin clearing a threshold, keyed by an
/// increment's compute fraction. Implementations account for the theta = 0
/// (always clears) and theta = 1 (never clears) boundary semantics.
class MarginModel {
public:
    virtual ~MarginModel() = default;
    virtual double p_clear_given_correct(double fraction, double theta) const = 0;
    virtual double p_clear_given_wrong(double fraction, double theta) const = 0;
    /// True when the model carries the full per-sample margin table and can
    /// evaluate joint stop events exactly.
    virtual bool has_joint() const { return false; }
};

/// The sweep assumption: a correct sub-network always clears, a wrong one
/// never does (inside the open threshold interval).
class IdealizedMarginModel : public MarginModel {
public:
    double p_clear_given_correct(double, double theta) const override {
        return theta >= 1.0 ? 0.0 : 1.0;
    }
    double p_clear_given_wrong(double, double theta) const override {
        return theta >= 1.0 ? 0.0 : (theta <= 0.0 ? 1.0 : 0.0);
    }
};

/// Conditional clearing probabilities counted from a measured margin table.
class EmpiricalMarginModel : public MarginModel {
public:
    EmpiricalMarginModel(MarginTable table, std::vector<double> compute_fractions);

    double p_clear_given_correct(double fraction, double theta) const override;
    double p_clear_given_wrong(double fraction, double theta) const override;
    bool has_joint() const override { return true; }

    const MarginTable& table() const { return table_; }
    int increment_of(double fraction) const;

private:
    MarginTable table_;
    std::vector<double> fractions_;
};

/// P(SM > theta | f) = P(correct) P(clear|correct) + P(wrong) P(clear|wrong).
double stop_probability(double fraction, double theta, const AccuracyCurve& curve,
                        const MarginModel& cond);

/// Expected cascade accuracy under the stop-and-correct chain: stop at the
/// first increment whose margin clears, increment N unconditional. Margin
/// models without joint data combine increments independently; a joint model
/// evaluates the chain exactly on its measured table (curve unused then).
double expected_accuracy(const std::vector<double>& compute_fractions,
                         const ThresholdSet& thresholds, const AccuracyCurve& curve,
                         const MarginModel& cond);

/// The T_i recursion exactly as printed in the source analysis, kept for
/// side-by-side comparison with the chain semantics.
double expected_accuracy_printed_recursion(const std::vector<double>& compute_fractions,
                                           const ThresholdSet& thresholds,
                                           const AccuracyCurve& curve, const MarginModel& cond);

/// Cumulative stop distribution of the measured cascade under thresholds.
StopProbabilities empirical_stop_probabilities(const MarginTable& table,
                                               const ThresholdSet& thresholds);

/// Mean stop-and-correct mass of the measured cascade (exact counting).
double empirical_cascade_accuracy(const MarginTable& table, const ThresholdSet& thresholds);

struct CascadePlan {
    int increments = 1;
    std::vector<double> channel_fractions;
    std::vector<double> compute_fractions;
    ThresholdSet thresholds;  // empty until calibrated
    double predicted_fraction = 1.0;  // E
    double predicted_accuracy = 0.0;
};

/// Enumerates N = 1..max_increments and increasing channel-fraction subsets
/// of the grid ending at 1.0, scores each with the idealized model, and
/// returns the lexicographic minimizer of (E, 1 - accuracy); ties resolve to
/// smaller N, then smaller total compute.
CascadePlan sweep_plan(const AccuracyCurve& curve, const Architecture& arch, double f_min,
                       std::vector<double> channel_grid, int max_increments);

// Plan files ({N, fractions, thresholds, predictions, curve samples} JSON).
std::string plan_to_json_string(const CascadePlan& plan, const AccuracyCurve* curve,
                                const std::string& config_hash);
CascadePlan plan_from_json_string(const std::string& text, AccuracyCurve* curve_out = nullptr,
                                  std::string* config_hash_out = nullptr);

}  // namespace icnn

#include "icnn/cascade.hpp"

#include <algorithm>
#include <cmath>

#include "icnn/training.hpp"

namespace icnn {

double score_margin(const Tensor& scores, MarginMode mode) {
    if (scores.size() < 2) throw DimensionError("score margin needs at least two scores");
    double top1 = -1e300, top2 = -1e300;
    if (mode == MarginMode::raw_scores) {
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const double v = scores[i];
            if (v > top1) {
                top2 = top1;
                top1 = v;
            } else if (v > top2) {
                top2 = v;
            }
        }
        return top1 - top2;
    }
    // softmax in double precision, then p1 - p2
    double mx = scores[0];
    for (std::size_t i = 1; i < scores.size(); ++i) {
        mx = std::max(mx, static_cast<double>(scores[i]));
    }
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double e = std::exp(static_cast<double>(scores[i]) - mx);
        z += e;
        if (e > top1) {
            top2 = top1;
            top1 = e;
        } else if (e > top2) {
            top2 = e;
        }
    }
    return (top1 - top2) / z;
}

ThresholdSet ThresholdSet::of(std::vector<double> leading, int num_increments) {
    if (static_cast<int>(leading.size()) != num_increments - 1) {
        throw ArgumentError("expected one threshold per increment before the last");
    }
    ThresholdSet t;
    t.theta = std::move(leading);
    t.theta.push_back(0.0);
    t.validate();
    return t;
}

ThresholdSet ThresholdSet::uniform(double value, int num_increments) {
    std::vector<double> leading(static_cast<std::size_t>(num_increments - 1), value);
    return of(std::move(leading), num_increments);
}

void ThresholdSet::validate() const {
    if (theta.empty()) throw ArgumentError("threshold set is empty");
    if (theta.back() != 0.0) throw ArgumentError("final threshold must be 0");
    for (double t : theta) {
        if (!(t >= 0.0) || t > 1.0) throw ArgumentError("thresholds must lie in [0,1]");
    }
}

CascadeResult cascade_infer(const SlicedNetwork& net, const Tensor& input,
                            const ThresholdSet& thresholds, const CostModel& cost,
                            MarginMode mode, bool reuse_features) {
    thresholds.validate();
    const int n = net.trained_up_to();
    if (n < 1) throw IncrementError("network has no trained increments");
    if (thresholds.increments() != n) {
        throw ArgumentError("threshold count disagrees with increments");
    }
    CascadeResult r;
    for (int i = 1; i <= n; ++i) {
        const Tensor scores = net.forward(i, input);
        const double margin = score_margin(scores, mode);
        r.margins_seen.push_back(margin);
        const std::int64_t stage_macs =
            reuse_features && i > 1 ? net.mac_count(i) - net.mac_count(i - 1) : net.mac_count(i);
        const double stage_energy = reuse_features && i > 1
                                        ? cost.energy(i) - cost.energy(i - 1)
                                        : cost.energy(i);
        r.macs_spent += stage_macs;
        r.energy_spent_uJ += stage_energy + cost.margin_unit_energy_uJ;
        r.predicted_class = argmax(scores);
        r.stop_increment = i;
        if (i == n || margin_clears(margin, thresholds.at(i))) break;
    }
    return r;
}

int MarginTable::stop_increment(int sample, const ThresholdSet& thresholds) const {
    for (int i = 1; i < increments; ++i) {
        if (margin_clears(margin(sample, i), thresholds.at(i))) return i;
    }
    return increments;
}

MarginTable MarginTable::measure(const SlicedNetwork& net, const Dataset& ds, MarginMode mode) {
    const int n_incr = net.trained_up_to();
    if (n_incr < 1) throw IncrementError("network has no trained increments");
    MarginTable t;
    t.n = ds.size();
    t.increments = n_incr;
    t.margins.resize(static_cast<std::size_t>(t.n) * n_incr);
    t.right.resize(static_cast<std::size_t>(t.n) * n_incr);
    t.predicted.resize(static_cast<std::size_t>(t.n) * n_incr);
    for (int s = 0; s < t.n; ++s) {
        const Tensor x = ds.sample(s);
        for (int i = 1; i <= n_incr; ++i) {
            const Tensor scores = net.forward(i, x);
            const std::size_t at = static_cast<std::size_t>(s) * n_incr + i - 1;
            t.margins[at] = score_margin(scores, mode);
            t.predicted[at] = argmax(scores);
            t.right[at] = t.predicted[at] == ds.label(s) ? 1 : 0;
        }
    }
    return t;
}

namespace {

struct PlanScore {
    double objective = 0.0;
    double accuracy = 0.0;
    double mean_energy = 0.0;
};

// Cascade outcome aggregated over a measured margin table; cost is the
// cumulative no-reuse model, matching cascade_infer's default.
PlanScore score_thresholds(const MarginTable& table, const ThresholdSet& thresholds,
                           const CostModel& cost) {
    const int n_incr = table.increments;
    std::vector<double> stage_energy(static_cast<std::size_t>(n_incr) + 1, 0.0);
    for (int i = 1; i <= n_incr; ++i) {
        stage_energy[static_cast<std::size_t>(i)] =
            stage_energy[static_cast<std::size_t>(i - 1)] + cost.energy(i) +
            cost.margin_unit_energy_uJ;
    }
    double energy_sum = 0.0;
    std::int64_t correct = 0;
    for (int s = 0; s < table.n; ++s) {
        const int stop = table.stop_increment(s, thresholds);
        energy_sum += stage_energy[static_cast<std::size_t>(stop)];
        correct += table.correct(s, stop) ? 1 : 0;
    }
    PlanScore ps;
    ps.accuracy = static_cast<double>(correct) / table.n;
    ps.mean_energy = energy_sum / table.n;
    const double savings = 1.0 - ps.mean_energy / cost.energy(n_incr);
    ps.objective = savings * ps.accuracy;
    return ps;
}

}  // namespace

ThresholdSet calibrate_thresholds(const SlicedNetwork& net, const Dataset& val,
                                  const CostModel& cost, double grid_step, MarginMode mode) {
    if (!(grid_step > 0.0) || grid_step > 0.5) {
        throw ArgumentError("grid step must lie in (0, 0.5]");
    }
    if (val.size() == 0) throw ArgumentError("calibration set is empty");
    const int n_incr = net.trained_up_to();
    cost.validate();
    if (cost.increments() < n_incr) throw ArgumentError("cost model shorter than increments");
    const MarginTable table = MarginTable::measure(net, val, mode);

    std::vector<double> grid;
    for (int k = 0;; ++k) {
        const double v = k * grid_step;
        if (v >= 1.0) break;
        grid.push_back(v);
    }
    grid.push_back(1.0);

    // Greedy in increment order; undecided later thresholds held at the
    // escalate sentinel.
    std::vector<double> chosen;
    for (int i = 1; i < n_incr; ++i) {
        double best_theta = grid.front();
        double best_objective = -1e300;
        for (double theta : grid) {
            std::vector<double> leading = chosen;
            leading.push_back(theta);
            leading.resize(static_cast<std::size_t>(n_incr - 1), 1.0);
            const ThresholdSet candidate = ThresholdSet::of(leading, n_incr);
            const double objective = score_thresholds(table, candidate, cost).objective;
            if (objective > best_objective) {
                best_objective = objective;
                best_theta = theta;
            }
        }
        chosen.push_back(best_theta);
    }
    return ThresholdSet::of(chosen, n_incr);
}

MarginHistogram margin_histograms(const SlicedNetwork& net, const Dataset& ds, int increment,
                                  int bins, MarginMode mode) {
    if (bins < 2) throw ArgumentError("histogram needs at least two bins");
    if (increment < 1 || increment > net.trained_up_to()) {
        throw IncrementError("histogram increment out of range");
    }
    MarginHistogram h;
    h.correct_counts.assign(static_cast<std::size_t>(bins), 0);
    h.wrong_counts.assign(static_cast<std::size_t>(bins), 0);
    for (int s = 0; s < ds.size(); ++s) {
        const Tensor scores = net.forward(increment, ds.sample(s));
        const double margin = score_margin(scores, mode);
        int bin = static_cast<int>(std::floor(margin * bins));
        bin = std::clamp(bin, 0, bins - 1);
        if (argmax(scores) == ds.label(s)) {
            ++h.correct_counts[static_cast<std::size_t>(bin)];
        } else {
            ++h.wrong_counts[static_cast<std::size_t>(bin)];
        }
    }
    return h;
}

CascadeEvaluation evaluate_cascade(const SlicedNetwork& net, const Dataset& ds,
                                   const ThresholdSet& thresholds, const CostModel& cost,
                                   MarginMode mode) {
    CascadeEvaluation ev;
    const int n_incr = net.trained_up_to();
    double energy_sum = 0.0;
    double mac_sum = 0.0;
    std::int64_t correct = 0;
    for (int i = 0; i < ds.size(); ++i) {
        const CascadeResult r = cascade_infer(net, ds.sample(i), thresholds, cost, mode);
        CascadeEvalRow row;
        row.index = i;
        row.stop_increment = r.stop_increment;
        row.margin = r.margins_seen.back();
        row.correct = r.predicted_class == ds.label(i);
        row.macs = r.macs_spent;
        row.energy_uJ = r.energy_spent_uJ;
        ev.rows.push_back(row);
        energy_sum += r.energy_spent_uJ;
        mac_sum += static_cast<double>(r.macs_spent);
        correct += row.correct ? 1 : 0;
    }
    CascadeSummary& s = ev.summary;
    s.n = ds.size();
    s.accuracy = ds.size() > 0 ? static_cast<double>(correct) / ds.size() : 0.0;
    s.mean_energy_uJ = ds.size() > 0 ? energy_sum / ds.size() : 0.0;
    s.full_energy_uJ = cost.energy(n_incr);
    s.energy_savings = 1.0 - s.mean_energy_uJ / s.full_energy_uJ;
    s.mean_macs = ds.size() > 0 ? mac_sum / ds.size() : 0.0;
    s.full_macs = static_cast<double>(net.mac_count(n_incr));
    s.mac_savings = 1.0 - s.mean_macs / s.full_macs;
    s.mean_deployed_fraction = s.mean_macs / s.full_macs;
    return ev;
}

}  // namespace icnn

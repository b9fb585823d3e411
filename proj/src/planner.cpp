#include "icnn/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace icnn {

using nlohmann::json;

double AccuracyCurve::eval(double fraction) const {
    if (fraction <= samples.front().first) return samples.front().second;
    if (fraction >= samples.back().first) return samples.back().second;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (fraction <= samples[i].first) {
            const auto& [f0, a0] = samples[i - 1];
            const auto& [f1, a1] = samples[i];
            const double t = (fraction - f0) / (f1 - f0);
            return a0 + t * (a1 - a0);
        }
    }
    return samples.back().second;
}

AccuracyCurve AccuracyCurve::from_samples(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2) throw ArgumentError("accuracy curve needs at least two samples");
    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& [f, a] = samples[i];
        if (!(f > 0.0) || f > 1.0) throw ArgumentError("curve fractions must lie in (0,1]");
        if (!(a >= 0.0) || a > 1.0) throw ArgumentError("curve accuracies must lie in [0,1]");
        if (i > 0 && f == samples[i - 1].first) {
            throw ArgumentError("duplicate curve fraction " + std::to_string(f));
        }
        if (i > 0 && a < samples[i - 1].second) {
            throw ArgumentError("curve accuracies must be non-decreasing (apply the isotonic "
                                "projection first)");
        }
    }
    if (samples.back().first != 1.0) throw ArgumentError("curve must include fraction 1");
    AccuracyCurve c;
    c.samples = std::move(samples);
    return c;
}

std::vector<double> isotonic_increasing(std::vector<double> values) {
    // Pool adjacent violators; each pool carries its mean and its weight.
    std::vector<double> mean, weight;
    std::vector<int> count;
    for (double v : values) {
        mean.push_back(v);
        weight.push_back(1.0);
        count.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
            const double w = weight[weight.size() - 2] + weight.back();
            const double m = (mean[mean.size() - 2] * weight[weight.size() - 2] +
                              mean.back() * weight.back()) /
                             w;
            mean.pop_back();
            weight.pop_back();
            const int c = count.back();
            count.pop_back();
            mean.back() = m;
            weight.back() = w;
            count.back() += c;
        }
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        out.insert(out.end(), static_cast<std::size_t>(count[i]), mean[i]);
    }
    return out;
}

AccuracyCurve fit_accuracy_curve(const std::vector<GoldenModel>& goldens,
                                 const Architecture& arch) {
    if (goldens.size() < 2) throw ArgumentError("curve fit needs at least two golden models");
    std::vector<std::pair<double, double>> pts;
    bool has_full = false;
    for (const GoldenModel& g : goldens) {
        pts.emplace_back(compute_fraction_of(arch, g.fraction), g.val_accuracy);
        has_full = has_full || g.fraction == 1.0;
    }
    if (!has_full) throw ArgumentError("curve fit needs a golden model at fraction 1");
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].first == pts[i - 1].first) {
            throw ArgumentError("duplicate golden fractions");
        }
    }
    std::vector<double> acc;
    for (const auto& [f, a] : pts) acc.push_back(a);
    acc = isotonic_increasing(std::move(acc));
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i].second = acc[i];
    return AccuracyCurve::from_samples(std::move(pts));
}

void StopProbabilities::validate() const {
    if (p.empty()) throw ArgumentError("stop probabilities are empty");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0) || p[i] > 1.0) {
            throw ArgumentError("stop probabilities must lie in [0,1]");
        }
        if (i > 0 && p[i] < p[i - 1]) {
            throw ArgumentError("stop probabilities must be non-decreasing");
        }
    }
    if (p.back() != 1.0) throw ArgumentError("final stop probability must be 1");
}

double expected_fraction(const std::vector<double>& compute_fractions,
                         const StopProbabilities& p) {
    p.validate();
    if (compute_fractions.size() != p.p.size()) {
        throw ArgumentError("fraction and probability counts disagree");
    }
    for (std::size_t i = 0; i < compute_fractions.size(); ++i) {
        if (!(compute_fractions[i] > 0.0) || compute_fractions[i] > 1.0) {
            throw ArgumentError("compute fractions must lie in (0,1]");
        }
        if (i > 0 && compute_fractions[i] <= compute_fractions[i - 1]) {
            throw ArgumentError("compute fractions must be strictly increasing");
        }
    }
    double e = 0.0;
    double cum = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < compute_fractions.size(); ++i) {
        cum += compute_fractions[i];
        e += cum * (p.p[i] - prev);
        prev = p.p[i];
    }
    return e;
}

EmpiricalMarginModel::EmpiricalMarginModel(MarginTable table,
                                           std::vector<double> compute_fractions)
    : table_(std::move(table)), fractions_(std::move(compute_fractions)) {
    if (static_cast<int>(fractions_.size()) != table_.increments) {
        throw ArgumentError("fraction count disagrees with margin table increments");
    }
}

int EmpiricalMarginModel::increment_of(double fraction) const {
    for (std::size_t i = 0; i < fractions_.size(); ++i) {
        if (std::abs(fractions_[i] - fraction) <= 1e-12) return static_cast<int>(i) + 1;
    }
    throw ArgumentError("no increment measured at compute fraction " + std::to_string(fraction));
}

double EmpiricalMarginModel::p_clear_given_correct(double fraction, double theta) const {
    const int inc = increment_of(fraction);
    std::int64_t n = 0, k = 0;
    for (int s = 0; s < table_.n; ++s) {
        if (!table_.correct(s, inc)) continue;
        ++n;
        if (margin_clears(table_.margin(s, inc), theta)) ++k;
    }
    return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n);
}

double EmpiricalMarginModel::p_clear_given_wrong(double fraction, double theta) const {
    const int inc = increment_of(fraction);
    std::int64_t n = 0, k = 0;
    for (int s = 0; s < table_.n; ++s) {
        if (table_.correct(s, inc)) continue;
        ++n;
        if (margin_clears(table_.margin(s, inc), theta)) ++k;
    }
    return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n);
}

double stop_probability(double fraction, double theta, const AccuracyCurve& curve,
                        const MarginModel& cond) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ArgumentError("fraction must lie in (0,1]");
    }
    if (!(theta >= 0.0) || theta > 1.0) throw ArgumentError("theta must lie in [0,1]");
    const double pc = curve.eval(fraction);
    return pc * cond.p_clear_given_correct(fraction, theta) +
           (1.0 - pc) * cond.p_clear_given_wrong(fraction, theta);
}

double expected_accuracy(const std::vector<double>& compute_fractions,
                         const ThresholdSet& thresholds, const AccuracyCurve& curve,
                         const MarginModel& cond) {
    thresholds.validate();
    const int n = static_cast<int>(compute_fractions.size());
    if (thresholds.increments() != n) {
        throw ArgumentError("threshold count disagrees with fractions");
    }
    if (cond.has_joint()) {
        const auto* emp = dynamic_cast<const EmpiricalMarginModel*>(&cond);
        if (emp != nullptr && emp->table().increments == n) {
            return empirical_cascade_accuracy(emp->table(), thresholds);
        }
    }
    double reach = 1.0;
    double acc = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double f = compute_fractions[static_cast<std::size_t>(i - 1)];
        const double pc = curve.eval(f);
        if (i == n) {
            acc += reach * pc;
            break;
        }
        const double theta = thresholds.at(i);
        const double stop_correct = pc * cond.p_clear_given_correct(f, theta);
        const double stop_any =
            stop_correct + (1.0 - pc) * cond.p_clear_given_wrong(f, theta);
        acc += reach * stop_correct;
        reach *= 1.0 - stop_any;
    }
    return acc;
}

double expected_accuracy_printed_recursion(const std::vector<double>& compute_fractions,
                                           const ThresholdSet& thresholds,
                                           const AccuracyCurve& curve, const MarginModel& cond) {
    thresholds.validate();
    const int n = static_cast<int>(compute_fractions.size());
    if (thresholds.increments() != n) {
        throw ArgumentError("threshold count disagrees with fractions");
    }
    if (n == 1) return curve.eval(compute_fractions.back());
    double t = curve.eval(compute_fractions.back());  // T_N
    for (int i = n - 1; i >= 1; --i) {
        const double f = compute_fractions[static_cast<std::size_t>(i - 1)];
        const double theta = thresholds.at(i);
        const double miss_given_correct = 1.0 - cond.p_clear_given_correct(f, theta);
        const double miss_any = 1.0 - stop_probability(f, theta, curve, cond);
        t = miss_given_correct + miss_any * t;
    }
    return t;
}

StopProbabilities empirical_stop_probabilities(const MarginTable& table,
                                               const ThresholdSet& thresholds) {
    thresholds.validate();
    if (thresholds.increments() != table.increments) {
        throw ArgumentError("threshold count disagrees with margin table");
    }
    if (table.n == 0) throw ArgumentError("margin table is empty");
    std::vector<std::int64_t> stop_at(static_cast<std::size_t>(table.increments) + 1, 0);
    for (int s = 0; s < table.n; ++s) {
        ++stop_at[static_cast<std::size_t>(table.stop_increment(s, thresholds))];
    }
    StopProbabilities p;
    std::int64_t cum = 0;
    for (int i = 1; i <= table.increments; ++i) {
        cum += stop_at[static_cast<std::size_t>(i)];
        p.p.push_back(static_cast<double>(cum) / static_cast<double>(table.n));
    }
    p.p.back() = 1.0;
    return p;
}

double empirical_cascade_accuracy(const MarginTable& table, const ThresholdSet& thresholds) {
    thresholds.validate();
    if (table.n == 0) throw ArgumentError("margin table is empty");
    std::int64_t correct = 0;
    for (int s = 0; s < table.n; ++s) {
        correct += table.correct(s, table.stop_increment(s, thresholds)) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(table.n);
}

namespace {

struct SweepCandidate {
    double e = 0.0;
    double acc = 0.0;
    std::vector<double> channel;
    std::vector<double> compute;

    // (E, 1-acc, N, sum f, F) lexicographic
    bool better_than(const SweepCandidate& o) const {
        if (e != o.e) return e < o.e;
        if (acc != o.acc) return acc > o.acc;
        if (channel.size() != o.channel.size()) return channel.size() < o.channel.size();
        const double s = std::accumulate(compute.begin(), compute.end(), 0.0);
        const double os = std::accumulate(o.compute.begin(), o.compute.end(), 0.0);
        if (s != os) return s < os;
        return compute < o.compute;
    }
};

}  // namespace

CascadePlan sweep_plan(const AccuracyCurve& curve, const Architecture& arch, double f_min,
                       std::vector<double> channel_grid, int max_increments) {
    if (!(f_min > 0.0) || f_min > 1.0) throw ArgumentError("f_min must lie in (0,1]");
    if (max_increments < 1) throw ArgumentError("max increments must be >= 1");
    std::sort(channel_grid.begin(), channel_grid.end());
    channel_grid.erase(std::unique(channel_grid.begin(), channel_grid.end()),
                       channel_grid.end());
    for (double c : channel_grid) {
        if (!(c > 0.0) || c > 1.0) throw ArgumentError("grid fractions must lie in (0,1]");
    }
    if (channel_grid.empty() || channel_grid.back() != 1.0) channel_grid.push_back(1.0);

    // Feasible single fractions: compute fraction >= f_min, strictly below 1.
    std::vector<std::pair<double, double>> feasible;  // (channel, compute)
    for (double c : channel_grid) {
        if (c == 1.0) continue;
        const double f = compute_fraction_of(arch, c);
        if (f >= f_min && f < 1.0) feasible.emplace_back(c, f);
    }
    std::sort(feasible.begin(), feasible.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });

    SweepCandidate best;
    bool have_best = false;
    std::vector<int> pick;

    const auto consider = [&](const std::vector<int>& idx) {
        SweepCandidate cand;
        for (int k : idx) {
            cand.channel.push_back(feasible[static_cast<std::size_t>(k)].first);
            cand.compute.push_back(feasible[static_cast<std::size_t>(k)].second);
        }
        cand.channel.push_back(1.0);
        cand.compute.push_back(1.0);
        for (std::size_t i = 1; i < cand.compute.size(); ++i) {
            if (cand.compute[i] <= cand.compute[i - 1]) return;  // degenerate after rounding
        }
        StopProbabilities p;
        for (std::size_t i = 0; i + 1 < cand.compute.size(); ++i) {
            p.p.push_back(curve.eval(cand.compute[i]));
        }
        p.p.push_back(1.0);
        cand.e = expected_fraction(cand.compute, p);
        double miss = 1.0;
        for (double f : cand.compute) miss *= 1.0 - curve.eval(f);
        cand.acc = 1.0 - miss;
        if (!have_best || cand.better_than(best)) {
            best = std::move(cand);
            have_best = true;
        }
    };

    // All strictly increasing prefixes of size < max_increments over the
    // feasible fractions; the final fraction is always 1.
    const int m = static_cast<int>(feasible.size());
    const auto enumerate = [&](auto&& self, int start, int remaining) -> void {
        consider(pick);
        if (remaining == 0) return;
        for (int k = start; k < m; ++k) {
            pick.push_back(k);
            self(self, k + 1, remaining - 1);
            pick.pop_back();
        }
    };
    enumerate(enumerate, 0, max_increments - 1);

    if (!have_best) throw PlanError("no feasible cascade plan on the given grid");
    CascadePlan plan;
    plan.increments = static_cast<int>(best.channel.size());
    plan.channel_fractions = best.channel;
    plan.compute_fractions = best.compute;
    plan.predicted_fraction = best.e;
    plan.predicted_accuracy = best.acc;
    return plan;
}

std::string plan_to_json_string(const CascadePlan& plan, const AccuracyCurve* curve,
                                const std::string& config_hash) {
    json j;
    j["config_hash"] = config_hash;
    j["N"] = plan.increments;
    j["channel_fractions"] = plan.channel_fractions;
    j["compute_fractions"] = plan.compute_fractions;
    if (plan.thresholds.theta.empty()) {
        j["thresholds"] = nullptr;
    } else {
        j["thresholds"] = plan.thresholds.theta;
    }
    j["predicted_E"] = plan.predicted_fraction;
    j["predicted_acc"] = plan.predicted_accuracy;
    json samples = json::array();
    if (curve != nullptr) {
        for (const auto& [f, a] : curve->samples) samples.push_back({f, a});
    }
    j["curve_samples"] = samples;
    return j.dump(2);
}

CascadePlan plan_from_json_string(const std::string& text, AccuracyCurve* curve_out,
                                  std::string* config_hash_out) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError("plan file is not valid JSON", 0);
    CascadePlan plan;
    try {
        plan.increments = j.at("N").get<int>();
        plan.channel_fractions = j.at("channel_fractions").get<std::vector<double>>();
        plan.compute_fractions = j.at("compute_fractions").get<std::vector<double>>();
        if (j.contains("thresholds") && !j["thresholds"].is_null()) {
            plan.thresholds.theta = j["thresholds"].get<std::vector<double>>();
            plan.thresholds.validate();
        }
        plan.predicted_fraction = j.at("predicted_E").get<double>();
        plan.predicted_accuracy = j.at("predicted_acc").get<double>();
        if (curve_out != nullptr && j.contains("curve_samples") &&
            j["curve_samples"].is_array() && !j["curve_samples"].empty()) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& s : j["curve_samples"]) {
                pts.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
            }
            *curve_out = AccuracyCurve::from_samples(std::move(pts));
        }
        if (config_hash_out != nullptr) {
            *config_hash_out = j.value("config_hash", std::string());
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("plan file field error: ") + e.what(), 0);
    }
    return plan;
}

}  // namespace icnn

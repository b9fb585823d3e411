#include "icnn/controller.hpp"

#include <cstdio>
#include <fstream>

#include "icnn/training.hpp"

namespace icnn {

void observe_cost(ControllerState& state, double energy_uJ, double time_us, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0) throw ArgumentError("EMA alpha must lie in (0,1]");
    if (!state.has_measurement) {
        state.sys_energy = energy_uJ;
        state.sys_delay = time_us;
        state.has_measurement = true;
    } else {
        state.sys_energy = alpha * energy_uJ + (1.0 - alpha) * state.sys_energy;
        state.sys_delay = alpha * time_us + (1.0 - alpha) * state.sys_delay;
    }
}

int controller_step(ControllerState& state, double energy_budget_uJ, double delay_budget_us,
                    int max_capacity) {
    const bool first = !state.has_budget;
    const bool changed = !first && (energy_budget_uJ != state.last_energy_budget ||
                                    delay_budget_us != state.last_delay_budget);
    const bool decreased = changed && (energy_budget_uJ < state.last_energy_budget ||
                                       delay_budget_us < state.last_delay_budget);
    const bool violated = state.has_measurement && (state.sys_energy > energy_budget_uJ ||
                                                    state.sys_delay > delay_budget_us);
    if (changed) {
        if (decreased) {
            if (violated && state.capacity > 1) --state.capacity;
        } else {
            state.capacity = max_capacity;
        }
    } else {
        if (violated && state.capacity > 1) --state.capacity;
    }
    state.last_energy_budget = energy_budget_uJ;
    state.last_delay_budget = delay_budget_us;
    state.has_budget = true;
    return state.capacity;
}

SimLog simulate(const SlicedNetwork& net, const Dataset& stream, const BudgetTrace& trace,
                const CostModel& cost, double alpha) {
    trace.validate();
    cost.validate();
    const int n_incr = net.trained_up_to();
    if (n_incr < 1) throw IncrementError("network has no trained increments");
    if (cost.increments() < n_incr) throw ArgumentError("cost model shorter than increments");

    ControllerState state;
    state.capacity = n_incr;
    SimLog log;
    log.reserve(static_cast<std::size_t>(stream.size()));
    for (int i = 0; i < stream.size(); ++i) {
        const BudgetPoint budget = trace.at(i);
        SimLogRow row;
        row.step = i;
        row.capacity = state.capacity;
        row.energy_budget_uJ = budget.energy_budget_uJ;
        row.delay_budget_us = budget.delay_budget_us;
        const Tensor scores = net.forward(state.capacity, stream.sample(i));
        row.correct = argmax(scores) == stream.label(i);
        row.energy_spent_uJ = cost.energy(state.capacity);
        row.delay_spent_us = cost.time(state.capacity);
        observe_cost(state, row.energy_spent_uJ, row.delay_spent_us, alpha);
        controller_step(state, budget.energy_budget_uJ, budget.delay_budget_us, n_incr);
        log.push_back(row);
    }
    return log;
}

void sim_log_to_csv_file(const SimLog& log, const std::string& path,
                         const std::string& config_hash) {
    std::ofstream f(path);
    if (!f) throw ArgumentError("cannot open " + path + " for writing");
    if (!config_hash.empty()) f << "# config_hash=" << config_hash << "\n";
    f << "step,capacity,energy_spent_uJ,energy_budget_uJ,delay_spent_us,delay_budget_us,correct\n";
    char buf[192];
    for (const SimLogRow& r : log) {
        std::snprintf(buf, sizeof(buf), "%lld,%d,%.10g,%.10g,%.10g,%.10g,%d\n",
                      static_cast<long long>(r.step), r.capacity, r.energy_spent_uJ,
                      r.energy_budget_uJ, r.delay_spent_us, r.delay_budget_us,
                      r.correct ? 1 : 0);
        f << buf;
    }
}

}  // namespace icnn

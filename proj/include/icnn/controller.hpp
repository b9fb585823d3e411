#pragma once

#include "icnn/cost_model.hpp"
#include "icnn/dataset.hpp"

namespace icnn {

/// Feedback-controller state: the capacity (increment index) currently
/// deployed, the budgets seen at the previous tick, and an exponential
/// moving average of measured per-inference cost.
struct ControllerState {
    int capacity = 1;
    double last_energy_budget = 0.0;
    double last_delay_budget = 0.0;
    double sys_energy = 0.0;
    double sys_delay = 0.0;
    bool has_measurement = false;
    bool has_budget = false;
};

/// Folds one measured inference cost into the state's moving average.
void observe_cost(ControllerState& state, double energy_uJ, double time_us, double alpha);

/// One control tick. On a budget decrease (either energy or delay) with the
/// measured cost above budget, capacity drops one level (floor 1); on a
/// budget increase it jumps to max_capacity; with budgets unchanged it drops
/// one level whenever the measured cost exceeds either budget. Returns the
/// new capacity.
int controller_step(ControllerState& state, double energy_budget_uJ, double delay_budget_us,
                    int max_capacity);

struct SimLogRow {
    std::int64_t step = 0;
    int capacity = 0;
    double energy_spent_uJ = 0.0;
    double energy_budget_uJ = 0.0;
    double delay_spent_us = 0.0;
    double delay_budget_us = 0.0;
    bool correct = false;
};
using SimLog = std::vector<SimLogRow>;

/// Deterministic closed-loop run over a labeled input stream: per input,
/// infer at the current capacity, charge its cost, update the moving
/// average, then apply the controller against the budgets at that step.
/// Starts at full capacity.
SimLog simulate(const SlicedNetwork& net, const Dataset& stream, const BudgetTrace& trace,
                const CostModel& cost, double alpha = 1.0);

void sim_log_to_csv_file(const SimLog& log, const std::string& path,
                         const std::string& config_hash = "");

}  // namespace icnn

#pragma once

#include <string>
#include <vector>

#include "icnn/sliced_net.hpp"

namespace icnn {

/// Energy (uJ) and processing time (us) of one forward pass per increment,
/// either taken from a measured table or derived from MAC counts. The
/// optional margin-unit constants model the confidence-check hardware and
/// are charged once per cascade stage evaluated; they default to zero.
struct CostModel {
    std::vector<double> energy_uJ;  // strictly increasing over increments
    std::vector<double> time_us;
    double margin_unit_energy_uJ = 0.0;
    double margin_unit_time_us = 0.0;

    static CostModel from_table(std::vector<double> energy_uJ, std::vector<double> time_us);
    static CostModel mac_derived(const SlicedNetwork& net, double energy_per_mac_uJ,
                                 double time_per_mac_us, double energy_overhead_uJ = 0.0,
                                 double time_overhead_us = 0.0);

    int increments() const { return static_cast<int>(energy_uJ.size()); }
    double energy(int increment) const { return energy_uJ[static_cast<std::size_t>(increment - 1)]; }
    double time(int increment) const { return time_us[static_cast<std::size_t>(increment - 1)]; }

    void validate() const;

    std::string to_json_string() const;
    /// Parses the table form; the mac_derived form needs the network and is
    /// handled where a network is in scope (see parse_cost_model).
    static CostModel from_json_string(const std::string& text);
};

/// Budgets imposed over time; each point takes effect at its step and holds
/// until the next one. A point at step 0 is required.
struct BudgetPoint {
    std::int64_t step = 0;
    double energy_budget_uJ = 0.0;
    double delay_budget_us = 0.0;
};

struct BudgetTrace {
    std::vector<BudgetPoint> points;

    void validate() const;
    BudgetPoint at(std::int64_t step) const;

    static BudgetTrace from_csv_file(const std::string& path);
    void to_csv_file(const std::string& path, const std::string& config_hash = "") const;
};

}  // namespace icnn

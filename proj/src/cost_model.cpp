#include "icnn/cost_model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace icnn {

using nlohmann::json;

CostModel CostModel::from_table(std::vector<double> energy, std::vector<double> time) {
    CostModel m;
    m.energy_uJ = std::move(energy);
    m.time_us = std::move(time);
    m.validate();
    return m;
}

CostModel CostModel::mac_derived(const SlicedNetwork& net, double energy_per_mac_uJ,
                                 double time_per_mac_us, double energy_overhead_uJ,
                                 double time_overhead_us) {
    if (!(energy_per_mac_uJ > 0.0) || !(time_per_mac_us > 0.0)) {
        throw ArgumentError("per-MAC cost must be positive");
    }
    CostModel m;
    for (int i = 1; i <= net.num_increments(); ++i) {
        const double macs = static_cast<double>(net.mac_count(i));
        m.energy_uJ.push_back(energy_per_mac_uJ * macs + energy_overhead_uJ);
        m.time_us.push_back(time_per_mac_us * macs + time_overhead_us);
    }
    m.validate();
    return m;
}

void CostModel::validate() const {
    if (energy_uJ.empty() || energy_uJ.size() != time_us.size()) {
        throw ArgumentError("cost model needs matching energy and time tables");
    }
    for (std::size_t i = 0; i < energy_uJ.size(); ++i) {
        if (!(energy_uJ[i] > 0.0) || !(time_us[i] > 0.0)) {
            throw ArgumentError("cost model entries must be positive");
        }
        if (i > 0 && (energy_uJ[i] <= energy_uJ[i - 1] || time_us[i] <= time_us[i - 1])) {
            throw ArgumentError("cost model must be strictly increasing over increments");
        }
    }
    if (margin_unit_energy_uJ < 0.0 || margin_unit_time_us < 0.0) {
        throw ArgumentError("margin unit overhead must be non-negative");
    }
}

std::string CostModel::to_json_string() const {
    json j;
    j["energy_uJ"] = energy_uJ;
    j["time_us"] = time_us;
    if (margin_unit_energy_uJ != 0.0 || margin_unit_time_us != 0.0) {
        j["margin_unit"] = {{"energy_uJ", margin_unit_energy_uJ}, {"time_us", margin_unit_time_us}};
    }
    return j.dump(2);
}

CostModel CostModel::from_json_string(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError("cost model is not valid JSON", 0);
    CostModel m;
    m.energy_uJ = j.at("energy_uJ").get<std::vector<double>>();
    m.time_us = j.at("time_us").get<std::vector<double>>();
    if (j.contains("margin_unit")) {
        m.margin_unit_energy_uJ = j["margin_unit"].value("energy_uJ", 0.0);
        m.margin_unit_time_us = j["margin_unit"].value("time_us", 0.0);
    }
    m.validate();
    return m;
}

void BudgetTrace::validate() const {
    if (points.empty()) throw ArgumentError("budget trace is empty");
    if (points.front().step != 0) throw ArgumentError("budget trace must start at step 0");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].energy_budget_uJ > 0.0) || !(points[i].delay_budget_us > 0.0)) {
            throw ArgumentError("budgets must be positive");
        }
        if (i > 0 && points[i].step <= points[i - 1].step) {
            throw ArgumentError("budget trace steps must be strictly increasing");
        }
    }
}

BudgetPoint BudgetTrace::at(std::int64_t step) const {
    BudgetPoint cur = points.front();
    for (const BudgetPoint& p : points) {
        if (p.step > step) break;
        cur = p;
    }
    return cur;
}

BudgetTrace BudgetTrace::from_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ArgumentError("cannot open " + path);
    BudgetTrace t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("step", 0) == 0) continue;  // header
        std::istringstream ss(line);
        BudgetPoint p;
        char comma = 0;
        if (!(ss >> p.step >> comma >> p.energy_budget_uJ >> comma >> p.delay_budget_us)) {
            throw FormatError("bad budget trace row at line " + std::to_string(lineno), 0);
        }
        t.points.push_back(p);
    }
    t.validate();
    return t;
}

void BudgetTrace::to_csv_file(const std::string& path, const std::string& config_hash) const {
    std::ofstream f(path);
    if (!f) throw ArgumentError("cannot open " + path + " for writing");
    if (!config_hash.empty()) f << "# config_hash=" << config_hash << "\n";
    f << "step,energy_budget_uJ,delay_budget_us\n";
    char buf[128];
    for (const BudgetPoint& p : points) {
        std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g\n", static_cast<long long>(p.step),
                      p.energy_budget_uJ, p.delay_budget_us);
        f << buf;
    }
}

}  // namespace icnn

#pragma once

#include <string>
#include <vector>

#include "koopstab/analysis.hpp"
#include "koopstab/clf.hpp"
#include "koopstab/control.hpp"
#include "koopstab/koopman.hpp"
#include "koopstab/systems.hpp"

namespace koopstab {

// All text formats print floats with 17 significant digits so that
// save -> load -> save is byte-identical.
std::string fmt17(double v);

void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

void save_model(const BilinearModel& m, const std::string& path);
BilinearModel load_model(const std::string& path);

void save_clf(const QuadraticCLF& clf, const std::string& path);
QuadraticCLF load_clf(const std::string& path);

void save_simulation(const SimulationResult& res, const std::string& path, int ic_index);
void save_simulation_summary(const std::vector<SimulationResult>& runs, const std::string& path);

void save_curve(const ErrorCurve& curve, const std::string& path);

}  // namespace koopstab

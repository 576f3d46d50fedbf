#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eit/mesh.hpp"

namespace eit {

/// Runs the `eit` command line. Returns the process exit code: 0 on success,
/// 2 for usage and input errors, 3 for numerical failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

// Measurement CSV: header `pattern,electrode,voltage`, 1-based indices, rows in
// measurement order (pattern-major).
void write_voltage_csv(const std::filesystem::path& path, const Eigen::VectorXd& voltages,
                       int electrodes);
Eigen::VectorXd read_voltage_csv(const std::filesystem::path& path, int electrodes);

}  // namespace eit

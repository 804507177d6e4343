#pragma once

#include <string>
#include <vector>

#include "cfsl/benchmark.hpp"
#include "cfsl/predictors.hpp"

namespace cfsl {

inline constexpr int kReportFormatVersion = 1;

std::string format_percent(double accuracy);

// Method / accuracy table.
std::string comparison_table(const std::vector<MethodRun>& runs);
// Rows alpha, columns beta.
std::string grid_table(const std::vector<GridCell>& cells);
// p1 / p2 / p3 tick columns plus accuracy.
std::string toggle_text_table(const std::vector<AblationRow>& rows);
// Rows shots, columns methods.
std::string shots_table(const std::vector<ShotsRow>& rows);

} // namespace cfsl

#include "cfsl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

namespace cfsl {

std::string format_percent(double accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * accuracy);
    return buf;
}

namespace {

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace

std::string comparison_table(const std::vector<MethodRun>& runs) {
    std::ostringstream os;
    os << pad("Method", 10) << lpad("Accuracy(%)", 12) << lpad("Correct", 10) << "\n";
    for (const auto& r : runs) {
        os << pad(r.result.method, 10) << lpad(format_percent(r.result.accuracy), 12)
           << lpad(std::to_string(r.result.correct) + "/" + std::to_string(r.result.total), 10)
           << "\n";
    }
    return os.str();
}

std::string grid_table(const std::vector<GridCell>& cells) {
    std::vector<double> alphas, betas;
    std::map<std::pair<double, double>, double> acc;
    for (const auto& c : cells) {
        if (std::find(alphas.begin(), alphas.end(), c.alpha) == alphas.end()) alphas.push_back(c.alpha);
        if (std::find(betas.begin(), betas.end(), c.beta) == betas.end()) betas.push_back(c.beta);
        acc[{c.alpha, c.beta}] = c.result.accuracy;
    }
    std::ostringstream os;
    os << pad("alpha\\beta", 11);
    for (double b : betas) os << lpad(number(b), 8);
    os << "\n";
    for (double a : alphas) {
        os << pad(number(a), 11);
        for (double b : betas) {
            auto it = acc.find({a, b});
            os << lpad(it == acc.end() ? "-" : format_percent(it->second), 8);
        }
        os << "\n";
    }
    return os.str();
}

std::string toggle_text_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << " p1  p2  p3 | Accuracy(%)\n";
    for (const auto& r : rows) {
        auto tick = [](bool on) { return on ? "  x " : "    "; };
        os << tick(r.mask.p1) << tick(r.mask.p2) << tick(r.mask.p3) << "| "
           << lpad(format_percent(r.accuracy), 11) << "\n";
    }
    return os.str();
}

std::string shots_table(const std::vector<ShotsRow>& rows) {
    std::ostringstream os;
    if (rows.empty()) {
        return "";
    }
    os << pad("shots", 7);
    for (const auto& run : rows.front().runs) os << lpad(run.result.method, 9);
    os << "\n";
    for (const auto& row : rows) {
        os << pad(std::to_string(row.shots), 7);
        for (const auto& run : row.runs) os << lpad(format_percent(run.result.accuracy), 9);
        os << "\n";
    }
    return os.str();
}

} // namespace cfsl

#include "orbm/report.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <ostream>

namespace orbm {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void ConditionReport::add(const Vec& point, std::string condition, double margin) {
    samples.push_back({point, std::move(condition), margin});
}

void ConditionReport::finalize() {
    worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) worst_margin = std::min(worst_margin, s.margin);
    if (samples.empty()) {
        pass = false;
        worst_margin = std::numeric_limits<double>::quiet_NaN();
        diagnostics.emplace_back("no samples evaluated: vacuous evidence rejected");
        return;
    }
    pass = !std::isnan(worst_margin) && worst_margin >= -report_tol;
}

void ConditionReport::write_text(std::ostream& os) const {
    os << "condition: " << condition_id << '\n';
    os << "pass: " << (pass ? "true" : "false") << '\n';
    os << "samples: " << samples.size() << '\n';
    os << "worst_margin: " << format_double(worst_margin) << '\n';
    os << "report_tol: " << format_double(report_tol) << '\n';

    std::map<std::string, std::pair<std::size_t, double>> per_condition;
    for (const auto& s : samples) {
        auto [it, inserted] = per_condition.try_emplace(s.condition, 0, s.margin);
        it->second.first += 1;
        it->second.second = std::min(it->second.second, s.margin);
    }
    for (const auto& [name, stats] : per_condition) {
        os << "  " << name << ": n=" << stats.first
           << " worst=" << format_double(stats.second) << '\n';
    }
    for (const auto& [k, v] : metadata) os << "meta." << k << ": " << v << '\n';
    for (const auto& w : warnings) os << "warning: " << w << '\n';
    for (const auto& d : diagnostics) os << "diagnostic: " << d << '\n';
}

void ConditionReport::write_csv(std::ostream& os) const {
    Eigen::Index d = 0;
    for (const auto& s : samples) d = std::max(d, s.point.size());
    os << "sample_id";
    for (Eigen::Index j = 0; j < d; ++j) os << ",x" << (j + 1);
    os << ",condition,margin\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        os << i;
        for (Eigen::Index j = 0; j < d; ++j) {
            os << ',' << (j < s.point.size() ? format_double(s.point[j]) : "");
        }
        os << ',' << s.condition << ',' << format_double(s.margin) << '\n';
    }
}

}  // namespace orbm

#pragma once

#include "orbm/common.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace orbm {

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_double(double v);

/// One sampled check: the point it was taken at, which sub-condition it
/// tested and the signed margin (>= 0 means satisfied).
struct SampleMargin {
    Vec point;
    std::string condition;
    double margin = 0.0;
};

/// Pass/fail evidence for a sampled condition. `pass` holds exactly when
/// there is at least one sample and `worst_margin >= -report_tol`.
struct ConditionReport {
    std::string condition_id;
    std::vector<SampleMargin> samples;
    bool pass = false;
    double worst_margin = 0.0;
    double report_tol = 1e-10;
    std::map<std::string, std::string> metadata;
    std::vector<std::string> warnings;
    std::vector<std::string> diagnostics;

    void add(const Vec& point, std::string condition, double margin);
    /// Recomputes worst_margin and pass from the samples.
    void finalize();

    void write_text(std::ostream& os) const;
    /// Columns: sample_id, x1..xd, condition, margin.
    void write_csv(std::ostream& os) const;
};

}  // namespace orbm

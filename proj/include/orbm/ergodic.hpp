#pragma once

// Finite-state reverse ergodic theorem: for sub-probability kernels
// Q_l : E_l -> E_{l-1} the ratios
//     nu_n^T Q_n ... Q_1 f / nu_n^T Q_n ... Q_1 1
// converge to a limit C(f) that does not depend on the sequence (nu_n),
// provided the survival ratio and the pairwise overlaps stay bounded below.

#include "orbm/common.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace orbm {

class HorizonExceeded : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct KernelSequence {
    /// kernels[l-1] = Q_l, rows indexed by E_l and columns by E_{l-1}.
    std::vector<Mat> kernels;

    KernelSequence() = default;
    explicit KernelSequence(std::vector<Mat> k);

    /// Q repeated n times.
    static KernelSequence constant(const Mat& q, int n);

    int length() const { return static_cast<int>(kernels.size()); }
    /// |E_l|.
    int states(int level) const;

    /// Nonnegative finite entries, row sums <= 1 + 1e-12, some positive row
    /// in every kernel and chain-compatible shapes. Throws InvalidArgument.
    void validate() const;
};

/// sum_y min(Q(x, y), Q(xt, y)).
double overlap(const Mat& q, int x, int xt);

struct AssumptionFloors {
    double c0 = 1e-6;
    double eps = 1e-6;
};

struct Violation {
    enum class Kind { SurvivalRatio, Overlap };
    Kind kind;
    int level = 0;  ///< n for the survival ratio, l for the overlap
    int x = 0;
    int xt = 0;
    double value = 0.0;

    std::string describe() const;
};

struct AssumptionReport {
    double c0 = 1.0;
    double eps0 = 1.0;
    std::vector<double> c0_trace;   ///< inf/sup of Q_n ... Q_1 1 per n
    std::vector<double> eps_trace;  ///< min pairwise overlap of Q_l per l
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
};

AssumptionReport check_assumptions(const KernelSequence& seq, const AssumptionFloors& floors = {});

/// nu[s][n-1] is the law nu_n of sequence s on E_n.
using NuSequence = std::vector<Vec>;

struct LimitOptions {
    double tol = 1e-10;
    int horizon = 500;
    /// Rescale the backward vectors every step; false keeps raw products.
    bool renormalize = true;
    AssumptionFloors floors;
};

struct ErgodicDiagnostics {
    std::vector<double> c0_trace;
    std::vector<double> eps_trace;
    /// ratio_trace[f][s][n-1]
    std::vector<std::vector<std::vector<double>>> ratio_trace;
    bool converged = false;
    /// First n from which the convergence test held through the end.
    std::optional<int> converged_at;
    std::vector<double> c_f;
    int steps = 0;
    AssumptionReport assumptions;

    /// Throws HorizonExceeded, citing any assumption violation, unless converged.
    void require_converged() const;
    void write_text(std::ostream& os) const;
    /// Columns: n,f,nu,value.
    void write_trace_csv(std::ostream& os) const;
};

/// Iterates the backward compositions up to min(horizon, seq.length()).
/// Converged means that at the final step every value for a given f, across
/// all sequences and the current and previous step, lies in an interval of
/// width < tol. Throws MassExtinction when the survival mass vanishes.
ErgodicDiagnostics normalized_limit(const KernelSequence& seq, const std::vector<Vec>& fs,
                                    const std::vector<NuSequence>& nus, const LimitOptions& opts = {});

/// `count` sequences of random probability vectors (flat Dirichlet) sized to
/// match the kernel sequence.
std::vector<NuSequence> random_nu_sequences(const KernelSequence& seq, int count, std::uint64_t seed);

/// The same law at every level.
NuSequence constant_nu(const KernelSequence& seq, const Vec& nu);

}  // namespace orbm

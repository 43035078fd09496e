#include "orbm/ergodic.hpp"

#include "orbm/hitting.hpp"
#include "orbm/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace orbm {

KernelSequence::KernelSequence(std::vector<Mat> k) : kernels(std::move(k)) {
    validate();
}

KernelSequence KernelSequence::constant(const Mat& q, int n) {
    if (n < 1) throw InvalidArgument("KernelSequence::constant: n must be >= 1");
    return KernelSequence(std::vector<Mat>(static_cast<std::size_t>(n), q));
}

int KernelSequence::states(int level) const {
    if (level < 0 || level > length()) throw InvalidArgument("KernelSequence::states: level out of range");
    if (level == 0) return static_cast<int>(kernels.front().cols());
    return static_cast<int>(kernels[level - 1].rows());
}

void KernelSequence::validate() const {
    if (kernels.empty()) throw InvalidArgument("KernelSequence: need at least one kernel");
    for (std::size_t l = 0; l < kernels.size(); ++l) {
        const Mat& q = kernels[l];
        const std::string name = "KernelSequence: Q_" + std::to_string(l + 1);
        if (q.rows() == 0 || q.cols() == 0) throw InvalidArgument(name + " is empty");
        if (!q.allFinite() || (q.array() < 0.0).any()) throw InvalidArgument(name + " has negative or non-finite entries");
        const Vec rows = q.rowwise().sum();
        if (rows.maxCoeff() > 1.0 + 1e-12) throw InvalidArgument(name + " has a row sum above 1");
        if (!(rows.maxCoeff() > 0.0)) throw InvalidArgument(name + " has no positive row mass");
        if (l > 0 && q.cols() != kernels[l - 1].rows()) {
            throw InvalidArgument(name + " does not chain with Q_" + std::to_string(l));
        }
    }
}

double overlap(const Mat& q, int x, int xt) {
    if (x < 0 || xt < 0 || x >= q.rows() || xt >= q.rows()) throw InvalidArgument("overlap: state out of range");
    return q.row(x).cwiseMin(q.row(xt)).sum();
}

std::string Violation::describe() const {
    std::ostringstream os;
    if (kind == Kind::SurvivalRatio) {
        os << "Violation(i): survival ratio inf/sup of Q_" << level << "...Q_1 1 is " << format_double(value)
           << " (argmin " << x << ", argmax " << xt << ")";
    } else {
        os << "Violation(ii): overlap of Q_" << level << " rows " << x << " and " << xt << " is "
           << format_double(value);
    }
    return os.str();
}

AssumptionReport check_assumptions(const KernelSequence& seq, const AssumptionFloors& floors) {
    seq.validate();
    AssumptionReport rep;
    std::optional<Violation> worst_i, worst_ii;

    Vec u = Vec::Ones(seq.states(0));
    for (int n = 1; n <= seq.length(); ++n) {
        u = seq.kernels[n - 1] * u;
        Eigen::Index lo = 0, hi = 0;
        const double mn = u.minCoeff(&lo);
        const double mx = u.maxCoeff(&hi);
        const double ratio = mx > 0.0 ? mn / mx : 0.0;
        rep.c0_trace.push_back(ratio);
        rep.c0 = std::min(rep.c0, ratio);
        if (ratio < floors.c0 && (!worst_i || ratio < worst_i->value)) {
            worst_i = Violation{Violation::Kind::SurvivalRatio, n, static_cast<int>(lo), static_cast<int>(hi), ratio};
        }
        if (!(mx > 0.0)) break;
        u /= mx;
    }

    for (int l = 1; l <= seq.length(); ++l) {
        const Mat& q = seq.kernels[l - 1];
        double best = std::numeric_limits<double>::infinity();
        int bx = 0, bxt = 0;
        // Distinct pairs first so ties report a genuine pair as the witness.
        for (int x = 0; x < q.rows(); ++x) {
            for (int xt = x + 1; xt < q.rows(); ++xt) {
                const double e = overlap(q, x, xt);
                if (e < best) {
                    best = e;
                    bx = x;
                    bxt = xt;
                }
            }
        }
        for (int x = 0; x < q.rows(); ++x) {
            const double e = q.row(x).sum();
            if (e < best) {
                best = e;
                bx = bxt = x;
            }
        }
        rep.eps_trace.push_back(best);
        rep.eps0 = std::min(rep.eps0, best);
        if (best < floors.eps && (!worst_ii || best < worst_ii->value)) {
            worst_ii = Violation{Violation::Kind::Overlap, l, bx, bxt, best};
        }
    }
    if (worst_i) rep.violations.push_back(*worst_i);
    if (worst_ii) rep.violations.push_back(*worst_ii);
    return rep;
}

ErgodicDiagnostics normalized_limit(const KernelSequence& seq, const std::vector<Vec>& fs,
                                    const std::vector<NuSequence>& nus, const LimitOptions& opts) {
    seq.validate();
    if (fs.empty()) throw InvalidArgument("normalized_limit: need at least one test function");
    if (nus.empty()) throw InvalidArgument("normalized_limit: need at least one nu sequence");
    if (opts.horizon < 1) throw InvalidArgument("normalized_limit: horizon must be >= 1");
    if (!(opts.tol > 0.0)) throw InvalidArgument("normalized_limit: tol must be > 0");
    const int steps = std::min(opts.horizon, seq.length());
    const int e0 = seq.states(0);
    for (const Vec& f : fs) {
        if (f.size() != e0) throw InvalidArgument("normalized_limit: f must live on E_0");
    }
    for (const auto& nu : nus) {
        if (static_cast<int>(nu.size()) < steps) throw InvalidArgument("normalized_limit: nu sequence too short");
        for (int n = 1; n <= steps; ++n) {
            if (nu[n - 1].size() != seq.states(n)) throw InvalidArgument("normalized_limit: nu_n must live on E_n");
        }
    }

    ErgodicDiagnostics diag;
    diag.assumptions = check_assumptions(seq, opts.floors);
    diag.c0_trace = diag.assumptions.c0_trace;
    diag.eps_trace = diag.assumptions.eps_trace;
    diag.steps = steps;
    diag.ratio_trace.assign(fs.size(), std::vector<std::vector<double>>(nus.size()));

    std::vector<Vec> v = fs;
    Vec u = Vec::Ones(e0);
    std::optional<int> streak_start;
    bool last_ok = false;
    for (int n = 1; n <= steps; ++n) {
        const Mat& q = seq.kernels[n - 1];
        u = q * u;
        for (auto& vf : v) vf = q * vf;
        if (opts.renormalize) {
            const double scale = u.maxCoeff();
            if (!(scale > 0.0) || !std::isfinite(scale)) throw MassExtinction("normalized_limit: survival mass vanished");
            u /= scale;
            for (auto& vf : v) vf /= scale;
        }
        for (std::size_t s = 0; s < nus.size(); ++s) {
            const Vec& nu = nus[s][n - 1];
            const double den = nu.dot(u);
            if (!(den > 0.0)) {
                throw MassExtinction("normalized_limit: nu_" + std::to_string(n) + " of sequence " +
                                     std::to_string(s) + " sees no surviving mass");
            }
            for (std::size_t f = 0; f < fs.size(); ++f) diag.ratio_trace[f][s].push_back(nu.dot(v[f]) / den);
        }
        bool ok = n >= 2;
        for (std::size_t f = 0; ok && f < fs.size(); ++f) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& trace : diag.ratio_trace[f]) {
                for (int k : {n - 2, n - 1}) {
                    lo = std::min(lo, trace[k]);
                    hi = std::max(hi, trace[k]);
                }
            }
            ok = hi - lo < opts.tol;
        }
        if (ok && !last_ok) streak_start = n;
        if (!ok) streak_start.reset();
        last_ok = ok;
    }
    diag.converged = last_ok;
    diag.converged_at = streak_start;
    for (std::size_t f = 0; f < fs.size(); ++f) {
        double sum = 0.0;
        for (const auto& trace : diag.ratio_trace[f]) sum += trace.back();
        diag.c_f.push_back(sum / static_cast<double>(nus.size()));
    }
    return diag;
}

void ErgodicDiagnostics::require_converged() const {
    if (converged) return;
    std::string msg = "normalized_limit: not converged within " + std::to_string(steps) + " steps";
    for (const auto& v : assumptions.violations) msg += "; " + v.describe();
    throw HorizonExceeded(msg);
}

void ErgodicDiagnostics::write_text(std::ostream& os) const {
    os << "steps: " << steps << '\n';
    os << "converged: " << (converged ? "yes" : "no") << '\n';
    if (converged_at) os << "converged_at: " << *converged_at << '\n';
    os << "c0: " << format_double(assumptions.c0) << '\n';
    os << "eps0: " << format_double(assumptions.eps0) << '\n';
    for (std::size_t f = 0; f < c_f.size(); ++f) os << "C(f" << f << "): " << format_double(c_f[f]) << '\n';
    for (const auto& v : assumptions.violations) os << v.describe() << '\n';
}

void ErgodicDiagnostics::write_trace_csv(std::ostream& os) const {
    os << "n,f,nu,value\n";
    for (std::size_t f = 0; f < ratio_trace.size(); ++f) {
        for (std::size_t s = 0; s < ratio_trace[f].size(); ++s) {
            for (std::size_t n = 0; n < ratio_trace[f][s].size(); ++n) {
                os << n + 1 << ',' << f << ',' << s << ',' << format_double(ratio_trace[f][s][n]) << '\n';
            }
        }
    }
}

std::vector<NuSequence> random_nu_sequences(const KernelSequence& seq, int count, std::uint64_t seed) {
    seq.validate();
    std::vector<NuSequence> out;
    for (int s = 0; s < count; ++s) {
        PathRng rng(seed, static_cast<std::uint64_t>(s));
        NuSequence nu;
        for (int n = 1; n <= seq.length(); ++n) {
            Vec v(seq.states(n));
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.exponential(1.0);
            nu.push_back(v / v.sum());
        }
        out.push_back(std::move(nu));
    }
    return out;
}

NuSequence constant_nu(const KernelSequence& seq, const Vec& nu) {
    seq.validate();
    NuSequence out;
    for (int n = 1; n <= seq.length(); ++n) {
        if (nu.size() != seq.states(n)) throw InvalidArgument("constant_nu: size does not match E_n");
        out.push_back(nu);
    }
    return out;
}

}  // namespace orbm

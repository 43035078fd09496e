#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace orbm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or precondition violations.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Numerical failures (root-finders, reflection, step caps).
class NumericalError : public Error {
public:
    using Error::Error;
};

class OutsideCone : public Error {
public:
    using Error::Error;
};

class NonConvergence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// splitmix64 finalizer; used to derive independent per-path streams.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for stream `index` under `master`: mix64(master) xor'ed with a
/// second mixing round of the index, so neighbouring indices and seeds
/// give unrelated streams.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Per-path random source: a 64-bit Mersenne twister plus a standard
/// normal sampler. Construction is deterministic in (master, index).
class PathRng {
public:
    PathRng(std::uint64_t master, std::uint64_t index)
        : engine_(stream_seed(master, index)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    void fill_normal(Vec& out) {
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace orbm

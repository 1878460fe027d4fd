#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace podnet {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear or dense solve did not reach the requested tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& msg, int iterations, double residual)
        : Error(msg), iterations(iterations), residual(residual) {}
    int iterations = 0;
    double residual = 0.0;
};

/// A coefficient or intermediate value left the representable range.
class NumericalRangeError : public Error {
public:
    using Error::Error;
};

/// Training diverged (loss became non-finite).
class TrainingError : public Error {
public:
    TrainingError(const std::string& msg, int epoch) : Error(msg), epoch(epoch) {}
    int epoch = 0;
};

/// Wraps a failure with the pipeline stage that produced it plus seed context.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& context, const std::string& what)
        : Error("[" + stage + "] " + what + (context.empty() ? "" : " (" + context + ")")),
          stage(stage) {}
    std::string stage;
};

/// SplitMix64 step; used to derive independent sub-seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Diagnostic sink for non-fatal numeric events (clamping etc.).
void warn(const std::string& msg);

/// Suppress/enable warn() output (used by tests that trigger clamping on purpose).
void set_warnings_enabled(bool enabled);

}  // namespace podnet

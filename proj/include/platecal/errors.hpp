#ifndef PLATECAL_ERRORS_HPP
#define PLATECAL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace platecal {

// Configuration / file-schema problems. CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures while synthesizing measurements (beam centering, raster).
class SimulationError : public std::runtime_error {
public:
    explicit SimulationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Identification failures. `code()` is one of:
//   "underdetermined", "singular-system", "diverged", "bound-infeasible"
class SolverError : public std::runtime_error {
public:
    SolverError(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// Filesystem-level failures. CLI maps these to exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace platecal

#endif
